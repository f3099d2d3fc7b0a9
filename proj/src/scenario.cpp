// Copyright 2026 The cmptsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cmptsim/scenario.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "cmptsim/gate.hpp"

namespace cmptsim::scenario {

namespace {

std::vector<std::string> tokens_of(const std::string& raw) {
  std::string line = raw;
  auto hash = line.find('#');
  if (hash != std::string::npos) line = line.substr(0, hash);
  std::istringstream is(line);
  std::vector<std::string> toks;
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

std::uint64_t number(const std::string& s, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, std::string("bad ") + what + " '" + s + "'");
  }
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) return s.size() > 2;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isdigit((unsigned char)c); });
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  std::istringstream is(text);
  std::string raw;
  std::size_t lineno = 0;
  ProgramDecl* open_program = nullptr;
  // program bodies keep growing while instructions are appended, so operand
  // slots are patched by (program index, instruction index) afterwards
  struct BodyRef {
    std::size_t program;
    std::size_t instr;
    std::string label;
    std::size_t line;
  };
  std::vector<BodyRef> body_refs;

  auto instr_operand = [&](const std::string& tok, std::size_t line) -> Addr {
    if (is_number(tok)) return number(tok, line, "address");
    body_refs.push_back({s.programs.size() - 1,
                         s.programs.back().body.size(), tok, line});
    return 0;
  };

  while (std::getline(is, raw)) {
    ++lineno;
    auto toks = tokens_of(raw);
    if (toks.empty()) continue;
    const std::string& kw = toks[0];

    if (open_program) {
      auto& body = open_program->body;
      if (kw == "end") {
        if (toks.size() != 1) throw ParseError(lineno, "end takes no operands");
        open_program = nullptr;
      } else if (kw == "call") {
        if (toks.size() != 2) throw ParseError(lineno, "call <target>");
        Addr t = instr_operand(toks[1], lineno);
        body.push_back(CallInstr{t});
      } else if (kw == "ret") {
        body.push_back(RetInstr{});
      } else if (kw == "read") {
        if (toks.size() != 2) throw ParseError(lineno, "read <address>");
        Addr t = instr_operand(toks[1], lineno);
        body.push_back(ReadInstr{t});
      } else if (kw == "write") {
        if (toks.size() != 3) throw ParseError(lineno, "write <address> <value>");
        Addr t = instr_operand(toks[1], lineno);
        body.push_back(WriteInstr{t, number(toks[2], lineno, "value")});
      } else if (kw == "vmfunc") {
        if (toks.size() != 2) throw ParseError(lineno, "vmfunc <index>");
        body.push_back(VmfuncInstr{
            static_cast<std::uint32_t>(number(toks[1], lineno, "index"))});
      } else if (kw == "vmcall") {
        body.push_back(VmcallInstr{});
      } else if (kw == "iretq") {
        body.push_back(IretqInstr{});
      } else if (kw == "nop") {
        body.push_back(NopInstr{});
      } else if (kw == "setuid") {
        if (toks.size() != 2) throw ParseError(lineno, "setuid <euid>");
        body.push_back(SetEuidInstr{number(toks[1], lineno, "euid")});
      } else if (kw == "handlerbody") {
        if (toks.size() != 2) throw ParseError(lineno, "handlerbody <tag>");
        body.push_back(HandlerBodyInstr{toks[1]});
      } else if (kw == "halt") {
        body.push_back(HaltInstr{});
      } else {
        throw ParseError(lineno, "unknown instruction '" + kw + "'");
      }
      continue;
    }

    if (kw == "object") {
      if (toks.size() < 4)
        throw ParseError(lineno, "object <name> <gva> <size> [= words...]");
      ObjectDecl o;
      o.name = toks[1];
      o.gva = number(toks[2], lineno, "gva");
      o.size = number(toks[3], lineno, "size");
      if (toks.size() > 4) {
        if (toks[4] != "=")
          throw ParseError(lineno, "expected '=' before initial words");
        for (std::size_t i = 5; i < toks.size(); ++i)
          o.init_words.push_back(number(toks[i], lineno, "word"));
        if (o.init_words.size() * kWordSize > o.size)
          throw ParseError(lineno, "initial words exceed object size");
      }
      s.objects.push_back(std::move(o));
    } else if (kw == "program") {
      if (toks.size() != 3) throw ParseError(lineno, "program <name> <gva>");
      ProgramDecl p;
      p.name = toks[1];
      p.gva = number(toks[2], lineno, "gva");
      if (!page_aligned(p.gva))
        throw ParseError(lineno, "program start must be page aligned");
      s.programs.push_back(std::move(p));
      open_program = &s.programs.back();
    } else if (kw == "entry") {
      if (toks.size() != 2) throw ParseError(lineno, "entry <label>");
      s.entry = toks[1];
    } else if (kw == "handler") {
      if (toks.size() != 3) throw ParseError(lineno, "handler <vector> <label>");
      s.handlers.push_back(
          {static_cast<std::uint32_t>(number(toks[1], lineno, "vector")),
           toks[2]});
    } else if (kw == "inject") {
      // inject after <step> vector <vector> [errcode [<value>]]
      if (toks.size() < 5 || toks[1] != "after" || toks[3] != "vector")
        throw ParseError(lineno,
                         "inject after <step> vector <n> [errcode [value]]");
      Injection inj;
      inj.when = AfterStep{number(toks[2], lineno, "step")};
      inj.vector = static_cast<std::uint32_t>(number(toks[4], lineno, "vector"));
      if (toks.size() >= 6) {
        if (toks[5] != "errcode")
          throw ParseError(lineno, "expected 'errcode'");
        inj.has_error_code = true;
        if (toks.size() == 7)
          inj.error_code = number(toks[6], lineno, "error code");
        else if (toks.size() > 7)
          throw ParseError(lineno, "trailing tokens after errcode");
      }
      s.injections.push_back(inj);
    } else if (kw == "interrupts") {
      if (toks.size() != 3 || (toks[2] != "on" && toks[2] != "off"))
        throw ParseError(lineno, "interrupts <cmpt> on|off");
      s.irq_flags.push_back(
          {static_cast<std::uint32_t>(number(toks[1], lineno, "cmpt")),
           toks[2] == "on"});
    } else if (kw == "euid") {
      if (toks.size() != 2) throw ParseError(lineno, "euid <n>");
      s.initial_euid = number(toks[1], lineno, "euid");
    } else if (kw == "fuel") {
      if (toks.size() != 2) throw ParseError(lineno, "fuel <n>");
      s.fuel = number(toks[1], lineno, "fuel");
    } else {
      throw ParseError(lineno, "unknown directive '" + kw + "'");
    }
  }
  if (open_program) throw ParseError(lineno, "unterminated program block");
  if (s.entry.empty()) throw ParseError(lineno, "missing entry directive");

  // resolve label operands
  std::map<std::string, Addr> labels;
  for (const auto& o : s.objects)
    if (!labels.emplace(o.name, o.gva).second)
      throw Error("duplicate scenario label '" + o.name + "'");
  for (const auto& p : s.programs)
    if (!labels.emplace(p.name, p.gva).second)
      throw Error("duplicate scenario label '" + p.name + "'");
  for (const auto& ref : body_refs) {
    auto it = labels.find(ref.label);
    if (it == labels.end())
      throw ParseError(ref.line, "unknown label '" + ref.label + "'");
    Instruction& instr = s.programs[ref.program].body[ref.instr];
    if (auto* c = std::get_if<CallInstr>(&instr)) c->target = it->second;
    else if (auto* r = std::get_if<ReadInstr>(&instr)) r->gva = it->second;
    else if (auto* w = std::get_if<WriteInstr>(&instr)) w->gva = it->second;
  }
  return s;
}

Instantiated instantiate(const Scenario& s, const policy::AccessMatrix& matrix,
                         const policy::SymbolTable& symtab, bool hlat_enabled) {
  gate::InitOptions opts;
  auto check_against_symtab = [&](const std::string& name, Addr gva,
                                  std::uint64_t size) {
    const policy::Symbol* sym = symtab.find(name);
    if (!sym) {
      for (Addr p : policy::pages_of_range(gva, size))
        opts.extra_default_pages.push_back(p);
      return;
    }
    if (sym->gva != gva)
      throw Error("scenario '" + name + "' at " + hex(gva) +
                  " disagrees with symbol map address " + hex(sym->gva));
    if (size > sym->size)
      throw Error("scenario '" + name + "' does not fit its symbol size");
  };
  for (const auto& o : s.objects)
    check_against_symtab(o.name, o.gva, o.size);
  for (const auto& p : s.programs)
    check_against_symtab(p.name, p.gva, p.body.size() * kWordSize);

  Instantiated out;
  Machine& m = out.machine;
  gate::init_compartments(m, matrix, symtab, opts);
  gate::install_interrupt_sentries(m);
  m.hlat.enabled = hlat_enabled;

  std::map<std::string, Addr> program_at;
  for (const auto& p : s.programs) program_at[p.name] = p.gva;
  for (const auto& [vector, label] : s.handlers) {
    auto it = program_at.find(label);
    if (it == program_at.end())
      throw Error("handler label '" + label + "' is not a program");
    gate::bind_interrupt_handler(m, vector, it->second);
  }
  for (const auto& f : s.irq_flags) {
    if (f.cmpt >= m.compartment_count())
      throw Error("interrupts directive for unknown compartment " +
                  std::to_string(f.cmpt));
    m.irq_enabled[f.cmpt] = f.enabled ? 1 : 0;
  }

  for (const auto& o : s.objects)
    for (std::size_t i = 0; i < o.init_words.size(); ++i)
      host_write_word(m, o.gva + i * kWordSize, o.init_words[i]);
  for (const auto& p : s.programs) load_program(m, p.gva, p.body);

  auto entry = program_at.find(s.entry);
  if (entry == program_at.end())
    throw Error("entry '" + s.entry + "' is not a program");
  out.cpu.rip = entry->second;
  out.cpu.rsp = m.layout.stack_top(0);
  out.cpu.euid = s.initial_euid;
  out.ctl.fuel = s.fuel;
  out.ctl.injections = s.injections;
  return out;
}

}  // namespace cmptsim::scenario
