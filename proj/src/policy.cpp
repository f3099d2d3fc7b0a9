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

#include "cmptsim/policy.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace cmptsim::policy {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  auto pos = s.find('#');
  return pos == std::string::npos ? s : s.substr(0, pos);
}

bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  auto head = [](char c) { return std::isalpha((unsigned char)c) || c == '_'; };
  auto tail = [&](char c) { return head(c) || std::isdigit((unsigned char)c); };
  if (!head(s[0])) return false;
  return std::all_of(s.begin() + 1, s.end(), tail);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t parse_number(const std::string& s, std::size_t line,
                           const char* what) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, std::string("bad ") + what + " '" + s + "'");
  }
}

CanCall parse_can_call_item(const std::string& item, std::size_t line) {
  auto paren = item.find('(');
  if (paren == std::string::npos) {
    if (!valid_identifier(item))
      throw ParseError(line, "bad can_call entry '" + item + "'");
    return CanCall{item, std::nullopt};
  }
  std::string name = trim(item.substr(0, paren));
  std::string rest = trim(item.substr(paren));
  if (!valid_identifier(name))
    throw ParseError(line, "bad can_call entry '" + item + "'");
  if (rest.size() < 2 || rest.back() != ')')
    throw ParseError(line, "unterminated target in '" + item + "'");
  std::string inner = trim(rest.substr(1, rest.size() - 2));
  const std::string key = "cmpt_id";
  auto eq = inner.find('=');
  if (eq == std::string::npos || trim(inner.substr(0, eq)) != key)
    throw ParseError(line, "expected (cmpt_id=N) in '" + item + "'");
  std::uint64_t id = parse_number(trim(inner.substr(eq + 1)), line, "cmpt_id");
  return CanCall{name, static_cast<std::uint32_t>(id)};
}

ExecutionContext parse_context(const std::string& value, std::size_t line) {
  auto eq = value.find('=');
  if (eq == std::string::npos || trim(value.substr(0, eq)) != "euid")
    throw ParseError(line, "expected 'euid = ...' in execution_context");
  std::string rhs = trim(value.substr(eq + 1));
  if (rhs == "any") return ExecutionContext::any_ctx();
  if (rhs == "root") return ExecutionContext::exact(0);
  return ExecutionContext::exact(parse_number(rhs, line, "euid"));
}

}  // namespace

void SymbolTable::add(Symbol s) {
  if (s.size == 0) throw Error("symbol '" + s.name + "' has zero size");
  if (by_name_.count(s.name))
    throw Error("duplicate symbol '" + s.name + "'");
  by_name_[s.name] = symbols_.size();
  symbols_.push_back(std::move(s));
}

const Symbol* SymbolTable::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &symbols_[it->second];
}

bool MatrixRow::grants(Addr page, AccessKind k) const {
  auto it = pages.find(page_of(page));
  return it != pages.end() && it->second.allows(k);
}

const MatrixRow* AccessMatrix::row(std::uint32_t id) const {
  auto it = rows.find(id);
  return it == rows.end() ? nullptr : &it->second;
}

std::string to_string(const Diagnostic& d) {
  return std::string(d.severity == Severity::Error ? "error: " : "warning: ") +
         d.message;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Severity::Error;
  });
}

std::vector<CompartmentPolicy> parse_policy(const std::string& text) {
  std::vector<CompartmentPolicy> out;
  std::set<std::uint32_t> seen_ids;
  CompartmentPolicy cur;
  bool in_block = false;
  std::set<std::string> keys_in_block;

  auto flush = [&](std::size_t line) {
    if (!in_block) return;
    if (!keys_in_block.count("cmpt_id"))
      throw ParseError(line, "block without cmpt_id");
    out.push_back(cur);
    cur = CompartmentPolicy{};
    keys_in_block.clear();
    in_block = false;
  };

  std::istringstream is(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) {
      flush(lineno);
      continue;
    }
    auto colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError(lineno, "expected 'key: values' but got '" + line + "'");
    std::string key = trim(line.substr(0, colon));
    std::string value = trim(line.substr(colon + 1));

    if (key == "cmpt_id") {
      flush(lineno);  // a new id starts the next block
      in_block = true;
      std::uint64_t id = parse_number(value, lineno, "cmpt_id");
      cur.cmpt_id = static_cast<std::uint32_t>(id);
      if (!seen_ids.insert(cur.cmpt_id).second)
        throw ParseError(lineno,
                         "duplicate cmpt_id " + std::to_string(cur.cmpt_id));
      keys_in_block.insert(key);
      continue;
    }
    if (!in_block)
      throw ParseError(lineno, "'" + key + "' before any cmpt_id");
    if (!keys_in_block.insert(key).second)
      throw ParseError(lineno, "duplicate key '" + key + "' in block");

    if (key == "can_execute" || key == "can_read" || key == "can_write") {
      auto items = split_list(value);
      for (const auto& n : items)
        if (!valid_identifier(n))
          throw ParseError(lineno, "bad symbol name '" + n + "'");
      if (key == "can_execute") cur.can_execute = items;
      else if (key == "can_read") cur.can_read = items;
      else cur.can_write = items;
    } else if (key == "can_call") {
      // entries may carry parenthesised targets, so split on commas that sit
      // outside parentheses
      std::vector<std::string> items;
      std::string item;
      int depth = 0;
      for (char c : value) {
        if (c == '(') depth++;
        if (c == ')') depth--;
        if (c == ',' && depth == 0) {
          items.push_back(item);
          item.clear();
        } else {
          item += c;
        }
      }
      items.push_back(item);
      for (auto& it : items) {
        it = trim(it);
        if (!it.empty()) cur.can_call.push_back(parse_can_call_item(it, lineno));
      }
    } else if (key == "execution_context") {
      cur.context = parse_context(value, lineno);
    } else {
      throw ParseError(lineno, "unknown key '" + key + "'");
    }
  }
  flush(lineno + 1);

  if (out.empty()) throw ParseError(1, "no compartments defined");
  if (!seen_ids.count(0)) throw ParseError(1, "missing compartment 0");
  return out;
}

std::string print_policy(const std::vector<CompartmentPolicy>& policies) {
  std::ostringstream os;
  bool first = true;
  for (const auto& p : policies) {
    if (!first) os << "\n";
    first = false;
    os << "cmpt_id: " << p.cmpt_id << "\n";
    auto put_list = [&](const char* key, const std::vector<std::string>& v) {
      os << key << ":";
      for (std::size_t i = 0; i < v.size(); ++i)
        os << (i ? ", " : " ") << v[i];
      os << "\n";
    };
    put_list("can_execute", p.can_execute);
    put_list("can_read", p.can_read);
    put_list("can_write", p.can_write);
    os << "can_call:";
    for (std::size_t i = 0; i < p.can_call.size(); ++i) {
      os << (i ? ", " : " ") << p.can_call[i].callee;
      if (p.can_call[i].target)
        os << " (cmpt_id=" << *p.can_call[i].target << ")";
    }
    os << "\n";
    os << "execution_context: euid = ";
    if (p.context.any) os << "any";
    else if (p.context.euid == 0) os << "root";
    else os << p.context.euid;
    os << "\n";
  }
  return os.str();
}

SymbolTable parse_symbols(const std::string& text) {
  SymbolTable table;
  std::istringstream is(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, gva_s, size_s, extra;
    if (!(ls >> name >> gva_s >> size_s) || (ls >> extra))
      throw ParseError(lineno, "expected 'name hex-gva decimal-size'");
    if (!valid_identifier(name))
      throw ParseError(lineno, "bad symbol name '" + name + "'");
    if (gva_s.rfind("0x", 0) != 0 && gva_s.rfind("0X", 0) != 0)
      throw ParseError(lineno, "gva must be hexadecimal: '" + gva_s + "'");
    Symbol s;
    s.name = name;
    s.gva = parse_number(gva_s, lineno, "gva");
    s.size = parse_number(size_s, lineno, "size");
    if (size_s.rfind("0x", 0) == 0)
      throw ParseError(lineno, "size must be decimal: '" + size_s + "'");
    try {
      table.add(std::move(s));
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return table;
}

std::vector<Addr> pages_of_range(Addr gva, std::uint64_t size) {
  std::vector<Addr> pages;
  if (size == 0) return pages;
  Addr first = page_of(gva);
  Addr last = page_of(gva + size - 1);
  for (Addr p = first;; p += kPageSize) {
    pages.push_back(p);
    if (p == last) break;
  }
  return pages;
}

AccessMatrix resolve(const std::vector<CompartmentPolicy>& policies,
                     const SymbolTable& symtab) {
  AccessMatrix matrix;

  auto lookup = [&](const std::string& name) -> const Symbol& {
    const Symbol* s = symtab.find(name);
    if (!s) throw Error("unknown symbol '" + name + "'");
    return *s;
  };

  // The execution context of every non-default compartment must be unique:
  // the context alone identifies the compartment when leaving compartment 0.
  for (const auto& a : policies) {
    if (a.cmpt_id == 0) continue;
    for (const auto& b : policies) {
      if (b.cmpt_id == 0 || b.cmpt_id >= a.cmpt_id) continue;
      if (a.context == b.context)
        throw Error("compartments " + std::to_string(b.cmpt_id) + " and " +
                    std::to_string(a.cmpt_id) +
                    " claim the same execution context");
    }
  }

  for (const auto& p : policies) {
    MatrixRow row;
    row.cmpt_id = p.cmpt_id;
    row.context = p.context;
    auto grant = [&](const std::vector<std::string>& names, Permission perm) {
      for (const auto& name : names) {
        const Symbol& s = lookup(name);
        for (Addr page : pages_of_range(s.gva, s.size)) {
          row.pages[page] = row.pages[page] | perm;
          auto& syms = row.page_symbols[page];
          if (std::find(syms.begin(), syms.end(), name) == syms.end())
            syms.push_back(name);
        }
      }
    };
    grant(p.can_execute, Permission::x());
    grant(p.can_read, Permission::r());
    grant(p.can_write, Permission{false, true, false});
    matrix.rows[p.cmpt_id] = std::move(row);
  }

  auto context_of = [&](std::uint32_t id) -> ExecutionContext {
    for (const auto& p : policies)
      if (p.cmpt_id == id) return p.context;
    throw Error("can_call targets unknown compartment " + std::to_string(id));
  };

  auto executes = [&](const CompartmentPolicy& p, const std::string& name) {
    return std::find(p.can_execute.begin(), p.can_execute.end(), name) !=
           p.can_execute.end();
  };

  for (const auto& p : policies) {
    auto& row = matrix.rows[p.cmpt_id];
    for (const auto& c : p.can_call) {
      const Symbol& callee = lookup(c.callee);
      std::uint32_t target;
      if (c.target) {
        target = *c.target;
        if (target == p.cmpt_id)
          throw Error("compartment " + std::to_string(p.cmpt_id) +
                      " can_call targets itself: '" + c.callee + "'");
        context_of(target);  // must exist
      } else {
        // infer: the unique non-default executor, else compartment 0
        std::vector<std::uint32_t> candidates;
        for (const auto& q : policies)
          if (q.cmpt_id != 0 && q.cmpt_id != p.cmpt_id && executes(q, c.callee))
            candidates.push_back(q.cmpt_id);
        if (candidates.size() > 1)
          throw Error("ambiguous can_call target for '" + c.callee + "'");
        if (candidates.size() == 1) {
          target = candidates[0];
        } else {
          bool c0_executes = false;
          for (const auto& q : policies)
            if (q.cmpt_id == 0 && executes(q, c.callee)) c0_executes = true;
          if (!c0_executes || p.cmpt_id == 0)
            throw Error("cannot resolve can_call target for '" + c.callee +
                        "'");
          target = 0;
        }
      }
      row.calls.push_back(
          ResolvedCall{c.callee, callee.gva, target, context_of(target)});
    }
  }
  return matrix;
}

std::vector<Diagnostic> check_layout(const AccessMatrix& matrix,
                                     const SymbolTable& symtab) {
  (void)symtab;
  std::vector<Diagnostic> diags;

  // page -> (row id, granting symbols)
  std::map<Addr, std::vector<std::pair<std::uint32_t, const std::vector<std::string>*>>>
      by_page;
  for (const auto& [id, row] : matrix.rows)
    for (const auto& [page, syms] : row.page_symbols)
      by_page[page].push_back({id, &syms});

  for (const auto& [page, holders] : by_page) {
    if (holders.size() < 2) continue;
    // gather the union of symbols and whether any symbol is exclusive to a
    // single row on this page
    std::map<std::string, std::set<std::uint32_t>> sym_rows;
    for (const auto& [id, syms] : holders)
      for (const auto& s : *syms) sym_rows[s].insert(id);

    bool distinct = sym_rows.size() > 1;
    bool shared = false;
    for (const auto& [sym, rows] : sym_rows)
      if (rows.size() > 1) shared = true;

    std::ostringstream who;
    for (const auto& [sym, rows] : sym_rows) {
      who << " " << sym << "(";
      bool first = true;
      for (auto id : rows) {
        who << (first ? "" : ",") << "cmpt " << id;
        first = false;
      }
      who << ")";
    }

    if (distinct) {
      diags.push_back(
          {Severity::Error,
           "page " + hex(page) +
               " co-locates objects of different compartments:" + who.str()});
    } else if (shared) {
      diags.push_back({Severity::Warn, "page " + hex(page) +
                                           " is deliberately shared:" +
                                           who.str()});
    }
  }
  return diags;
}

}  // namespace cmptsim::policy
