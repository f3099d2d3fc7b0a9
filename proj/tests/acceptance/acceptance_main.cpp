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

// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line; the
// binary runs the criteria named on the command line, or all of them.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmptsim/attack.hpp"
#include "cmptsim/cost.hpp"
#include "cmptsim/cpu.hpp"
#include "cmptsim/gate.hpp"
#include "cmptsim/machine.hpp"
#include "cmptsim/policy.hpp"
#include "cmptsim/session.hpp"

using namespace cmptsim;

#define REQUIRE_THAT(cond, ...)                               \
  do {                                                        \
    if (!(cond)) {                                            \
      std::printf("       failed: %s\n", #cond);              \
      std::printf("       " __VA_ARGS__);                     \
      std::printf("\n");                                      \
      return false;                                           \
    }                                                         \
  } while (0)

namespace {

std::string data_dir() {
  const char* p = std::getenv("CMPTSIM_DATA");
  return p ? p : "data";
}

// ---------------------------------------------------------------------------
// 1. Crossing counts of the driver data path, baseline and refined.

bool criterion_1() {
  using namespace cost;
  CostTable table;

  auto base = crossing_table({});
  REQUIRE_THAT(base.isr == 6 && base.tx_submission == 6 && base.tx_cleanup == 4,
               "baseline table");
  REQUIRE_THAT(base.rx_small == 10 && base.rx_large == 14, "baseline rx rows");
  REQUIRE_THAT(base.poll_min == 2 && base.poll_max == 4, "poll range");

  DataPathConfig rcfg;
  rcfg.refined = true;
  auto refined = crossing_table(rcfg);
  REQUIRE_THAT(refined.isr == 0 && refined.tx_submission == 2, "refined table");
  REQUIRE_THAT(refined.tx_cleanup == 2.0 / 128 && refined.tx_cleanup == 0.015625,
               "cleanup fraction exact");
  REQUIRE_THAT(refined.tx_cleanup_rounded == 0.02,
               "cleanup headline figure flagged as rounded");
  REQUIRE_THAT(refined.rx_small == 4.0 / 64 && refined.rx_small == 0.0625,
               "rx steady-state fraction exact");
  REQUIRE_THAT(refined.rx_large == refined.rx_small, "no size split refined");
  REQUIRE_THAT(refined.rx_rounded == 0.06,
               "rx headline figure flagged as rounded");
  REQUIRE_THAT(refined.poll_min == 2 && refined.poll_max == 4, "poll range");

  // the simulated machine reproduces every figure
  auto run_one = [&](bool refined_cfg, Direction dir, unsigned packets,
                     unsigned payload) {
    DataPathConfig cfg;
    cfg.refined = refined_cfg;
    WorkloadSpec w;
    w.direction = dir;
    w.packets = packets;
    w.payload_bytes = payload;
    w.polls = 1;
    return simulate_datapath(cfg, w, table);
  };

  auto btx = run_one(false, Direction::Tx, 1, 1472);
  REQUIRE_THAT(btx.consistent, "baseline tx consistency");
  REQUIRE_THAT(btx.isr_per_interrupt == 6, "isr per interrupt");
  REQUIRE_THAT(btx.tx_submission_per_packet == 6, "tx submission per packet");
  REQUIRE_THAT(btx.tx_cleanup_per_packet == 4, "tx cleanup per packet");
  REQUIRE_THAT(btx.poll_entry_per_poll == 2, "poll entry per poll");

  auto brx_small = run_one(false, Direction::Rx, 1, 64);
  REQUIRE_THAT(brx_small.rx_per_packet_total == 10, "rx small per packet");
  auto brx_large = run_one(false, Direction::Rx, 1, 1472);
  REQUIRE_THAT(brx_large.rx_per_packet_total == 14, "rx large per packet");

  auto rtx = run_one(true, Direction::Tx, 128, 1472);
  REQUIRE_THAT(rtx.isr_per_interrupt == 0, "refined isr");
  REQUIRE_THAT(rtx.tx_submission_per_packet == 2, "refined tx submission");
  REQUIRE_THAT(rtx.tx_cleanup_per_packet == 2.0 / 128, "refined tx cleanup");

  auto rrx = run_one(true, Direction::Rx, 64, 64);
  REQUIRE_THAT(rrx.rx_per_packet_total == 0.0625,
               "refined rx steady state 4/64");
  auto rrx_large = run_one(true, Direction::Rx, 64, 1472);
  REQUIRE_THAT(rrx_large.rx_per_packet_total == 0.0625,
               "refined rx independent of payload size");
  return true;
}

// ---------------------------------------------------------------------------
// 2. Cycle anchors of the cost table.

bool criterion_2() {
  cost::CostTable table;
  REQUIRE_THAT(cost::estimate_cycles(6, table) == 10776,
               "six crossings cost 10776 cycles");
  REQUIRE_THAT(cost::estimate_cycles(2, table) == 3592,
               "one round trip costs 3592 cycles");
  return true;
}

// ---------------------------------------------------------------------------
// 3. Round-trip preservation over randomized allowed call chains.

bool criterion_3() {
  const char* policy = R"(
cmpt_id: 0
can_execute: kmain, k0
can_call: f1 (cmpt_id=1), f2 (cmpt_id=2), f3 (cmpt_id=3)
execution_context: euid = any

cmpt_id: 1
can_execute: f1
can_read: o1
can_call: f2 (cmpt_id=2), f3 (cmpt_id=3), k0 (cmpt_id=0)
execution_context: euid = 101

cmpt_id: 2
can_execute: f2
can_read: o2
can_call: f1 (cmpt_id=1), f3 (cmpt_id=3), k0 (cmpt_id=0)
execution_context: euid = 102

cmpt_id: 3
can_execute: f3
can_read: o3
can_call: f1 (cmpt_id=1), f2 (cmpt_id=2), k0 (cmpt_id=0)
execution_context: euid = 103
)";
  policy::SymbolTable symtab;
  symtab.add({"kmain", 0x1000, 4096});
  symtab.add({"k0", 0x2000, 4096});
  symtab.add({"f1", 0x11000, 4096});
  symtab.add({"f2", 0x21000, 4096});
  symtab.add({"f3", 0x31000, 4096});
  symtab.add({"o1", 0x12000, 8});
  symtab.add({"o2", 0x22000, 8});
  symtab.add({"o3", 0x32000, 8});
  auto policies = policy::parse_policy(policy);
  auto matrix = policy::resolve(policies, symtab);

  auto entry_of = [](int c) -> Addr {
    return c == 0 ? 0x2000 : 0x11000 + Addr(c - 1) * 0x10000;
  };
  auto obj_of = [](int c) -> Addr { return 0x12000 + Addr(c - 1) * 0x10000; };

  std::mt19937_64 rng(2026);
  for (int iter = 0; iter < 1000; ++iter) {
    Machine m;
    gate::init_compartments(m, matrix, symtab);
    gate::install_interrupt_sentries(m);
    host_write_word(m, 0x12000, 1001);
    host_write_word(m, 0x22000, 2002);
    host_write_word(m, 0x32000, 3003);

    int depth = 1 + int(rng() % 8);
    std::vector<int> chain;
    int cur = 0;
    for (int d = 0; d < depth; ++d) {
      int next;
      if (d == depth - 1 && cur != 0 && rng() % 4 == 0) {
        next = 0;  // the kernel as a leaf service
      } else {
        do {
          next = 1 + int(rng() % 3);
        } while (next == cur);
      }
      chain.push_back(next);
      cur = next;
    }

    load_program(m, 0x1000,
                 std::vector<Instruction>{CallInstr{entry_of(chain[0])},
                                          HaltInstr{}});
    // later hops overwrite earlier bodies for revisited compartments; the
    // executed chain stays legal either way
    std::map<int, std::vector<Instruction>> bodies;
    for (int d = 0; d < depth; ++d) {
      std::vector<Instruction> body;
      if (d + 1 < depth) body.push_back(CallInstr{entry_of(chain[d + 1])});
      if (chain[d] != 0) body.push_back(ReadInstr{obj_of(chain[d])});
      body.push_back(RetInstr{});
      bodies[chain[d]] = body;
    }
    for (const auto& [c, body] : bodies) load_program(m, entry_of(c), body);

    CpuState cpu;
    cpu.rip = 0x1000;
    cpu.rsp = m.layout.stack_top(0);
    cpu.euid = 100 + chain[0];
    for (auto& r : cpu.arg_regs) r = rng();
    for (auto& r : cpu.callee_saved) r = rng();
    cpu.rax = rng();
    auto args = cpu.arg_regs;
    auto saved = cpu.callee_saved;

    // live pointer-stack state: each compartment's depth and live slots
    auto rw_live = [&]() {
      std::vector<std::uint64_t> v;
      for (std::uint32_t c = 0; c < 4; ++c) {
        std::uint64_t d = host_read_word(m, m.layout.rw_depth_cell(c));
        v.push_back(d);
        for (std::uint64_t i = 0; i < d && i < kRwDepth; ++i)
          v.push_back(host_read_word(m, m.layout.rw_slot(c, i)));
      }
      return v;
    };
    auto rw_before = rw_live();

    auto result = run(m, cpu, {100000, {}});
    REQUIRE_THAT(result.reason == StopReason::Halted, "iteration %d", iter);
    REQUIRE_THAT(cpu.halt_reason == "halt instruction", "iteration %d", iter);
    REQUIRE_THAT(m.counters.violations == 0, "iteration %d", iter);
    REQUIRE_THAT(cpu.rsp == m.layout.stack_top(0), "rsp restored (%d)", iter);
    REQUIRE_THAT(cpu.arg_regs == args, "argument registers (%d)", iter);
    REQUIRE_THAT(cpu.callee_saved == saved, "callee-saved registers (%d)",
                 iter);
    std::uint64_t expect = std::uint64_t(chain[0]) * 1000 + chain[0];
    REQUIRE_THAT(cpu.rax == expect, "return value (%d)", iter);

    REQUIRE_THAT(rw_before == rw_live(), "pointer region restored (%d)", iter);
  }
  return true;
}

// ---------------------------------------------------------------------------
// 4. Policy soundness under randomized programs and policies.

struct FuzzWorld {
  Machine machine;
  std::vector<Addr> code_pages;   // per compartment
  std::vector<Addr> data_pages;   // per compartment
  std::vector<Addr> all_pages;
  unsigned compartments = 0;
};

FuzzWorld fuzz_world(std::mt19937_64& rng) {
  unsigned n = 2 + rng() % 3;  // 2..4 compartments
  FuzzWorld w;
  w.compartments = n;
  policy::SymbolTable symtab;
  std::vector<policy::CompartmentPolicy> policies(n);
  for (unsigned c = 0; c < n; ++c) {
    Addr code = 0x10000 + c * 0x10000;
    Addr data = code + 0x1000;
    w.code_pages.push_back(code);
    w.data_pages.push_back(data);
    w.all_pages.push_back(code);
    w.all_pages.push_back(data);
    symtab.add({"code" + std::to_string(c), code, 4096});
    symtab.add({"data" + std::to_string(c), data, 4096});
    policies[c].cmpt_id = c;
    policies[c].context = c == 0 ? policy::ExecutionContext::any_ctx()
                                 : policy::ExecutionContext::exact(100 + c);
    policies[c].can_execute = {"code" + std::to_string(c)};
    policies[c].can_read = {"data" + std::to_string(c)};
    policies[c].can_write = {"data" + std::to_string(c)};
  }
  // random sharing and random transition entries
  for (unsigned c = 0; c < n; ++c) {
    for (unsigned o = 0; o < n; ++o) {
      if (o == c) continue;
      if (rng() % 4 == 0)
        policies[c].can_read.push_back("data" + std::to_string(o));
      if (rng() % 3 == 0)
        policies[c].can_call.push_back({"code" + std::to_string(o), o});
    }
  }
  auto matrix = policy::resolve(policies, symtab);
  gate::init_compartments(w.machine, matrix, symtab);
  gate::install_interrupt_sentries(w.machine);
  return w;
}

std::vector<Instruction> fuzz_program(const FuzzWorld& w,
                                      std::mt19937_64& rng) {
  std::vector<Instruction> body;
  unsigned len = 2 + rng() % 12;
  auto any_addr = [&]() -> Addr {
    switch (rng() % 6) {
      case 0: return w.data_pages[rng() % w.data_pages.size()] + 8 * (rng() % 16);
      case 1: return w.code_pages[rng() % w.code_pages.size()] + 8 * (rng() % 4);
      case 2: return w.machine.layout.rw_region_gva + 8 * (rng() % 32);
      case 3: return w.machine.layout.int_stack_gva + 8 * (rng() % 16);
      case 4: return w.machine.layout.ro_row_gva + 8 * (rng() % 8);
      default: return 0x400000 + 0x1000 * (rng() % 8);  // undeclared space
    }
  };
  for (unsigned i = 0; i < len; ++i) {
    switch (rng() % 8) {
      case 0: body.push_back(NopInstr{}); break;
      case 1: body.push_back(ReadInstr{any_addr()}); break;
      case 2: body.push_back(WriteInstr{any_addr(), rng()}); break;
      case 3:
        body.push_back(CallInstr{w.code_pages[rng() % w.code_pages.size()]});
        break;
      case 4:
        body.push_back(VmfuncInstr{static_cast<std::uint32_t>(rng() % 6)});
        break;
      case 5: body.push_back(RetInstr{}); break;
      case 6:
        if (rng() % 2) body.push_back(VmcallInstr{});
        else body.push_back(NopInstr{});
        break;
      default: body.push_back(ReadInstr{any_addr()}); break;
    }
  }
  body.push_back(rng() % 2 ? Instruction{HaltInstr{}} : Instruction{RetInstr{}});
  return body;
}

bool criterion_4() {
  std::mt19937_64 rng(41);
  const int kPolicies = 500;
  const int kProgramsPerPolicy = 20;
  std::uint64_t runs = 0;

  for (int pi = 0; pi < kPolicies; ++pi) {
    FuzzWorld proto = fuzz_world(rng);
    const auto& matrix = proto.machine.matrix;
    const GateLayout lay = proto.machine.layout;
    unsigned n = proto.compartments;

    // independent allowed-access oracle, recomputed from the matrix
    std::set<Addr> owned;
    for (unsigned c = 1; c < n; ++c)
      for (const auto& [p, perms] : matrix.row(c)->pages) owned.insert(p);
    std::set<Addr> declared(proto.all_pages.begin(), proto.all_pages.end());
    std::set<Addr> rw_pages;
    for (std::uint64_t p = 0; p < kRwRegionPages; ++p)
      rw_pages.insert(lay.rw_region_gva + p * kPageSize);

    auto allowed = [&](std::uint32_t c, Addr page, AccessKind kind) {
      if (rw_pages.count(page) || page == lay.int_stack_gva ||
          page == lay.stack_page(c))
        return kind != AccessKind::Execute;
      if (page == lay.ro_row_gva || page == lay.idt_gva)
        return kind == AccessKind::Read;
      if (page == lay.ve_entry || page == lay.int_entry)
        return kind == AccessKind::Execute;
      if (c == 0) {
        if (!declared.count(page)) return false;
        if (!owned.count(page)) return true;  // default maps the rest RWX
        auto it = matrix.row(0)->pages.find(page);
        return it != matrix.row(0)->pages.end() && it->second.allows(kind);
      }
      auto it = matrix.row(c)->pages.find(page);
      return it != matrix.row(c)->pages.end() && it->second.allows(kind);
    };

    for (int ri = 0; ri < kProgramsPerPolicy; ++ri) {
      FuzzWorld w = proto;  // fresh copy: memory, tables and counters reset

      for (unsigned c = 0; c < n; ++c)
        load_program(w.machine, w.code_pages[c], fuzz_program(w, rng));

      CpuState cpu;
      cpu.rip = w.code_pages[0];
      cpu.rsp = lay.stack_top(0);
      cpu.euid = rng() % 2 ? 100 + rng() % n : rng() % 4;
      runs++;
      run(w.machine, cpu, {300, {}});

      for (const auto& ev : w.machine.trace) {
        if (const auto* r = ev.as<RetiredEvent>()) {
          REQUIRE_THAT(allowed(ev.ept, page_of(ev.rip), AccessKind::Execute),
                       "retired fetch outside grants (policy %d run %d)", pi,
                       ri);
          if (const auto* rd = std::get_if<ReadInstr>(&r->instr)) {
            REQUIRE_THAT(allowed(ev.ept, page_of(rd->gva), AccessKind::Read),
                         "retired read outside grants (policy %d run %d)", pi,
                         ri);
          } else if (const auto* wr = std::get_if<WriteInstr>(&r->instr)) {
            REQUIRE_THAT(allowed(ev.ept, page_of(wr->gva), AccessKind::Write),
                         "retired write outside grants (policy %d run %d, "
                         "gva=%llx ept=%u rip=%llx)",
                         pi, ri, (unsigned long long)wr->gva, ev.ept,
                         (unsigned long long)ev.rip);
          }
        } else if (const auto* sw = ev.as<SwitchEvent>()) {
          if (sw->kind != SwitchKind::Call) continue;
          const auto* row = matrix.row(sw->from);
          bool matched = false;
          for (const auto& call : row->calls)
            if (call.entry_gva == sw->target && call.target == sw->to &&
                (sw->from != 0 || call.context.matches(ev.euid)))
              matched = true;
          REQUIRE_THAT(matched,
                       "call crossing without a matching transition entry "
                       "(policy %d run %d)",
                       pi, ri);
        }
      }
    }
  }
  std::printf("       %llu randomized runs, zero grant escapes\n",
              (unsigned long long)runs);
  return true;
}

// ---------------------------------------------------------------------------
// 5. The remapping dichotomy.

bool criterion_5() {
  auto off = attack::run_attack("remap-hlat-off");
  auto on = attack::run_attack("remap-hlat-on");
  REQUIRE_THAT(!off.blocked, "unpinned translation lets the store land");
  REQUIRE_THAT(off.as_expected(), "off outcome encoded");
  REQUIRE_THAT(on.blocked, "pinned translation blocks the store");
  REQUIRE_THAT(on.as_expected(), "on outcome encoded");
  return true;
}

// ---------------------------------------------------------------------------
// 6. Inserted switches fault before any memory effect, exhaustively.

bool criterion_6() {
  const char* policy = R"(
cmpt_id: 0
can_execute: code0
can_read: data0
can_write: data0
execution_context: euid = any

cmpt_id: 1
can_execute: code1
can_read: data1
can_write: data1
execution_context: euid = 101

cmpt_id: 2
can_execute: code2
can_read: data2
can_write: data2
execution_context: euid = 102

cmpt_id: 3
can_execute: code3
can_read: data3
can_write: data3
execution_context: euid = 103
)";
  policy::SymbolTable symtab;
  for (unsigned c = 0; c < 4; ++c) {
    symtab.add({"code" + std::to_string(c), 0x10000 + c * 0x10000, 4096});
    symtab.add({"data" + std::to_string(c), 0x11000 + c * 0x10000, 4096});
  }
  auto matrix = policy::resolve(policy::parse_policy(policy), symtab);

  for (std::uint32_t source = 0; source < 4; ++source) {
    for (std::uint32_t target = 0; target < 4; ++target) {
      if (source == target) continue;
      Machine m;
      gate::init_compartments(m, matrix, symtab);
      gate::install_interrupt_sentries(m);
      Addr code = 0x10000 + source * 0x10000;
      Addr data = 0x11000 + source * 0x10000;
      load_program(m, code,
                   std::vector<Instruction>{VmfuncInstr{target},
                                            WriteInstr{data, 0xEE},
                                            HaltInstr{}});
      CpuState cpu;
      cpu.rip = code;
      cpu.rsp = m.layout.stack_top(source);
      cpu.current_ept = source;
      cpu.euid = source == 0 ? 0 : 100 + source;
      run(m, cpu, {64, {}});

      // the switch happened, then the very next fetch faulted
      REQUIRE_THAT(m.counters.ve_delivered == 1,
                   "fetch fault after switch (%u -> %u)", source, target);
      bool write_retired = false;
      bool ve_after_switch = false;
      bool switched = false;
      for (const auto& ev : m.trace) {
        if (ev.as<SwitchEvent>()) switched = true;
        if (const auto* ve = ev.as<VeEvent>()) {
          REQUIRE_THAT(switched, "fault follows the switch (%u -> %u)",
                       source, target);
          REQUIRE_THAT(ve->info.qualification == AccessKind::Execute,
                       "qualification is a fetch (%u -> %u)", source, target);
          REQUIRE_THAT(ve->info.eptp_index == target,
                       "fault seen in the target context (%u -> %u)", source,
                       target);
          ve_after_switch = true;
        }
        if (const auto* r = ev.as<RetiredEvent>())
          if (std::holds_alternative<WriteInstr>(r->instr))
            write_retired = true;
      }
      REQUIRE_THAT(ve_after_switch, "delivered fault (%u -> %u)", source,
                   target);
      REQUIRE_THAT(!write_retired, "no memory effect (%u -> %u)", source,
                   target);
      REQUIRE_THAT(host_read_word(m, data) == 0,
                   "memory untouched (%u -> %u)", source, target);
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// 7. Interrupt transparency at every step of a fixed 50-step program.

struct TransparencyWorld {
  Machine machine;
  CpuState cpu;
};

TransparencyWorld transparency_world() {
  const char* policy = R"(
cmpt_id: 0
can_execute: kmain, tick
can_call: f1 (cmpt_id=1)
execution_context: euid = any

cmpt_id: 1
can_execute: f1
can_call: f2 (cmpt_id=2)
execution_context: euid = root

cmpt_id: 2
can_execute: f2
can_call: f3 (cmpt_id=3)
execution_context: euid = 102

cmpt_id: 3
can_execute: f3
execution_context: euid = 103
)";
  policy::SymbolTable symtab;
  symtab.add({"kmain", 0x1000, 4096});
  symtab.add({"tick", 0x2000, 4096});
  symtab.add({"f1", 0x11000, 4096});
  symtab.add({"f2", 0x21000, 4096});
  symtab.add({"f3", 0x31000, 4096});
  auto matrix = policy::resolve(policy::parse_policy(policy), symtab);
  TransparencyWorld w;
  gate::init_compartments(w.machine, matrix, symtab);
  gate::install_interrupt_sentries(w.machine);
  gate::bind_interrupt_handler(w.machine, 32, 0x2000);
  load_program(w.machine, 0x2000,
               std::vector<Instruction>{HandlerBodyInstr{"noop"},
                                        IretqInstr{}});
  std::vector<Instruction> kmain;
  kmain.push_back(CallInstr{0x11000});
  for (int i = 0; i < 24; ++i) kmain.push_back(NopInstr{});
  kmain.push_back(HaltInstr{});
  load_program(w.machine, 0x1000, kmain);
  load_program(w.machine, 0x11000,
               std::vector<Instruction>{NopInstr{}, CallInstr{0x21000},
                                        NopInstr{}, RetInstr{}});
  load_program(w.machine, 0x21000,
               std::vector<Instruction>{NopInstr{}, CallInstr{0x31000},
                                        NopInstr{}, RetInstr{}});
  load_program(w.machine, 0x31000,
               std::vector<Instruction>{NopInstr{}, NopInstr{}, NopInstr{},
                                        RetInstr{}});
  w.cpu.rip = 0x1000;
  w.cpu.rsp = w.machine.layout.stack_top(0);
  w.cpu.euid = 0;
  w.cpu.arg_regs = {91, 92, 93, 94, 95, 96};
  w.cpu.callee_saved = {81, 82, 83, 84, 85, 86};
  return w;
}

bool criterion_7() {
  TransparencyWorld base = transparency_world();
  auto base_result = run(base.machine, base.cpu, {1000, {}});
  REQUIRE_THAT(base_result.reason == StopReason::Halted, "baseline halts");
  REQUIRE_THAT(base_result.steps == 50, "the program runs exactly 50 steps "
               "(got %llu)", (unsigned long long)base_result.steps);

  std::set<std::uint32_t> delivered_in;
  for (std::uint64_t at = 0; at < 50; ++at) {
    TransparencyWorld w = transparency_world();
    RunControl ctl;
    ctl.fuel = 1000;
    Injection inj;
    inj.when = AfterStep{at};
    inj.vector = 32;
    ctl.injections.push_back(inj);
    auto result = run(w.machine, w.cpu, ctl);
    REQUIRE_THAT(result.reason == StopReason::Halted, "halts (inject %llu)",
                 (unsigned long long)at);
    REQUIRE_THAT(w.machine.counters.interrupts == 1, "delivered (%llu)",
                 (unsigned long long)at);

    REQUIRE_THAT(w.cpu.rip == base.cpu.rip && w.cpu.rsp == base.cpu.rsp,
                 "control state identical (inject %llu)",
                 (unsigned long long)at);
    REQUIRE_THAT(w.cpu.rax == base.cpu.rax && w.cpu.euid == base.cpu.euid,
                 "value state identical (inject %llu)",
                 (unsigned long long)at);
    REQUIRE_THAT(w.cpu.arg_regs == base.cpu.arg_regs &&
                     w.cpu.callee_saved == base.cpu.callee_saved,
                 "registers identical (inject %llu)", (unsigned long long)at);
    REQUIRE_THAT(w.cpu.current_ept == base.cpu.current_ept &&
                     w.cpu.rflags_if == base.cpu.rflags_if,
                 "context identical (inject %llu)", (unsigned long long)at);

    std::uint32_t where = 0;
    for (const auto& ev : w.machine.trace)
      if (ev.as<InterruptEvent>()) where = ev.ept;
    delivered_in.insert(where);
    std::uint64_t extra =
        w.machine.counters.switches - base.machine.counters.switches;
    REQUIRE_THAT(extra == (where == 0 ? 0u : 2u),
                 "exactly two extra crossings outside the default "
                 "compartment (inject %llu, in %u, extra %llu)",
                 (unsigned long long)at, where, (unsigned long long)extra);
  }
  REQUIRE_THAT(delivered_in.size() == 4,
               "the sweep exercised every compartment (got %zu)",
               delivered_in.size());
  return true;
}

// ---------------------------------------------------------------------------
// 8. Ordering verdicts across the payload sweep and compartment counts.

bool criterion_8() {
  using namespace cost;
  CostTable table;
  std::vector<Report> reports;
  for (bool refined : {false, true})
    for (auto dir : {Direction::Tx, Direction::Rx})
      for (unsigned payload : {64u, 128u, 256u, 512u, 1024u, 1472u}) {
        DataPathConfig cfg;
        cfg.refined = refined;
        WorkloadSpec w;
        w.direction = dir;
        w.packets = 64;
        w.payload_bytes = payload;
        w.polls = 1;
        reports.push_back(simulate_datapath(cfg, w, table));
      }
  for (unsigned n : {2u, 4u, 8u, 16u, 32u}) {
    DataPathConfig cfg;
    cfg.refined = true;
    cfg.driver_compartments = n;
    WorkloadSpec w;
    w.direction = Direction::Tx;
    w.packets = 64;
    w.payload_bytes = 1472;
    w.polls = 1;
    reports.push_back(simulate_datapath(cfg, w, table));
  }
  auto verdicts = overhead_ordering(reports);
  for (const auto& v : verdicts) {
    std::printf("       %s %s:%s\n", v.pass ? "[ok]" : "[bad]",
                v.name.c_str(), v.detail.c_str());
    REQUIRE_THAT(v.pass, "verdict %s", v.name.c_str());
  }
  REQUIRE_THAT(all_pass(verdicts), "all verdicts");
  return true;
}

// ---------------------------------------------------------------------------
// 9. Policy tooling exit statuses through the session front end.

bool criterion_9() {
  Session s;
  auto ok = s.check(data_dir() + "/example.policy",
                    data_dir() + "/example.symbols");
  REQUIRE_THAT(ok == ExitStatus::Ok, "clean policy exits 0 (%s)",
               s.error().c_str());
  REQUIRE_THAT(s.output().find("error") == std::string::npos ||
                   s.output().find("no errors") != std::string::npos,
               "no error diagnostics");

  auto bad = s.check(data_dir() + "/example.policy",
                     data_dir() + "/colocated.symbols");
  REQUIRE_THAT(bad == ExitStatus::Fail, "co-located map exits 1");
  REQUIRE_THAT(s.output().find("co-locates") != std::string::npos,
               "co-location diagnostic present");
  return true;
}

struct Criterion {
  int number;
  const char* title;
  bool (*fn)();
};

const Criterion kCriteria[] = {
    {1, "data-path crossing counts, baseline and refined", criterion_1},
    {2, "cycle-cost anchors", criterion_2},
    {3, "round-trip preservation over 1000 random call chains", criterion_3},
    {4, "policy soundness over 10000 randomized programs", criterion_4},
    {5, "remapping-attack dichotomy", criterion_5},
    {6, "inserted-switch containment, exhaustive pair sweep", criterion_6},
    {7, "interrupt transparency at every step index", criterion_7},
    {8, "overhead ordering verdicts", criterion_8},
    {9, "policy tooling exit statuses", criterion_9},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), c.number) == wanted.end())
      continue;
    bool pass = false;
    try {
      pass = c.fn();
    } catch (const std::exception& e) {
      std::printf("       exception: %s\n", e.what());
    }
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", c.number,
                c.title);
    if (!pass) failures++;
  }
  return failures == 0 ? 0 : 1;
}
