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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "helpers.hpp"

using namespace testutil;
using cmptsim::policy::Symbol;

namespace {

const char* kCallPolicy = R"(
cmpt_id: 0
can_execute: kmain
can_call: drv_entry (cmpt_id=1)
execution_context: euid = any

cmpt_id: 1
can_execute: drv_entry
can_read: drv_obj
can_write: drv_obj
can_call: ksvc (cmpt_id=0)
execution_context: euid = any
)";

std::vector<Symbol> call_symbols() {
  return {{"kmain", 0x1000, 4096},
          {"ksvc", 0x2000, 4096},
          {"drv_entry", 0x5000, 4096},
          {"drv_obj", 0x7000, 8}};
}

World call_world() {
  World w = make_world(kCallPolicy, call_symbols());
  host_write_word(w.machine, 0x7000, 77);
  return w;
}

void step_until(Machine& m, CpuState& cpu, Addr rip, std::uint32_t ept,
                int limit = 64) {
  while (limit-- > 0 && !cpu.halted) {
    if (cpu.rip == rip && cpu.current_ept == ept) return;
    step(m, cpu);
  }
  REQUIRE(cpu.rip == rip);
  REQUIRE(cpu.current_ept == ept);
}

}  // namespace

TEST_CASE("call path lays out the callee stack exactly") {
  World w = call_world();
  Machine& m = w.machine;
  load_program(m, 0x1000,
               std::vector<Instruction>{CallInstr{0x5000}, HaltInstr{}});
  load_program(m, 0x5000,
               std::vector<Instruction>{ReadInstr{0x7000}, RetInstr{}});
  w.cpu.rip = 0x1000;

  const Addr t0 = m.layout.stack_top(0);
  const Addr t1 = m.layout.stack_top(1);
  step_until(m, w.cpu, 0x5000, 1);

  // callee stack after the transfer, top down: caller id, call magic, the
  // caller return address (the slot a plain call would have used)
  CHECK(host_read_word(m, t1 - 8) == 0);
  CHECK(host_read_word(m, t1 - 16) == kMagicCall);
  CHECK(host_read_word(m, t1 - 24) == 0x1008);
  CHECK(w.cpu.rsp == t1 - 24);
  // the synthesized frame the transfer popped sits just below
  CHECK(host_read_word(m, t1 - 32) == kSsPlaceholder);
  CHECK(host_read_word(m, t1 - 40) == t1 - 24);
  CHECK(host_read_word(m, t1 - 56) == kCsPlaceholder);
  CHECK(host_read_word(m, t1 - 64) == 0x5000);

  // caller side: the pushed return address, the exception frame, and the
  // parked callee-saved registers
  CHECK(host_read_word(m, t0 - 8) == 0x1008);
  CHECK(host_read_word(m, t0 - 24) == t0 - 8);   // frame rsp slot
  CHECK(host_read_word(m, t0 - 48) == 0x5000);   // frame rip slot
  CHECK(host_read_word(m, m.layout.rw_depth_cell(0)) == 2);
  CHECK(host_read_word(m, m.layout.rw_slot(0, 1)) == t0 - 96);
  CHECK(host_read_word(m, m.layout.rw_depth_cell(1)) == 1);
}

TEST_CASE("a round trip preserves the caller and carries the return value") {
  World w = call_world();
  Machine& m = w.machine;
  load_program(m, 0x1000,
               std::vector<Instruction>{CallInstr{0x5000}, HaltInstr{}});
  load_program(m, 0x5000,
               std::vector<Instruction>{ReadInstr{0x7000}, RetInstr{}});
  w.cpu.rip = 0x1000;
  w.cpu.arg_regs = {10, 11, 12, 13, 14, 15};
  w.cpu.callee_saved = {21, 22, 23, 24, 25, 26};
  w.cpu.rax = 5;

  auto result = run(m, w.cpu);
  CHECK(result.reason == StopReason::Halted);
  CHECK(w.cpu.halt_reason == "halt instruction");
  CHECK(w.cpu.rax == 77);  // the callee's last load
  CHECK(w.cpu.rsp == m.layout.stack_top(0));
  CHECK(w.cpu.rflags_if);
  CHECK(w.cpu.current_ept == 0);
  CHECK(w.cpu.arg_regs == std::array<std::uint64_t, 6>{10, 11, 12, 13, 14, 15});
  CHECK(w.cpu.callee_saved ==
        std::array<std::uint64_t, 6>{21, 22, 23, 24, 25, 26});
  CHECK(count_switches(m.trace, SwitchKind::Call) == 1);
  CHECK(count_switches(m.trace, SwitchKind::Ret) == 1);
  CHECK(m.counters.ve_delivered == 2);
  // the pointer stacks are balanced again
  CHECK(host_read_word(m, m.layout.rw_depth_cell(0)) == 1);
  CHECK(host_read_word(m, m.layout.rw_slot(0, 0)) == m.layout.stack_top(0));
  CHECK(host_read_word(m, m.layout.rw_depth_cell(1)) == 1);
  CHECK(host_read_word(m, m.layout.rw_slot(1, 0)) == m.layout.stack_top(1));
}

TEST_CASE("leaving the default compartment checks the execution context") {
  const char* policy = R"(
cmpt_id: 0
can_execute: kmain
can_call: drv_entry (cmpt_id=1)
execution_context: euid = any

cmpt_id: 1
can_execute: drv_entry
execution_context: euid = root
)";
  auto build = [&]() {
    World w = make_world(policy, {{"kmain", 0x1000, 4096},
                                  {"drv_entry", 0x5000, 4096}});
    load_program(w.machine, 0x1000,
                 std::vector<Instruction>{CallInstr{0x5000}, HaltInstr{}});
    load_program(w.machine, 0x5000, std::vector<Instruction>{RetInstr{}});
    w.cpu.rip = 0x1000;
    return w;
  };

  World allowed = build();
  allowed.cpu.euid = 0;
  run(allowed.machine, allowed.cpu);
  CHECK(allowed.machine.counters.violations == 0);
  CHECK(count_switches(allowed.machine.trace, SwitchKind::Call) == 1);

  World denied = build();
  denied.cpu.euid = 1000;
  run(denied.machine, denied.cpu);
  CHECK(denied.machine.counters.violations == 1);
  CHECK(denied.machine.counters.switches == 0);
  CHECK(denied.cpu.halted);
}

TEST_CASE("the module may call back into the kernel") {
  World w = call_world();
  Machine& m = w.machine;
  load_program(m, 0x1000,
               std::vector<Instruction>{CallInstr{0x5000}, HaltInstr{}});
  load_program(m, 0x5000,
               std::vector<Instruction>{CallInstr{0x2000},
                                        ReadInstr{0x7000}, RetInstr{}});
  load_program(m, 0x2000, std::vector<Instruction>{NopInstr{}, RetInstr{}});
  w.cpu.rip = 0x1000;
  auto result = run(m, w.cpu);
  CHECK(result.reason == StopReason::Halted);
  CHECK(w.cpu.rax == 77);
  CHECK(m.counters.violations == 0);
  CHECK(count_switches(m.trace, SwitchKind::Call) == 2);
  CHECK(count_switches(m.trace, SwitchKind::Ret) == 2);
}

TEST_CASE("nested calls unwind the pointer stacks to their snapshots") {
  const char* policy = R"(
cmpt_id: 0
can_execute: kmain
can_call: f1 (cmpt_id=1)
execution_context: euid = any

cmpt_id: 1
can_execute: f1
can_call: f2 (cmpt_id=2)
execution_context: euid = 100

cmpt_id: 2
can_execute: f2
can_read: leaf_obj
execution_context: euid = 200
)";
  World w = make_world(policy, {{"kmain", 0x1000, 4096},
                                {"f1", 0x5000, 4096},
                                {"f2", 0x6000, 4096},
                                {"leaf_obj", 0x7000, 8}});
  Machine& m = w.machine;
  host_write_word(m, 0x7000, 99);
  load_program(m, 0x1000,
               std::vector<Instruction>{CallInstr{0x5000}, HaltInstr{}});
  load_program(m, 0x5000,
               std::vector<Instruction>{CallInstr{0x6000}, RetInstr{}});
  load_program(m, 0x6000,
               std::vector<Instruction>{ReadInstr{0x7000}, RetInstr{}});
  w.cpu.rip = 0x1000;
  w.cpu.euid = 100;  // matches f1's compartment context

  // live pointer-stack state: the depth and the slots underneath it
  auto live_state = [&]() {
    std::vector<std::uint64_t> v;
    for (std::uint32_t c = 0; c < 3; ++c) {
      std::uint64_t d = host_read_word(m, m.layout.rw_depth_cell(c));
      v.push_back(d);
      for (std::uint64_t i = 0; i < d; ++i)
        v.push_back(host_read_word(m, m.layout.rw_slot(c, i)));
    }
    return v;
  };
  auto before = live_state();

  auto result = run(m, w.cpu);
  CHECK(result.reason == StopReason::Halted);
  CHECK(w.cpu.rax == 99);
  CHECK(m.counters.violations == 0);
  CHECK(count_switches(m.trace, SwitchKind::Call) == 2);
  CHECK(count_switches(m.trace, SwitchKind::Ret) == 2);
  CHECK(before == live_state());
}

TEST_CASE("a corrupted caller id aborts the return without a grant leak") {
  World w = call_world();
  Machine& m = w.machine;
  Addr caller_id_cell = m.layout.stack_top(1) - 8;
  load_program(m, 0x1000,
               std::vector<Instruction>{CallInstr{0x5000}, HaltInstr{}});
  load_program(m, 0x5000,
               std::vector<Instruction>{WriteInstr{caller_id_cell, 777},
                                        RetInstr{}});
  w.cpu.rip = 0x1000;
  run(m, w.cpu);
  CHECK(w.cpu.halted);
  CHECK(m.counters.violations == 1);
  // the forged id never became a crossing
  CHECK(count_switches(m.trace, SwitchKind::Ret) == 0);
}

TEST_CASE("a caller id forged to a valid index stays contained") {
  // three compartments: the callee redirects its return to compartment 2;
  // the switch happens but every subsequent access is bounded by that
  // compartment's own table and the run aborts without a grant leak
  const char* policy = R"(
cmpt_id: 0
can_execute: kmain
can_call: f1 (cmpt_id=1)
execution_context: euid = any

cmpt_id: 1
can_execute: f1
execution_context: euid = 100

cmpt_id: 2
can_read: secret
execution_context: euid = 200
)";
  World w = make_world(policy, {{"kmain", 0x1000, 4096},
                                {"f1", 0x5000, 4096},
                                {"secret", 0x7000, 8}});
  Machine& m = w.machine;
  host_write_word(m, 0x7000, 0x5EC);
  Addr caller_id_cell = m.layout.stack_top(1) - 8;
  load_program(m, 0x1000,
               std::vector<Instruction>{CallInstr{0x5000}, HaltInstr{}});
  load_program(m, 0x5000,
               std::vector<Instruction>{WriteInstr{caller_id_cell, 2},
                                        RetInstr{}});
  w.cpu.rip = 0x1000;
  run(m, w.cpu);
  CHECK(w.cpu.halted);
  // no instruction ever retired inside compartment 2 and the secret stayed
  // unread: EPT membership bounds the damage
  for (const auto& ev : m.trace)
    if (const auto* r = ev.as<RetiredEvent>())
      if (!std::holds_alternative<VmfuncInstr>(r->instr)) CHECK(ev.ept != 2);
}

TEST_CASE("runaway mutual recursion is stopped by the pointer-stack bound") {
  const char* policy = R"(
cmpt_id: 0
can_execute: kmain
can_call: f1 (cmpt_id=1)
execution_context: euid = any

cmpt_id: 1
can_execute: f1
can_call: kmain (cmpt_id=0)
execution_context: euid = any
)";
  World w = make_world(policy, {{"kmain", 0x1000, 4096},
                                {"f1", 0x5000, 4096}});
  Machine& m = w.machine;
  // each side calls straight back into the other, forever
  load_program(m, 0x1000, std::vector<Instruction>{CallInstr{0x5000},
                                                   RetInstr{}});
  load_program(m, 0x5000, std::vector<Instruction>{CallInstr{0x1000},
                                                   RetInstr{}});
  w.cpu.rip = 0x1000;
  auto result = run(m, w.cpu, {100000, {}});
  CHECK(result.reason == StopReason::Halted);
  CHECK(w.cpu.halt_reason.find("overflow") != std::string::npos);
  // every crossing that completed was still a legal one
  CHECK(count_switches(m.trace, SwitchKind::Call) <= 2 * kRwDepth);
}

TEST_CASE("a corrupted pointer-stack depth aborts to the hypervisor") {
  World w = call_world();
  Machine& m = w.machine;
  // the shared region is writable everywhere; scribbling the depth cell
  // must abort the next transition instead of dereferencing wild slots
  load_program(m, 0x1000,
               std::vector<Instruction>{
                   WriteInstr{m.layout.rw_depth_cell(0), 99},
                   CallInstr{0x5000}, HaltInstr{}});
  load_program(m, 0x5000, std::vector<Instruction>{RetInstr{}});
  w.cpu.rip = 0x1000;
  run(m, w.cpu);
  CHECK(w.cpu.halted);
  CHECK(w.machine.counters.vm_exits == 1);
  CHECK(count_switches(m.trace, SwitchKind::Call) == 0);
  CHECK(w.cpu.halt_reason.find("saved-pointer") != std::string::npos);
}

TEST_CASE("interrupt forwarding lays out the shared stack exactly") {
  World w = call_world();
  Machine& m = w.machine;
  gate::bind_interrupt_handler(m, 40, 0x2000);
  load_program(m, 0x2000, std::vector<Instruction>{
                              HandlerBodyInstr{"noop"}, IretqInstr{}});
  load_program(m, 0x5000, std::vector<Instruction>{NopInstr{}, NopInstr{},
                                                   HaltInstr{}});
  w.cpu.rip = 0x5000;
  w.cpu.current_ept = 1;
  w.cpu.rsp = m.layout.stack_top(1);
  step(m, w.cpu);  // retire the first nop
  deliver_interrupt(m, w.cpu, 40, false);
  step_until(m, w.cpu, 0x2000, 0);

  const Addr it = m.layout.int_stack_top();
  CHECK(host_read_word(m, it - 8) == 1);                // interrupted id
  CHECK(host_read_word(m, it - 16) == kMagicIntNoErr);  // discriminator
  CHECK(host_read_word(m, it - 24) == kSsPlaceholder);
  CHECK(host_read_word(m, it - 32) == it - 16);   // frame rsp -> magic slot
  CHECK(host_read_word(m, it - 56) == 0x5008);    // interrupted rip
  CHECK(w.cpu.rsp == it - 56);
  CHECK_FALSE(w.cpu.rflags_if);
}

TEST_CASE("interrupt with error code skips the extra slot on both stacks") {
  World w = call_world();
  Machine& m = w.machine;
  gate::bind_interrupt_handler(m, 14, 0x2000);
  load_program(m, 0x2000, std::vector<Instruction>{
                              HandlerBodyInstr{"noop"}, IretqInstr{}});
  load_program(m, 0x5000,
               std::vector<Instruction>{NopInstr{}, ReadInstr{0x7000},
                                        HaltInstr{}});
  w.cpu.rip = 0x5000;
  w.cpu.current_ept = 1;
  w.cpu.rsp = m.layout.stack_top(1);

  RunControl ctl;
  Injection inj;
  inj.when = AfterStep{1};
  inj.vector = 14;
  inj.has_error_code = true;
  inj.error_code = 0x11;
  ctl.injections.push_back(inj);
  auto result = run(m, w.cpu, ctl);
  CHECK(result.reason == StopReason::Halted);
  CHECK(w.cpu.halt_reason == "halt instruction");
  CHECK(w.cpu.rax == 77);
  CHECK(w.cpu.rsp == m.layout.stack_top(1));  // error code fully consumed
  CHECK(count_switches(m.trace, SwitchKind::Int) == 1);
  CHECK(count_switches(m.trace, SwitchKind::Iret) == 1);
}

TEST_CASE("a handler rewrite of the frame rip moves the resumption") {
  World w = call_world();
  Machine& m = w.machine;
  gate::bind_interrupt_handler(m, 40, 0x2000);
  load_program(m, 0x2000, std::vector<Instruction>{
                              HandlerBodyInstr{"advance_rip"}, IretqInstr{}});
  // the skipped instruction would clobber the witness object
  load_program(m, 0x5000,
               std::vector<Instruction>{NopInstr{}, WriteInstr{0x7000, 0},
                                        ReadInstr{0x7000}, HaltInstr{}});
  w.cpu.rip = 0x5000;
  w.cpu.current_ept = 1;
  w.cpu.rsp = m.layout.stack_top(1);

  RunControl ctl;
  Injection inj;
  inj.when = AfterStep{1};
  inj.vector = 40;
  ctl.injections.push_back(inj);
  run(m, w.cpu, ctl);
  CHECK(w.cpu.halt_reason == "halt instruction");
  CHECK(w.cpu.rax == 77);  // the write was skipped by the fixup
  CHECK(host_read_word(m, 0x7000) == 77);
}

TEST_CASE("garbage left on the interrupt stack has no effect") {
  World w = call_world();
  Machine& m = w.machine;
  gate::bind_interrupt_handler(m, 40, 0x2000);
  load_program(m, 0x2000, std::vector<Instruction>{
                              HandlerBodyInstr{"noop"}, IretqInstr{}});
  load_program(m, 0x5000,
               std::vector<Instruction>{NopInstr{}, ReadInstr{0x7000},
                                        HaltInstr{}});
  // stale discriminators from an earlier (or malicious) occupant
  host_write_word(m, m.layout.int_stack_top() - 8, 0xFFFF);
  host_write_word(m, m.layout.int_stack_top() - 16, kMagicIntErr);
  w.cpu.rip = 0x5000;
  w.cpu.current_ept = 1;
  w.cpu.rsp = m.layout.stack_top(1);

  RunControl ctl;
  Injection inj;
  inj.when = AfterStep{1};
  inj.vector = 40;
  ctl.injections.push_back(inj);
  auto result = run(m, w.cpu, ctl);
  CHECK(result.reason == StopReason::Halted);
  CHECK(w.cpu.rax == 77);
  CHECK(m.counters.violations == 0);
}

TEST_CASE("interrupt transparency: a no-op handler changes nothing") {
  auto build = [](bool inject) {
    World w = call_world();
    gate::bind_interrupt_handler(w.machine, 40, 0x2000);
    load_program(w.machine, 0x2000, std::vector<Instruction>{
                                        HandlerBodyInstr{"noop"},
                                        IretqInstr{}});
    load_program(w.machine, 0x1000,
                 std::vector<Instruction>{CallInstr{0x5000},
                                          ReadInstr{0x7000}, HaltInstr{}});
    load_program(w.machine, 0x5000,
                 std::vector<Instruction>{NopInstr{}, NopInstr{}, RetInstr{}});
    w.cpu.rip = 0x1000;
    w.cpu.arg_regs = {1, 2, 3, 4, 5, 6};
    w.cpu.callee_saved = {7, 8, 9, 10, 11, 12};
    RunControl ctl;
    if (inject) {
      Injection inj;
      inj.when = OnRetire{0x5000, 1};
      inj.vector = 40;
      ctl.injections.push_back(inj);
    }
    run(w.machine, w.cpu, ctl);
    return w;
  };
  World base = build(false);
  World intr = build(true);
  CHECK(intr.cpu.rip == base.cpu.rip);
  CHECK(intr.cpu.rsp == base.cpu.rsp);
  CHECK(intr.cpu.rax == base.cpu.rax);
  CHECK(intr.cpu.euid == base.cpu.euid);
  CHECK(intr.cpu.arg_regs == base.cpu.arg_regs);
  CHECK(intr.cpu.callee_saved == base.cpu.callee_saved);
  CHECK(intr.machine.counters.switches == base.machine.counters.switches + 2);
}

TEST_CASE("random allowed chains restore every invariant") {
  // three compartments, randomized depth and registers
  const char* policy = R"(
cmpt_id: 0
can_execute: kmain
can_call: f1 (cmpt_id=1), f2 (cmpt_id=2)
execution_context: euid = any

cmpt_id: 1
can_execute: f1
can_read: o1
can_call: f2 (cmpt_id=2), k0 (cmpt_id=0)
execution_context: euid = 100

cmpt_id: 2
can_execute: f2
can_read: o2
can_call: f1 (cmpt_id=1), k0 (cmpt_id=0)
execution_context: euid = 200
)";
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    World w = make_world(policy, {{"kmain", 0x1000, 4096},
                                  {"k0", 0x2000, 4096},
                                  {"f1", 0x11000, 4096},
                                  {"f2", 0x21000, 4096},
                                  {"o1", 0x12000, 8},
                                  {"o2", 0x22000, 8}});
    Machine& m = w.machine;
    host_write_word(m, 0x12000, 1001);
    host_write_word(m, 0x22000, 2002);

    // build a random legal chain as straight-line programs: each hop calls
    // the next entry, the leaf reads its object
    int depth = 1 + int(rng() % 6);
    std::vector<int> chain;  // compartment of each hop
    int cur = 0;
    for (int d = 0; d < depth; ++d) {
      int next = cur == 0 ? (rng() % 2 ? 1 : 2) : (cur == 1 ? 2 : 1);
      // the kernel may only be the leaf: re-leaving it would need a
      // different execution context
      if (d == depth - 1 && cur != 0 && rng() % 4 == 0) next = 0;
      chain.push_back(next);
      cur = next;
    }
    // program per hop, place sequential code in the hop's own page
    auto entry_of = [&](int c) -> Addr {
      return c == 0 ? 0x2000 : (c == 1 ? 0x11000 : 0x21000);
    };
    // kmain calls the first hop
    load_program(m, 0x1000,
                 std::vector<Instruction>{CallInstr{entry_of(chain[0])},
                                          HaltInstr{}});
    for (int d = 0; d < depth; ++d) {
      std::vector<Instruction> body;
      if (d + 1 < depth) body.push_back(CallInstr{entry_of(chain[d + 1])});
      int c = chain[d];
      if (c == 1) body.push_back(ReadInstr{0x12000});
      if (c == 2) body.push_back(ReadInstr{0x22000});
      body.push_back(RetInstr{});
      load_program(m, entry_of(c), body);
    }

    w.cpu.rip = 0x1000;
    w.cpu.euid = chain[0] == 1 ? 100 : 200;  // match the first hop's context
    for (auto& r : w.cpu.arg_regs) r = rng();
    for (auto& r : w.cpu.callee_saved) r = rng();
    auto args = w.cpu.arg_regs;
    auto saved = w.cpu.callee_saved;

    auto result = run(m, w.cpu);
    REQUIRE(result.reason == StopReason::Halted);
    REQUIRE(w.cpu.halt_reason == "halt instruction");
    CHECK(m.counters.violations == 0);
    CHECK(w.cpu.rsp == m.layout.stack_top(0));
    CHECK(w.cpu.arg_regs == args);
    CHECK(w.cpu.callee_saved == saved);
    CHECK(w.cpu.current_ept == 0);
    // expected return value: the first hop's own object (its last read
    // before returning)
    CHECK(w.cpu.rax == (chain[0] == 1 ? 1001u : 2002u));
    CHECK(count_switches(m.trace, SwitchKind::Call) ==
          count_switches(m.trace, SwitchKind::Ret));
  }
}
