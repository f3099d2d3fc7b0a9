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

#include "cmptsim/attack.hpp"

#include <sstream>

#include "cmptsim/cpu.hpp"
#include "cmptsim/gate.hpp"
#include "cmptsim/machine.hpp"
#include "cmptsim/policy.hpp"

namespace cmptsim::attack {

namespace {

constexpr Addr kMainGva = 0x1000;
constexpr Addr kAclGva = 0x5000;      // protected table, read-only everywhere
constexpr Addr kScratchGva = 0x6000;  // attacker-writable page
constexpr Addr kDrvCodeGva = 0x8000;
constexpr Addr kWitnessGva = 0x9000;
constexpr std::uint64_t kAclWord = 0x5EC0DE;
constexpr std::uint64_t kEvilWord = 0xBADBEEF;
constexpr std::uint32_t kVector = 33;

struct World {
  Machine machine;
  CpuState cpu;
};

/// Kernel compartment plus one module compartment that owns the protected
/// table and its code page.
World build_world() {
  policy::SymbolTable symtab;
  symtab.add({"attacker_main", kMainGva, kPageSize});
  symtab.add({"acl_table", kAclGva, 8});
  symtab.add({"scratch", kScratchGva, 8});
  symtab.add({"module_fn", kDrvCodeGva, kPageSize});
  symtab.add({"witness", kWitnessGva, 8});

  std::vector<policy::CompartmentPolicy> policies(2);
  policies[0].cmpt_id = 0;
  policies[0].context = policy::ExecutionContext::any_ctx();
  policies[0].can_execute = {"attacker_main"};
  policies[0].can_read = {"acl_table"};
  policies[1].cmpt_id = 1;
  policies[1].context = policy::ExecutionContext::any_ctx();
  policies[1].can_execute = {"module_fn"};
  policies[1].can_read = {"acl_table"};

  World w;
  gate::init_compartments(w.machine, policy::resolve(policies, symtab),
                          symtab);
  gate::install_interrupt_sentries(w.machine);
  host_write_word(w.machine, kAclGva, kAclWord);
  host_write_word(w.machine, kWitnessGva, 7);
  w.cpu.rsp = w.machine.layout.stack_top(0);
  w.cpu.rip = kMainGva;
  return w;
}

Outcome remap(bool hlat_on) {
  World w = build_world();
  w.machine.hlat.enabled = hlat_on;

  // redirect the protected table's virtual address at the writable scratch
  // frame, then store through it
  guest_pt_map(w.machine.guest_pt, kAclGva, kScratchGva);
  load_program(w.machine, kMainGva,
               std::vector<Instruction>{WriteInstr{kAclGva, kEvilWord},
                                        HaltInstr{}});
  run(w.machine, w.cpu);

  bool acl_intact = host_read_word(w.machine, kAclGva) == kAclWord;
  bool landed = host_read_word(w.machine, kScratchGva) == kEvilWord;
  bool violated = w.machine.counters.violations > 0;

  Outcome o;
  o.name = hlat_on ? "remap-hlat-on" : "remap-hlat-off";
  o.expected_blocked = hlat_on;
  o.blocked = violated && acl_intact && !landed;
  std::ostringstream d;
  d << "protected word " << (acl_intact ? "intact" : "CLOBBERED")
    << ", store " << (landed ? "landed on the remapped frame" : "faulted")
    << ", violations=" << w.machine.counters.violations;
  o.detail = d.str();
  if (!o.blocked && !(acl_intact && landed && !violated))
    o.detail += " (inconclusive state)";
  return o;
}

Outcome vmfunc_insert() {
  World w = build_world();
  // switch tables mid-stream and try to touch memory in the foreign context
  load_program(w.machine, kMainGva,
               std::vector<Instruction>{VmfuncInstr{1},
                                        WriteInstr{kWitnessGva, kEvilWord},
                                        HaltInstr{}});
  run(w.machine, w.cpu);

  bool ve_seen = w.machine.counters.ve_delivered > 0 ||
                 w.machine.counters.vm_exits > 0;
  bool write_retired = false;
  for (const auto& ev : w.machine.trace)
    if (const auto* r = ev.as<RetiredEvent>())
      if (std::holds_alternative<WriteInstr>(r->instr)) write_retired = true;
  bool witness_intact = host_read_word(w.machine, kWitnessGva) == 7;

  Outcome o;
  o.name = "vmfunc-insert";
  o.expected_blocked = true;
  o.blocked = ve_seen && !write_retired && witness_intact;
  std::ostringstream d;
  d << "fetch after the inserted switch "
    << (ve_seen ? "faulted" : "DID NOT FAULT") << ", store "
    << (write_retired ? "RETIRED" : "never retired") << ", witness "
    << (witness_intact ? "intact" : "CLOBBERED");
  o.detail = d.str();
  return o;
}

Outcome invalid_call() {
  World w = build_world();
  // module_fn is not in the kernel row's can_call list
  load_program(w.machine, kMainGva,
               std::vector<Instruction>{CallInstr{kDrvCodeGva}, HaltInstr{}});
  load_program(w.machine, kDrvCodeGva, std::vector<Instruction>{RetInstr{}});
  run(w.machine, w.cpu);

  bool violated = w.machine.counters.violations > 0;
  bool switched = w.machine.counters.switches > 0;

  Outcome o;
  o.name = "invalid-call";
  o.expected_blocked = true;
  o.blocked = violated && !switched;
  std::ostringstream d;
  d << "violations=" << w.machine.counters.violations
    << " switches=" << w.machine.counters.switches;
  o.detail = d.str();
  return o;
}

/// One run with the victim compartment scribbling fake discriminators over
/// the shared interrupt stack before the interrupt arrives, one clean run;
/// delivery must come out identical.
Outcome int_stack_corrupt() {
  auto build = [](bool corrupt) {
    policy::SymbolTable symtab;
    symtab.add({"attacker_main", kMainGva, kPageSize});
    symtab.add({"module_fn", kDrvCodeGva, kPageSize});
    symtab.add({"witness", kWitnessGva, 8});
    symtab.add({"tick", 0xA000, kPageSize});

    std::vector<policy::CompartmentPolicy> policies(2);
    policies[0].cmpt_id = 0;
    policies[0].context = policy::ExecutionContext::any_ctx();
    policies[0].can_execute = {"attacker_main", "tick"};
    policies[0].can_call.push_back({"module_fn", 1u});
    policies[1].cmpt_id = 1;
    policies[1].context = policy::ExecutionContext::any_ctx();
    policies[1].can_execute = {"module_fn"};

    World w;
    gate::init_compartments(w.machine, policy::resolve(policies, symtab),
                            symtab);
    gate::install_interrupt_sentries(w.machine);
    gate::bind_interrupt_handler(w.machine, kVector, 0xA000);
    host_write_word(w.machine, kWitnessGva, 7);

    Addr stack_top = w.machine.layout.int_stack_top();
    std::vector<Instruction> module;
    if (corrupt) {
      module.push_back(WriteInstr{stack_top - 16, kMagicIntErr});
      module.push_back(WriteInstr{stack_top - 8, 0x1F1F1F});
    } else {
      module.push_back(NopInstr{});
      module.push_back(NopInstr{});
    }
    module.push_back(NopInstr{});  // injection anchor
    module.push_back(NopInstr{});
    module.push_back(RetInstr{});
    load_program(w.machine, kDrvCodeGva, module);
    load_program(w.machine, kMainGva,
                 std::vector<Instruction>{CallInstr{kDrvCodeGva},
                                          ReadInstr{kWitnessGva},
                                          HaltInstr{}});
    load_program(w.machine, 0xA000,
                 std::vector<Instruction>{HandlerBodyInstr{"noop"},
                                          IretqInstr{}});
    w.cpu.rsp = w.machine.layout.stack_top(0);
    w.cpu.rip = kMainGva;
    return w;
  };

  auto drive = [](World& w) {
    RunControl ctl;
    Injection inj;
    inj.when = OnRetire{kDrvCodeGva + 2 * kWordSize, 1};
    inj.vector = kVector;
    ctl.injections.push_back(inj);
    return run(w.machine, w.cpu, ctl);
  };

  World corrupted = build(true);
  World clean = build(false);
  drive(corrupted);
  drive(clean);

  bool same_state = corrupted.cpu.rip == clean.cpu.rip &&
                    corrupted.cpu.rsp == clean.cpu.rsp &&
                    corrupted.cpu.rax == clean.cpu.rax &&
                    corrupted.cpu.halt_reason == clean.cpu.halt_reason;
  bool same_switches =
      corrupted.machine.counters.switches == clean.machine.counters.switches;
  bool delivered = corrupted.machine.counters.interrupts == 1 &&
                   clean.machine.counters.interrupts == 1;
  bool no_violation = corrupted.machine.counters.violations == 0;

  Outcome o;
  o.name = "int-stack-corrupt";
  o.expected_blocked = true;
  o.blocked = same_state && same_switches && delivered && no_violation;
  std::ostringstream d;
  d << "final state " << (same_state ? "matches" : "DIVERGES from")
    << " the clean run, switches " << corrupted.machine.counters.switches
    << " vs " << clean.machine.counters.switches;
  o.detail = d.str();
  return o;
}

}  // namespace

const std::vector<std::string>& names() {
  static const std::vector<std::string> kNames = {
      "remap-hlat-on", "remap-hlat-off", "vmfunc-insert", "invalid-call",
      "int-stack-corrupt"};
  return kNames;
}

Outcome run_attack(const std::string& name) {
  if (name == "remap-hlat-on") return remap(true);
  if (name == "remap-hlat-off") return remap(false);
  if (name == "vmfunc-insert") return vmfunc_insert();
  if (name == "invalid-call") return invalid_call();
  if (name == "int-stack-corrupt") return int_stack_corrupt();
  throw Error("unknown attack scenario '" + name + "'");
}

std::string render(const Outcome& o) {
  std::ostringstream os;
  os << o.name << ": " << (o.blocked ? "blocked" : "succeeded")
     << " (expected " << (o.expected_blocked ? "blocked" : "succeeded") << ") "
     << (o.as_expected() ? "OK" : "UNEXPECTED") << "\n  " << o.detail << "\n";
  return os.str();
}

}  // namespace cmptsim::attack
