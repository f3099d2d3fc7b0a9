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

#include "cmptsim/cpu.hpp"

#include <deque>

#include "cmptsim/gate.hpp"
#include "cmptsim/sentry.hpp"
#include "internal.hpp"

namespace cmptsim {

namespace detail {

void halt(CpuState& cpu, const std::string& reason) {
  cpu.halted = true;
  cpu.halt_reason = reason;
}

void fail_internal(Machine& m, CpuState& cpu, const std::string& what) {
  append_event(m, cpu, VmExitEvent{what});
  halt(cpu, what);
}

bool push_word(Machine& m, CpuState& cpu, std::uint64_t value) {
  Addr at = cpu.rsp - kWordSize;
  auto outcome = guest_write(m, cpu, at, value);
  if (!std::holds_alternative<TranslationOk>(outcome)) {
    fail_internal(m, cpu, "fault while pushing exception state at " + hex(at));
    return false;
  }
  cpu.rsp = at;
  return true;
}

std::optional<std::uint64_t> pop_word(Machine& m, CpuState& cpu) {
  auto v = guest_read(m, cpu, cpu.rsp);
  if (!v.ok()) {
    fail_internal(m, cpu, "fault while popping exception state at " +
                              hex(cpu.rsp));
    return std::nullopt;
  }
  cpu.rsp += kWordSize;
  return v.value;
}

std::optional<std::uint64_t> must_read(Machine& m, CpuState& cpu, Addr gva) {
  auto v = guest_read(m, cpu, gva);
  if (!v.ok()) {
    fail_internal(m, cpu, "handler fault reading " + hex(gva));
    return std::nullopt;
  }
  return v.value;
}

bool must_write(Machine& m, CpuState& cpu, Addr gva, std::uint64_t value) {
  auto outcome = guest_write(m, cpu, gva, value);
  if (!std::holds_alternative<TranslationOk>(outcome)) {
    fail_internal(m, cpu, "handler fault writing " + hex(gva));
    return false;
  }
  return true;
}

bool push_hardware_frame(Machine& m, CpuState& cpu, Addr rip) {
  Addr rsp_at_entry = cpu.rsp;
  if (!push_word(m, cpu, kSsPlaceholder)) return false;
  if (!push_word(m, cpu, rsp_at_entry)) return false;
  if (!push_word(m, cpu, rflags_word(cpu.rflags_if))) return false;
  if (!push_word(m, cpu, kCsPlaceholder)) return false;
  if (!push_word(m, cpu, rip)) return false;
  return true;
}

bool do_iretq(Machine& m, CpuState& cpu) {
  auto rip = pop_word(m, cpu);
  auto cs = pop_word(m, cpu);
  auto rflags = pop_word(m, cpu);
  auto rsp = pop_word(m, cpu);
  auto ss = pop_word(m, cpu);
  if (!rip || !cs || !rflags || !rsp || !ss) return false;
  cpu.rip = *rip;
  cpu.rsp = *rsp;
  cpu.rflags_if = rflags_if(*rflags);
  return true;
}

void switch_ept(Machine& m, CpuState& cpu, std::uint32_t to, SwitchKind kind,
                Addr target) {
  std::uint32_t from = cpu.current_ept;
  append_event(m, cpu, RetiredEvent{VmfuncInstr{to}});
  cpu.current_ept = to;
  append_event(m, cpu, SwitchEvent{from, to, kind, target});
}

void deliver_fault(Machine& m, CpuState& cpu, const TranslationOutcome& out) {
  if (const auto* ve = std::get_if<VeDelivered>(&out)) {
    // The exception is visible before any effect of the faulting access.
    append_event(m, cpu, VeEvent{ve->info});
    if (!push_hardware_frame(m, cpu, cpu.rip)) return;
    cpu.rflags_if = false;
    cpu.rip = m.layout.ve_entry;
    return;
  }
  if (const auto* gpf = std::get_if<GuestPageFault>(&out)) {
    halt(cpu, "guest page fault at " + hex(gpf->gva) +
                  " (no guest page-table entry)");
    return;
  }
  if (const auto* exit = std::get_if<VmExit>(&out)) {
    append_event(m, cpu, VmExitEvent{exit->reason});
    gate::handle_vmcall_violation(
        m, cpu,
        {cpu.ve_info.faulting_gva, cpu.ve_info.faulting_gpa, cpu.current_ept,
         cpu.ve_info.qualification, "vm exit: " + exit->reason});
    return;
  }
}

}  // namespace detail

using namespace detail;

namespace {

void retire(Machine& m, CpuState& cpu, Addr at, const Instruction& instr) {
  TraceEvent ev;
  ev.step = m.current_step;
  ev.ept = cpu.current_ept;
  ev.euid = cpu.euid;
  ev.rip = at;
  ev.data = RetiredEvent{instr};
  m.counters.retired++;
  m.trace.push_back(std::move(ev));
}

/// Loads one word for an executing instruction; on a fault the exception is
/// delivered and false returned (the instruction does not retire).
bool data_read(Machine& m, CpuState& cpu, Addr gva, std::uint64_t& value) {
  auto v = guest_read(m, cpu, gva);
  if (!v.ok()) {
    deliver_fault(m, cpu, v.outcome);
    return false;
  }
  value = v.value;
  return true;
}

bool data_write(Machine& m, CpuState& cpu, Addr gva, std::uint64_t value) {
  auto outcome = guest_write(m, cpu, gva, value);
  if (!std::holds_alternative<TranslationOk>(outcome)) {
    deliver_fault(m, cpu, outcome);
    return false;
  }
  return true;
}

void execute(Machine& m, CpuState& cpu, const Instruction& instr) {
  const Addr at = cpu.rip;
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, CallInstr>) {
          // push the return address, then transfer; the target fetch next
          // step raises any crossing
          if (!data_write(m, cpu, cpu.rsp - kWordSize, at + kWordSize)) return;
          cpu.rsp -= kWordSize;
          cpu.rip = op.target;
          retire(m, cpu, at, instr);
        } else if constexpr (std::is_same_v<T, RetInstr>) {
          std::uint64_t target;
          if (!data_read(m, cpu, cpu.rsp, target)) return;
          cpu.rsp += kWordSize;
          cpu.rip = target;
          retire(m, cpu, at, instr);
        } else if constexpr (std::is_same_v<T, ReadInstr>) {
          std::uint64_t value;
          if (!data_read(m, cpu, op.gva, value)) return;
          cpu.rax = value;
          cpu.rip += kWordSize;
          retire(m, cpu, at, instr);
        } else if constexpr (std::is_same_v<T, WriteInstr>) {
          if (!data_write(m, cpu, op.gva, op.value)) return;
          cpu.rip += kWordSize;
          retire(m, cpu, at, instr);
        } else if constexpr (std::is_same_v<T, VmfuncInstr>) {
          if (op.index >= m.eptp.size()) {
            append_event(m, cpu, VmExitEvent{"vmfunc index out of range"});
            gate::handle_vmcall_violation(
                m, cpu,
                {at, 0, cpu.current_ept, AccessKind::Execute,
                 "vmfunc index " + std::to_string(op.index) +
                     " outside the EPTP list"});
            return;
          }
          retire(m, cpu, at, instr);
          std::uint32_t from = cpu.current_ept;
          cpu.current_ept = op.index;
          append_event(m, cpu,
                       SwitchEvent{from, op.index, SwitchKind::Vmfunc, 0});
          cpu.rip += kWordSize;  // no control-flow redirection
        } else if constexpr (std::is_same_v<T, VmcallInstr>) {
          retire(m, cpu, at, instr);
          gate::handle_vmcall_violation(
              m, cpu,
              {at, 0, cpu.current_ept, AccessKind::Execute,
               "guest vmcall"});
        } else if constexpr (std::is_same_v<T, IretqInstr>) {
          // guest-level iretq: faults on the frame deliver normally
          std::uint64_t v[5];
          for (int i = 0; i < 5; ++i)
            if (!data_read(m, cpu, cpu.rsp + i * kWordSize, v[i])) return;
          retire(m, cpu, at, instr);
          cpu.rip = v[0];
          cpu.rflags_if = rflags_if(v[2]);
          cpu.rsp = v[3];
        } else if constexpr (std::is_same_v<T, NopInstr>) {
          cpu.rip += kWordSize;
          retire(m, cpu, at, instr);
        } else if constexpr (std::is_same_v<T, SetEuidInstr>) {
          cpu.euid = op.euid;
          cpu.rip += kWordSize;
          retire(m, cpu, at, instr);
        } else if constexpr (std::is_same_v<T, HandlerBodyInstr>) {
          if (cpu.error_code_above_handler) {
            cpu.rsp += kWordSize;
            cpu.error_code_above_handler = false;
          }
          if (op.tag == "advance_rip") {
            // fault fixup: step the frame's return rip over one instruction
            std::uint64_t frame_rip;
            if (!data_read(m, cpu, cpu.rsp, frame_rip)) return;
            if (!data_write(m, cpu, cpu.rsp, frame_rip + kWordSize)) return;
          } else if (op.tag != "noop") {
            halt(cpu, "unknown handler tag '" + op.tag + "'");
            return;
          }
          cpu.rip += kWordSize;
          retire(m, cpu, at, instr);
        } else if constexpr (std::is_same_v<T, HaltInstr>) {
          retire(m, cpu, at, instr);
          halt(cpu, "halt instruction");
        }
      },
      instr);
}

}  // namespace

void step(Machine& m, CpuState& cpu) {
  if (cpu.halted) throw Error("step on a halted cpu");

  auto outcome = translate(m, cpu, cpu.rip, AccessKind::Execute);
  if (const auto* ok = std::get_if<TranslationOk>(&outcome)) {
    if (cpu.rip == m.layout.ve_entry) {
      sentry::ve_handler(m, cpu);
    } else if (cpu.rip == m.layout.int_entry) {
      sentry::interrupt_sentry(m, cpu);
    } else {
      const Instruction* cell = m.phys.read_instruction(ok->hpa);
      if (!cell) {
        halt(cpu, "fetch of a non-instruction cell at " + hex(cpu.rip));
      } else {
        // execute the fetched copy: a store may overwrite its own cell
        Instruction instr = *cell;
        execute(m, cpu, instr);
      }
    }
  } else {
    deliver_fault(m, cpu, outcome);
  }
  m.current_step++;
}

void deliver_interrupt(Machine& m, CpuState& cpu, std::uint32_t vector,
                       bool has_error_code, std::uint64_t error_code) {
  if (cpu.halted) throw Error("interrupt delivery to a halted cpu");
  if (!cpu.rflags_if)
    throw Error("interrupt delivery with interrupts disabled");

  append_event(m, cpu, InterruptEvent{vector});
  if (!push_hardware_frame(m, cpu, cpu.rip)) return;
  if (has_error_code && !push_word(m, cpu, error_code)) return;
  cpu.rflags_if = false;

  auto target = must_read(m, cpu, m.layout.idt_gva + vector * kWordSize);
  if (!target) return;
  if (*target == 0) {
    halt(cpu, "unbound interrupt vector " + std::to_string(vector));
    return;
  }
  if (cpu.current_ept != 0) {
    cpu.inflight_interrupt = PendingInterrupt{vector, has_error_code,
                                              error_code};
  } else if (has_error_code) {
    cpu.error_code_above_handler = true;
  }
  cpu.rip = *target;
}

RunResult run(Machine& m, CpuState& cpu, const RunControl& ctl) {
  RunResult result;
  std::vector<char> armed(ctl.injections.size(), 0);
  std::deque<std::size_t> ready;
  std::map<Addr, std::uint64_t> retire_counts;
  bool watch_retires = false;
  for (const auto& inj : ctl.injections)
    if (std::holds_alternative<OnRetire>(inj.when)) watch_retires = true;

  auto arm = [&]() {
    for (std::size_t i = 0; i < ctl.injections.size(); ++i) {
      if (armed[i]) continue;
      const auto& inj = ctl.injections[i];
      bool hit = false;
      if (const auto* after = std::get_if<AfterStep>(&inj.when)) {
        hit = result.steps >= after->step;
      } else if (const auto* onr = std::get_if<OnRetire>(&inj.when)) {
        auto it = retire_counts.find(onr->rip);
        hit = it != retire_counts.end() && it->second >= onr->occurrence;
      }
      if (hit) {
        armed[i] = 1;
        ready.push_back(i);
      }
    }
  };

  while (!cpu.halted && result.steps < ctl.fuel) {
    arm();
    // Interrupts wait for instruction boundaries where no transfer is in
    // flight: with a faulting fetch pending, rip already names an address in
    // another compartment and the handoff frame could not guarantee the
    // handler's iretq a fault on the way back.
    if (!ready.empty() && cpu.rflags_if &&
        !fetch_would_fault(m, cpu, cpu.rip)) {
      const auto& inj = ctl.injections[ready.front()];
      ready.pop_front();
      deliver_interrupt(m, cpu, inj.vector, inj.has_error_code,
                        inj.error_code);
      if (cpu.halted) break;
    }
    std::size_t before = m.trace.size();
    step(m, cpu);
    result.steps++;
    if (watch_retires)
      for (std::size_t i = before; i < m.trace.size(); ++i)
        if (m.trace[i].as<RetiredEvent>()) retire_counts[m.trace[i].rip]++;
  }
  result.reason = cpu.halted ? StopReason::Halted : StopReason::FuelExhausted;
  return result;
}

}  // namespace cmptsim
