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

#include "cmptsim/sentry.hpp"

#include "cmptsim/gate.hpp"
#include "internal.hpp"

namespace cmptsim::sentry {

using namespace cmptsim::detail;

namespace {

// The register set parked across an interrupt: rax, the six argument
// registers and the six callee-saved registers.
constexpr std::size_t kParkedRegs = 13;

bool push_parked_registers(Machine& m, CpuState& cpu) {
  if (!push_word(m, cpu, cpu.rax)) return false;
  for (auto v : cpu.arg_regs)
    if (!push_word(m, cpu, v)) return false;
  for (auto v : cpu.callee_saved)
    if (!push_word(m, cpu, v)) return false;
  return true;
}

bool pop_parked_registers(Machine& m, CpuState& cpu) {
  for (std::size_t i = cpu.callee_saved.size(); i-- > 0;) {
    auto v = pop_word(m, cpu);
    if (!v) return false;
    cpu.callee_saved[i] = *v;
  }
  for (std::size_t i = cpu.arg_regs.size(); i-- > 0;) {
    auto v = pop_word(m, cpu);
    if (!v) return false;
    cpu.arg_regs[i] = *v;
  }
  auto v = pop_word(m, cpu);
  if (!v) return false;
  cpu.rax = *v;
  return true;
}

// Saved-stack-pointer stacks in the shared read-write region. Call entries
// peek the callee's top, returns pop the caller's; interrupt forwarding
// pushes the interrupted compartment's pointer and the interrupt return pops
// it. Any value outside the stride means guest corruption; the transition
// aborts to the hypervisor.
std::optional<std::uint64_t> rw_depth(Machine& m, CpuState& cpu,
                                      std::uint32_t c) {
  auto d = must_read(m, cpu, m.layout.rw_depth_cell(c));
  if (!d) return std::nullopt;
  if (*d == 0 || *d > kRwDepth) {
    fail_internal(m, cpu, "corrupted saved-pointer stack for compartment " +
                              std::to_string(c));
    return std::nullopt;
  }
  return d;
}

bool rw_push(Machine& m, CpuState& cpu, std::uint32_t c, std::uint64_t v) {
  auto d = rw_depth(m, cpu, c);
  if (!d) return false;
  if (*d == kRwDepth) {
    fail_internal(m, cpu, "saved-pointer stack overflow for compartment " +
                              std::to_string(c));
    return false;
  }
  if (!must_write(m, cpu, m.layout.rw_slot(c, *d), v)) return false;
  return must_write(m, cpu, m.layout.rw_depth_cell(c), *d + 1);
}

std::optional<std::uint64_t> rw_peek(Machine& m, CpuState& cpu,
                                     std::uint32_t c) {
  auto d = rw_depth(m, cpu, c);
  if (!d) return std::nullopt;
  return must_read(m, cpu, m.layout.rw_slot(c, *d - 1));
}

std::optional<std::uint64_t> rw_pop(Machine& m, CpuState& cpu,
                                    std::uint32_t c) {
  auto d = rw_depth(m, cpu, c);
  if (!d) return std::nullopt;
  auto v = must_read(m, cpu, m.layout.rw_slot(c, *d - 1));
  if (!v) return std::nullopt;
  if (!must_write(m, cpu, m.layout.rw_depth_cell(c), *d - 1))
    return std::nullopt;
  return v;
}

bool rw_set_top(Machine& m, CpuState& cpu, std::uint32_t c, std::uint64_t v) {
  auto d = rw_depth(m, cpu, c);
  if (!d) return false;
  return must_write(m, cpu, m.layout.rw_slot(c, *d - 1), v);
}

struct RowEntry {
  Addr callee = 0;
  std::uint32_t target = 0;
  policy::ExecutionContext context;
};

/// Scans the active compartment's read-only row, which is mapped at the same
/// GVA everywhere but backed by a per-compartment host page.
std::optional<RowEntry> row_lookup(Machine& m, CpuState& cpu, Addr callee,
                                   bool check_context) {
  Addr base = m.layout.ro_row_gva;
  auto count = must_read(m, cpu, base + 8);
  if (!count) return std::nullopt;
  for (std::uint64_t i = 0; i < *count; ++i) {
    Addr at = base + 16 + i * 32;
    auto gva = must_read(m, cpu, at);
    auto target = must_read(m, cpu, at + 8);
    auto kind = must_read(m, cpu, at + 16);
    auto euid = must_read(m, cpu, at + 24);
    if (!gva || !target || !kind || !euid) return std::nullopt;
    if (*gva != callee) continue;
    policy::ExecutionContext ctx = *kind == 0
                                       ? policy::ExecutionContext::any_ctx()
                                       : policy::ExecutionContext::exact(*euid);
    if (check_context && !ctx.matches(cpu.euid)) continue;
    return RowEntry{*gva, static_cast<std::uint32_t>(*target), ctx};
  }
  return std::nullopt;
}

ControlTransfer call_path(Machine& m, CpuState& cpu, Addr frame_base) {
  auto callee = must_read(m, cpu, frame_base + kFrameRip);
  auto frame_rsp = must_read(m, cpu, frame_base + kFrameRsp);
  if (!callee || !frame_rsp) return ControlTransfer::ViolationTrap;
  auto retaddr = must_read(m, cpu, *frame_rsp);
  if (!retaddr) return ControlTransfer::ViolationTrap;

  // The handler learns its identity from its own row image; the row is the
  // only per-compartment data it can see.
  auto row_id = must_read(m, cpu, m.layout.ro_row_gva);
  if (!row_id) return ControlTransfer::ViolationTrap;

  // The execution context narrows the target only when leaving the default
  // compartment; elsewhere the compartment id already implies it.
  bool from_default = *row_id == 0;
  auto entry = row_lookup(m, cpu, *callee, from_default);
  if (cpu.halted) return ControlTransfer::ViolationTrap;
  if (!entry) {
    gate::handle_vmcall_violation(
        m, cpu,
        {*callee, *callee, cpu.current_ept, AccessKind::Execute,
         "call target not in can_call list"});
    return ControlTransfer::ViolationTrap;
  }

  std::uint32_t caller = static_cast<std::uint32_t>(*row_id);
  for (auto v : cpu.callee_saved)
    if (!push_word(m, cpu, v)) return ControlTransfer::ViolationTrap;
  if (!rw_push(m, cpu, caller, cpu.rsp)) return ControlTransfer::ViolationTrap;

  switch_ept(m, cpu, entry->target, SwitchKind::Call, *callee);

  auto callee_sp = rw_peek(m, cpu, entry->target);
  if (!callee_sp) return ControlTransfer::ViolationTrap;
  cpu.rsp = *callee_sp;

  // Callee stack, top down: caller id, call magic, caller return address,
  // then a frame whose iretq lands on the callee's first instruction. The
  // return address sits where a plain call would have put it, so the
  // callee's ret faults back here.
  if (!push_word(m, cpu, caller)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, kMagicCall)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, *retaddr)) return ControlTransfer::ViolationTrap;
  Addr ret_slot = cpu.rsp;
  bool callee_if = m.irq_enabled[entry->target] != 0;
  if (!push_word(m, cpu, kSsPlaceholder)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, ret_slot)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, rflags_word(callee_if)))
    return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, kCsPlaceholder)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, *callee)) return ControlTransfer::ViolationTrap;

  cpu.ve_info.mask = false;
  if (!do_iretq(m, cpu)) return ControlTransfer::ViolationTrap;
  return ControlTransfer::ToCallee;
}

ControlTransfer return_path(Machine& m, CpuState& cpu, Addr frame_base) {
  auto retaddr = must_read(m, cpu, frame_base + kFrameRip);
  auto frame_rsp = must_read(m, cpu, frame_base + kFrameRsp);
  if (!retaddr || !frame_rsp) return ControlTransfer::ViolationTrap;

  // Drop the frame and the magic word in one move.
  cpu.rsp = *frame_rsp + kWordSize;
  cpu.ve_info.mask = false;

  auto caller = pop_word(m, cpu);
  if (!caller) return ControlTransfer::ViolationTrap;
  if (*caller >= m.compartment_count()) {
    gate::handle_vmcall_violation(
        m, cpu,
        {*retaddr, 0, cpu.current_ept, AccessKind::Execute,
         "corrupted caller compartment id " + std::to_string(*caller)});
    return ControlTransfer::ViolationTrap;
  }

  // The callee stack is clean again; remember it for the next entry.
  std::uint32_t callee_cmpt = cpu.current_ept;
  if (!rw_set_top(m, cpu, callee_cmpt, cpu.rsp))
    return ControlTransfer::ViolationTrap;

  switch_ept(m, cpu, static_cast<std::uint32_t>(*caller), SwitchKind::Ret,
             *retaddr);

  auto caller_sp = rw_pop(m, cpu, cpu.current_ept);
  if (!caller_sp) return ControlTransfer::ViolationTrap;
  cpu.rsp = *caller_sp;

  // Pop the callee-saved registers; rax carries the callee's return value.
  for (std::size_t i = cpu.callee_saved.size(); i-- > 0;) {
    auto v = pop_word(m, cpu);
    if (!v) return ControlTransfer::ViolationTrap;
    cpu.callee_saved[i] = *v;
  }

  // The call-time frame is still on the caller stack. Point its rip at the
  // caller return address and step its rsp over the return-address slot the
  // original call pushed.
  Addr frame = cpu.rsp;
  auto old_rsp = must_read(m, cpu, frame + kFrameRsp);
  if (!old_rsp) return ControlTransfer::ViolationTrap;
  if (!must_write(m, cpu, frame + kFrameRip, *retaddr))
    return ControlTransfer::ViolationTrap;
  if (!must_write(m, cpu, frame + kFrameRsp, *old_rsp + kWordSize))
    return ControlTransfer::ViolationTrap;

  if (!do_iretq(m, cpu)) return ControlTransfer::ViolationTrap;
  return ControlTransfer::ToCaller;
}

ControlTransfer interrupt_return_path(Machine& m, CpuState& cpu,
                                      Addr frame_base, bool has_error_code) {
  auto frame_rsp = must_read(m, cpu, frame_base + kFrameRsp);
  auto saved_rip = must_read(m, cpu, frame_base + kFrameRip);
  if (!frame_rsp || !saved_rip) return ControlTransfer::ViolationTrap;
  auto cmpt = must_read(m, cpu, *frame_rsp + kWordSize);
  if (!cmpt) return ControlTransfer::ViolationTrap;
  if (*cmpt >= m.compartment_count()) {
    gate::handle_vmcall_violation(
        m, cpu,
        {*saved_rip, 0, cpu.current_ept, AccessKind::Execute,
         "corrupted interrupted compartment id " + std::to_string(*cmpt)});
    return ControlTransfer::ViolationTrap;
  }

  cpu.ve_info.mask = false;
  // saved_rip is whatever the handler left in the frame it returned through,
  // so handler-side fixups propagate to the interrupted compartment.
  switch_ept(m, cpu, static_cast<std::uint32_t>(*cmpt), SwitchKind::Iret,
             *saved_rip);

  auto sp = rw_pop(m, cpu, cpu.current_ept);
  if (!sp) return ControlTransfer::ViolationTrap;
  cpu.rsp = *sp;

  Addr orig_frame =
      cpu.rsp + kParkedRegs * kWordSize + (has_error_code ? kWordSize : 0);
  if (!must_write(m, cpu, orig_frame + kFrameRip, *saved_rip))
    return ControlTransfer::ViolationTrap;

  if (!pop_parked_registers(m, cpu)) return ControlTransfer::ViolationTrap;
  if (has_error_code) cpu.rsp += kWordSize;  // skip the hardware error code

  if (!do_iretq(m, cpu)) return ControlTransfer::ViolationTrap;
  return ControlTransfer::ToInterrupted;
}

}  // namespace

ControlTransfer ve_handler(Machine& m, CpuState& cpu) {
  Addr frame_base = cpu.rsp;

  // Data faults carry no transition semantics; report them.
  if (cpu.ve_info.qualification != AccessKind::Execute) {
    gate::handle_vmcall_violation(
        m, cpu,
        {cpu.ve_info.faulting_gva, cpu.ve_info.faulting_gpa, cpu.current_ept,
         cpu.ve_info.qualification, "access outside compartment grants"});
    return ControlTransfer::ViolationTrap;
  }

  auto frame_rsp = must_read(m, cpu, frame_base + kFrameRsp);
  if (!frame_rsp) return ControlTransfer::ViolationTrap;
  auto key = must_read(m, cpu, *frame_rsp);
  if (!key) return ControlTransfer::ViolationTrap;

  if (*key == kMagicCall) return return_path(m, cpu, frame_base);
  if (*key == kMagicIntNoErr)
    return interrupt_return_path(m, cpu, frame_base, false);
  if (*key == kMagicIntErr)
    return interrupt_return_path(m, cpu, frame_base, true);
  return call_path(m, cpu, frame_base);
}

ControlTransfer interrupt_sentry(Machine& m, CpuState& cpu) {
  if (!cpu.inflight_interrupt) {
    halt(cpu, "interrupt forwarding entry reached with no interrupt in flight");
    return ControlTransfer::ViolationTrap;
  }
  PendingInterrupt intr = *cpu.inflight_interrupt;
  cpu.inflight_interrupt.reset();

  Addr frame_base = cpu.rsp + (intr.has_error_code ? kWordSize : 0);
  auto interrupted_rip = must_read(m, cpu, frame_base + kFrameRip);
  if (!interrupted_rip) return ControlTransfer::ViolationTrap;
  std::uint64_t error_code = 0;
  if (intr.has_error_code) {
    auto e = must_read(m, cpu, cpu.rsp);
    if (!e) return ControlTransfer::ViolationTrap;
    error_code = *e;
  }

  std::uint32_t interrupted = cpu.current_ept;
  if (!push_parked_registers(m, cpu)) return ControlTransfer::ViolationTrap;
  if (!rw_push(m, cpu, interrupted, cpu.rsp))
    return ControlTransfer::ViolationTrap;

  // Always start from the top of the shared interrupt stack; stale values
  // other compartments may have written there get overwritten.
  cpu.rsp = m.layout.int_stack_top();
  if (!push_word(m, cpu, interrupted)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu,
                 intr.has_error_code ? kMagicIntErr : kMagicIntNoErr))
    return ControlTransfer::ViolationTrap;
  Addr magic_slot = cpu.rsp;

  // The frame the handler returns through: rip stays in the interrupted
  // compartment so the handler's iretq faults straight back here, and rsp
  // designates the magic slot the dispatcher reads.
  if (!push_word(m, cpu, kSsPlaceholder)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, magic_slot)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, rflags_word(false)))
    return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, kCsPlaceholder)) return ControlTransfer::ViolationTrap;
  if (!push_word(m, cpu, *interrupted_rip)) return ControlTransfer::ViolationTrap;
  if (intr.has_error_code) {
    if (!push_word(m, cpu, error_code)) return ControlTransfer::ViolationTrap;
    cpu.error_code_above_handler = true;
  }

  auto handler_slot = m.layout.idt_gva + intr.vector * kWordSize;
  switch_ept(m, cpu, 0, SwitchKind::Int, 0);
  auto handler = must_read(m, cpu, handler_slot);  // original handlers now
  if (!handler) return ControlTransfer::ViolationTrap;
  cpu.rip = *handler;
  return ControlTransfer::ToHandler;
}

}  // namespace cmptsim::sentry
