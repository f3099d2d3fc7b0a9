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

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmptsim/base.hpp"
#include "cmptsim/memory.hpp"
#include "cmptsim/policy.hpp"
#include "cmptsim/trace.hpp"

namespace cmptsim {

// Magic discriminators pushed by the switching protocol. Drawn from the
// non-canonical range so no mapped code or data address can collide with
// them (checked at compartment setup).
inline constexpr std::uint64_t kMagicCall = 0x7FFFF00D00000001ULL;
inline constexpr std::uint64_t kMagicIntNoErr = 0x7FFFF00D00000002ULL;
inline constexpr std::uint64_t kMagicIntErr = 0x7FFFF00D00000003ULL;

// Inert segment selector placeholders for hardware frames.
inline constexpr std::uint64_t kCsPlaceholder = 0x08;
inline constexpr std::uint64_t kSsPlaceholder = 0x10;
inline constexpr std::uint64_t kRflagsIfBit = 1ULL << 9;
inline constexpr std::uint64_t kRflagsBase = 0x2;

// The shared read-write region keeps one small stack of saved stack
// pointers per compartment, preloaded with the compartment's stack base.
// Nested entries (a handler calling across compartments while a call is in
// flight) push and pop; the region never stores anything but pointers.
inline constexpr std::uint64_t kRwStride = 16;     // cells per compartment
inline constexpr std::uint64_t kRwDepth = kRwStride - 1;
inline constexpr std::uint64_t kRwRegionPages =
    kEptpCapacity * kRwStride * kWordSize / kPageSize;

/// Fixed guest-virtual plan for the regions the gate manager owns. Content
/// pages use identity GVA=GPA=HPA mappings; the per-compartment tables
/// (access-matrix rows, IDT images) alias the same GPA onto distinct host
/// pages carved from shadow_hpa_base.
struct GateLayout {
  Addr ve_entry = 0x7F0000000000;        // unified exception handler entry
  Addr int_entry = 0x7F0000001000;       // interrupt forwarding entry
  Addr ro_row_gva = 0x7F0000002000;      // per-compartment read-only row
  Addr rw_region_gva = 0x7F0000010000;   // saved stack pointer stacks
  Addr int_stack_gva = 0x7F0000004000;   // shared interrupt stack page
  Addr idt_gva = 0x7F0000005000;         // interrupt descriptor table
  Addr stacks_gva = 0x7F0000100000;      // compartment c stack page at +c*4K
  Addr shadow_hpa_base = 0xF00000000000; // host pages for aliased tables

  std::uint32_t compartments = 0;

  Addr stack_page(std::uint32_t c) const { return stacks_gva + c * kPageSize; }
  Addr stack_top(std::uint32_t c) const { return stack_page(c) + kPageSize; }
  Addr int_stack_top() const { return int_stack_gva + kPageSize; }
  Addr rw_base(std::uint32_t c) const {
    return rw_region_gva + c * kRwStride * kWordSize;
  }
  Addr rw_depth_cell(std::uint32_t c) const { return rw_base(c); }
  Addr rw_slot(std::uint32_t c, std::uint64_t i) const {
    return rw_base(c) + (1 + i) * kWordSize;
  }
  Addr row_hpa(std::uint32_t c) const {
    return shadow_hpa_base + c * kPageSize;
  }
  Addr idt_alt_hpa() const {
    return shadow_hpa_base + kEptpCapacity * kPageSize;
  }
};

struct PendingInterrupt {
  std::uint32_t vector = 0;
  bool has_error_code = false;
  std::uint64_t error_code = 0;
};

struct CpuState {
  Addr rip = 0;
  Addr rsp = 0;
  std::uint64_t rax = 0;
  std::array<std::uint64_t, 6> arg_regs{};     // pass through switches untouched
  std::array<std::uint64_t, 6> callee_saved{}; // saved/restored by the handler
  bool rflags_if = true;
  std::uint32_t current_ept = 0;
  std::uint64_t euid = 0;
  bool halted = false;
  std::string halt_reason;
  VeInfoArea ve_info;

  // In-flight exception plumbing the hardware would carry in microstate.
  std::optional<PendingInterrupt> inflight_interrupt;
  bool error_code_above_handler = false;
};

/// The whole simulated system. Single-threaded per instance; a Machine is a
/// self-contained value.
struct Machine {
  PhysicalMemory phys;
  GuestPageTable guest_pt;
  HlatTable hlat;
  std::vector<Ept> epts;
  EptpList eptp;
  GateLayout layout;
  policy::AccessMatrix matrix;
  std::vector<char> irq_enabled;  // per compartment: IF in synthesized frames
  Trace trace;
  Counters counters;
  std::uint64_t current_step = 0;
  bool initialized = false;

  std::uint32_t compartment_count() const { return layout.compartments; }
};

/// Stage 1+2 of the pipeline: pinned translations first (when enabled),
/// otherwise the guest page table. Empty when the walk misses.
std::optional<Addr> resolve_gpa(const Machine& m, Addr gva);

/// Full two-stage translation through the active EPT. An EPT violation
/// becomes VeDelivered (information area written, mask set) only when the
/// page does not suppress delivery and the mask is clear; otherwise VmExit.
TranslationOutcome translate(const Machine& m, CpuState& cpu, Addr gva,
                             AccessKind access);

/// Side-effect-free probe: would fetching gva fault in the active EPT? Used
/// to hold interrupt delivery while a cross-compartment transfer is in
/// flight (the handoff frame must point at an address the handler's iretq
/// cannot reach).
bool fetch_would_fault(const Machine& m, const CpuState& cpu, Addr gva);

// Guest-visible accessors: every access goes through translate() against the
// active EPT. On a fault the returned outcome carries the details and the
// caller decides how to deliver it.
struct GuestValue {
  TranslationOutcome outcome;
  std::uint64_t value = 0;
  bool ok() const { return std::holds_alternative<TranslationOk>(outcome); }
};

GuestValue guest_read(Machine& m, CpuState& cpu, Addr gva);
TranslationOutcome guest_write(Machine& m, CpuState& cpu, Addr gva,
                               std::uint64_t value);

// Hypervisor-level accessors: direct host-physical access, no translation.
void host_write_word(Machine& m, Addr hpa, std::uint64_t value);
std::uint64_t host_read_word(const Machine& m, Addr hpa);
void host_write_instruction(Machine& m, Addr hpa, Instruction instr);

/// Writes one program, one instruction per cell, at identity-mapped content
/// pages (HPA == GVA).
void load_program(Machine& m, Addr gva, std::span<const Instruction> program);

void append_event(Machine& m, const CpuState& cpu,
                  std::variant<RetiredEvent, VeEvent, VmExitEvent, SwitchEvent,
                               ViolationEvent, InterruptEvent>
                      data);

}  // namespace cmptsim
