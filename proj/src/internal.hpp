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

#include <optional>

#include "cmptsim/machine.hpp"
#include "cmptsim/trace.hpp"

namespace cmptsim::detail {

// Hardware frame slots relative to the stack pointer after the push:
//   [rsp+0]  RIP   [rsp+8]  CS   [rsp+16] RFLAGS   [rsp+24] RSP   [rsp+32] SS
inline constexpr Addr kFrameRip = 0;
inline constexpr Addr kFrameCs = 8;
inline constexpr Addr kFrameRflags = 16;
inline constexpr Addr kFrameRsp = 24;
inline constexpr Addr kFrameSs = 32;
inline constexpr Addr kFrameBytes = 40;

inline std::uint64_t rflags_word(bool interrupt_flag) {
  return kRflagsBase | (interrupt_flag ? kRflagsIfBit : 0);
}

inline bool rflags_if(std::uint64_t rflags) {
  return (rflags & kRflagsIfBit) != 0;
}

/// Decrements rsp and stores through the active EPT. On a fault the virtual
/// CPU halts (a fault raised while manipulating exception state has no
/// second-level handler to go to) and false is returned.
bool push_word(Machine& m, CpuState& cpu, std::uint64_t value);

/// Loads through the active EPT and increments rsp. Halts on fault.
std::optional<std::uint64_t> pop_word(Machine& m, CpuState& cpu);

/// Read/write that halt the CPU on any non-Ok outcome. For protocol-internal
/// accesses to pages the layout guarantees are mapped.
std::optional<std::uint64_t> must_read(Machine& m, CpuState& cpu, Addr gva);
bool must_write(Machine& m, CpuState& cpu, Addr gva, std::uint64_t value);

/// Pushes the five-slot hardware frame for the current state with the given
/// faulting/interrupted rip. Returns false (halted) on a nested fault.
bool push_hardware_frame(Machine& m, CpuState& cpu, Addr rip);

/// Pops a hardware frame at rsp into rip/rsp/IF.
bool do_iretq(Machine& m, CpuState& cpu);

/// Switches the active EPT and logs the retirement plus the crossing.
void switch_ept(Machine& m, CpuState& cpu, std::uint32_t to, SwitchKind kind,
                Addr target);

void halt(CpuState& cpu, const std::string& reason);

/// Logs a hypervisor exit for a fault the protocol cannot recover from and
/// halts the virtual CPU.
void fail_internal(Machine& m, CpuState& cpu, const std::string& what);

/// Delivers a translation fault outcome raised by a data access or a fetch:
/// exception delivery for VeDelivered, hypervisor adjudication for VmExit,
/// a halting diagnostic for a guest page fault.
void deliver_fault(Machine& m, CpuState& cpu, const TranslationOutcome& out);

}  // namespace cmptsim::detail
