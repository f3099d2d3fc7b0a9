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

#include <cstdint>
#include <variant>
#include <vector>

#include "cmptsim/machine.hpp"

namespace cmptsim {

/// Executes one step: fetch through the active EPT, then either run the
/// native handler (when rip is a handler entry) or retire one instruction.
/// A fetch fault pushes the hardware frame, clears IF and redirects to the
/// handler entry; that delivery is the whole step. Events go to m.trace.
void step(Machine& m, CpuState& cpu);

/// Injects one vector now: pushes the hardware frame (plus error code when
/// the vector carries one), clears IF and vectors through the IDT image of
/// the active EPT. Callers must only deliver while IF is set.
void deliver_interrupt(Machine& m, CpuState& cpu, std::uint32_t vector,
                       bool has_error_code, std::uint64_t error_code = 0);

struct AfterStep { std::uint64_t step = 0; };
struct OnRetire {
  Addr rip = 0;
  std::uint64_t occurrence = 1;  // 1-based
};

struct Injection {
  std::variant<AfterStep, OnRetire> when;
  std::uint32_t vector = 0;
  bool has_error_code = false;
  std::uint64_t error_code = 0;
};

enum class StopReason { Halted, FuelExhausted };

struct RunControl {
  std::uint64_t fuel = 100000;
  std::vector<Injection> injections;
};

struct RunResult {
  StopReason reason = StopReason::Halted;
  std::uint64_t steps = 0;
};

/// Steps until halt or fuel exhaustion. Armed injections are delivered at
/// the first step boundary where IF is set.
RunResult run(Machine& m, CpuState& cpu, const RunControl& ctl = {});

}  // namespace cmptsim
