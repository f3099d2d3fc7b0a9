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
#include <string>
#include <variant>
#include <vector>

#include "cmptsim/base.hpp"
#include "cmptsim/isa.hpp"
#include "cmptsim/memory.hpp"

namespace cmptsim {

enum class SwitchKind { Call, Ret, Int, Iret, Vmfunc };

const char* to_string(SwitchKind k);

struct RetiredEvent { Instruction instr; };
struct VeEvent { VeInfo info; };
struct VmExitEvent { std::string reason; };
struct SwitchEvent {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  SwitchKind kind = SwitchKind::Vmfunc;
  Addr target = 0;  // transfer destination, when meaningful
};
struct ViolationEvent { std::string details; };
struct InterruptEvent { std::uint32_t vector = 0; };

struct TraceEvent {
  std::uint64_t step = 0;
  std::uint32_t ept = 0;   // active EPT when the event happened (Switch: source)
  std::uint64_t euid = 0;
  Addr rip = 0;
  std::variant<RetiredEvent, VeEvent, VmExitEvent, SwitchEvent, ViolationEvent,
               InterruptEvent>
      data;

  template <typename T>
  const T* as() const { return std::get_if<T>(&data); }
};

using Trace = std::vector<TraceEvent>;

/// One event per line: "step# | event-kind | fields".
std::string format_event(const TraceEvent& ev);
std::string format_trace(const Trace& trace);

struct Counters {
  std::uint64_t retired = 0;
  std::uint64_t switches = 0;
  std::uint64_t ve_delivered = 0;
  std::uint64_t vm_exits = 0;
  std::uint64_t violations = 0;
  std::uint64_t interrupts = 0;
};

}  // namespace cmptsim
