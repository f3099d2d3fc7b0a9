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

#include "cmptsim/trace.hpp"

#include <sstream>

namespace cmptsim {

const char* to_string(SwitchKind k) {
  switch (k) {
    case SwitchKind::Call: return "call";
    case SwitchKind::Ret: return "ret";
    case SwitchKind::Int: return "int";
    case SwitchKind::Iret: return "iret";
    case SwitchKind::Vmfunc: return "vmfunc";
  }
  return "?";
}

std::string to_string(const Instruction& i) {
  std::ostringstream os;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CallInstr>) {
          os << "call " << hex(v.target);
        } else if constexpr (std::is_same_v<T, RetInstr>) {
          os << "ret";
        } else if constexpr (std::is_same_v<T, ReadInstr>) {
          os << "read " << hex(v.gva);
        } else if constexpr (std::is_same_v<T, WriteInstr>) {
          os << "write " << hex(v.gva) << " " << v.value;
        } else if constexpr (std::is_same_v<T, VmfuncInstr>) {
          os << "vmfunc " << v.index;
        } else if constexpr (std::is_same_v<T, VmcallInstr>) {
          os << "vmcall";
        } else if constexpr (std::is_same_v<T, IretqInstr>) {
          os << "iretq";
        } else if constexpr (std::is_same_v<T, NopInstr>) {
          os << "nop";
        } else if constexpr (std::is_same_v<T, SetEuidInstr>) {
          os << "setuid " << v.euid;
        } else if constexpr (std::is_same_v<T, HandlerBodyInstr>) {
          os << "handlerbody " << v.tag;
        } else if constexpr (std::is_same_v<T, HaltInstr>) {
          os << "halt";
        }
      },
      i);
  return os.str();
}

std::string format_event(const TraceEvent& ev) {
  std::ostringstream os;
  os << ev.step << " | ";
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RetiredEvent>) {
          os << "retired | ept=" << ev.ept << " rip=" << hex(ev.rip) << " "
             << to_string(v.instr);
        } else if constexpr (std::is_same_v<T, VeEvent>) {
          os << "ve | qual=" << to_string(v.info.qualification)
             << " gva=" << hex(v.info.faulting_gva)
             << " gpa=" << hex(v.info.faulting_gpa)
             << " eptp=" << v.info.eptp_index;
        } else if constexpr (std::is_same_v<T, VmExitEvent>) {
          os << "vmexit | ept=" << ev.ept << " reason=" << v.reason;
        } else if constexpr (std::is_same_v<T, SwitchEvent>) {
          os << "switch | from=" << v.from << " to=" << v.to
             << " kind=" << to_string(v.kind) << " target=" << hex(v.target);
        } else if constexpr (std::is_same_v<T, ViolationEvent>) {
          os << "violation | ept=" << ev.ept << " " << v.details;
        } else if constexpr (std::is_same_v<T, InterruptEvent>) {
          os << "interrupt | ept=" << ev.ept << " vector=" << v.vector;
        }
      },
      ev.data);
  return os.str();
}

std::string format_trace(const Trace& trace) {
  std::string out;
  for (const auto& ev : trace) {
    out += format_event(ev);
    out += '\n';
  }
  return out;
}

}  // namespace cmptsim
