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

#include "cmptsim/machine.hpp"

namespace cmptsim::sentry {

enum class ControlTransfer {
  ToCallee,
  ToCaller,
  ToHandler,
  ToInterrupted,
  ViolationTrap,
};

/// The exception-handler half of the switching protocol. Runs when the CPU
/// fetches the handler entry after a delivered exception. Dispatches on the
/// word the exception frame's stack pointer designates: the call magic means
/// a cross-compartment return, the interrupt magics mean an interrupt
/// return, anything else is treated as a caller return address (call path).
/// Faults with a read/write qualification go straight to the hypervisor as
/// policy violations.
ControlTransfer ve_handler(Machine& m, CpuState& cpu);

/// The interrupt-forwarding half. Runs when a vector delivered outside the
/// default compartment lands on the forwarding entry: parks the interrupted
/// state on the shared interrupt stack and jumps to the original handler in
/// the default compartment.
ControlTransfer interrupt_sentry(Machine& m, CpuState& cpu);

}  // namespace cmptsim::sentry
