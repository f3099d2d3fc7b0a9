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

#include <vector>

#include "cmptsim/machine.hpp"
#include "cmptsim/policy.hpp"

namespace cmptsim::gate {

struct InitOptions {
  /// Content pages that belong to the default compartment but carry no
  /// policy symbol (e.g. scenario driver code). Mapped RWX in EPT 0 only.
  std::vector<Addr> extra_default_pages;
};

/// Compiles the access matrix into per-compartment EPTs, the EPTP list, the
/// pinned translation table and the switching regions:
///  - EPT 0 maps the declared guest space RWX minus pages private to other
///    compartments; pages its own row shares keep the row's permissions,
///  - every other EPT maps exactly its row's pages with the row's
///    permissions,
///  - pinned entries cover every page owned by a non-default compartment,
///  - handler code, the per-compartment read-only rows, the shared
///    read-write region, the interrupt stack and one stack page per
///    compartment are placed per the layout.
///
/// Compartment ids must be dense 0..n-1 (the id doubles as the EPTP index).
/// Errors: sparse ids, more than 512 compartments, layout diagnostics of
/// severity error, a mapped page colliding with a magic discriminator.
void init_compartments(Machine& m, const policy::AccessMatrix& matrix,
                       const policy::SymbolTable& symtab,
                       const InitOptions& opts = {});

/// Repoints every non-default EPT's IDT page at an image whose vectors lead
/// to the interrupt forwarding entry; EPT 0 keeps the original handlers.
void install_interrupt_sentries(Machine& m);

/// Writes a handler address into the original IDT image.
void bind_interrupt_handler(Machine& m, std::uint32_t vector, Addr handler);

enum class Verdict { Allowed, PolicyViolation };

struct ViolationInfo {
  Addr gva = 0;
  Addr gpa = 0;
  std::uint32_t source = 0;
  AccessKind kind = AccessKind::Read;
  std::string what;
};

/// Hypervisor adjudication of a reported access: records the violation and
/// halts the offending virtual CPU.
Verdict handle_vmcall_violation(Machine& m, CpuState& cpu,
                                const ViolationInfo& info);

}  // namespace cmptsim::gate
