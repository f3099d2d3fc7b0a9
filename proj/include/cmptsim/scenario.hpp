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

#include <string>
#include <utility>
#include <vector>

#include "cmptsim/cpu.hpp"
#include "cmptsim/machine.hpp"
#include "cmptsim/policy.hpp"

namespace cmptsim::scenario {

struct ObjectDecl {
  std::string name;
  Addr gva = 0;
  std::uint64_t size = 0;
  std::vector<std::uint64_t> init_words;
};

struct ProgramDecl {
  std::string name;
  Addr gva = 0;
  std::vector<Instruction> body;
};

struct IrqFlag {
  std::uint32_t cmpt = 0;
  bool enabled = true;
};

/// Parsed scenario: memory objects, labeled programs, the entry point,
/// vector bindings and injection points. See the grammar in the repository
/// documentation.
struct Scenario {
  std::vector<ObjectDecl> objects;
  std::vector<ProgramDecl> programs;
  std::string entry;
  std::vector<std::pair<std::uint32_t, std::string>> handlers;
  std::vector<Injection> injections;
  std::vector<IrqFlag> irq_flags;
  std::uint64_t initial_euid = 0;
  std::uint64_t fuel = 100000;
};

Scenario parse_scenario(const std::string& text);

struct Instantiated {
  Machine machine;
  CpuState cpu;
  RunControl ctl;
};

/// Builds a ready-to-run machine: compartments from the resolved matrix,
/// scenario content loaded at its declared addresses. Scenario names that
/// exist in the symbol table must agree on address and fit inside the
/// symbol; unnamed content pages belong to the default compartment. The
/// entry point must lie in the default compartment.
Instantiated instantiate(const Scenario& s, const policy::AccessMatrix& matrix,
                         const policy::SymbolTable& symtab, bool hlat_enabled);

}  // namespace cmptsim::scenario
