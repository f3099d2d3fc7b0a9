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
#include <vector>

#include "cmptsim/cpu.hpp"
#include "cmptsim/gate.hpp"
#include "cmptsim/machine.hpp"
#include "cmptsim/policy.hpp"

namespace testutil {

using namespace cmptsim;

struct World {
  Machine machine;
  CpuState cpu;
};

/// Machine built from policy text and a programmatic symbol table, with the
/// virtual CPU parked on compartment 0's stack.
inline World make_world(const std::string& policy_text,
                        const std::vector<policy::Symbol>& symbols,
                        const std::vector<Addr>& extra_pages = {}) {
  policy::SymbolTable symtab;
  for (const auto& s : symbols) symtab.add(s);
  auto matrix = policy::resolve(policy::parse_policy(policy_text), symtab);
  World w;
  gate::InitOptions opts;
  opts.extra_default_pages = extra_pages;
  gate::init_compartments(w.machine, matrix, symtab, opts);
  gate::install_interrupt_sentries(w.machine);
  w.cpu.rsp = w.machine.layout.stack_top(0);
  return w;
}

inline std::uint64_t count_switches(const Trace& trace, SwitchKind kind) {
  std::uint64_t n = 0;
  for (const auto& ev : trace)
    if (const auto* sw = ev.as<SwitchEvent>())
      if (sw->kind == kind) n++;
  return n;
}

inline std::uint64_t count_retired(const Trace& trace) {
  std::uint64_t n = 0;
  for (const auto& ev : trace)
    if (ev.as<RetiredEvent>()) n++;
  return n;
}

template <typename T>
inline std::uint64_t count_events(const Trace& trace) {
  std::uint64_t n = 0;
  for (const auto& ev : trace)
    if (ev.as<T>()) n++;
  return n;
}

}  // namespace testutil
