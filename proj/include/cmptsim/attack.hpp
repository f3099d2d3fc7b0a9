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

namespace cmptsim::attack {

/// Outcome of one named attack demonstration. Every scenario has an encoded
/// expected outcome; a flipped result means the enforcement model broke.
struct Outcome {
  std::string name;
  bool blocked = false;
  bool expected_blocked = false;
  std::string detail;

  bool as_expected() const { return blocked == expected_blocked; }
};

const std::vector<std::string>& names();

/// Runs one of: remap-hlat-on, remap-hlat-off, vmfunc-insert, invalid-call,
/// int-stack-corrupt. Throws on an unknown name.
Outcome run_attack(const std::string& name);

std::string render(const Outcome& outcome);

}  // namespace cmptsim::attack
