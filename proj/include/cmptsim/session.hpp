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

#include "cmptsim/cost.hpp"

namespace cmptsim {

/// Process exit mapping shared by the library entry points and the CLI:
/// 0 success, 1 policy violation or failed verdict, 2 bad input.
enum class ExitStatus : int { Ok = 0, Fail = 1, BadInput = 2 };

/// One front-end command per call; output() carries the rendered report or
/// trace, error() the diagnostic when a command did not succeed. Outputs are
/// deterministic: identical inputs render byte-identical text.
class Session {
public:
  ExitStatus check(const std::string& policy_path,
                   const std::string& symbols_path);

  struct RunOptions {
    bool hlat = true;
    bool emit_trace = true;
    std::uint64_t fuel = 0;  // 0: scenario default
  };
  ExitStatus run_scenario(const std::string& policy_path,
                          const std::string& symbols_path,
                          const std::string& scenario_path,
                          const RunOptions& options);

  struct IgcOptions {
    cost::DataPathConfig config;
    cost::WorkloadSpec workload;
    bool sweep = false;
    std::string cost_table_path;  // empty: built-in defaults
  };
  ExitStatus igc(const IgcOptions& options);

  ExitStatus attack(const std::string& name);

  const std::string& output() const { return output_; }
  const std::string& error() const { return error_; }

private:
  std::string output_;
  std::string error_;
};

}  // namespace cmptsim
