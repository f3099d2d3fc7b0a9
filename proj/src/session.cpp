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

#include "cmptsim/session.hpp"

#include <fstream>
#include <sstream>

#include "cmptsim/attack.hpp"
#include "cmptsim/cpu.hpp"
#include "cmptsim/gate.hpp"
#include "cmptsim/scenario.hpp"

namespace cmptsim {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string summarize(const Machine& m, const CpuState& cpu,
                      const RunResult& result) {
  std::ostringstream os;
  os << "run summary\n";
  os << "  steps=" << result.steps << " stop="
     << (result.reason == StopReason::Halted ? "halted" : "fuel-exhausted");
  if (result.reason == StopReason::Halted) os << " (" << cpu.halt_reason << ")";
  os << "\n";
  os << "  final: rip=" << hex(cpu.rip) << " rsp=" << hex(cpu.rsp)
     << " rax=" << cpu.rax << " ept=" << cpu.current_ept
     << " euid=" << cpu.euid << " if=" << (cpu.rflags_if ? 1 : 0) << "\n";
  os << "  events: retired=" << m.counters.retired
     << " switches=" << m.counters.switches << " ve=" << m.counters.ve_delivered
     << " vmexits=" << m.counters.vm_exits
     << " violations=" << m.counters.violations
     << " interrupts=" << m.counters.interrupts << "\n";
  return os.str();
}

std::string one_line(const cost::Report& r) {
  std::ostringstream os;
  os << (r.config.refined ? "refined" : "baseline")
     << " " << cost::to_string(r.workload.direction)
     << " payload=" << r.workload.payload_bytes
     << "B packets=" << r.workload.packets
     << " n=" << r.config.driver_compartments
     << " switches=" << r.total_switches << " cycles=" << r.cycles << "\n";
  return os.str();
}

}  // namespace

ExitStatus Session::check(const std::string& policy_path,
                          const std::string& symbols_path) {
  output_.clear();
  error_.clear();
  try {
    auto policies = policy::parse_policy(read_file(policy_path));
    auto symtab = policy::parse_symbols(read_file(symbols_path));
    auto matrix = policy::resolve(policies, symtab);
    auto diags = policy::check_layout(matrix, symtab);
    std::ostringstream os;
    for (const auto& d : diags) os << policy::to_string(d) << "\n";
    os << "compartments: " << matrix.rows.size() << ", diagnostics: "
       << diags.size() << (policy::has_errors(diags) ? " (errors present)"
                                                     : " (no errors)")
       << "\n";
    output_ = os.str();
    return policy::has_errors(diags) ? ExitStatus::Fail : ExitStatus::Ok;
  } catch (const Error& e) {
    error_ = e.what();
    return ExitStatus::BadInput;
  }
}

ExitStatus Session::run_scenario(const std::string& policy_path,
                                 const std::string& symbols_path,
                                 const std::string& scenario_path,
                                 const RunOptions& options) {
  output_.clear();
  error_.clear();
  try {
    auto policies = policy::parse_policy(read_file(policy_path));
    auto symtab = policy::parse_symbols(read_file(symbols_path));
    auto matrix = policy::resolve(policies, symtab);
    auto diags = policy::check_layout(matrix, symtab);
    if (policy::has_errors(diags)) {
      std::ostringstream os;
      for (const auto& d : diags) os << policy::to_string(d) << "\n";
      output_ = os.str();
      error_ = "policy layout errors";
      return ExitStatus::Fail;
    }
    auto scn = scenario::parse_scenario(read_file(scenario_path));
    auto inst = scenario::instantiate(scn, matrix, symtab, options.hlat);
    if (options.fuel) inst.ctl.fuel = options.fuel;
    auto result = run(inst.machine, inst.cpu, inst.ctl);

    std::ostringstream os;
    if (options.emit_trace) os << format_trace(inst.machine.trace);
    os << summarize(inst.machine, inst.cpu, result);
    output_ = os.str();
    return inst.machine.counters.violations ? ExitStatus::Fail : ExitStatus::Ok;
  } catch (const Error& e) {
    error_ = e.what();
    return ExitStatus::BadInput;
  }
}

ExitStatus Session::igc(const IgcOptions& options) {
  output_.clear();
  error_.clear();
  try {
    cost::CostTable table;
    if (!options.cost_table_path.empty())
      table = cost::CostTable::from_text(read_file(options.cost_table_path));
    table.validate();

    if (!options.sweep) {
      auto report =
          cost::simulate_datapath(options.config, options.workload, table);
      output_ = "crossing table\n" +
                cost::render(cost::crossing_table(options.config)) + "\n" +
                cost::render(report);
      return ExitStatus::Ok;
    }

    std::vector<cost::Report> reports;
    const unsigned payloads[] = {64, 128, 256, 512, 1024, 1472};
    for (bool refined : {false, true}) {
      for (auto dir : {cost::Direction::Tx, cost::Direction::Rx}) {
        for (unsigned payload : payloads) {
          cost::DataPathConfig config = options.config;
          config.refined = refined;
          config.driver_compartments = 1;
          cost::WorkloadSpec w;
          w.direction = dir;
          w.packets = 64;
          w.payload_bytes = payload;
          w.polls = 1;
          reports.push_back(cost::simulate_datapath(config, w, table));
        }
      }
    }
    for (unsigned n : {2u, 4u, 8u, 16u, 32u}) {
      cost::DataPathConfig config = options.config;
      config.refined = true;
      config.driver_compartments = n;
      cost::WorkloadSpec w;
      w.direction = cost::Direction::Tx;
      w.packets = 64;
      w.payload_bytes = 1472;
      w.polls = 1;
      reports.push_back(cost::simulate_datapath(config, w, table));
    }
    auto verdicts = cost::overhead_ordering(reports);

    std::ostringstream os;
    os << "baseline crossing table\n"
       << cost::render(cost::crossing_table({})) << "\n";
    cost::DataPathConfig refined_cfg = options.config;
    refined_cfg.refined = true;
    os << "refined crossing table\n"
       << cost::render(cost::crossing_table(refined_cfg)) << "\n";
    os << "sweep (" << reports.size() << " workloads)\n";
    for (const auto& r : reports) os << "  " << one_line(r);
    os << "\nordering verdicts\n" << cost::render(verdicts);
    output_ = os.str();
    return cost::all_pass(verdicts) ? ExitStatus::Ok : ExitStatus::Fail;
  } catch (const cost::ConsistencyError& e) {
    error_ = e.what();
    return ExitStatus::Fail;
  } catch (const Error& e) {
    error_ = e.what();
    return ExitStatus::BadInput;
  }
}

ExitStatus Session::attack(const std::string& name) {
  output_.clear();
  error_.clear();
  try {
    auto outcome = attack::run_attack(name);
    output_ = attack::render(outcome);
    return outcome.as_expected() ? ExitStatus::Ok : ExitStatus::Fail;
  } catch (const Error& e) {
    error_ = e.what();
    return ExitStatus::BadInput;
  }
}

}  // namespace cmptsim
