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

// Command-line front end. Everything goes through the C interface in
// cmptsim.h; this file only parses flags and moves text around.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "cmptsim.h"

namespace {

int emit(csim_session* session, const std::string& report_path) {
  const char* out = csim_output(session);
  if (report_path.empty()) {
    std::cout << out;
  } else {
    std::ofstream f(report_path, std::ios::binary);
    if (!f) {
      std::cerr << "error: cannot write '" << report_path << "'\n";
      return CSIM_BAD_INPUT;
    }
    f << out;
  }
  const char* err = csim_error(session);
  if (err && *err) std::cerr << "error: " << err << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compartmentalization simulator"};
  app.require_subcommand(1);

  std::string policy_path, symbols_path, scenario_path, report_path;
  std::string cost_table_path;
  std::string hlat = "on", trace = "on";
  std::uint64_t fuel = 0;

  auto* check = app.add_subcommand("check", "validate a policy and symbol map");
  check->add_option("--policy", policy_path, "policy file")->required();
  check->add_option("--symbols", symbols_path, "symbol map file")->required();
  check->add_option("--report", report_path, "write output to a file");

  auto* run = app.add_subcommand("run", "simulate a scenario");
  run->add_option("--policy", policy_path, "policy file")->required();
  run->add_option("--symbols", symbols_path, "symbol map file")->required();
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--hlat", hlat, "pinned translations: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  run->add_option("--trace", trace, "emit the event trace: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  run->add_option("--fuel", fuel, "step limit (0: scenario default)");
  run->add_option("--report", report_path, "write output to a file");

  csim_igc_options igc_opts;
  csim_igc_options_init(&igc_opts);
  std::string direction = "tx";
  bool refined = false, int_in_driver = false, sweep = false;
  auto* igc = app.add_subcommand("igc", "driver data-path crossing model");
  igc->add_flag("--refined", refined, "refined compartment boundary");
  igc->add_option("--direction", direction, "tx|rx")
      ->check(CLI::IsMember({"tx", "rx"}));
  igc->add_option("--packets", igc_opts.packets, "packets in the workload");
  igc->add_option("--payload", igc_opts.payload_bytes, "payload bytes");
  igc->add_option("--polls", igc_opts.polls, "poll count");
  igc->add_option("--tx-batch", igc_opts.tx_cleanup_batch,
                  "cleanup batch size");
  igc->add_option("--rx-budget", igc_opts.rx_budget, "poll budget");
  igc->add_flag("--int-in-driver", int_in_driver,
                "leave interrupts enabled in the driver compartment");
  igc->add_option("--compartments", igc_opts.driver_compartments,
                  "driver compartment count");
  igc->add_option("--cost-table", cost_table_path, "cost table override file");
  igc->add_flag("--sweep", sweep, "payload and compartment sweep with verdicts");
  igc->add_option("--report", report_path, "write output to a file");

  std::string attack_name;
  auto* attack = app.add_subcommand("attack", "run a named attack demo");
  attack->add_option("name", attack_name,
                     "remap-hlat-on|remap-hlat-off|vmfunc-insert|"
                     "invalid-call|int-stack-corrupt")
      ->required();
  attack->add_option("--report", report_path, "write output to a file");

  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<csim_session, decltype(&csim_session_free)> session(
      csim_session_new(), &csim_session_free);
  if (!session) {
    std::cerr << "error: out of memory\n";
    return CSIM_BAD_INPUT;
  }

  csim_status status = CSIM_BAD_INPUT;
  if (check->parsed()) {
    status = csim_check(session.get(), policy_path.c_str(),
                        symbols_path.c_str());
  } else if (run->parsed()) {
    csim_run_options ro;
    csim_run_options_init(&ro);
    ro.hlat_enabled = hlat == "on";
    ro.emit_trace = trace == "on";
    ro.fuel = fuel;
    status = csim_run(session.get(), policy_path.c_str(), symbols_path.c_str(),
                      scenario_path.c_str(), &ro);
  } else if (igc->parsed()) {
    igc_opts.refined = refined;
    igc_opts.interrupts_in_driver = int_in_driver;
    igc_opts.sweep = sweep;
    igc_opts.direction = direction.c_str();
    if (!cost_table_path.empty())
      igc_opts.cost_table_path = cost_table_path.c_str();
    status = csim_igc(session.get(), &igc_opts);
  } else if (attack->parsed()) {
    status = csim_attack(session.get(), attack_name.c_str());
  }

  int emit_status = emit(session.get(), report_path);
  if (emit_status != 0) return emit_status;
  return status;
}
