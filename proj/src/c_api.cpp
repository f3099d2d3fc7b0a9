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

#include "cmptsim.h"

#include <cstring>
#include <string>

#include "cmptsim/session.hpp"

struct csim_session {
  cmptsim::Session impl;
};

namespace {

csim_status to_status(cmptsim::ExitStatus s) {
  return static_cast<csim_status>(static_cast<int>(s));
}

}  // namespace

extern "C" {

const char* csim_version(void) { return "1.0.0"; }

csim_session* csim_session_new(void) { return new (std::nothrow) csim_session; }

void csim_session_free(csim_session* session) { delete session; }

const char* csim_output(const csim_session* session) {
  return session ? session->impl.output().c_str() : "";
}

const char* csim_error(const csim_session* session) {
  return session ? session->impl.error().c_str() : "no session";
}

csim_status csim_check(csim_session* session, const char* policy_path,
                       const char* symbols_path) {
  if (!session || !policy_path || !symbols_path) return CSIM_BAD_INPUT;
  return to_status(session->impl.check(policy_path, symbols_path));
}

void csim_run_options_init(csim_run_options* options) {
  if (!options) return;
  options->hlat_enabled = 1;
  options->emit_trace = 1;
  options->fuel = 0;
}

csim_status csim_run(csim_session* session, const char* policy_path,
                     const char* symbols_path, const char* scenario_path,
                     const csim_run_options* options) {
  if (!session || !policy_path || !symbols_path || !scenario_path)
    return CSIM_BAD_INPUT;
  csim_run_options defaults;
  csim_run_options_init(&defaults);
  if (!options) options = &defaults;
  cmptsim::Session::RunOptions ro;
  ro.hlat = options->hlat_enabled != 0;
  ro.emit_trace = options->emit_trace != 0;
  ro.fuel = options->fuel;
  return to_status(
      session->impl.run_scenario(policy_path, symbols_path, scenario_path, ro));
}

void csim_igc_options_init(csim_igc_options* options) {
  if (!options) return;
  options->refined = 0;
  options->tx_cleanup_batch = 128;
  options->rx_budget = 64;
  options->interrupts_in_driver = 0;
  options->driver_compartments = 1;
  options->direction = "tx";
  options->packets = 128;
  options->payload_bytes = 1472;
  options->polls = 1;
  options->sweep = 0;
  options->cost_table_path = nullptr;
}

csim_status csim_igc(csim_session* session, const csim_igc_options* options) {
  if (!session) return CSIM_BAD_INPUT;
  csim_igc_options defaults;
  csim_igc_options_init(&defaults);
  if (!options) options = &defaults;

  cmptsim::Session::IgcOptions io;
  io.config.refined = options->refined != 0;
  if (options->tx_cleanup_batch <= 0 || options->rx_budget <= 0 ||
      options->driver_compartments <= 0 || options->packets <= 0 ||
      options->payload_bytes <= 0 || options->polls <= 0)
    return CSIM_BAD_INPUT;
  io.config.tx_cleanup_batch = options->tx_cleanup_batch;
  io.config.rx_budget = options->rx_budget;
  io.config.interrupts_in_driver = options->interrupts_in_driver != 0;
  io.config.driver_compartments = options->driver_compartments;
  if (options->direction && std::strcmp(options->direction, "rx") == 0)
    io.workload.direction = cmptsim::cost::Direction::Rx;
  else if (!options->direction ||
           std::strcmp(options->direction, "tx") == 0)
    io.workload.direction = cmptsim::cost::Direction::Tx;
  else
    return CSIM_BAD_INPUT;
  io.workload.packets = options->packets;
  io.workload.payload_bytes = options->payload_bytes;
  io.workload.polls = options->polls;
  io.sweep = options->sweep != 0;
  if (options->cost_table_path) io.cost_table_path = options->cost_table_path;
  return to_status(session->impl.igc(io));
}

csim_status csim_attack(csim_session* session, const char* name) {
  if (!session || !name) return CSIM_BAD_INPUT;
  return to_status(session->impl.attack(name));
}

}  // extern "C"
