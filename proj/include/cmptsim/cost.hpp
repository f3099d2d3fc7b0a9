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

#include <cstdint>
#include <string>
#include <vector>

#include "cmptsim/base.hpp"

namespace cmptsim::cost {

/// The simulated run and the closed-form model disagreed, or a data-path
/// scenario misbehaved; distinct from bad input.
class ConsistencyError : public Error {
public:
  using Error::Error;
};

/// Median operation latencies in cycles. Defaults are the measured values
/// the model is calibrated to; a "name value" override file can replace any
/// of them.
struct CostTable {
  std::uint64_t ud_oneway = 448;
  std::uint64_t ud_roundtrip = 790;
  std::uint64_t ve_oneway = 938;
  std::uint64_t ve_roundtrip = 1286;
  std::uint64_t ept_violation_oneway = 990;
  std::uint64_t ept_violation_roundtrip = 1318;
  std::uint64_t vmfunc = 142;
  std::uint64_t sentry_oneway = 1782;
  std::uint64_t sentry_roundtrip = 3592;
  std::uint64_t int_oneway = 642;
  std::uint64_t int_roundtrip = 2958;

  void validate() const;
  static CostTable from_text(const std::string& text);
};

/// Crossings pair into round trips; an odd residue costs one more one-way
/// transition.
std::uint64_t estimate_cycles(std::uint64_t crossings, const CostTable& table);

struct DataPathConfig {
  bool refined = false;
  unsigned tx_cleanup_batch = 128;
  unsigned rx_budget = 64;
  bool interrupts_in_driver = false;
  unsigned driver_compartments = 1;
};

enum class Direction { Tx, Rx };

const char* to_string(Direction d);

struct WorkloadSpec {
  Direction direction = Direction::Tx;
  unsigned packets = 128;       // must divide evenly across polls
  unsigned payload_bytes = 1472;
  unsigned polls = 1;
};

/// Per-path switch counts of the driver data path. Fractions are exact
/// (2/batch, 4/budget); *_rounded carries the figure as commonly quoted.
struct CrossingTable {
  double isr = 0;            // per interrupt
  double tx_submission = 0;  // per packet
  double tx_cleanup = 0;     // per packet
  double rx_small = 0;       // per packet, payload <= 256 B
  double rx_large = 0;       // per packet, payload  > 256 B
  double poll_min = 0;       // per poll
  double poll_max = 0;
  double tx_cleanup_rounded = 0;  // nonzero when the exact value is a fraction
  double rx_rounded = 0;
};

CrossingTable crossing_table(const DataPathConfig& config);

/// Switch totals grouped by which call crossed the boundary.
struct PathCounts {
  std::uint64_t isr = 0;
  std::uint64_t interrupt_delivery = 0;
  std::uint64_t tx_submission = 0;
  std::uint64_t tx_cleanup = 0;
  std::uint64_t rx_per_packet = 0;
  std::uint64_t rx_batch_helpers = 0;
  std::uint64_t poll_entry = 0;
  std::uint64_t poll_complete = 0;

  std::uint64_t total() const;
  bool operator==(const PathCounts&) const = default;
};

struct Report {
  DataPathConfig config;
  WorkloadSpec workload;
  unsigned interrupts = 0;
  PathCounts traced;    // counted from switch events of the simulated run
  PathCounts analytic;  // closed-form prediction
  bool consistent = false;

  // per-path figures in table accounting: the poll-exit crossing folds into
  // the RX per-packet figure, poll entry stays per poll
  double isr_per_interrupt = 0;
  double tx_submission_per_packet = 0;
  double tx_cleanup_per_packet = 0;
  double rx_per_packet_total = 0;
  double poll_entry_per_poll = 0;

  std::uint64_t total_switches = 0;
  std::uint64_t cycles = 0;
  double cycles_per_packet = 0;
};

/// Builds the two-compartment driver scenario (stub functions standing in
/// for each boundary symbol), executes the workload on the simulated
/// machine, and checks the trace-counted crossings against the analytic
/// prediction. Throws on a model inconsistency.
Report simulate_datapath(const DataPathConfig& config,
                         const WorkloadSpec& workload, const CostTable& table);

struct VerdictEntry {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Cross-report orderings that stand in for absolute throughput numbers:
/// refined never costs more cycles than unrefined on the same workload, the
/// per-packet overhead share never grows with payload size, transmit cycle
/// ratios match crossing ratios, and per-packet crossings are independent of
/// the compartment count.
std::vector<VerdictEntry> overhead_ordering(const std::vector<Report>& reports);

bool all_pass(const std::vector<VerdictEntry>& verdicts);

std::string render(const CrossingTable& table);
std::string render(const Report& report);
std::string render(const std::vector<VerdictEntry>& verdicts);

}  // namespace cmptsim::cost
