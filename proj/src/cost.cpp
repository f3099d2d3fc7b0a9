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

#include "cmptsim/cost.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "cmptsim/cpu.hpp"
#include "cmptsim/gate.hpp"
#include "cmptsim/machine.hpp"
#include "cmptsim/policy.hpp"

namespace cmptsim::cost {

void CostTable::validate() const {
  const std::uint64_t values[] = {
      ud_oneway,  ud_roundtrip,  ve_oneway,     ve_roundtrip,
      ept_violation_oneway,      ept_violation_roundtrip,
      vmfunc,     sentry_oneway, sentry_roundtrip,
      int_oneway, int_roundtrip};
  for (auto v : values)
    if (v == 0) throw Error("cost table entries must be positive");
  if (sentry_roundtrip < 2 * vmfunc)
    throw Error("sentry_roundtrip must cover two vmfunc transitions");
}

CostTable CostTable::from_text(const std::string& text) {
  CostTable t;
  std::map<std::string, std::uint64_t*> fields = {
      {"ud_oneway", &t.ud_oneway},
      {"ud_roundtrip", &t.ud_roundtrip},
      {"ve_oneway", &t.ve_oneway},
      {"ve_roundtrip", &t.ve_roundtrip},
      {"ept_violation_oneway", &t.ept_violation_oneway},
      {"ept_violation_roundtrip", &t.ept_violation_roundtrip},
      {"vmfunc", &t.vmfunc},
      {"sentry_oneway", &t.sentry_oneway},
      {"sentry_roundtrip", &t.sentry_roundtrip},
      {"int_oneway", &t.int_oneway},
      {"int_roundtrip", &t.int_roundtrip}};
  std::istringstream is(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::istringstream ls(raw);
    std::string name;
    if (!(ls >> name)) continue;
    std::uint64_t value = 0;
    std::string extra;
    if (!(ls >> value) || (ls >> extra))
      throw ParseError(lineno, "expected 'name value'");
    auto it = fields.find(name);
    if (it == fields.end())
      throw ParseError(lineno, "unknown cost entry '" + name + "'");
    *it->second = value;
  }
  t.validate();
  return t;
}

std::uint64_t estimate_cycles(std::uint64_t crossings, const CostTable& table) {
  return (crossings / 2) * table.sentry_roundtrip +
         (crossings % 2) * table.sentry_oneway;
}

const char* to_string(Direction d) {
  return d == Direction::Tx ? "tx" : "rx";
}

CrossingTable crossing_table(const DataPathConfig& config) {
  CrossingTable t;
  t.poll_min = 2;
  t.poll_max = 4;
  if (!config.refined) {
    t.isr = 6;
    t.tx_submission = 6;
    t.tx_cleanup = 4;
    t.rx_small = 10;
    t.rx_large = 14;
    return t;
  }
  t.isr = 0;
  t.tx_submission = 2;
  t.tx_cleanup = 2.0 / config.tx_cleanup_batch;
  t.tx_cleanup_rounded = 0.02;
  // steady state: a full budget skips both the remainder free and the poll
  // completion, leaving the batch alloc and the batch delivery
  t.rx_small = 4.0 / config.rx_budget;
  t.rx_large = t.rx_small;
  t.rx_rounded = 0.06;
  return t;
}

std::uint64_t PathCounts::total() const {
  return isr + interrupt_delivery + tx_submission + tx_cleanup +
         rx_per_packet + rx_batch_helpers + poll_entry + poll_complete;
}

namespace {

struct IgcLayout {
  // kernel side
  Addr main = 0x100000;
  Addr isr_handler = 0x110000;
  Addr napi_schedule_prep = 0x120000;
  Addr napi_schedule = 0x121000;
  Addr dma_map_page_attrs = 0x122000;
  Addr dma_unmap_page_attrs = 0x123000;
  Addr napi_consume_skb = 0x124000;
  Addr kernel_memcpy = 0x125000;
  Addr napi_alloc_skb = 0x126000;
  Addr eth_get_headlen = 0x127000;
  Addr skb_add_rx_frag = 0x128000;
  Addr eth_type_trans = 0x129000;
  Addr gro_receive_skb = 0x12a000;
  Addr napi_complete_done = 0x12b000;
  Addr skb_batch_alloc = 0x12c000;
  Addr skb_batch_free = 0x12d000;
  Addr gro_batch_deliver = 0x12e000;
  Addr tx_batch_consume = 0x12f000;
  // driver side
  Addr igc_msix_ring = 0x200000;
  Addr igc_features_check = 0x201000;
  Addr igc_xmit_frame = 0x202000;
  Addr igc_poll = 0x203000;
};

constexpr std::uint32_t kIrqVector = 32;
constexpr std::uint64_t kDriverEuidBase = 1000;  // compartment i runs as 1000+i

enum class Bucket {
  Isr,
  TxSubmission,
  TxCleanup,
  RxPerPacket,
  RxBatchHelpers,
  PollEntry,
  PollComplete,
};

std::map<Addr, Bucket> bucket_map(const IgcLayout& L) {
  return {
      {L.igc_msix_ring, Bucket::Isr},
      {L.napi_schedule_prep, Bucket::Isr},
      {L.napi_schedule, Bucket::Isr},
      {L.igc_features_check, Bucket::TxSubmission},
      {L.igc_xmit_frame, Bucket::TxSubmission},
      {L.dma_map_page_attrs, Bucket::TxSubmission},
      {L.dma_unmap_page_attrs, Bucket::TxCleanup},
      {L.napi_consume_skb, Bucket::TxCleanup},
      {L.tx_batch_consume, Bucket::TxCleanup},
      {L.kernel_memcpy, Bucket::RxPerPacket},
      {L.napi_alloc_skb, Bucket::RxPerPacket},
      {L.eth_get_headlen, Bucket::RxPerPacket},
      {L.skb_add_rx_frag, Bucket::RxPerPacket},
      {L.eth_type_trans, Bucket::RxPerPacket},
      {L.gro_receive_skb, Bucket::RxPerPacket},
      {L.skb_batch_alloc, Bucket::RxBatchHelpers},
      {L.skb_batch_free, Bucket::RxBatchHelpers},
      {L.gro_batch_deliver, Bucket::RxBatchHelpers},
      {L.igc_poll, Bucket::PollEntry},
      {L.napi_complete_done, Bucket::PollComplete},
  };
}

void add(PathCounts& c, Bucket b, std::uint64_t n) {
  switch (b) {
    case Bucket::Isr: c.isr += n; break;
    case Bucket::TxSubmission: c.tx_submission += n; break;
    case Bucket::TxCleanup: c.tx_cleanup += n; break;
    case Bucket::RxPerPacket: c.rx_per_packet += n; break;
    case Bucket::RxBatchHelpers: c.rx_batch_helpers += n; break;
    case Bucket::PollEntry: c.poll_entry += n; break;
    case Bucket::PollComplete: c.poll_complete += n; break;
  }
}

struct BuiltScenario {
  Machine machine;
  CpuState cpu;
  RunControl ctl;
};

policy::Symbol sym(const char* name, Addr gva, std::uint64_t size) {
  return policy::Symbol{name, gva, size};
}

/// Two compartments (kernel plus N driver contexts sharing the driver code):
/// stub programs reproduce exactly the call pattern of each data path.
BuiltScenario build_igc(const DataPathConfig& config,
                        const WorkloadSpec& workload) {
  if (workload.packets == 0 || workload.polls == 0)
    throw Error("workload needs at least one packet and one poll");
  if (workload.packets % workload.polls != 0)
    throw Error("packets must divide evenly across polls");
  const unsigned n_drv = config.driver_compartments;
  if (n_drv == 0) throw Error("at least one driver compartment");
  if (!config.refined && n_drv > 1)
    throw Error("the unrefined boundary models a single driver compartment");
  if (config.tx_cleanup_batch == 0 || config.rx_budget == 0)
    throw Error("batch and budget must be at least 1");

  const unsigned q = workload.packets / workload.polls;
  const bool rx = workload.direction == Direction::Rx;
  const bool large = workload.payload_bytes > 256;
  IgcLayout L;

  policy::SymbolTable symtab;
  symtab.add(sym("main", L.main, 4 * kPageSize));
  symtab.add(sym("isr_handler", L.isr_handler, kPageSize));
  const std::pair<const char*, Addr> kernel_stubs[] = {
      {"napi_schedule_prep", L.napi_schedule_prep},
      {"__napi_schedule", L.napi_schedule},
      {"dma_map_page_attrs", L.dma_map_page_attrs},
      {"dma_unmap_page_attrs", L.dma_unmap_page_attrs},
      {"napi_consume_skb", L.napi_consume_skb},
      {"__memcpy", L.kernel_memcpy},
      {"napi_alloc_skb", L.napi_alloc_skb},
      {"eth_get_headlen", L.eth_get_headlen},
      {"skb_add_rx_frag", L.skb_add_rx_frag},
      {"eth_type_trans", L.eth_type_trans},
      {"gro_receive_skb", L.gro_receive_skb},
      {"napi_complete_done", L.napi_complete_done},
      {"skb_batch_alloc", L.skb_batch_alloc},
      {"skb_batch_free", L.skb_batch_free},
      {"gro_batch_deliver", L.gro_batch_deliver},
      {"tx_batch_consume", L.tx_batch_consume}};
  for (const auto& [name, gva] : kernel_stubs)
    symtab.add(sym(name, gva, kPageSize));
  symtab.add(sym("igc_msix_ring", L.igc_msix_ring, kPageSize));
  symtab.add(sym("igc_features_check", L.igc_features_check, kPageSize));
  symtab.add(sym("igc_xmit_frame", L.igc_xmit_frame, kPageSize));
  symtab.add(sym("igc_poll", L.igc_poll, 2 * kPageSize));

  std::vector<policy::CompartmentPolicy> policies;
  policy::CompartmentPolicy kern;
  kern.cmpt_id = 0;
  kern.context = policy::ExecutionContext::any_ctx();
  kern.can_execute = {"main", "isr_handler"};
  for (const auto& [name, gva] : kernel_stubs) kern.can_execute.push_back(name);
  kern.can_call.push_back({"igc_msix_ring", 1u});
  kern.can_call.push_back({"igc_poll", 1u});
  for (unsigned i = 1; i <= n_drv; ++i) {
    kern.can_call.push_back({"igc_features_check", i});
    kern.can_call.push_back({"igc_xmit_frame", i});
  }
  policies.push_back(kern);
  for (unsigned i = 1; i <= n_drv; ++i) {
    policy::CompartmentPolicy drv;
    drv.cmpt_id = i;
    drv.context = policy::ExecutionContext::exact(kDriverEuidBase + i);
    drv.can_execute = {"igc_msix_ring", "igc_features_check", "igc_xmit_frame",
                       "igc_poll"};
    for (const auto& [name, gva] : kernel_stubs)
      drv.can_call.push_back({name, 0u});
    policies.push_back(drv);
  }

  BuiltScenario out;
  Machine& m = out.machine;
  gate::init_compartments(m, policy::resolve(policies, symtab), symtab);
  gate::install_interrupt_sentries(m);
  gate::bind_interrupt_handler(m, kIrqVector, L.isr_handler);
  for (unsigned i = 1; i <= n_drv; ++i)
    m.irq_enabled[i] = config.interrupts_in_driver ? 1 : 0;

  auto call = [](Addr a) { return Instruction{CallInstr{a}}; };

  // kernel stubs
  for (const auto& [name, gva] : kernel_stubs)
    load_program(m, gva, std::vector<Instruction>{RetInstr{}});

  // interrupt service: the unrefined boundary enters the driver for the MSI
  // handler, the refined one handles the throttle write and the schedule
  // locally
  if (config.refined) {
    load_program(m, L.isr_handler,
                 std::vector<Instruction>{NopInstr{}, NopInstr{}, IretqInstr{}});
  } else {
    load_program(m, L.isr_handler,
                 std::vector<Instruction>{call(L.igc_msix_ring), IretqInstr{}});
  }
  load_program(m, L.igc_msix_ring,
               std::vector<Instruction>{call(L.napi_schedule_prep),
                                        call(L.napi_schedule), RetInstr{}});
  load_program(m, L.igc_features_check, std::vector<Instruction>{RetInstr{}});
  if (config.refined) {
    // dma mapping compiled into the driver
    load_program(m, L.igc_xmit_frame,
                 std::vector<Instruction>{NopInstr{}, RetInstr{}});
  } else {
    load_program(m, L.igc_xmit_frame,
                 std::vector<Instruction>{NopInstr{},
                                          call(L.dma_map_page_attrs),
                                          RetInstr{}});
  }

  std::vector<Instruction> poll;
  if (rx) {
    if (config.refined) {
      poll.push_back(call(L.skb_batch_alloc));
      poll.push_back(call(L.gro_batch_deliver));
      if (q < config.rx_budget) {
        poll.push_back(call(L.skb_batch_free));
        poll.push_back(call(L.napi_complete_done));
      }
    } else {
      for (unsigned p = 0; p < q; ++p) {
        poll.push_back(call(L.kernel_memcpy));
        poll.push_back(call(L.napi_alloc_skb));
        if (large) {
          poll.push_back(call(L.eth_get_headlen));
          poll.push_back(call(L.skb_add_rx_frag));
        }
        poll.push_back(call(L.eth_type_trans));
        poll.push_back(call(L.gro_receive_skb));
      }
      if (q < config.rx_budget) poll.push_back(call(L.napi_complete_done));
    }
  } else {
    if (config.refined) {
      unsigned batches = (q + config.tx_cleanup_batch - 1) /
                         config.tx_cleanup_batch;
      for (unsigned b = 0; b < batches; ++b)
        poll.push_back(call(L.tx_batch_consume));
    } else {
      for (unsigned p = 0; p < q; ++p) {
        poll.push_back(call(L.dma_unmap_page_attrs));
        poll.push_back(call(L.napi_consume_skb));
      }
    }
    // transmit-only polls have no receive work left and complete without a
    // crossing
  }
  poll.push_back(RetInstr{});
  if (poll.size() > 2 * kCellsPerPage)
    throw Error("poll program exceeds its pages; lower packets per poll");
  load_program(m, L.igc_poll, poll);

  std::vector<Instruction> main;
  std::vector<Addr> rx_anchors;
  main.push_back(SetEuidInstr{kDriverEuidBase + 1});
  unsigned global_pkt = 0;
  for (unsigned pollno = 0; pollno < workload.polls; ++pollno) {
    if (rx) {
      rx_anchors.push_back(L.main + main.size() * kWordSize);
      main.push_back(NopInstr{});
    } else {
      for (unsigned p = 0; p < q; ++p, ++global_pkt) {
        unsigned sender = 1 + (global_pkt % n_drv);
        if (n_drv > 1) main.push_back(SetEuidInstr{kDriverEuidBase + sender});
        if (!config.refined) main.push_back(call(L.igc_features_check));
        main.push_back(call(L.igc_xmit_frame));
      }
      if (n_drv > 1) main.push_back(SetEuidInstr{kDriverEuidBase + 1});
    }
    main.push_back(call(L.igc_poll));
  }
  main.push_back(HaltInstr{});
  if (main.size() > 4 * kCellsPerPage)
    throw Error("driver loop exceeds its pages; lower the packet count");
  load_program(m, L.main, main);

  for (unsigned pollno = 0; pollno < workload.polls; ++pollno) {
    Injection inj;
    inj.vector = kIrqVector;
    if (rx) {
      inj.when = OnRetire{rx_anchors[pollno], 1};
    } else {
      inj.when = OnRetire{L.igc_xmit_frame, 1 + pollno * q};
    }
    out.ctl.injections.push_back(inj);
  }
  out.ctl.fuel = 2'000'000;

  out.cpu.rip = L.main;
  out.cpu.rsp = m.layout.stack_top(0);
  return out;
}

PathCounts count_trace(const Trace& trace, const IgcLayout& L) {
  PathCounts counts;
  auto buckets = bucket_map(L);
  std::vector<Bucket> open;
  for (const auto& ev : trace) {
    const auto* sw = ev.as<SwitchEvent>();
    if (!sw) continue;
    switch (sw->kind) {
      case SwitchKind::Call: {
        auto it = buckets.find(sw->target);
        if (it == buckets.end())
          throw ConsistencyError("crossing to unclassified target " +
                                 hex(sw->target));
        add(counts, it->second, 1);
        open.push_back(it->second);
        break;
      }
      case SwitchKind::Ret:
        if (open.empty())
          throw ConsistencyError("return crossing without a call");
        add(counts, open.back(), 1);
        open.pop_back();
        break;
      case SwitchKind::Int:
      case SwitchKind::Iret:
        counts.interrupt_delivery += 1;
        break;
      case SwitchKind::Vmfunc:
        throw ConsistencyError("unexpected bare EPT switch in the data path");
    }
  }
  if (!open.empty())
    throw ConsistencyError("unbalanced crossings in the data path");
  return counts;
}

PathCounts analytic_counts(const DataPathConfig& config,
                           const WorkloadSpec& workload) {
  PathCounts a;
  const unsigned q = workload.packets / workload.polls;
  const bool rx = workload.direction == Direction::Rx;
  const bool large = workload.payload_bytes > 256;
  const unsigned L = workload.polls;

  a.isr = (config.refined ? 0 : 6) * L;
  a.interrupt_delivery =
      (!rx && config.interrupts_in_driver) ? 2ull * L : 0;
  if (!rx) {
    a.tx_submission = workload.packets * (config.refined ? 2ull : 6ull);
    if (config.refined) {
      unsigned batches =
          (q + config.tx_cleanup_batch - 1) / config.tx_cleanup_batch;
      a.tx_cleanup = 2ull * batches * L;
    } else {
      a.tx_cleanup = 4ull * workload.packets;
    }
  } else {
    if (config.refined) {
      a.rx_batch_helpers = (4ull + (q < config.rx_budget ? 2 : 0)) * L;
    } else {
      a.rx_per_packet = workload.packets * (large ? 12ull : 8ull);
    }
    a.poll_complete = (q < config.rx_budget ? 2ull : 0) * L;
  }
  a.poll_entry = 2ull * L;
  return a;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / den;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

Report simulate_datapath(const DataPathConfig& config,
                         const WorkloadSpec& workload, const CostTable& table) {
  table.validate();
  IgcLayout L;
  auto built = build_igc(config, workload);
  auto result = run(built.machine, built.cpu, built.ctl);
  if (result.reason != StopReason::Halted ||
      built.cpu.halt_reason != "halt instruction")
    throw ConsistencyError("data-path scenario did not run to completion: " +
                           built.cpu.halt_reason);
  if (built.machine.counters.violations != 0)
    throw ConsistencyError("data-path scenario raised a policy violation");
  if (built.machine.counters.interrupts != workload.polls)
    throw ConsistencyError("not every poll interrupt was delivered");

  Report r;
  r.config = config;
  r.workload = workload;
  r.interrupts = workload.polls;
  r.traced = count_trace(built.machine.trace, L);
  r.analytic = analytic_counts(config, workload);
  r.consistent = r.traced == r.analytic;
  if (!r.consistent)
    throw ConsistencyError(
        "trace-counted switches disagree with the analytic model");

  r.isr_per_interrupt = ratio(r.traced.isr, r.interrupts);
  r.tx_submission_per_packet = ratio(r.traced.tx_submission, workload.packets);
  r.tx_cleanup_per_packet = ratio(r.traced.tx_cleanup, workload.packets);
  r.rx_per_packet_total =
      ratio(r.traced.rx_per_packet + r.traced.rx_batch_helpers +
                r.traced.poll_complete,
            workload.packets);
  r.poll_entry_per_poll = ratio(r.traced.poll_entry, workload.polls);
  r.total_switches = r.traced.total();
  r.cycles = estimate_cycles(r.total_switches, table);
  r.cycles_per_packet = ratio(r.cycles, workload.packets);
  return r;
}

std::vector<VerdictEntry> overhead_ordering(
    const std::vector<Report>& reports) {
  std::vector<VerdictEntry> verdicts;

  // refined never costs more than unrefined on the same workload
  {
    bool pass = true;
    std::size_t pairs = 0;
    std::ostringstream detail;
    for (const auto& a : reports) {
      if (a.config.refined) continue;
      for (const auto& b : reports) {
        if (!b.config.refined) continue;
        if (a.workload.direction != b.workload.direction ||
            a.workload.packets != b.workload.packets ||
            a.workload.payload_bytes != b.workload.payload_bytes ||
            a.workload.polls != b.workload.polls)
          continue;
        if (b.config.driver_compartments != a.config.driver_compartments)
          continue;
        pairs++;
        if (b.cycles > a.cycles) {
          pass = false;
          detail << " " << to_string(a.workload.direction) << "/"
                 << a.workload.payload_bytes << "B refined=" << b.cycles
                 << " unrefined=" << a.cycles;
        }
      }
    }
    verdicts.push_back({"refined_cycles_le_unrefined", pass && pairs > 0,
                        pass ? std::to_string(pairs) + " workload pairs"
                             : detail.str()});
  }

  // per-packet overhead share (cycles per packet per payload byte) never
  // grows with payload size
  {
    bool pass = true;
    std::ostringstream detail;
    std::map<std::tuple<bool, unsigned, int>, std::vector<const Report*>>
        groups;
    for (const auto& r : reports)
      groups[{r.config.refined, r.config.driver_compartments,
              static_cast<int>(r.workload.direction)}]
          .push_back(&r);
    std::size_t checked = 0;
    for (auto& [key, group] : groups) {
      if (group.size() < 2) continue;
      std::sort(group.begin(), group.end(),
                [](const Report* a, const Report* b) {
                  return a->workload.payload_bytes < b->workload.payload_bytes;
                });
      for (std::size_t i = 1; i < group.size(); ++i) {
        checked++;
        double prev = group[i - 1]->cycles_per_packet /
                      group[i - 1]->workload.payload_bytes;
        double cur =
            group[i]->cycles_per_packet / group[i]->workload.payload_bytes;
        if (cur > prev * (1 + 1e-12)) {
          pass = false;
          detail << " share grew from " << fmt(prev) << " to " << fmt(cur)
                 << " at " << group[i]->workload.payload_bytes << "B";
        }
      }
    }
    verdicts.push_back({"overhead_share_nonincreasing", pass && checked > 0,
                        pass ? std::to_string(checked) + " adjacent payloads"
                             : detail.str()});
  }

  // transmit cycle ratios are exactly the crossing ratios
  {
    bool pass = true;
    bool found = false;
    std::ostringstream detail;
    for (const auto& a : reports) {
      if (a.config.refined || a.workload.direction != Direction::Tx) continue;
      for (const auto& b : reports) {
        if (!b.config.refined || b.workload.direction != Direction::Tx)
          continue;
        if (a.workload.packets != b.workload.packets ||
            a.workload.payload_bytes != b.workload.payload_bytes ||
            a.workload.polls != b.workload.polls ||
            a.config.driver_compartments != b.config.driver_compartments)
          continue;
        found = true;
        double cycle_ratio = b.cycles ? double(a.cycles) / b.cycles : 0;
        double switch_ratio =
            b.total_switches ? double(a.total_switches) / b.total_switches : 0;
        if (std::abs(cycle_ratio - switch_ratio) > 1e-9) pass = false;
        detail << " " << a.workload.payload_bytes
               << "B: crossing ratio " << fmt(switch_ratio)
               << (cycle_ratio >= 10 ? " (>=10x)" : "");
      }
    }
    verdicts.push_back(
        {"tx_cycle_ratio_matches_crossings", pass && found, detail.str()});
  }

  // per-packet crossings do not depend on the number of driver compartments
  {
    bool pass = true;
    std::size_t checked = 0;
    std::ostringstream detail;
    std::map<std::tuple<unsigned, unsigned, unsigned>,
             std::vector<const Report*>>
        groups;
    for (const auto& r : reports)
      if (r.config.refined && r.workload.direction == Direction::Tx)
        groups[{r.workload.packets, r.workload.payload_bytes,
                r.workload.polls}]
            .push_back(&r);
    for (const auto& [key, group] : groups) {
      if (group.size() < 2) continue;
      const Report* base = group.front();
      for (const Report* r : group) {
        if (r == base) continue;
        checked++;
        if (r->tx_submission_per_packet != base->tx_submission_per_packet ||
            r->tx_cleanup_per_packet != base->tx_cleanup_per_packet) {
          pass = false;
          detail << " N=" << r->config.driver_compartments << " diverges";
        }
      }
    }
    if (pass && checked > 0)
      detail << " " << checked + 1 << " compartment counts agree";
    verdicts.push_back(
        {"per_packet_crossings_independent_of_n", pass && checked > 0,
         detail.str()});
  }

  return verdicts;
}

bool all_pass(const std::vector<VerdictEntry>& verdicts) {
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const VerdictEntry& v) { return v.pass; });
}

std::string render(const CrossingTable& t) {
  std::ostringstream os;
  os << "path              frequency      switches\n";
  os << "ISR               per interrupt  " << fmt(t.isr) << "\n";
  os << "TX submission     per packet     " << fmt(t.tx_submission) << "\n";
  os << "TX cleanup        per packet     " << fmt(t.tx_cleanup);
  if (t.tx_cleanup_rounded)
    os << " (~" << fmt(t.tx_cleanup_rounded) << " rounded)";
  os << "\n";
  os << "RX (<=256 B)      per packet     " << fmt(t.rx_small);
  if (t.rx_rounded) os << " (~" << fmt(t.rx_rounded) << " rounded)";
  os << "\n";
  os << "RX (>256 B)       per packet     " << fmt(t.rx_large);
  if (t.rx_rounded) os << " (~" << fmt(t.rx_rounded) << " rounded)";
  os << "\n";
  os << "poll entry/exit   per poll       " << fmt(t.poll_min) << "-"
     << fmt(t.poll_max) << "\n";
  return os.str();
}

std::string render(const Report& r) {
  std::ostringstream os;
  os << "data-path report\n";
  os << "  config: " << (r.config.refined ? "refined" : "baseline")
     << " tx_cleanup_batch=" << r.config.tx_cleanup_batch
     << " rx_budget=" << r.config.rx_budget << " interrupts_in_driver="
     << (r.config.interrupts_in_driver ? "yes" : "no")
     << " driver_compartments=" << r.config.driver_compartments << "\n";
  os << "  workload: direction=" << to_string(r.workload.direction)
     << " packets=" << r.workload.packets
     << " payload=" << r.workload.payload_bytes << "B polls="
     << r.workload.polls << " interrupts=" << r.interrupts << "\n";
  auto line = [&](const char* name, std::uint64_t traced,
                  std::uint64_t analytic) {
    os << "  " << name << ": traced=" << traced << " analytic=" << analytic
       << "\n";
  };
  line("isr", r.traced.isr, r.analytic.isr);
  line("interrupt_delivery", r.traced.interrupt_delivery,
       r.analytic.interrupt_delivery);
  line("tx_submission", r.traced.tx_submission, r.analytic.tx_submission);
  line("tx_cleanup", r.traced.tx_cleanup, r.analytic.tx_cleanup);
  line("rx_per_packet", r.traced.rx_per_packet, r.analytic.rx_per_packet);
  line("rx_batch_helpers", r.traced.rx_batch_helpers,
       r.analytic.rx_batch_helpers);
  line("poll_entry", r.traced.poll_entry, r.analytic.poll_entry);
  line("poll_complete", r.traced.poll_complete, r.analytic.poll_complete);
  os << "  consistency: " << (r.consistent ? "ok" : "MISMATCH") << "\n";
  os << "  per-packet: tx_submission=" << fmt(r.tx_submission_per_packet)
     << " tx_cleanup=" << fmt(r.tx_cleanup_per_packet)
     << " rx=" << fmt(r.rx_per_packet_total) << "\n";
  os << "  per-interrupt isr=" << fmt(r.isr_per_interrupt)
     << " per-poll entry=" << fmt(r.poll_entry_per_poll) << "\n";
  os << "  switches=" << r.total_switches << " cycles=" << r.cycles
     << " cycles_per_packet=" << fmt(r.cycles_per_packet) << "\n";
  return os.str();
}

std::string render(const std::vector<VerdictEntry>& verdicts) {
  std::ostringstream os;
  for (const auto& v : verdicts)
    os << (v.pass ? "[PASS] " : "[FAIL] ") << v.name
       << (v.detail.empty() ? "" : ":" + v.detail) << "\n";
  return os.str();
}

}  // namespace cmptsim::cost
