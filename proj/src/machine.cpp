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

#include "cmptsim/machine.hpp"

namespace cmptsim {

std::optional<Addr> resolve_gpa(const Machine& m, Addr gva) {
  if (m.hlat.enabled) {
    auto it = m.hlat.entries.find(page_of(gva));
    if (it != m.hlat.entries.end()) {
      if (const auto* fixed = std::get_if<HlatFixed>(&it->second))
        return fixed->gpa_page | page_offset(gva);
      // explicit restart: fall through to the guest page table
    }
    // absent entry restarts as well
  }
  auto it = m.guest_pt.entries.find(page_of(gva));
  if (it == m.guest_pt.entries.end()) return std::nullopt;
  return it->second | page_offset(gva);
}

TranslationOutcome translate(const Machine& m, CpuState& cpu, Addr gva,
                             AccessKind access) {
  auto gpa = resolve_gpa(m, gva);
  if (!gpa) return GuestPageFault{gva};

  if (cpu.current_ept >= m.eptp.size())
    return VmExit{"invalid active EPTP index"};
  const Ept& ept = m.epts[m.eptp.at(cpu.current_ept)];
  const EptEntry* entry = ept.lookup(page_of(*gpa));
  if (entry && entry->perms.allows(access))
    return TranslationOk{entry->hpa_page | page_offset(*gpa)};

  // EPT violation. Deliverable as an exception only when the page does not
  // suppress delivery and no delivery is already in flight.
  bool suppressed = entry && entry->suppress_ve;
  if (suppressed) return VmExit{"ept-violation-suppressed"};
  if (cpu.ve_info.mask) return VmExit{"ept-violation-masked"};

  VeInfo info;
  info.exit_reason = kExitReasonEptViolation;
  info.qualification = access;
  info.faulting_gva = gva;
  info.faulting_gpa = *gpa;
  info.eptp_index = cpu.current_ept;
  static_cast<VeInfo&>(cpu.ve_info) = info;
  cpu.ve_info.mask = true;
  return VeDelivered{info};
}

bool fetch_would_fault(const Machine& m, const CpuState& cpu, Addr gva) {
  auto gpa = resolve_gpa(m, gva);
  if (!gpa) return true;
  if (cpu.current_ept >= m.eptp.size()) return true;
  const Ept& ept = m.epts[m.eptp.at(cpu.current_ept)];
  const EptEntry* entry = ept.lookup(page_of(*gpa));
  return !(entry && entry->perms.allows(AccessKind::Execute));
}

GuestValue guest_read(Machine& m, CpuState& cpu, Addr gva) {
  GuestValue out;
  out.outcome = translate(m, cpu, gva, AccessKind::Read);
  if (const auto* ok = std::get_if<TranslationOk>(&out.outcome))
    out.value = m.phys.read_word(ok->hpa);
  return out;
}

TranslationOutcome guest_write(Machine& m, CpuState& cpu, Addr gva,
                               std::uint64_t value) {
  auto outcome = translate(m, cpu, gva, AccessKind::Write);
  if (const auto* ok = std::get_if<TranslationOk>(&outcome))
    m.phys.write_word(ok->hpa, value);
  return outcome;
}

void host_write_word(Machine& m, Addr hpa, std::uint64_t value) {
  m.phys.write_word(hpa, value);
}

std::uint64_t host_read_word(const Machine& m, Addr hpa) {
  return m.phys.read_word(hpa);
}

void host_write_instruction(Machine& m, Addr hpa, Instruction instr) {
  m.phys.write_instruction(hpa, std::move(instr));
}

void load_program(Machine& m, Addr gva, std::span<const Instruction> program) {
  for (std::size_t i = 0; i < program.size(); ++i)
    m.phys.write_instruction(gva + i * kWordSize, program[i]);
}

void append_event(Machine& m, const CpuState& cpu,
                  std::variant<RetiredEvent, VeEvent, VmExitEvent, SwitchEvent,
                               ViolationEvent, InterruptEvent>
                      data) {
  TraceEvent ev;
  ev.step = m.current_step;
  ev.ept = cpu.current_ept;
  ev.euid = cpu.euid;
  ev.rip = cpu.rip;
  ev.data = std::move(data);
  if (const auto* sw = std::get_if<SwitchEvent>(&ev.data)) {
    ev.ept = sw->from;
    m.counters.switches++;
  } else if (std::holds_alternative<RetiredEvent>(ev.data)) {
    m.counters.retired++;
  } else if (std::holds_alternative<VeEvent>(ev.data)) {
    m.counters.ve_delivered++;
  } else if (std::holds_alternative<VmExitEvent>(ev.data)) {
    m.counters.vm_exits++;
  } else if (std::holds_alternative<ViolationEvent>(ev.data)) {
    m.counters.violations++;
  } else if (std::holds_alternative<InterruptEvent>(ev.data)) {
    m.counters.interrupts++;
  }
  m.trace.push_back(std::move(ev));
}

}  // namespace cmptsim
