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

#include "cmptsim/gate.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace cmptsim::gate {

namespace {

constexpr std::uint32_t kIdtVectors = 256;

void map_everywhere(Machine& m, Addr gva_page, Addr hpa_page, Permission perms) {
  for (auto& ept : m.epts) ept_map(ept, gva_page, hpa_page, perms);
}

/// Access-matrix row image read by the in-guest handler:
///   cell 0: compartment id
///   cell 1: entry count
///   then per entry: callee gva, target EPT index, context kind, context euid
void write_row_image(Machine& m, std::uint32_t c, const policy::MatrixRow& row) {
  constexpr std::size_t kMaxEntries = (kCellsPerPage - 2) / 4;
  if (row.calls.size() > kMaxEntries)
    throw Error("compartment " + std::to_string(c) +
                " has too many call entries for one row page");
  Addr base = m.layout.row_hpa(c);
  host_write_word(m, base, c);
  host_write_word(m, base + 8, row.calls.size());
  Addr at = base + 16;
  for (const auto& e : row.calls) {
    host_write_word(m, at, e.entry_gva);
    host_write_word(m, at + 8, e.target);
    host_write_word(m, at + 16, e.context.any ? 0 : 1);
    host_write_word(m, at + 24, e.context.euid);
    at += 32;
  }
}

}  // namespace

void init_compartments(Machine& m, const policy::AccessMatrix& matrix,
                       const policy::SymbolTable& symtab,
                       const InitOptions& opts) {
  if (m.initialized) throw Error("machine already initialized");
  const std::size_t n = matrix.rows.size();
  if (n == 0 || !matrix.row(0))
    throw Error("policy must define compartment 0");
  for (std::size_t c = 0; c < n; ++c)
    if (!matrix.row(static_cast<std::uint32_t>(c)))
      throw Error("compartment ids must be dense 0..n-1 (the id is the EPTP "
                  "index); missing id " + std::to_string(c));
  if (n > kEptpCapacity)
    throw Error("more than 512 compartments cannot share one EPTP list");

  auto diags = policy::check_layout(matrix, symtab);
  for (const auto& d : diags)
    if (d.severity == policy::Severity::Error)
      throw Error("layout: " + d.message);

  GateLayout& lay = m.layout;
  lay.compartments = static_cast<std::uint32_t>(n);

  // Declared guest space: every page any symbol covers, plus driver pages
  // that carry no symbol.
  std::set<Addr> space;
  for (const auto& s : symtab.all())
    for (Addr p : policy::pages_of_range(s.gva, s.size)) space.insert(p);
  for (Addr p : opts.extra_default_pages) space.insert(page_of(p));

  std::set<Addr> gate_pages = {lay.ve_entry, lay.int_entry, lay.ro_row_gva,
                               lay.int_stack_gva, lay.idt_gva};
  for (std::uint64_t p = 0; p < kRwRegionPages; ++p)
    gate_pages.insert(lay.rw_region_gva + p * kPageSize);
  for (std::uint32_t c = 0; c < n; ++c) gate_pages.insert(lay.stack_page(c));
  for (Addr p : space)
    if (gate_pages.count(p))
      throw Error("symbol page " + hex(p) + " collides with a reserved region");

  // Ownership: pages granted to any non-default row.
  std::map<Addr, std::set<std::uint32_t>> owners;
  for (const auto& [id, row] : matrix.rows) {
    if (id == 0) continue;
    for (const auto& [page, perms] : row.pages) owners[page].insert(id);
  }

  m.epts.resize(n);
  for (std::uint32_t c = 0; c < n; ++c) {
    m.epts[c].index = c;
    m.eptp.push(c);
  }
  m.irq_enabled.assign(n, 1);

  // Content pages translate identically at both stages (GVA = GPA = HPA).
  for (Addr p : space) guest_pt_map(m.guest_pt, p, p);
  for (Addr p : gate_pages) guest_pt_map(m.guest_pt, p, p);

  const policy::MatrixRow& row0 = *matrix.row(0);
  for (Addr p : space) {
    auto own = owners.find(p);
    if (own == owners.end()) {
      ept_map(m.epts[0], p, p, Permission::rwx());
      continue;
    }
    // owned by another compartment: unmapped in EPT 0 unless compartment 0's
    // own row shares it, and then only with the declared permissions
    auto it = row0.pages.find(p);
    if (it != row0.pages.end()) ept_map(m.epts[0], p, p, it->second);
  }
  for (const auto& [id, row] : matrix.rows) {
    if (id == 0) continue;
    for (const auto& [page, perms] : row.pages)
      ept_map(m.epts[id], page, page, perms);
  }

  // Pin every compartmentalized page so guest page-table edits cannot
  // redirect it; everything else restarts from the guest table.
  for (const auto& [page, who] : owners)
    hlat_insert(m.hlat, page, HlatFixed{page});
  for (Addr p : gate_pages) hlat_insert(m.hlat, p, HlatFixed{p});

  // Handler code, shared regions, stacks.
  map_everywhere(m, lay.ve_entry, lay.ve_entry, Permission::x());
  map_everywhere(m, lay.int_entry, lay.int_entry, Permission::x());
  for (std::uint64_t p = 0; p < kRwRegionPages; ++p) {
    Addr page = lay.rw_region_gva + p * kPageSize;
    map_everywhere(m, page, page, Permission::rw());
  }
  map_everywhere(m, lay.int_stack_gva, lay.int_stack_gva, Permission::rw());
  for (std::uint32_t c = 0; c < n; ++c) {
    ept_map(m.epts[c], lay.ro_row_gva, lay.row_hpa(c), Permission::r());
    ept_map(m.epts[c], lay.stack_page(c), lay.stack_page(c), Permission::rw());
    write_row_image(m, c, *matrix.row(c));
    host_write_word(m, lay.rw_depth_cell(c), 1);
    host_write_word(m, lay.rw_slot(c, 0), lay.stack_top(c));
  }
  map_everywhere(m, lay.idt_gva, lay.idt_gva, Permission::r());

  // No mapped page may alias a magic discriminator.
  std::set<Addr> mapped;
  for (const auto& [gva, gpa] : m.guest_pt.entries) mapped.insert(gva);
  for (const auto& [gva, e] : m.hlat.entries) mapped.insert(gva);
  for (std::uint64_t magic : {kMagicCall, kMagicIntNoErr, kMagicIntErr})
    if (mapped.count(page_of(magic)))
      throw Error("mapped page " + hex(page_of(magic)) +
                  " aliases a magic discriminator");

  m.matrix = matrix;
  m.initialized = true;
}

void install_interrupt_sentries(Machine& m) {
  if (!m.initialized) throw Error("compartments not initialized");
  const GateLayout& lay = m.layout;
  for (std::uint32_t v = 0; v < kIdtVectors; ++v)
    host_write_word(m, lay.idt_alt_hpa() + v * kWordSize, lay.int_entry);
  for (std::uint32_t c = 1; c < lay.compartments; ++c)
    ept_map(m.epts[c], lay.idt_gva, lay.idt_alt_hpa(), Permission::r());
}

void bind_interrupt_handler(Machine& m, std::uint32_t vector, Addr handler) {
  if (vector >= kIdtVectors) throw Error("vector out of range");
  host_write_word(m, m.layout.idt_gva + vector * kWordSize, handler);
}

Verdict handle_vmcall_violation(Machine& m, CpuState& cpu,
                                const ViolationInfo& info) {
  std::ostringstream os;
  os << info.what << " kind=" << to_string(info.kind)
     << " gva=" << hex(info.gva) << " gpa=" << hex(info.gpa)
     << " source=" << info.source;
  append_event(m, cpu, ViolationEvent{os.str()});
  cpu.halted = true;
  cpu.halt_reason = "policy violation: " + info.what;
  return Verdict::PolicyViolation;
}

}  // namespace cmptsim::gate
