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

#include "cmptsim/memory.hpp"

#include <sstream>

namespace cmptsim {

const char* to_string(AccessKind k) {
  switch (k) {
    case AccessKind::Read: return "read";
    case AccessKind::Write: return "write";
    case AccessKind::Execute: return "fetch";
  }
  return "?";
}

std::string to_string(const Permission& p) {
  std::string s;
  s += p.read ? 'r' : '-';
  s += p.write ? 'w' : '-';
  s += p.execute ? 'x' : '-';
  return s;
}

std::string hex(Addr a) {
  std::ostringstream os;
  os << "0x" << std::hex << a;
  return os.str();
}

static void require_word_aligned(Addr a, const char* op) {
  if (!word_aligned(a))
    throw Error(std::string(op) + ": unaligned address " + hex(a));
}

const PhysicalMemory::Cell* PhysicalMemory::cell(Addr hpa) const {
  auto it = pages_.find(page_of(hpa));
  if (it == pages_.end()) return nullptr;
  return &it->second.cells[page_offset(hpa) / kWordSize];
}

PhysicalMemory::Cell& PhysicalMemory::cell_mut(Addr hpa) {
  return pages_[page_of(hpa)].cells[page_offset(hpa) / kWordSize];
}

std::uint64_t PhysicalMemory::read_word(Addr hpa) const {
  require_word_aligned(hpa, "read_word");
  const Cell* c = cell(hpa);
  if (!c) return 0;
  if (const auto* w = std::get_if<std::uint64_t>(c)) return *w;
  return 0;  // instruction cells read as zero data
}

void PhysicalMemory::write_word(Addr hpa, std::uint64_t value) {
  require_word_aligned(hpa, "write_word");
  cell_mut(hpa) = value;
}

const Instruction* PhysicalMemory::read_instruction(Addr hpa) const {
  require_word_aligned(hpa, "read_instruction");
  const Cell* c = cell(hpa);
  if (!c) return nullptr;
  return std::get_if<Instruction>(c);
}

void PhysicalMemory::write_instruction(Addr hpa, Instruction instr) {
  require_word_aligned(hpa, "write_instruction");
  cell_mut(hpa) = std::move(instr);
}

const EptEntry* Ept::lookup(Addr gpa_page) const {
  auto it = entries.find(gpa_page);
  return it == entries.end() ? nullptr : &it->second;
}

void EptpList::push(std::uint32_t ept_index) {
  if (indices_.size() >= kEptpCapacity)
    throw Error("EPTP list capacity exceeded (512)");
  indices_.push_back(ept_index);
}

std::uint32_t EptpList::at(std::size_t i) const {
  if (i >= indices_.size()) throw Error("EPTP index out of range");
  return indices_[i];
}

void ept_map(Ept& ept, Addr gpa_page, Addr hpa_page, Permission perms,
             bool suppress_ve) {
  if (!page_aligned(gpa_page) || !page_aligned(hpa_page))
    throw Error("ept_map: pages must be 4 KB aligned");
  ept.entries[gpa_page] = EptEntry{hpa_page, perms, suppress_ve};
}

void hlat_insert(HlatTable& hlat, Addr gva_page, HlatEntry entry) {
  if (!page_aligned(gva_page))
    throw Error("hlat_insert: page must be 4 KB aligned");
  if (const auto* f = std::get_if<HlatFixed>(&entry)) {
    if (!page_aligned(f->gpa_page))
      throw Error("hlat_insert: target page must be 4 KB aligned");
  }
  hlat.entries[gva_page] = entry;
}

void guest_pt_map(GuestPageTable& pt, Addr gva_page, Addr gpa_page) {
  if (!page_aligned(gva_page) || !page_aligned(gpa_page))
    throw Error("guest_pt_map: pages must be 4 KB aligned");
  pt.entries[gva_page] = gpa_page;
}

}  // namespace cmptsim
