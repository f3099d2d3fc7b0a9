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

#include <array>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cmptsim/base.hpp"
#include "cmptsim/isa.hpp"

namespace cmptsim {

/// Word-addressable physical memory. Each 8-byte cell holds either a data
/// word or an instruction token; never-written cells read as zero.
class PhysicalMemory {
public:
  std::uint64_t read_word(Addr hpa) const;
  void write_word(Addr hpa, std::uint64_t value);

  /// Null when the cell does not hold an instruction.
  const Instruction* read_instruction(Addr hpa) const;
  void write_instruction(Addr hpa, Instruction instr);

private:
  using Cell = std::variant<std::uint64_t, Instruction>;
  struct Page {
    std::array<Cell, kCellsPerPage> cells{};
  };

  const Cell* cell(Addr hpa) const;
  Cell& cell_mut(Addr hpa);

  std::map<Addr, Page> pages_;
};

struct EptEntry {
  Addr hpa_page = 0;
  Permission perms;
  bool suppress_ve = false;  // paging-structure bit 63: violations exit to the hypervisor
};

/// One guest-physical to host-physical mapping table per compartment.
struct Ept {
  std::uint32_t index = 0;
  std::map<Addr, EptEntry> entries;  // keyed by guest-physical page

  const EptEntry* lookup(Addr gpa_page) const;
};

/// Ordered list of EPT roots selectable by vmfunc; index 0 is the default
/// compartment.
class EptpList {
public:
  void push(std::uint32_t ept_index);
  std::size_t size() const { return indices_.size(); }
  std::uint32_t at(std::size_t i) const;
  bool contains(std::uint32_t i) const { return i < indices_.size(); }

private:
  std::vector<std::uint32_t> indices_;
};

struct HlatFixed { Addr gpa_page = 0; };
struct HlatRestart {};
using HlatEntry = std::variant<HlatFixed, HlatRestart>;

/// Pinned linear-address translations. A missing entry behaves like an
/// explicit restart: translation falls through to the guest page table.
struct HlatTable {
  bool enabled = true;
  std::map<Addr, HlatEntry> entries;  // keyed by guest-virtual page
};

/// Guest-controlled page table; freely writable by simulated guest code.
struct GuestPageTable {
  std::map<Addr, Addr> entries;  // guest-virtual page -> guest-physical page
};

struct VeInfo {
  std::uint32_t exit_reason = 0;  // 48 = EPT violation
  AccessKind qualification = AccessKind::Read;
  Addr faulting_gva = 0;
  Addr faulting_gpa = 0;
  std::uint32_t eptp_index = 0;
};

/// Exception information area plus the delivery mask. While the mask is set
/// further EPT violations exit to the hypervisor instead.
struct VeInfoArea : VeInfo {
  bool mask = false;
};

struct TranslationOk { Addr hpa = 0; };
struct GuestPageFault { Addr gva = 0; };
struct VeDelivered { VeInfo info; };
struct VmExit { std::string reason; };

using TranslationOutcome =
    std::variant<TranslationOk, GuestPageFault, VeDelivered, VmExit>;

inline constexpr std::uint32_t kExitReasonEptViolation = 48;

/// Installs or replaces a guest-physical to host-physical mapping.
void ept_map(Ept& ept, Addr gpa_page, Addr hpa_page, Permission perms,
             bool suppress_ve = false);

/// Pins (or restarts) translation for one guest-virtual page.
void hlat_insert(HlatTable& hlat, Addr gva_page, HlatEntry entry);

/// Guest-level remapping; this models the attacker capability the pinned
/// translations defend against.
void guest_pt_map(GuestPageTable& pt, Addr gva_page, Addr gpa_page);

}  // namespace cmptsim
