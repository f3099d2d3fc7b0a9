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
#include <stdexcept>
#include <string>

namespace cmptsim {

using Addr = std::uint64_t;

inline constexpr Addr kPageSize = 4096;
inline constexpr Addr kPageMask = kPageSize - 1;
inline constexpr Addr kWordSize = 8;
inline constexpr std::size_t kCellsPerPage = kPageSize / kWordSize;
inline constexpr std::size_t kEptpCapacity = 512;

constexpr Addr page_of(Addr a) { return a & ~kPageMask; }
constexpr Addr page_offset(Addr a) { return a & kPageMask; }
constexpr bool page_aligned(Addr a) { return page_offset(a) == 0; }
constexpr bool word_aligned(Addr a) { return (a & (kWordSize - 1)) == 0; }

/// Generic simulator error (bad input, broken invariant).
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Parse error carrying a 1-based line number.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

enum class AccessKind { Read, Write, Execute };

const char* to_string(AccessKind k);

struct Permission {
  bool read = false;
  bool write = false;
  bool execute = false;

  constexpr bool allows(AccessKind k) const {
    switch (k) {
      case AccessKind::Read: return read;
      case AccessKind::Write: return write;
      case AccessKind::Execute: return execute;
    }
    return false;
  }

  constexpr Permission operator|(const Permission& o) const {
    return Permission{read || o.read, write || o.write, execute || o.execute};
  }

  bool operator==(const Permission&) const = default;

  static constexpr Permission none() { return {}; }
  static constexpr Permission r() { return {true, false, false}; }
  static constexpr Permission rw() { return {true, true, false}; }
  static constexpr Permission rx() { return {true, false, true}; }
  static constexpr Permission x() { return {false, false, true}; }
  static constexpr Permission rwx() { return {true, true, true}; }
};

/// "r-x" style rendering, as it appears in traces and reports.
std::string to_string(const Permission& p);

std::string hex(Addr a);

}  // namespace cmptsim
