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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmptsim/base.hpp"

namespace cmptsim::policy {

struct Symbol {
  std::string name;
  Addr gva = 0;
  std::uint64_t size = 0;  // bytes, >= 1; may span pages
};

class SymbolTable {
public:
  void add(Symbol s);
  const Symbol* find(const std::string& name) const;
  const std::vector<Symbol>& all() const { return symbols_; }

private:
  std::vector<Symbol> symbols_;
  std::map<std::string, std::size_t> by_name_;
};

/// Execution context a compartment claims: any eUID, or one exact id.
struct ExecutionContext {
  bool any = true;
  std::uint64_t euid = 0;

  bool matches(std::uint64_t id) const { return any || euid == id; }
  bool operator==(const ExecutionContext&) const = default;

  static ExecutionContext any_ctx() { return {}; }
  static ExecutionContext exact(std::uint64_t id) { return {false, id}; }
};

struct CanCall {
  std::string callee;
  std::optional<std::uint32_t> target;  // absent: resolved by executor lookup
};

struct CompartmentPolicy {
  std::uint32_t cmpt_id = 0;
  std::vector<std::string> can_execute;
  std::vector<std::string> can_read;
  std::vector<std::string> can_write;
  std::vector<CanCall> can_call;
  ExecutionContext context;
};

struct ResolvedCall {
  std::string callee;
  Addr entry_gva = 0;
  std::uint32_t target = 0;       // EPT index of the callee compartment
  ExecutionContext context;       // the callee compartment's context
};

struct MatrixRow {
  std::uint32_t cmpt_id = 0;
  ExecutionContext context;
  std::map<Addr, Permission> pages;                      // page -> merged perms
  std::map<Addr, std::vector<std::string>> page_symbols; // page -> granting symbols
  std::vector<ResolvedCall> calls;

  bool grants(Addr page, AccessKind k) const;
};

/// Rows keyed by compartment id; sparse ids are legal here and rejected only
/// when compartments are instantiated.
struct AccessMatrix {
  std::map<std::uint32_t, MatrixRow> rows;

  const MatrixRow* row(std::uint32_t id) const;
};

enum class Severity { Warn, Error };

struct Diagnostic {
  Severity severity = Severity::Warn;
  std::string message;
};

std::string to_string(const Diagnostic& d);
bool has_errors(const std::vector<Diagnostic>& diags);

/// Parses the line-oriented policy grammar:
///
///   cmpt_id: <n>
///   can_execute: name, name, ...
///   can_read: ...
///   can_write: ...
///   can_call: name [(cmpt_id=<n>)], ...
///   execution_context: euid = any|root|<n>
///
/// Blocks are separated by a blank line or the next cmpt_id key. '#' starts
/// a comment. Unknown keys, duplicate ids, a missing compartment 0 and
/// malformed lines are errors (ParseError with line number).
std::vector<CompartmentPolicy> parse_policy(const std::string& text);

/// Canonical rendering; parse(print(p)) == p.
std::string print_policy(const std::vector<CompartmentPolicy>& policies);

/// Symbol map: one "name hex-gva decimal-size" triple per line.
SymbolTable parse_symbols(const std::string& text);

/// Expands symbol grants to page sets and can_call entries to
/// (entry GVA, EPT index, context) tuples. A call without an explicit target
/// resolves to the unique non-default executor of the callee, falling back
/// to compartment 0 when it alone lists the symbol. Rejects unknown symbols,
/// unresolvable or ambiguous call targets, and two non-default compartments
/// claiming the same execution context.
AccessMatrix resolve(const std::vector<CompartmentPolicy>& policies,
                     const SymbolTable& symtab);

/// Page-granularity hazards: an error for every page granted to two
/// compartments through distinct symbols, a warning for pages shared by
/// granting the same symbol to several rows.
std::vector<Diagnostic> check_layout(const AccessMatrix& matrix,
                                     const SymbolTable& symtab);

/// Pages covered by [gva, gva+size).
std::vector<Addr> pages_of_range(Addr gva, std::uint64_t size);

}  // namespace cmptsim::policy
