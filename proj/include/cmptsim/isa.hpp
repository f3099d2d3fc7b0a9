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

#include <string>
#include <variant>

#include "cmptsim/base.hpp"

namespace cmptsim {

// Micro-ISA. One instruction per 8-byte memory cell; control transfers,
// loads/stores and the virtualization primitives are the only semantics the
// switching protocol needs.

struct CallInstr { Addr target = 0; };
struct RetInstr {};
struct ReadInstr { Addr gva = 0; };            // loads the word into rax
struct WriteInstr { Addr gva = 0; std::uint64_t value = 0; };
struct VmfuncInstr { std::uint32_t index = 0; };
struct VmcallInstr {};
struct IretqInstr {};
struct NopInstr {};
struct SetEuidInstr { std::uint64_t euid = 0; };
struct HandlerBodyInstr { std::string tag; };  // tags: noop, advance_rip
struct HaltInstr {};

using Instruction =
    std::variant<CallInstr, RetInstr, ReadInstr, WriteInstr, VmfuncInstr,
                 VmcallInstr, IretqInstr, NopInstr, SetEuidInstr,
                 HandlerBodyInstr, HaltInstr>;

std::string to_string(const Instruction& i);

}  // namespace cmptsim
