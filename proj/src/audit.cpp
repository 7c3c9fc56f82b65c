// Copyright 2026 The ShiftFlow Authors. All Rights Reserved.
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

#include "shiftflow/audit.hpp"

namespace shiftflow {
namespace audit {
namespace {

thread_local int g_guard_depth = 0;
thread_local std::uint64_t g_violations = 0;
thread_local const char* g_first_site = nullptr;

}  // namespace

IntegerOnlyGuard::IntegerOnlyGuard() : baseline_(g_violations) {
  ++g_guard_depth;
}

IntegerOnlyGuard::~IntegerOnlyGuard() { --g_guard_depth; }

std::uint64_t IntegerOnlyGuard::violations() const {
  return g_violations - baseline_;
}

void note_real_arithmetic(const char* site) {
  if (g_guard_depth > 0) {
    if (g_violations == 0) g_first_site = site;
    ++g_violations;
  }
}

std::uint64_t violation_count() { return g_violations; }

std::string first_violation_site() {
  return g_first_site == nullptr ? std::string() : std::string(g_first_site);
}

void reset_violations() {
  g_violations = 0;
  g_first_site = nullptr;
}

}  // namespace audit
}  // namespace shiftflow
