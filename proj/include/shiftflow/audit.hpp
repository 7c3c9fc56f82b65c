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

#ifndef SHIFTFLOW_AUDIT_HPP_
#define SHIFTFLOW_AUDIT_HPP_

#include <cstdint>
#include <string>

namespace shiftflow {
namespace audit {

// Every library routine that performs real-valued arithmetic calls
// note_real_arithmetic() on entry. Inference code paths run inside an
// IntegerOnlyGuard; a real-arithmetic call made while a guard is active is
// recorded as a violation. Counters are thread-local, so concurrent fits and
// inference runs do not interfere.

class IntegerOnlyGuard {
 public:
  IntegerOnlyGuard();
  ~IntegerOnlyGuard();
  IntegerOnlyGuard(const IntegerOnlyGuard&) = delete;
  IntegerOnlyGuard& operator=(const IntegerOnlyGuard&) = delete;

  // Violations recorded on this thread since this guard was constructed.
  std::uint64_t violations() const;

 private:
  std::uint64_t baseline_;
};

void note_real_arithmetic(const char* site);

std::uint64_t violation_count();
std::string first_violation_site();
void reset_violations();

}  // namespace audit
}  // namespace shiftflow

#endif  // SHIFTFLOW_AUDIT_HPP_
