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

#ifndef SHIFTFLOW_DATAFLOW_HPP_
#define SHIFTFLOW_DATAFLOW_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "shiftflow/fixq.hpp"

namespace shiftflow {

enum class ScheduleKind { output_stationary, weight_stationary };

const char* schedule_kind_name(ScheduleKind k);

// Loop nests for a pointwise layer on a kt x ct PE array. Both retire one
// kernel-tile x channel-tile block per cycle; they differ only in loop order:
//   output stationary:  y, x, kernel tile, channel tile
//     partial sums live in the accumulator register, weights stream from
//     WRAM again for every pixel, no Inter RAM traffic.
//   weight stationary:  kernel tile, channel tile, y, x
//     each weight block is fetched once and pinned in PE registers, partial
//     sums spill to the Inter RAM between channel-tile passes.
struct Schedule {
  ScheduleKind kind = ScheduleKind::output_stationary;
  std::array<const char*, 4> loop_order{};
};

Schedule make_schedule(ScheduleKind kind);

// Access/cycle tallies for one layer. compute_cycles assumes one cycle per
// (kernel tile, channel tile, pixel) triple; macs counts real multiplies, so
// edge tiles count only their live lanes.
struct AccessCounts {
  std::uint64_t iaram_reads = 0;
  std::uint64_t wram_reads = 0;
  std::uint64_t oaram_writes = 0;
  std::uint64_t inter_writes = 0;
  std::uint64_t inter_reads = 0;
  std::uint64_t inter_peak = 0;  // partial sums resident at once
  std::uint64_t compute_cycles = 0;
  std::uint64_t macs = 0;

  bool operator==(const AccessCounts&) const = default;
};

struct ScheduleResult {
  Dims3 out_dims;                  // kernels x h x w
  std::vector<std::int32_t> acc;   // raw accumulators, kernel-major
  AccessCounts counts;
};

// Executes the literal loop nest on real data, counting every RAM touch.
// Both orders must produce bit-identical accumulators.
ScheduleResult run_schedule(const QTensor& in, const Pow2Weights& w,
                            ScheduleKind kind, int kt, int ct);

// Input shape of one pointwise layer for the analytic model.
struct LayerShape {
  int h = 0;
  int w = 0;
  int c = 0;  // input channels
  int n = 0;  // kernels
};

// Closed-form counts; must match run_schedule exactly on every shape.
AccessCounts schedule_cost(const LayerShape& s, ScheduleKind kind, int kt,
                           int ct);

// Hybrid policy: stay output stationary while one kernel tile's weight
// working set (kt * c entries) still fits the weight buffer, otherwise pin
// weights and stream partial sums instead.
ScheduleKind choose_dataflow(int in_channels, int kt,
                             std::uint64_t weight_buffer_capacity);

struct SweepEntry {
  int layer = 0;
  std::uint64_t capacity = 0;
  ScheduleKind chosen = ScheduleKind::output_stationary;
  AccessCounts counts;
};

// Policy + analytic cost for every (layer, capacity) pair.
std::vector<SweepEntry> dataflow_sweep(
    const std::vector<LayerShape>& layers,
    const std::vector<std::uint64_t>& capacities, int kt, int ct);

}  // namespace shiftflow

#endif  // SHIFTFLOW_DATAFLOW_HPP_
