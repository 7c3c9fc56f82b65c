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

#include "shiftflow/dataflow.hpp"

#include <stdexcept>
#include <string>

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

const char* schedule_kind_name(ScheduleKind k) {
  return k == ScheduleKind::output_stationary ? "output-stationary"
                                              : "weight-stationary";
}

Schedule make_schedule(ScheduleKind kind) {
  Schedule s;
  s.kind = kind;
  if (kind == ScheduleKind::output_stationary)
    s.loop_order = {"y", "x", "kernel-tile", "channel-tile"};
  else
    s.loop_order = {"kernel-tile", "channel-tile", "y", "x"};
  return s;
}

ScheduleResult run_schedule(const QTensor& in, const Pow2Weights& w,
                            ScheduleKind kind, int kt, int ct) {
  check(w.kw == 1 && w.kh == 1 && w.c == in.dims.c,
        "run_schedule: pointwise weights required");
  check(kt > 0 && ct > 0, "run_schedule: bad PE tile");

  const int h = in.dims.h, width = in.dims.w, c = in.dims.c, n = w.kernels;
  const int nk_tiles = ceil_div(n, kt);
  const int nc_tiles = ceil_div(c, ct);

  ScheduleResult r;
  r.out_dims = {n, h, width};
  r.acc.assign(static_cast<std::size_t>(n) * h * width, 0);
  AccessCounts& cnt = r.counts;

  auto acc_at = [&](int k, int y, int x) -> std::int32_t& {
    return r.acc[(static_cast<std::size_t>(k) * h + y) * width + x];
  };

  if (kind == ScheduleKind::output_stationary) {
    // Partial sums never leave the accumulator register: for each pixel the
    // whole weight set streams by while the output forms in place.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < width; ++x) {
        for (int tk = 0; tk < nk_tiles; ++tk) {
          const int k0 = tk * kt, k1 = k0 + kt < n ? k0 + kt : n;
          for (int tc = 0; tc < nc_tiles; ++tc) {
            const int c0 = tc * ct, c1 = c0 + ct < c ? c0 + ct : c;
            ++cnt.compute_cycles;
            cnt.iaram_reads += static_cast<std::uint64_t>(c1 - c0);
            for (int k = k0; k < k1; ++k) {
              for (int ch = c0; ch < c1; ++ch) {
                ++cnt.wram_reads;
                ++cnt.macs;
                acc_at(k, y, x) = shift_mac(in.at(ch, y, x),
                                            w.code(k, ch, 0, 0),
                                            acc_at(k, y, x));
              }
            }
          }
          cnt.oaram_writes += static_cast<std::uint64_t>(k1 - k0);
        }
      }
    }
    return r;
  }

  // Weight stationary: each kt x ct weight block is fetched once and pinned;
  // the pixel loop streams under it and partial sums bounce off the Inter RAM
  // between channel-tile passes, with a final drain pass to OARAM.
  std::uint64_t inter_live = 0;
  for (int tk = 0; tk < nk_tiles; ++tk) {
    const int k0 = tk * kt, k1 = k0 + kt < n ? k0 + kt : n;
    for (int tc = 0; tc < nc_tiles; ++tc) {
      const int c0 = tc * ct, c1 = c0 + ct < c ? c0 + ct : c;
      cnt.wram_reads +=
          static_cast<std::uint64_t>(k1 - k0) * (c1 - c0);  // pinned once
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < width; ++x) {
          ++cnt.compute_cycles;
          cnt.iaram_reads += static_cast<std::uint64_t>(c1 - c0);
          if (tc > 0) cnt.inter_reads += static_cast<std::uint64_t>(k1 - k0);
          for (int k = k0; k < k1; ++k) {
            for (int ch = c0; ch < c1; ++ch) {
              ++cnt.macs;
              acc_at(k, y, x) = shift_mac(in.at(ch, y, x), w.code(k, ch, 0, 0),
                                          acc_at(k, y, x));
            }
          }
          cnt.inter_writes += static_cast<std::uint64_t>(k1 - k0);
          if (tc == 0) inter_live += static_cast<std::uint64_t>(k1 - k0);
          if (inter_live > cnt.inter_peak) cnt.inter_peak = inter_live;
        }
      }
    }
    // Drain this kernel tile's finished sums to OARAM.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < width; ++x) {
        cnt.inter_reads += static_cast<std::uint64_t>(k1 - k0);
        cnt.oaram_writes += static_cast<std::uint64_t>(k1 - k0);
        inter_live -= static_cast<std::uint64_t>(k1 - k0);
      }
    }
  }
  return r;
}

AccessCounts schedule_cost(const LayerShape& s, ScheduleKind kind, int kt,
                           int ct) {
  check(s.h > 0 && s.w > 0 && s.c > 0 && s.n > 0, "schedule_cost: empty shape");
  check(kt > 0 && ct > 0, "schedule_cost: bad PE tile");
  const std::uint64_t pixels = static_cast<std::uint64_t>(s.h) * s.w;
  const std::uint64_t nk_tiles = ceil_div(s.n, kt);
  const std::uint64_t nc_tiles = ceil_div(s.c, ct);

  AccessCounts c;
  c.iaram_reads = pixels * s.c * nk_tiles;
  c.oaram_writes = pixels * s.n;
  c.compute_cycles = pixels * nk_tiles * nc_tiles;
  c.macs = pixels * s.n * s.c;
  if (kind == ScheduleKind::output_stationary) {
    c.wram_reads = pixels * s.n * s.c;
  } else {
    c.wram_reads = static_cast<std::uint64_t>(s.n) * s.c;
    c.inter_writes = pixels * s.n * nc_tiles;
    c.inter_reads = pixels * s.n * nc_tiles;
    c.inter_peak = pixels * static_cast<std::uint64_t>(s.n < kt ? s.n : kt);
  }
  return c;
}

ScheduleKind choose_dataflow(int in_channels, int kt,
                             std::uint64_t weight_buffer_capacity) {
  check(in_channels > 0 && kt > 0, "choose_dataflow: bad shape");
  const std::uint64_t working_set =
      static_cast<std::uint64_t>(kt) * static_cast<std::uint64_t>(in_channels);
  return working_set <= weight_buffer_capacity
             ? ScheduleKind::output_stationary
             : ScheduleKind::weight_stationary;
}

std::vector<SweepEntry> dataflow_sweep(
    const std::vector<LayerShape>& layers,
    const std::vector<std::uint64_t>& capacities, int kt, int ct) {
  std::vector<SweepEntry> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::uint64_t cap : capacities) {
      SweepEntry e;
      e.layer = static_cast<int>(i);
      e.capacity = cap;
      e.chosen = choose_dataflow(layers[i].c, kt, cap);
      e.counts = schedule_cost(layers[i], e.chosen, kt, ct);
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace shiftflow
