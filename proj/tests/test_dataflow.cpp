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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>

#include "oracle.hpp"
#include "shiftflow/dataflow.hpp"

using namespace shiftflow;
namespace tt = shiftflow::testing;

namespace {

// Plain pointwise accumulators, no tiling, no schedule.
std::vector<std::int32_t> naive_acc(const QTensor& in, const Pow2Weights& w) {
  Dims3 od{w.kernels, in.dims.h, in.dims.w};
  std::vector<std::int32_t> acc(od.size(), 0);
  for (int k = 0; k < w.kernels; ++k)
    for (int y = 0; y < od.h; ++y)
      for (int x = 0; x < od.w; ++x) {
        std::int64_t s = 0;
        for (int ch = 0; ch < in.dims.c; ++ch)
          s += static_cast<std::int64_t>(in.at(ch, y, x)) *
               tt::ref_code_value(w.code(k, ch, 0, 0));
        acc[(static_cast<std::size_t>(k) * od.h + y) * od.w + x] =
            static_cast<std::int32_t>(s);
      }
  return acc;
}

}  // namespace

TEST_CASE("schedule descriptors") {
  Schedule os = make_schedule(ScheduleKind::output_stationary);
  CHECK(std::string(os.loop_order[0]) == "y");
  CHECK(std::string(os.loop_order[1]) == "x");
  CHECK(std::string(os.loop_order[2]) == "kernel-tile");
  CHECK(std::string(os.loop_order[3]) == "channel-tile");
  Schedule ws = make_schedule(ScheduleKind::weight_stationary);
  CHECK(std::string(ws.loop_order[0]) == "kernel-tile");
  CHECK(std::string(ws.loop_order[1]) == "channel-tile");
  CHECK(std::string(ws.loop_order[2]) == "y");
  CHECK(std::string(ws.loop_order[3]) == "x");
  CHECK(std::string(schedule_kind_name(ScheduleKind::output_stationary)) ==
        "output-stationary");
  CHECK(std::string(schedule_kind_name(ScheduleKind::weight_stationary)) ==
        "weight-stationary");
}

TEST_CASE("both loop orders produce the naive accumulators") {
  std::mt19937 rng(51);
  std::uniform_int_distribution<int> cs(1, 40), ns(1, 40), hw(1, 8);
  struct TileShape {
    int kt, ct;
  };
  const TileShape tiles[] = {{16, 32}, {2, 3}, {1, 1}, {5, 7}};
  for (const TileShape& ts : tiles)
    for (int i = 0; i < 25; ++i) {
      int c = cs(rng), n = ns(rng), h = hw(rng), w = hw(rng);
      QTensor in = tt::random_qtensor(rng, {c, h, w}, 4);
      Pow2Weights wt = tt::random_pow2(rng, n, 1, c, 3);
      std::vector<std::int32_t> want = naive_acc(in, wt);
      ScheduleResult os =
          run_schedule(in, wt, ScheduleKind::output_stationary, ts.kt, ts.ct);
      ScheduleResult ws =
          run_schedule(in, wt, ScheduleKind::weight_stationary, ts.kt, ts.ct);
      CHECK(os.out_dims == Dims3{n, h, w});
      CHECK(os.acc == want);
      CHECK(ws.acc == want);
      CHECK(os.out_dims == ws.out_dims);
    }
}

TEST_CASE("closed-form counts match the instrumented loop nests exactly") {
  std::mt19937 rng(52);
  std::uniform_int_distribution<int> cs(1, 70), ns(1, 70), hw(1, 7);
  struct TileShape {
    int kt, ct;
  };
  const TileShape tiles[] = {{16, 32}, {3, 5}, {1, 1}, {8, 2}};
  for (const TileShape& ts : tiles)
    for (int i = 0; i < 30; ++i) {
      int c = cs(rng), n = ns(rng), h = hw(rng), w = hw(rng);
      QTensor in = tt::random_qtensor(rng, {c, h, w}, 4);
      Pow2Weights wt = tt::random_pow2(rng, n, 1, c, 3);
      LayerShape shape{h, w, c, n};
      for (ScheduleKind kind : {ScheduleKind::output_stationary,
                                ScheduleKind::weight_stationary}) {
        ScheduleResult run = run_schedule(in, wt, kind, ts.kt, ts.ct);
        AccessCounts model = schedule_cost(shape, kind, ts.kt, ts.ct);
        CHECK(run.counts == model);
        // Real multiplies never depend on the loop order or tile shape.
        CHECK(run.counts.macs == static_cast<std::uint64_t>(h) * w * c * n);
      }
    }
}

TEST_CASE("output-stationary keeps partial sums out of the Inter RAM") {
  AccessCounts c = schedule_cost({14, 14, 64, 32},
                                 ScheduleKind::output_stationary, 16, 32);
  CHECK(c.inter_writes == 0);
  CHECK(c.inter_reads == 0);
  CHECK(c.inter_peak == 0);
  // Weights stream again for every pixel.
  CHECK(c.wram_reads == 14ull * 14 * 64 * 32);

  AccessCounts ws = schedule_cost({14, 14, 64, 32},
                                  ScheduleKind::weight_stationary, 16, 32);
  // Each weight is fetched exactly once...
  CHECK(ws.wram_reads == 64ull * 32);
  // ...at the price of spilling partials once per channel tile.
  CHECK(ws.inter_writes == 14ull * 14 * 32 * 2);
  CHECK(ws.inter_reads == ws.inter_writes);
  CHECK(ws.inter_peak == 14ull * 14 * 16);
  // Same arithmetic either way.
  CHECK(ws.macs == c.macs);
  CHECK(ws.compute_cycles == c.compute_cycles);
  CHECK(ws.oaram_writes == c.oaram_writes);
}

TEST_CASE("hybrid policy switches on the weight working set") {
  // One kernel tile of 16 kernels times c channels has to fit the buffer.
  CHECK(choose_dataflow(64, 16, 1024) == ScheduleKind::output_stationary);
  CHECK(choose_dataflow(64, 16, 1023) == ScheduleKind::weight_stationary);
  CHECK(choose_dataflow(3, 16, 4096) == ScheduleKind::output_stationary);
  CHECK(choose_dataflow(512, 16, 4096) == ScheduleKind::weight_stationary);
}

TEST_CASE("dataflow sweep walks layers then capacities") {
  std::vector<LayerShape> layers{{56, 56, 16, 32}, {14, 14, 256, 256}};
  std::vector<std::uint64_t> caps{512, 4096};
  std::vector<SweepEntry> sweep = dataflow_sweep(layers, caps, 16, 32);
  REQUIRE(sweep.size() == 4);
  CHECK(sweep[0].layer == 0);
  CHECK(sweep[0].capacity == 512);
  CHECK(sweep[1].layer == 0);
  CHECK(sweep[1].capacity == 4096);
  CHECK(sweep[2].layer == 1);
  for (const SweepEntry& e : sweep) {
    int c = layers[e.layer].c;
    CHECK(e.chosen == choose_dataflow(c, 16, e.capacity));
    CHECK(e.counts == schedule_cost(layers[e.layer], e.chosen, 16, 32));
  }
  // 16 * 16 = 256 <= 512 keeps the first layer output stationary there.
  CHECK(sweep[0].chosen == ScheduleKind::output_stationary);
  // 16 * 256 = 4096 > 512 pushes the second layer to weight stationary.
  CHECK(sweep[2].chosen == ScheduleKind::weight_stationary);
  // At 4096 capacity the working set fits exactly (inclusive rule).
  CHECK(sweep[3].chosen == ScheduleKind::output_stationary);
}
