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

#include "shiftflow/tiling.hpp"

#include <sstream>
#include <stdexcept>

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

int out_extent(int in, int stride) { return (in - 1) / stride + 1; }

// Input widths per stage, front to back, plus the final output width.
std::vector<int> stage_widths(int in_width,
                              const std::vector<StageGeom>& stages) {
  std::vector<int> w{in_width};
  for (const StageGeom& g : stages) w.push_back(out_extent(w.back(), g.stride));
  return w;
}

// Per-stage input spans for final output columns [a, b), clamped to each
// stage's extent, plus the aligned fetch start: the executed slice begins at
// a multiple of the total stride product so every stride-2 stage sees its
// input at the same phase as the untiled run.
struct TileSpans {
  std::vector<int> lo, hi;  // per stage, clamped
  int fetch_start = 0;      // aligned stage-0 start actually fetched
};

TileSpans tile_spans(const std::vector<StageGeom>& stages,
                     const std::vector<int>& widths, int a, int b) {
  const int n = static_cast<int>(stages.size());
  TileSpans s;
  s.lo.assign(n, 0);
  s.hi.assign(n, 0);
  int lo = a, hi = b;
  for (int i = n - 1; i >= 0; --i) {
    stage_input_span(stages[i], lo, hi, &lo, &hi);
    if (lo < 0) lo = 0;
    if (hi > widths[i]) hi = widths[i];
    s.lo[i] = lo;
    s.hi[i] = hi;
  }
  int stride_product = 1;
  for (const StageGeom& g : stages) stride_product *= g.stride;
  s.fetch_start = (s.lo[0] / stride_product) * stride_product;
  return s;
}

}  // namespace

StageGeom stage_geom(const ConvLayerData& l) {
  StageGeom g;
  g.kernel = l.kind == ConvKind::conv33 || l.kind == ConvKind::dw33 ? 3 : 1;
  g.stride = l.stride;
  g.pad = g.kernel / 2;
  return g;
}

void stage_input_span(const StageGeom& g, int out_lo, int out_hi, int* in_lo,
                      int* in_hi) {
  check(out_lo < out_hi, "stage_input_span: empty output range");
  *in_lo = g.stride * out_lo - g.pad;
  *in_hi = g.stride * (out_hi - 1) + g.kernel - g.pad;
}

TilePlan plan_tiles(int in_width, const std::vector<StageGeom>& stages,
                    int column_limit) {
  check(in_width > 0, "plan_tiles: empty input");
  check(!stages.empty(), "plan_tiles: no stages");
  if (column_limit <= 0)
    throw std::invalid_argument("plan_tiles: column limit must be positive");
  for (const StageGeom& g : stages) {
    check(g.kernel == 1 || g.kernel == 3, "plan_tiles: kernel must be 1 or 3");
    check(g.stride == 1 || g.stride == 2, "plan_tiles: stride must be 1 or 2");
    check(g.pad == g.kernel / 2, "plan_tiles: same padding expected");
  }

  const std::vector<int> widths = stage_widths(in_width, stages);
  const int out_width = widths.back();
  int stride_product = 1;
  for (const StageGeom& g : stages) stride_product *= g.stride;

  for (int tiles = 1; tiles <= out_width; ++tiles) {
    const int base = out_width / tiles;
    const int rem = out_width % tiles;
    TilePlan plan;
    plan.in_width = in_width;
    plan.out_width = out_width;
    bool ok = true;
    int a = 0;
    for (int t = 0; t < tiles && ok; ++t) {
      const int cols = base + (t >= tiles - rem ? 1 : 0);
      const int b = a + cols;
      const TileSpans s = tile_spans(stages, widths, a, b);
      const int in_cols = s.hi[0] - s.fetch_start;
      if (in_cols > column_limit) {
        ok = false;
        break;
      }
      for (std::size_t i = 0; i < stages.size(); ++i) {
        if (stages[i].kernel == 3) {
          const int need = widths[i] < 3 ? widths[i] : 3;
          if (s.hi[i] - s.lo[i] < need) ok = false;
        }
      }
      if (!ok) break;

      Tile tile;
      tile.out_start = a;
      tile.out_cols = cols;
      tile.in_start = s.fetch_start;
      tile.in_cols = in_cols;
      const int own_lo = a * stride_product;
      int own_hi = b * stride_product;
      if (own_hi > in_width) own_hi = in_width;
      tile.halo_left = own_lo - s.fetch_start;
      tile.halo_right = s.hi[0] > own_hi ? s.hi[0] - own_hi : 0;
      plan.ddr_columns += static_cast<std::uint64_t>(in_cols);
      plan.tiles.push_back(tile);
      a = b;
    }
    if (ok) return plan;
  }
  std::ostringstream msg;
  msg << "plan_tiles: no feasible split of " << out_width
      << " output columns under a " << column_limit << "-column limit";
  throw std::runtime_error(msg.str());
}

std::string format_tile_plan(const TilePlan& plan) {
  std::ostringstream out;
  for (std::size_t i = 0; i < plan.tiles.size(); ++i) {
    const Tile& t = plan.tiles[i];
    out << "tile " << i << ": cols [" << t.out_start << ','
        << t.out_start + t.out_cols << ") halo(" << t.halo_left << ','
        << t.halo_right << ")\n";
  }
  return out.str();
}

namespace {

QTensor slice_cols(const QTensor& in, int x0, int x1) {
  QTensor out({in.dims.c, in.dims.h, x1 - x0}, in.bits, in.scale);
  for (int ch = 0; ch < in.dims.c; ++ch)
    for (int y = 0; y < in.dims.h; ++y)
      for (int x = x0; x < x1; ++x)
        out.at(ch, y, x - x0) = in.at(ch, y, x);
  return out;
}

}  // namespace

QTensor execute_tiled(const QTensor& in,
                      const std::vector<const ConvLayerData*>& layers,
                      int column_limit, KernelCost* cost, TilePlan* plan_out) {
  check(layers.size() == 1 || layers.size() == 2,
        "execute_tiled: one layer or a fused pair");
  for (const ConvLayerData* l : layers)
    check(l != nullptr && l->kind != ConvKind::head11,
          "execute_tiled: head layers are not tiled");
  if (layers.size() == 2) {
    check(layers[0]->kind != ConvKind::dw33 &&
              layers[1]->kind == ConvKind::dw33,
          "execute_tiled: pair must be producer + dw33");
  }

  std::vector<StageGeom> stages;
  stages.reserve(layers.size());
  for (const ConvLayerData* l : layers) stages.push_back(stage_geom(*l));
  const TilePlan plan = plan_tiles(in.dims.w, stages, column_limit);

  // Full-height output: only columns are tiled.
  Dims3 od = in.dims;
  for (const ConvLayerData* l : layers)
    od = conv_output_dims(od, l->kind, l->weights.kernels, l->stride);
  QTensor out(od, layers.back()->out_bits, 1.0);

  KernelCost total;
  for (const Tile& t : plan.tiles) {
    const QTensor slice = slice_cols(in, t.in_start, t.in_start + t.in_cols);
    KernelCost tile_cost;
    QTensor local = layers.size() == 2
                        ? fused_conv_dw(slice, *layers[0], *layers[1],
                                        &tile_cost)
                        : run_conv_layer(slice, *layers[0], &tile_cost);
    total += tile_cost;

    // The aligned fetch start maps to a whole output column per stage.
    int out0 = t.in_start;
    for (const StageGeom& g : stages) out0 /= g.stride;
    for (int ch = 0; ch < od.c; ++ch)
      for (int y = 0; y < od.h; ++y)
        for (int j = 0; j < t.out_cols; ++j)
          out.at(ch, y, t.out_start + j) =
              local.at(ch, y, t.out_start - out0 + j);
  }
  if (cost != nullptr) *cost = total;
  if (plan_out != nullptr) *plan_out = plan;
  return out;
}

}  // namespace shiftflow
