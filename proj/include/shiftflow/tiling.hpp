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

#ifndef SHIFTFLOW_TILING_HPP_
#define SHIFTFLOW_TILING_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "shiftflow/kernels.hpp"

namespace shiftflow {

// Column geometry of one stage of a (possibly fused) cascade.
struct StageGeom {
  int kernel = 1;
  int stride = 1;
  int pad = 0;
};

StageGeom stage_geom(const ConvLayerData& l);

// Input column span [*in_lo, *in_hi) a stage needs to produce output columns
// [out_lo, out_hi). Unclamped: the left edge may go negative.
void stage_input_span(const StageGeom& g, int out_lo, int out_hi, int* in_lo,
                      int* in_hi);

// One column tile. Output coordinates refer to the cascade's final stage,
// input coordinates to its first stage. The halo is whatever the tile fetches
// beyond its own output stripe mapped back to the input.
struct Tile {
  int out_start = 0;
  int out_cols = 0;
  int in_start = 0;
  int in_cols = 0;
  int halo_left = 0;
  int halo_right = 0;
};

struct TilePlan {
  std::vector<Tile> tiles;
  int in_width = 0;
  int out_width = 0;
  std::uint64_t ddr_columns = 0;  // sum of in_cols: column fetch traffic
};

// Splits the output into the fewest column tiles whose fetched input spans
// (halo included) fit `column_limit`. Output widths are as equal as possible,
// the remainder going to the trailing tiles. Every stride-2 stage receives an
// even input offset (the span is widened leftwards when needed) so local
// windows land on the same phase as the untiled run. Throws when no split
// satisfies the limit.
TilePlan plan_tiles(int in_width, const std::vector<StageGeom>& stages,
                    int column_limit);

// "tile 0: cols [0,128) halo(0,0)" per line.
std::string format_tile_plan(const TilePlan& plan);

// Runs a one- or two-stage cascade tile by tile and stitches the outputs.
// Two stages means a fused producer + depthwise pair. Results are bit-exact
// against the untiled kernels; costs accumulate across tiles.
QTensor execute_tiled(const QTensor& in,
                      const std::vector<const ConvLayerData*>& stages,
                      int column_limit, KernelCost* cost = nullptr,
                      TilePlan* plan_out = nullptr);

}  // namespace shiftflow

#endif  // SHIFTFLOW_TILING_HPP_
