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

#ifndef SHIFTFLOW_ENGINE_HPP_
#define SHIFTFLOW_ENGINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "shiftflow/dataflow.hpp"
#include "shiftflow/quantizer.hpp"
#include "shiftflow/tiling.hpp"

namespace shiftflow {

struct RunOptions {
  int tile_limit = 0;  // max input columns per tile; 0 runs untiled
  std::uint64_t weight_buffer_capacity = 4096;  // drives the dataflow choice
};

// Per executed step: one backbone layer, one fused producer+depthwise pair,
// or one head.
struct LayerReport {
  int index = 0;          // first topology layer covered by this step
  std::string name;       // e.g. "conv11", "fused(conv11+dw33)", "head11"
  Dims3 out_dims;
  KernelCost cost;
  bool has_schedule = false;    // pointwise layers pick a dataflow
  ScheduleKind schedule = ScheduleKind::output_stationary;
  AccessCounts counts;          // filled when has_schedule
  LineBufferStats line_buffer;  // depthwise / fused steps
};

struct RunResult {
  QTensor feature;  // final backbone activations
  std::vector<Int16Tensor> heads;
  std::vector<std::uint64_t> head_saturations;
  std::vector<LayerReport> layers;
  KernelCost total_cost;
  std::uint64_t audit_violations = 0;  // real-arithmetic calls observed
  std::uint64_t output_hash = 0;       // FNV-1a over feature + head bytes
};

// Whole-network inference on integer data. The pass runs inside an
// integer-arithmetic guard; any audited real-valued routine touched on the
// way shows up in audit_violations. Layers marked for fusion execute as a
// producer+depthwise cascade without materializing the middle feature map.
RunResult run_inference(const QuantizedNetwork& net, const QTensor& input,
                        const RunOptions& opts = {});

struct CompareResult {
  std::vector<double> layer_sqnr_db;  // one per topology layer
  double feature_sqnr_db = 0.0;       // final backbone feature map
};

// Quantized path vs. float reference on one image: signal-to-quantization-
// noise ratio 10*log10(sum y^2 / sum (y - y_hat)^2), dequantizing integer
// levels with the fitted activation steps. Exact matches report +inf.
CompareResult compare_float(const QuantizedNetwork& qnet,
                            const FloatNetwork& fnet,
                            const std::vector<float>& image);

// 64-bit FNV-1a running hash.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xcbf29ce484222325ull);

struct PeakRow {
  const char* pe = nullptr;
  int kt = 0;
  int ct = 0;
  double gops = 0.0;
};

// Peak MAC throughput of the four PE arrays at the given clock.
std::vector<PeakRow> peak_throughput(double freq_mhz);

}  // namespace shiftflow

#endif  // SHIFTFLOW_ENGINE_HPP_
