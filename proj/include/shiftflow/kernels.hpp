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

#ifndef SHIFTFLOW_KERNELS_HPP_
#define SHIFTFLOW_KERNELS_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "shiftflow/fixq.hpp"

namespace shiftflow {

enum class ConvKind { conv33, conv11, dw33, head11 };

const char* conv_kind_name(ConvKind k);
ConvKind parse_conv_kind(const std::string& name);

// Processing-element geometry: kernels x channels retired per cycle, plus the
// operand widths the datapath is built for.
struct PeConfig {
  const char* name;
  int kt = 0;
  int ct = 0;
  int act_bits = 0;
  int weight_bits = 0;
  int out_bits = 0;
};

inline constexpr PeConfig kPe33{"pe33", 8, 3, 8, 3, 4};
inline constexpr PeConfig kPe11{"pe11", 16, 32, 4, 3, 4};
inline constexpr PeConfig kPeDw{"pedw", 16, 16, 4, 3, 4};
inline constexpr PeConfig kPeHead{"pehead", 2, 32, 4, 8, 16};

// 2 ops (multiply + add) per MAC, kt*ct MACs per cycle.
double peak_gops(const PeConfig& pe, double freq_mhz);

struct KernelCost {
  std::uint64_t compute_cycles = 0;
  std::uint64_t fill_cycles = 0;
  std::uint64_t macs = 0;

  std::uint64_t total_cycles() const { return compute_cycles + fill_cycles; }
  KernelCost& operator+=(const KernelCost& o);
};

// Line-buffer register count for a sliding 3x3 window over rows of
// `tile_width` pixels: two full rows plus the three taps of the current one.
int register_cost(int tile_width);

// Activation storage split across three row banks so the three rows of any
// 3x3 window can be fetched in a single cycle. Row r lives in bank r mod 3.
class BankedFeature {
 public:
  explicit BankedFeature(const QTensor& t);

  static int bank_of_row(int r) { return r % 3; }

  // Reads one element, counting a fetch on the owning bank. Out-of-range
  // rows/columns return the zero padding without touching a bank.
  std::uint8_t at(int ch, int y, int x) const;

  const Dims3& dims() const { return dims_; }
  const std::array<std::uint64_t, 3>& bank_reads() const { return reads_; }

 private:
  Dims3 dims_;
  std::array<std::vector<std::uint8_t>, 3> banks_;
  mutable std::array<std::uint64_t, 3> reads_{0, 0, 0};
};

// Sliding-window ring for depthwise 3x3: per channel it keeps the last
// 2*width + 3 pushed values, the widest span a same-padded window can reach
// back. Values are addressed by push sequence number; asking for an evicted
// sequence throws, which is how tests prove the register budget suffices.
class DepthwiseLineBuffer {
 public:
  DepthwiseLineBuffer(int channels, int width);

  void push(const std::vector<std::uint8_t>& pixel);  // one value per channel
  std::uint8_t value(int ch, std::int64_t seq) const;

  std::int64_t pushed() const { return pushed_; }
  int capacity() const { return capacity_; }
  int peak_span() const { return peak_span_; }
  void note_span(std::int64_t oldest_seq, std::int64_t newest_seq);

 private:
  int channels_ = 0;
  int capacity_ = 0;
  int peak_span_ = 0;
  std::int64_t pushed_ = 0;  // sequence number of the next push
  std::vector<std::uint8_t> ring_;  // channels_ x capacity_
};

struct LineBufferStats {
  int capacity = 0;
  int peak_span = 0;
  std::uint64_t pushes = 0;
};

// One convolution layer in deployable form: power-of-two weights plus the
// per-kernel fixed-point requantization pair (a, b). Head layers carry plain
// 8-bit weights and an integer bias instead and skip requantization.
struct ConvLayerData {
  ConvKind kind = ConvKind::conv33;
  int stride = 1;
  int out_bits = 4;  // M of the produced activations
  Pow2Weights weights;
  std::vector<FixedScalar> a;
  std::vector<FixedScalar> b;
  HeadWeights head;
  bool fuse_into_next_dw = false;
};

// Same-padded 3x3 convolution over banked activations. With stride 2 the
// address generator jumps straight between even rows and columns instead of
// sweeping every position, so compute cycles shrink with the output area.
QTensor conv33(const QTensor& in, const Pow2Weights& w,
               const std::vector<FixedScalar>& a,
               const std::vector<FixedScalar>& b, int out_bits, int stride,
               KernelCost* cost = nullptr);

// Cycle cost of the same stride-2 layer on a line-buffer datapath that has to
// visit every stride-1 position and drop odd rows and columns afterwards.
KernelCost conv33_dense_sweep_cost(Dims3 in_dims, int kernels);

// Pointwise convolution; no window, no fill.
QTensor conv11(const QTensor& in, const Pow2Weights& w,
               const std::vector<FixedScalar>& a,
               const std::vector<FixedScalar>& b, int out_bits,
               KernelCost* cost = nullptr);

// Same-padded depthwise 3x3 fed pixel-by-pixel through the line buffer.
// w.kernels must equal in.dims.c and w.c must be 1.
QTensor dw33(const QTensor& in, const Pow2Weights& w,
             const std::vector<FixedScalar>& a,
             const std::vector<FixedScalar>& b, int out_bits, int stride,
             KernelCost* cost = nullptr, LineBufferStats* lb = nullptr);

// Producer (3x3 or 1x1) cascaded into a depthwise 3x3. The producer emits one
// pixel per step directly into the consumer's line buffer; the intermediate
// feature map is never materialized. Compute cycles of the two stages overlap,
// so the fused cost is the max of the stage compute costs plus both fills.
QTensor fused_conv_dw(const QTensor& in, const ConvLayerData& producer,
                      const ConvLayerData& dw, KernelCost* cost = nullptr,
                      LineBufferStats* lb = nullptr);

// Detection-head 1x1 convolution: 8-bit weights, widening 32-bit accumulate,
// integer bias, saturation to int16. `saturations` counts clamped outputs.
Int16Tensor head11(const QTensor& in, const HeadWeights& w,
                   std::uint64_t* saturations = nullptr,
                   KernelCost* cost = nullptr);

// Dispatch helper for non-head layers.
QTensor run_conv_layer(const QTensor& in, const ConvLayerData& l,
                       KernelCost* cost = nullptr,
                       LineBufferStats* lb = nullptr);

// Output dims of one layer applied to `in` (same padding throughout).
Dims3 conv_output_dims(Dims3 in, ConvKind kind, int out_channels, int stride);

}  // namespace shiftflow

#endif  // SHIFTFLOW_KERNELS_HPP_
