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

#include "shiftflow/kernels.hpp"

#include <stdexcept>
#include <string>

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

int out_extent(int in, int stride) { return (in - 1) / stride + 1; }

void check_requant(const Pow2Weights& w, const std::vector<FixedScalar>& a,
                   const std::vector<FixedScalar>& b, int out_bits) {
  check(a.size() == static_cast<std::size_t>(w.kernels) && a.size() == b.size(),
        "conv: one (a, b) pair per kernel required");
  check(out_bits >= 1 && out_bits <= 8, "conv: output bits out of range");
}

}  // namespace

const char* conv_kind_name(ConvKind k) {
  switch (k) {
    case ConvKind::conv33: return "conv33";
    case ConvKind::conv11: return "conv11";
    case ConvKind::dw33: return "dw33";
    case ConvKind::head11: return "head11";
  }
  return "?";
}

ConvKind parse_conv_kind(const std::string& name) {
  if (name == "conv33") return ConvKind::conv33;
  if (name == "conv11") return ConvKind::conv11;
  if (name == "dw33") return ConvKind::dw33;
  if (name == "head11") return ConvKind::head11;
  throw std::runtime_error("unknown layer kind: " + name);
}

double peak_gops(const PeConfig& pe, double freq_mhz) {
  return 2.0 * pe.kt * pe.ct * freq_mhz * 1e6 / 1e9;
}

KernelCost& KernelCost::operator+=(const KernelCost& o) {
  compute_cycles += o.compute_cycles;
  fill_cycles += o.fill_cycles;
  macs += o.macs;
  return *this;
}

int register_cost(int tile_width) { return 2 * tile_width + 3; }

// --------------------------------------------------------------------------
// BankedFeature
// --------------------------------------------------------------------------

BankedFeature::BankedFeature(const QTensor& t) : dims_(t.dims) {
  for (int j = 0; j < 3; ++j) {
    const int rows = (dims_.h - j + 2) / 3;  // rows j, j+3, j+6, ...
    banks_[j].assign(static_cast<std::size_t>(rows) * dims_.c * dims_.w, 0);
  }
  for (int y = 0; y < dims_.h; ++y)
    for (int ch = 0; ch < dims_.c; ++ch)
      for (int x = 0; x < dims_.w; ++x)
        banks_[bank_of_row(y)]
              [(static_cast<std::size_t>(y / 3) * dims_.c + ch) * dims_.w + x] =
                  t.at(ch, y, x);
}

std::uint8_t BankedFeature::at(int ch, int y, int x) const {
  if (y < 0 || y >= dims_.h || x < 0 || x >= dims_.w) return 0;
  const int j = bank_of_row(y);
  ++reads_[j];
  return banks_[j]
               [(static_cast<std::size_t>(y / 3) * dims_.c + ch) * dims_.w + x];
}

// --------------------------------------------------------------------------
// DepthwiseLineBuffer
// --------------------------------------------------------------------------

DepthwiseLineBuffer::DepthwiseLineBuffer(int channels, int width)
    : channels_(channels), capacity_(register_cost(width)),
      ring_(static_cast<std::size_t>(channels) * register_cost(width), 0) {
  check(channels > 0 && width > 0, "line buffer: empty shape");
}

void DepthwiseLineBuffer::push(const std::vector<std::uint8_t>& pixel) {
  check(pixel.size() == static_cast<std::size_t>(channels_),
        "line buffer: push width mismatch");
  const std::size_t slot = static_cast<std::size_t>(pushed_ % capacity_);
  for (int ch = 0; ch < channels_; ++ch)
    ring_[static_cast<std::size_t>(ch) * capacity_ + slot] = pixel[ch];
  ++pushed_;
}

std::uint8_t DepthwiseLineBuffer::value(int ch, std::int64_t seq) const {
  if (seq >= pushed_ || seq < pushed_ - capacity_)
    throw std::logic_error("line buffer: tap outside the register window");
  return ring_[static_cast<std::size_t>(ch) * capacity_ +
               static_cast<std::size_t>(seq % capacity_)];
}

void DepthwiseLineBuffer::note_span(std::int64_t oldest_seq,
                                    std::int64_t newest_seq) {
  const int span = static_cast<int>(newest_seq - oldest_seq + 1);
  if (span > peak_span_) peak_span_ = span;
}

// --------------------------------------------------------------------------
// conv 3x3
// --------------------------------------------------------------------------

QTensor conv33(const QTensor& in, const Pow2Weights& w,
               const std::vector<FixedScalar>& a,
               const std::vector<FixedScalar>& b, int out_bits, int stride,
               KernelCost* cost) {
  check(w.kw == 3 && w.kh == 3 && w.c == in.dims.c,
        "conv33: weight shape mismatch");
  check(stride == 1 || stride == 2, "conv33: stride must be 1 or 2");
  check_requant(w, a, b, out_bits);

  const int ho = out_extent(in.dims.h, stride);
  const int wo = out_extent(in.dims.w, stride);
  QTensor out({w.kernels, ho, wo}, out_bits, 1.0);
  BankedFeature banked(in);

  std::uint64_t macs = 0;
  for (int k = 0; k < w.kernels; ++k) {
    for (int oy = 0; oy < ho; ++oy) {
      const int cy = oy * stride;
      for (int ox = 0; ox < wo; ++ox) {
        const int cx = ox * stride;
        std::int32_t acc = 0;
        for (int ch = 0; ch < in.dims.c; ++ch) {
          for (int dy = -1; dy <= 1; ++dy) {
            const int y = cy + dy;
            if (y < 0 || y >= in.dims.h) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              const int x = cx + dx;
              if (x < 0 || x >= in.dims.w) continue;
              acc = shift_mac(banked.at(ch, y, x),
                              w.code(k, ch, dy + 1, dx + 1), acc);
              ++macs;
            }
          }
        }
        out.at(k, oy, ox) =
            static_cast<std::uint8_t>(requantize(acc, a[k], b[k], out_bits));
      }
    }
  }
  if (cost != nullptr) {
    cost->compute_cycles = ceil_div(w.kernels, kPe33.kt) *
                           ceil_div(in.dims.c, kPe33.ct) *
                           static_cast<std::uint64_t>(ho) * wo * 9;
    cost->fill_cycles = 3;  // one priming fetch per row bank
    cost->macs = macs;
  }
  return out;
}

KernelCost conv33_dense_sweep_cost(Dims3 in_dims, int kernels) {
  KernelCost c;
  // Every stride-1 position is visited; odd rows and columns are discarded
  // after the fact. The window buffer must fill before the first output.
  c.compute_cycles = ceil_div(kernels, kPe33.kt) *
                     ceil_div(in_dims.c, kPe33.ct) *
                     static_cast<std::uint64_t>(in_dims.h) * in_dims.w * 9;
  c.fill_cycles = static_cast<std::uint64_t>(register_cost(in_dims.w));
  c.macs = static_cast<std::uint64_t>(kernels) * in_dims.c * in_dims.h *
           in_dims.w * 9;
  return c;
}

// --------------------------------------------------------------------------
// conv 1x1
// --------------------------------------------------------------------------

QTensor conv11(const QTensor& in, const Pow2Weights& w,
               const std::vector<FixedScalar>& a,
               const std::vector<FixedScalar>& b, int out_bits,
               KernelCost* cost) {
  check(w.kw == 1 && w.kh == 1 && w.c == in.dims.c,
        "conv11: weight shape mismatch");
  check_requant(w, a, b, out_bits);

  QTensor out({w.kernels, in.dims.h, in.dims.w}, out_bits, 1.0);
  for (int k = 0; k < w.kernels; ++k) {
    for (int y = 0; y < in.dims.h; ++y) {
      for (int x = 0; x < in.dims.w; ++x) {
        std::int32_t acc = 0;
        for (int ch = 0; ch < in.dims.c; ++ch)
          acc = shift_mac(in.at(ch, y, x), w.code(k, ch, 0, 0), acc);
        out.at(k, y, x) =
            static_cast<std::uint8_t>(requantize(acc, a[k], b[k], out_bits));
      }
    }
  }
  if (cost != nullptr) {
    cost->compute_cycles = ceil_div(w.kernels, kPe11.kt) *
                           ceil_div(in.dims.c, kPe11.ct) *
                           static_cast<std::uint64_t>(in.dims.h) * in.dims.w;
    cost->fill_cycles = 0;
    cost->macs = static_cast<std::uint64_t>(w.kernels) * in.dims.c *
                 in.dims.h * in.dims.w;
  }
  return out;
}

// --------------------------------------------------------------------------
// depthwise 3x3 through the line buffer
// --------------------------------------------------------------------------

namespace {

// Output pixels become computable the moment their newest in-bounds tap is
// pushed; bucket them by that sequence number.
struct DwEmitPlan {
  int ho = 0, wo = 0;
  std::vector<std::vector<std::pair<int, int>>> by_seq;  // (oy, ox)
};

DwEmitPlan plan_dw_emission(Dims3 in, int stride) {
  DwEmitPlan p;
  p.ho = out_extent(in.h, stride);
  p.wo = out_extent(in.w, stride);
  p.by_seq.resize(static_cast<std::size_t>(in.h) * in.w);
  for (int oy = 0; oy < p.ho; ++oy) {
    const int cy = oy * stride;
    for (int ox = 0; ox < p.wo; ++ox) {
      const int cx = ox * stride;
      const int ny = cy + 1 < in.h ? cy + 1 : in.h - 1;
      const int nx = cx + 1 < in.w ? cx + 1 : in.w - 1;
      p.by_seq[static_cast<std::size_t>(ny) * in.w + nx].emplace_back(oy, ox);
    }
  }
  return p;
}

// Computes one depthwise output pixel for all channels from buffered taps.
void emit_dw_pixel(const DepthwiseLineBuffer& lb, Dims3 in, int oy, int ox,
                   int stride, const Pow2Weights& w,
                   const std::vector<FixedScalar>& a,
                   const std::vector<FixedScalar>& b, QTensor* out,
                   std::uint64_t* macs) {
  const int cy = oy * stride;
  const int cx = ox * stride;
  for (int ch = 0; ch < in.c; ++ch) {
    std::int32_t acc = 0;
    for (int dy = -1; dy <= 1; ++dy) {
      const int y = cy + dy;
      if (y < 0 || y >= in.h) continue;
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = cx + dx;
        if (x < 0 || x >= in.w) continue;
        const std::int64_t seq = static_cast<std::int64_t>(y) * in.w + x;
        acc = shift_mac(lb.value(ch, seq), w.code(ch, 0, dy + 1, dx + 1), acc);
        ++*macs;
      }
    }
    out->at(ch, oy, ox) =
        static_cast<std::uint8_t>(requantize(acc, a[ch], b[ch], out->bits));
  }
}

void note_dw_span(DepthwiseLineBuffer* lb, Dims3 in, int oy, int ox,
                  int stride) {
  const int cy = oy * stride;
  const int cx = ox * stride;
  const int y0 = cy - 1 < 0 ? 0 : cy - 1;
  const int x0 = cx - 1 < 0 ? 0 : cx - 1;
  const int y1 = cy + 1 < in.h ? cy + 1 : in.h - 1;
  const int x1 = cx + 1 < in.w ? cx + 1 : in.w - 1;
  lb->note_span(static_cast<std::int64_t>(y0) * in.w + x0,
                static_cast<std::int64_t>(y1) * in.w + x1);
}

void fill_lb_stats(const DepthwiseLineBuffer& lb, LineBufferStats* stats) {
  if (stats == nullptr) return;
  stats->capacity = lb.capacity();
  stats->peak_span = lb.peak_span();
  stats->pushes = static_cast<std::uint64_t>(lb.pushed());
}

}  // namespace

QTensor dw33(const QTensor& in, const Pow2Weights& w,
             const std::vector<FixedScalar>& a,
             const std::vector<FixedScalar>& b, int out_bits, int stride,
             KernelCost* cost, LineBufferStats* lb_stats) {
  check(w.kw == 3 && w.kh == 3 && w.c == 1 && w.kernels == in.dims.c,
        "dw33: weight shape mismatch");
  check(stride == 1 || stride == 2, "dw33: stride must be 1 or 2");
  check_requant(w, a, b, out_bits);

  const DwEmitPlan plan = plan_dw_emission(in.dims, stride);
  QTensor out({in.dims.c, plan.ho, plan.wo}, out_bits, 1.0);
  DepthwiseLineBuffer lb(in.dims.c, in.dims.w);

  std::uint64_t macs = 0;
  std::vector<std::uint8_t> pixel(in.dims.c);
  for (int y = 0; y < in.dims.h; ++y) {
    for (int x = 0; x < in.dims.w; ++x) {
      for (int ch = 0; ch < in.dims.c; ++ch) pixel[ch] = in.at(ch, y, x);
      lb.push(pixel);
      const std::int64_t seq = static_cast<std::int64_t>(y) * in.dims.w + x;
      for (const auto& [oy, ox] : plan.by_seq[static_cast<std::size_t>(seq)]) {
        note_dw_span(&lb, in.dims, oy, ox, stride);
        emit_dw_pixel(lb, in.dims, oy, ox, stride, w, a, b, &out, &macs);
      }
    }
  }
  if (cost != nullptr) {
    cost->compute_cycles = ceil_div(in.dims.c, kPeDw.ct) *
                           static_cast<std::uint64_t>(plan.ho) * plan.wo;
    cost->fill_cycles = static_cast<std::uint64_t>(lb.capacity());
    cost->macs = macs;
  }
  fill_lb_stats(lb, lb_stats);
  return out;
}

// --------------------------------------------------------------------------
// fused producer + depthwise
// --------------------------------------------------------------------------

namespace {

// One producer output pixel, all channels, straight into `pixel`.
void produce_pixel(const QTensor& in, const BankedFeature* banked,
                   const ConvLayerData& p, int py, int px,
                   std::vector<std::uint8_t>* pixel, std::uint64_t* macs) {
  const int n = p.weights.kernels;
  for (int k = 0; k < n; ++k) {
    std::int32_t acc = 0;
    if (p.kind == ConvKind::conv11) {
      const int y = py * p.stride;
      const int x = px * p.stride;
      for (int ch = 0; ch < in.dims.c; ++ch) {
        acc = shift_mac(in.at(ch, y, x), p.weights.code(k, ch, 0, 0), acc);
        ++*macs;
      }
    } else {
      const int cy = py * p.stride;
      const int cx = px * p.stride;
      for (int ch = 0; ch < in.dims.c; ++ch) {
        for (int dy = -1; dy <= 1; ++dy) {
          const int y = cy + dy;
          if (y < 0 || y >= in.dims.h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = cx + dx;
            if (x < 0 || x >= in.dims.w) continue;
            acc = shift_mac(banked->at(ch, y, x),
                            p.weights.code(k, ch, dy + 1, dx + 1), acc);
            ++*macs;
          }
        }
      }
    }
    (*pixel)[k] =
        static_cast<std::uint8_t>(requantize(acc, p.a[k], p.b[k], p.out_bits));
  }
}

}  // namespace

QTensor fused_conv_dw(const QTensor& in, const ConvLayerData& producer,
                      const ConvLayerData& dw, KernelCost* cost,
                      LineBufferStats* lb_stats) {
  check(producer.kind == ConvKind::conv33 || producer.kind == ConvKind::conv11,
        "fused: producer must be conv33 or conv11");
  check(dw.kind == ConvKind::dw33, "fused: consumer must be dw33");
  check(dw.weights.kernels == producer.weights.kernels,
        "fused: channel count mismatch between producer and depthwise");
  check_requant(producer.weights, producer.a, producer.b, producer.out_bits);
  check_requant(dw.weights, dw.a, dw.b, dw.out_bits);

  // The intermediate feature map exists only as dims here; its pixels live in
  // the line buffer registers alone.
  const Dims3 mid{producer.weights.kernels,
                  out_extent(in.dims.h, producer.stride),
                  out_extent(in.dims.w, producer.stride)};
  const DwEmitPlan plan = plan_dw_emission(mid, dw.stride);
  QTensor out({mid.c, plan.ho, plan.wo}, dw.out_bits, 1.0);
  DepthwiseLineBuffer lb(mid.c, mid.w);

  BankedFeature banked_storage(in);
  const BankedFeature* banked =
      producer.kind == ConvKind::conv33 ? &banked_storage : nullptr;

  std::uint64_t macs = 0;
  std::vector<std::uint8_t> pixel(mid.c);
  for (int py = 0; py < mid.h; ++py) {
    for (int px = 0; px < mid.w; ++px) {
      produce_pixel(in, banked, producer, py, px, &pixel, &macs);
      lb.push(pixel);
      const std::int64_t seq = static_cast<std::int64_t>(py) * mid.w + px;
      for (const auto& [oy, ox] : plan.by_seq[static_cast<std::size_t>(seq)]) {
        note_dw_span(&lb, mid, oy, ox, dw.stride);
        emit_dw_pixel(lb, mid, oy, ox, dw.stride, dw.weights, dw.a, dw.b, &out,
                      &macs);
      }
    }
  }

  if (cost != nullptr) {
    std::uint64_t producer_cycles;
    std::uint64_t producer_fill;
    if (producer.kind == ConvKind::conv33) {
      producer_cycles = ceil_div(producer.weights.kernels, kPe33.kt) *
                        ceil_div(in.dims.c, kPe33.ct) *
                        static_cast<std::uint64_t>(mid.h) * mid.w * 9;
      producer_fill = 3;
    } else {
      producer_cycles = ceil_div(producer.weights.kernels, kPe11.kt) *
                        ceil_div(in.dims.c, kPe11.ct) *
                        static_cast<std::uint64_t>(mid.h) * mid.w;
      producer_fill = 0;
    }
    const std::uint64_t dw_cycles = ceil_div(mid.c, kPeDw.ct) *
                                    static_cast<std::uint64_t>(plan.ho) *
                                    plan.wo;
    // The stages overlap: the cascade is paced by the slower one.
    cost->compute_cycles =
        producer_cycles > dw_cycles ? producer_cycles : dw_cycles;
    cost->fill_cycles = producer_fill + static_cast<std::uint64_t>(lb.capacity());
    cost->macs = macs;
  }
  fill_lb_stats(lb, lb_stats);
  return out;
}

// --------------------------------------------------------------------------
// detection head 1x1
// --------------------------------------------------------------------------

Int16Tensor head11(const QTensor& in, const HeadWeights& w,
                   std::uint64_t* saturations, KernelCost* cost) {
  check(w.c == in.dims.c, "head11: weight shape mismatch");
  Int16Tensor out({w.kernels, in.dims.h, in.dims.w});
  std::uint64_t sat = 0;
  for (int k = 0; k < w.kernels; ++k) {
    for (int y = 0; y < in.dims.h; ++y) {
      for (int x = 0; x < in.dims.w; ++x) {
        std::int32_t acc = 0;
        for (int ch = 0; ch < in.dims.c; ++ch)
          acc += static_cast<std::int32_t>(w.code(k, ch)) *
                 static_cast<std::int32_t>(in.at(ch, y, x));
        acc += w.bias[k];
        if (acc > 32767) {
          acc = 32767;
          ++sat;
        } else if (acc < -32768) {
          acc = -32768;
          ++sat;
        }
        out.at(k, y, x) = static_cast<std::int16_t>(acc);
      }
    }
  }
  if (saturations != nullptr) *saturations = sat;
  if (cost != nullptr) {
    cost->compute_cycles = ceil_div(w.kernels, kPeHead.kt) *
                           ceil_div(in.dims.c, kPeHead.ct) *
                           static_cast<std::uint64_t>(in.dims.h) * in.dims.w;
    cost->fill_cycles = 0;
    cost->macs = static_cast<std::uint64_t>(w.kernels) * in.dims.c *
                 in.dims.h * in.dims.w;
  }
  return out;
}

QTensor run_conv_layer(const QTensor& in, const ConvLayerData& l,
                       KernelCost* cost, LineBufferStats* lb) {
  switch (l.kind) {
    case ConvKind::conv33:
      return conv33(in, l.weights, l.a, l.b, l.out_bits, l.stride, cost);
    case ConvKind::conv11:
      check(l.stride == 1, "run_conv_layer: conv11 is stride 1");
      return conv11(in, l.weights, l.a, l.b, l.out_bits, cost);
    case ConvKind::dw33:
      return dw33(in, l.weights, l.a, l.b, l.out_bits, l.stride, cost, lb);
    case ConvKind::head11:
      break;
  }
  throw std::runtime_error("run_conv_layer: head layers use head11()");
}

Dims3 conv_output_dims(Dims3 in, ConvKind kind, int out_channels, int stride) {
  (void)kind;  // same padding everywhere: only the stride moves the extent
  return {out_channels, out_extent(in.h, stride), out_extent(in.w, stride)};
}

}  // namespace shiftflow
