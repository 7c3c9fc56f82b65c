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

#include "shiftflow/engine.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "shiftflow/audit.hpp"

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

void hash_bytes(std::uint64_t* h, const void* data, std::size_t len) {
  *h = fnv1a64(data, len, *h);
}

void hash_i32(std::uint64_t* h, std::int32_t v) {
  const std::uint32_t u = static_cast<std::uint32_t>(v);
  const unsigned char b[4] = {
      static_cast<unsigned char>(u & 0xff),
      static_cast<unsigned char>((u >> 8) & 0xff),
      static_cast<unsigned char>((u >> 16) & 0xff),
      static_cast<unsigned char>(u >> 24)};
  hash_bytes(h, b, 4);
}

void hash_qtensor(std::uint64_t* h, const QTensor& t) {
  hash_i32(h, t.dims.c);
  hash_i32(h, t.dims.h);
  hash_i32(h, t.dims.w);
  hash_bytes(h, t.data.data(), t.data.size());
}

void hash_i16tensor(std::uint64_t* h, const Int16Tensor& t) {
  hash_i32(h, t.dims.c);
  hash_i32(h, t.dims.h);
  hash_i32(h, t.dims.w);
  for (std::int16_t v : t.data) {
    const std::uint16_t u = static_cast<std::uint16_t>(v);
    const unsigned char b[2] = {static_cast<unsigned char>(u & 0xff),
                                static_cast<unsigned char>(u >> 8)};
    hash_bytes(h, b, 2);
  }
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<PeakRow> peak_throughput(double freq_mhz) {
  std::vector<PeakRow> rows;
  for (const PeConfig* pe : {&kPe33, &kPe11, &kPeDw, &kPeHead})
    rows.push_back({pe->name, pe->kt, pe->ct, peak_gops(*pe, freq_mhz)});
  return rows;
}

RunResult run_inference(const QuantizedNetwork& net, const QTensor& input,
                        const RunOptions& opts) {
  net.desc.validate();
  check(net.layers.size() == net.desc.layers.size(),
        "run: layer count mismatch");
  check(input.dims == net.desc.input, "run: input dims mismatch");
  check(input.bits == net.desc.layers[0].in_bits, "run: input bits mismatch");
  input.validate();

  RunResult r;
  audit::IntegerOnlyGuard guard;

  QTensor cur = input;
  const int backbone = net.desc.backbone_layers();
  int i = 0;
  while (i < backbone) {
    const ConvLayerData& l = net.layers[static_cast<std::size_t>(i)];
    const bool fuse = l.fuse_into_next_dw && i + 1 < backbone &&
                      net.layers[static_cast<std::size_t>(i + 1)].kind ==
                          ConvKind::dw33;
    LayerReport rep;
    rep.index = i;

    if (fuse) {
      const ConvLayerData& dw = net.layers[static_cast<std::size_t>(i + 1)];
      rep.name = std::string("fused(") + conv_kind_name(l.kind) + "+dw33)";
      if (opts.tile_limit > 0) {
        cur = execute_tiled(cur, {&l, &dw}, opts.tile_limit, &rep.cost);
      } else {
        cur = fused_conv_dw(cur, l, dw, &rep.cost, &rep.line_buffer);
      }
      cur.scale = net.out_alpha[static_cast<std::size_t>(i + 1)];
      i += 2;
    } else {
      rep.name = conv_kind_name(l.kind);
      const Dims3 in_dims = cur.dims;
      if (l.kind == ConvKind::conv11) {
        rep.has_schedule = true;
        rep.schedule = choose_dataflow(in_dims.c, kPe11.kt,
                                       opts.weight_buffer_capacity);
        rep.counts = schedule_cost(
            {in_dims.h, in_dims.w, in_dims.c, l.weights.kernels},
            rep.schedule, kPe11.kt, kPe11.ct);
      }
      if (opts.tile_limit > 0) {
        cur = execute_tiled(cur, {&l}, opts.tile_limit, &rep.cost);
      } else {
        cur = run_conv_layer(cur, l, &rep.cost, &rep.line_buffer);
      }
      cur.scale = net.out_alpha[static_cast<std::size_t>(i)];
      i += 1;
    }
    rep.out_dims = cur.dims;
    r.total_cost += rep.cost;
    r.layers.push_back(std::move(rep));
  }

  // Heads all read the backbone tail.
  for (std::size_t j = static_cast<std::size_t>(backbone);
       j < net.layers.size(); ++j) {
    const ConvLayerData& l = net.layers[j];
    LayerReport rep;
    rep.index = static_cast<int>(j);
    rep.name = conv_kind_name(l.kind);
    std::uint64_t sat = 0;
    Int16Tensor out = head11(cur, l.head, &sat, &rep.cost);
    rep.out_dims = out.dims;
    r.total_cost += rep.cost;
    r.layers.push_back(std::move(rep));
    r.heads.push_back(std::move(out));
    r.head_saturations.push_back(sat);
  }

  r.feature = std::move(cur);
  r.audit_violations = guard.violations();

  std::uint64_t h = 0xcbf29ce484222325ull;
  hash_qtensor(&h, r.feature);
  for (const Int16Tensor& t : r.heads) hash_i16tensor(&h, t);
  r.output_hash = h;
  return r;
}

namespace {

double sqnr_db(const std::vector<double>& signal,
               const std::vector<double>& approx) {
  double sig = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    sig += signal[i] * signal[i];
    const double d = signal[i] - approx[i];
    noise += d * d;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  if (sig == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / noise);
}

}  // namespace

CompareResult compare_float(const QuantizedNetwork& qnet,
                            const FloatNetwork& fnet,
                            const std::vector<float>& image) {
  qnet.desc.validate();
  check(qnet.desc.layers.size() == fnet.desc.layers.size(),
        "compare: topology mismatch");
  check(image.size() == qnet.desc.input.size(), "compare: image size mismatch");

  const std::vector<std::vector<float>> ref = float_forward(fnet, image);

  CompareResult res;
  QTensor cur = quantize_input(image, qnet.desc.input,
                               qnet.desc.layers[0].in_bits, qnet.input_alpha);
  const int backbone = qnet.desc.backbone_layers();
  QTensor tail;
  double feature_sqnr = std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < qnet.layers.size(); ++i) {
    const ConvLayerData& l = qnet.layers[i];
    std::vector<double> approx;
    if (l.kind == ConvKind::head11) {
      if (tail.data.empty()) tail = cur;
      const Int16Tensor out = head11(tail, l.head);
      approx.reserve(out.data.size());
      for (int k = 0; k < out.dims.c; ++k)
        for (int y = 0; y < out.dims.h; ++y)
          for (int x = 0; x < out.dims.w; ++x)
            approx.push_back(static_cast<double>(out.at(k, y, x)) *
                             qnet.out_alpha[i] * l.head.scales[k]);
    } else {
      cur = run_conv_layer(cur, l);
      cur.scale = qnet.out_alpha[i];
      approx.reserve(cur.data.size());
      for (std::uint8_t v : cur.data)
        approx.push_back(static_cast<double>(v) * qnet.out_alpha[i]);
      if (static_cast<int>(i) + 1 == backbone) tail = cur;
    }
    std::vector<double> signal(ref[i].begin(), ref[i].end());
    const double s = sqnr_db(signal, approx);
    res.layer_sqnr_db.push_back(s);
    if (static_cast<int>(i) + 1 == backbone) feature_sqnr = s;
  }
  res.feature_sqnr_db = feature_sqnr;
  return res;
}

}  // namespace shiftflow
