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

#include "shiftflow/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "shiftflow/audit.hpp"

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

double mean_sq_act_error(const std::vector<double>& xs, double alpha,
                         int m_bits) {
  double err = 0.0;
  for (double x : xs) {
    const double q = static_cast<double>(quantize_activation(x, alpha, m_bits));
    const double d = x - q * alpha;
    err += d * d;
  }
  return err / static_cast<double>(xs.size());
}

}  // namespace

std::uint32_t quantize_activation(double x, double alpha, int m_bits) {
  audit::note_real_arithmetic("quantize_activation");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("quantize_activation: alpha must be positive");
  check(m_bits >= 1 && m_bits <= 8, "quantize_activation: bits out of range");
  const std::int64_t top = (1 << m_bits) - 1;
  // Levels i sit between thresholds (i - 1/2) alpha and (i + 1/2) alpha;
  // values on a threshold take the lower level.
  std::int64_t level =
      static_cast<std::int64_t>(std::ceil(x / alpha + 0.5)) - 1;
  if (level < 0) level = 0;
  if (level > top) level = top;
  return static_cast<std::uint32_t>(level);
}

ActQuantResult lloyd_activation_fit(const std::vector<double>& samples,
                                    int m_bits, int max_iterations,
                                    double tolerance) {
  audit::note_real_arithmetic("lloyd_activation_fit");
  check(m_bits >= 1 && m_bits <= 8, "lloyd: bits out of range");
  double max_x = 0.0;
  for (double x : samples)
    if (x > max_x) max_x = x;
  if (!(max_x > 0.0))
    throw std::invalid_argument("lloyd: needs at least one positive sample");

  const double top = static_cast<double>((1 << m_bits) - 1);
  ActQuantResult r;
  r.bits = m_bits;
  r.alpha = max_x / top;

  for (int it = 0; it < max_iterations; ++it) {
    // Error of the current (assignment, alpha) pair, then the least-squares
    // alpha for that assignment. Each step can only lower the error.
    r.error_history.push_back(mean_sq_act_error(samples, r.alpha, m_bits));
    double num = 0.0, den = 0.0;
    for (double x : samples) {
      const double q =
          static_cast<double>(quantize_activation(x, r.alpha, m_bits));
      num += x * q;
      den += q * q;
    }
    if (den == 0.0) break;  // everything landed on level 0; alpha is stuck
    const double next = num / den;
    const bool done = std::abs(next - r.alpha) <= tolerance * std::abs(r.alpha);
    r.alpha = next;
    ++r.iterations;
    if (done) break;
  }
  r.error = mean_sq_act_error(samples, r.alpha, m_bits);
  r.error_history.push_back(r.error);

  const int levels = (1 << m_bits) - 1;
  for (int i = 1; i <= levels; ++i)
    r.thresholds.push_back((static_cast<double>(i) - 0.5) * r.alpha);
  return r;
}

PowCode assign_pow2(double w, double beta, int n_bits) {
  audit::note_real_arithmetic("assign_pow2");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("assign_pow2: beta must be positive");
  const int emax = Pow2Weights::max_exponent(n_bits);
  check(emax >= 0, "assign_pow2: bits out of range");
  const double mag = std::abs(w);
  PowCode pc;
  if (mag <= 0.5 * beta) return pc;  // zero code
  pc.sign = w > 0.0 ? 1 : -1;
  int e = 0;
  // Boundary between 2^e and 2^(e+1) is 1.5 * 2^e; ties keep the smaller
  // exponent.
  while (e < emax && mag > 1.5 * std::ldexp(1.0, e) * beta) ++e;
  pc.exponent = static_cast<std::uint8_t>(e);
  return pc;
}

namespace {

double mean_sq_weight_error(const std::vector<double>& ws,
                            const std::vector<PowCode>& codes, double beta) {
  double err = 0.0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const double d = ws[i] - static_cast<double>(codes[i].value()) * beta;
    err += d * d;
  }
  return err / static_cast<double>(ws.size());
}

}  // namespace

WeightQuantResult pow2_weight_fit(const std::vector<double>& weights,
                                  int n_bits, int max_iterations,
                                  double tolerance) {
  audit::note_real_arithmetic("pow2_weight_fit");
  check(!weights.empty(), "pow2 fit: no weights");
  const int emax = Pow2Weights::max_exponent(n_bits);
  check(emax >= 0 && n_bits <= 8, "pow2 fit: bits out of range");

  WeightQuantResult r;
  r.bits = n_bits;
  r.codes.assign(weights.size(), PowCode{});

  double max_mag = 0.0;
  for (double w : weights) max_mag = std::max(max_mag, std::abs(w));
  if (max_mag == 0.0) {
    // Nothing to scale; any beta represents the all-zero kernel exactly.
    r.beta = 1.0;
    r.error_history.push_back(0.0);
    return r;
  }
  r.beta = max_mag / std::ldexp(1.0, emax);

  for (int it = 0; it < max_iterations; ++it) {
    for (std::size_t i = 0; i < weights.size(); ++i)
      r.codes[i] = assign_pow2(weights[i], r.beta, n_bits);
    r.error_history.push_back(mean_sq_weight_error(weights, r.codes, r.beta));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double q = static_cast<double>(r.codes[i].value());
      num += weights[i] * q;
      den += q * q;
    }
    if (den == 0.0) break;  // all codes zero; keep the current beta
    const double next = num / den;
    const bool done = std::abs(next - r.beta) <= tolerance * std::abs(r.beta);
    r.beta = next;
    ++r.iterations;
    if (done) break;
  }
  for (std::size_t i = 0; i < weights.size(); ++i)
    r.codes[i] = assign_pow2(weights[i], r.beta, n_bits);
  r.error = mean_sq_weight_error(weights, r.codes, r.beta);
  r.error_history.push_back(r.error);
  return r;
}

MergedScale merge_scales(double gamma, double alpha_in, double beta,
                         double bias, double alpha_out) {
  audit::note_real_arithmetic("merge_scales");
  if (!(alpha_out > 0.0) || !std::isfinite(alpha_out))
    throw std::invalid_argument("merge_scales: alpha_out must be positive");
  return {gamma * alpha_in * beta / alpha_out, bias / alpha_out};
}

FixedScalar quantize_scale(double value, int k_bits) {
  audit::note_real_arithmetic("quantize_scale");
  check(k_bits >= 2 && k_bits <= 16, "quantize_scale: bits out of range");
  const std::int64_t lim = (static_cast<std::int64_t>(1) << (k_bits - 1)) - 1;
  FixedScalar best;
  double best_err = 0.0;
  bool have_best = false;
  for (int d = 0; d >= -15; --d) {
    std::int64_t m = std::llround(std::ldexp(value, -d));
    if (m > lim) m = lim;
    if (m < -lim) m = -lim;
    const double err =
        std::abs(value - std::ldexp(static_cast<double>(m), d));
    if (!have_best || err < best_err) {
      best = FixedScalar(static_cast<std::int32_t>(m), d, k_bits);
      best_err = err;
      have_best = true;
    }
  }
  return best;
}

std::vector<FixedScalar> quantize_scale_shared(
    const std::vector<double>& values, int k_bits) {
  audit::note_real_arithmetic("quantize_scale_shared");
  check(!values.empty(), "quantize_scale_shared: no values");
  check(k_bits >= 2 && k_bits <= 16,
        "quantize_scale_shared: bits out of range");
  const std::int64_t lim = (static_cast<std::int64_t>(1) << (k_bits - 1)) - 1;
  int best_d = 0;
  double best_err = 0.0;
  bool have_best = false;
  for (int d = 0; d >= -15; --d) {
    double err = 0.0;
    for (double v : values) {
      std::int64_t m = std::llround(std::ldexp(v, -d));
      if (m > lim) m = lim;
      if (m < -lim) m = -lim;
      const double e = v - std::ldexp(static_cast<double>(m), d);
      err += e * e;
    }
    if (!have_best || err < best_err) {
      best_d = d;
      best_err = err;
      have_best = true;
    }
  }
  std::vector<FixedScalar> out;
  out.reserve(values.size());
  for (double v : values) {
    std::int64_t m = std::llround(std::ldexp(v, -best_d));
    if (m > lim) m = lim;
    if (m < -lim) m = -lim;
    out.emplace_back(static_cast<std::int32_t>(m), best_d, k_bits);
  }
  return out;
}

HeadWeights quantize_head(const FloatConvLayer& l, const LayerDesc& d,
                          double alpha_in) {
  audit::note_real_arithmetic("quantize_head");
  check(d.kind == ConvKind::head11, "quantize_head: not a head layer");
  const int n = d.out_channels;
  const int c = static_cast<int>(l.weights.size()) / n;
  HeadWeights w(n, c);
  for (int k = 0; k < n; ++k) {
    double max_mag = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double v = static_cast<double>(l.gamma[k]) *
                       l.weights[static_cast<std::size_t>(k) * c + ch];
      max_mag = std::max(max_mag, std::abs(v));
    }
    const double s = max_mag > 0.0 ? max_mag / 127.0 : 1.0;
    w.scales[k] = s;
    for (int ch = 0; ch < c; ++ch) {
      const double v = static_cast<double>(l.gamma[k]) *
                       l.weights[static_cast<std::size_t>(k) * c + ch];
      std::int64_t q = std::llround(v / s);
      if (q > 127) q = 127;
      if (q < -127) q = -127;
      w.code(k, ch) = static_cast<std::int8_t>(q);
    }
    std::int64_t bq = std::llround(static_cast<double>(l.bias[k]) /
                                   (alpha_in * s));
    if (bq > 32767) bq = 32767;
    if (bq < -32768) bq = -32768;
    w.bias[k] = static_cast<std::int16_t>(bq);
  }
  return w;
}

// --------------------------------------------------------------------------
// Whole-network pipeline
// --------------------------------------------------------------------------

namespace {

// Fits the power-of-two grid kernel by kernel and packages the codes.
Pow2Weights fit_layer_weights(const FloatConvLayer& l, const LayerDesc& d,
                              int in_c, const QuantizeOptions& opts) {
  const bool depthwise = d.kind == ConvKind::dw33;
  const int k = d.kind == ConvKind::conv11 ? 1 : 3;
  const int wc = depthwise ? 1 : in_c;
  Pow2Weights w(d.out_channels, k, k, wc, d.weight_bits);
  const std::size_t per_kernel = static_cast<std::size_t>(wc) * k * k;
  for (int n = 0; n < d.out_channels; ++n) {
    std::vector<double> slice(per_kernel);
    for (std::size_t i = 0; i < per_kernel; ++i)
      slice[i] = l.weights[n * per_kernel + i];
    WeightQuantResult fit = pow2_weight_fit(slice, d.weight_bits,
                                            opts.max_lloyd_iterations,
                                            opts.tolerance);
    w.scales[n] = fit.beta;
    for (std::size_t i = 0; i < per_kernel; ++i)
      w.codes[n * per_kernel + i] = fit.codes[i];
  }
  return w;
}

// Dequantized weights as a float layer, so the calibration pass sees exactly
// what the integer path will compute (up to the activation grid).
FloatConvLayer dequantized_layer(const Pow2Weights& w,
                                 const FloatConvLayer& src) {
  FloatConvLayer out = src;
  const std::size_t per_kernel =
      static_cast<std::size_t>(w.c) * w.kh * w.kw;
  for (int n = 0; n < w.kernels; ++n)
    for (std::size_t i = 0; i < per_kernel; ++i)
      out.weights[n * per_kernel + i] = static_cast<float>(
          static_cast<double>(w.codes[n * per_kernel + i].value()) *
          w.scales[n]);
  return out;
}

}  // namespace

QuantizedNetwork quantize_network(
    const FloatNetwork& net,
    const std::vector<std::vector<float>>& calibration,
    const QuantizeOptions& opts) {
  audit::note_real_arithmetic("quantize_network");
  net.desc.validate();
  check(net.layers.size() == net.desc.layers.size(),
        "quantize: layer count mismatch");
  check(!calibration.empty(), "quantize: calibration batch is empty");
  for (const auto& img : calibration)
    check(img.size() == net.desc.input.size(),
          "quantize: calibration image size mismatch");

  QuantizedNetwork q;
  q.desc = net.desc;

  // Step on the input grid first.
  std::vector<double> input_samples;
  input_samples.reserve(calibration.size() * calibration[0].size());
  for (const auto& img : calibration)
    for (float v : img) input_samples.push_back(v);
  const int in_bits = net.desc.layers[0].in_bits;
  q.input_alpha = lloyd_activation_fit(input_samples, in_bits,
                                       opts.max_lloyd_iterations,
                                       opts.tolerance)
                      .alpha;

  // Calibration activations as the integer path would reconstruct them.
  std::vector<std::vector<float>> acts(calibration.size());
  for (std::size_t s = 0; s < calibration.size(); ++s) {
    acts[s].resize(calibration[s].size());
    for (std::size_t i = 0; i < calibration[s].size(); ++i)
      acts[s][i] = static_cast<float>(
          static_cast<double>(
              quantize_activation(calibration[s][i], q.input_alpha, in_bits)) *
          q.input_alpha);
  }

  Dims3 cur_dims = net.desc.input;
  double alpha_in = q.input_alpha;
  const int backbone = net.desc.backbone_layers();
  double tail_alpha = alpha_in;

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& d = net.desc.layers[i];
    ConvLayerData layer;
    layer.kind = d.kind;
    layer.stride = d.stride;
    layer.fuse_into_next_dw = d.fuse_into_next_dw;

    if (d.kind == ConvKind::head11) {
      layer.out_bits = 16;
      layer.head = quantize_head(net.layers[i], d, tail_alpha);
      q.layers.push_back(std::move(layer));
      q.out_alpha.push_back(tail_alpha);
      continue;
    }

    layer.out_bits = d.out_bits;
    layer.weights = fit_layer_weights(net.layers[i], d, cur_dims.c, opts);

    // Real pre-activations of the quantized weights over the whole batch
    // (ReLU applied; the output grid starts at zero anyway).
    const FloatConvLayer deq = dequantized_layer(layer.weights, net.layers[i]);
    Dims3 od{};
    std::vector<std::vector<float>> pre(acts.size());
    std::vector<double> pre_samples;
    for (std::size_t s = 0; s < acts.size(); ++s) {
      pre[s] = float_conv(acts[s], cur_dims, deq, d, &od);
      for (float v : pre[s]) pre_samples.push_back(v);
    }
    const ActQuantResult act_fit =
        lloyd_activation_fit(pre_samples, d.out_bits,
                             opts.max_lloyd_iterations, opts.tolerance);
    const double alpha_out = act_fit.alpha;

    // Merge conv, BN, and both activation grids into one affine pair per
    // kernel, then pin the pair to K-bit fixed point.
    std::vector<double> a_real(d.out_channels), b_real(d.out_channels);
    for (int n = 0; n < d.out_channels; ++n) {
      const MergedScale m = merge_scales(net.layers[i].gamma[n], alpha_in,
                                         layer.weights.scales[n],
                                         net.layers[i].bias[n], alpha_out);
      a_real[n] = m.a;
      b_real[n] = m.b;
    }
    layer.a = quantize_scale_shared(a_real, d.scale_bits);
    layer.b = quantize_scale_shared(b_real, d.scale_bits);

    // Feed the next layer the batch as seen through the new grid.
    for (std::size_t s = 0; s < acts.size(); ++s) {
      acts[s].resize(pre[s].size());
      for (std::size_t j = 0; j < pre[s].size(); ++j)
        acts[s][j] = static_cast<float>(
            static_cast<double>(
                quantize_activation(pre[s][j], alpha_out, d.out_bits)) *
            alpha_out);
    }
    cur_dims = od;
    alpha_in = alpha_out;
    if (static_cast<int>(i) + 1 == backbone) tail_alpha = alpha_out;

    q.layers.push_back(std::move(layer));
    q.out_alpha.push_back(alpha_out);
  }
  return q;
}

QTensor quantize_input(const std::vector<float>& image, Dims3 dims, int m_bits,
                       double alpha) {
  audit::note_real_arithmetic("quantize_input");
  check(image.size() == dims.size(), "quantize_input: size mismatch");
  QTensor t(dims, m_bits, alpha);
  for (std::size_t i = 0; i < image.size(); ++i)
    t.data[i] = static_cast<std::uint8_t>(
        quantize_activation(image[i], alpha, m_bits));
  return t;
}

}  // namespace shiftflow
