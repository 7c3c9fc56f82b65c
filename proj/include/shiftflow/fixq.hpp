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

#ifndef SHIFTFLOW_FIXQ_HPP_
#define SHIFTFLOW_FIXQ_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace shiftflow {

struct Dims3 {
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  bool operator==(const Dims3&) const = default;
};

// Integer-valued activation tensor. `scale` is informational only: inference
// arithmetic never reads it. Elements are channel-major, one byte each.
struct QTensor {
  Dims3 dims;
  int bits = 8;       // M, elements lie in [0, 2^M - 1]
  double scale = 1.0; // alpha
  std::vector<std::uint8_t> data;

  QTensor() = default;
  QTensor(Dims3 d, int m_bits, double alpha);

  std::uint8_t& at(int ch, int y, int x) {
    return data[(static_cast<std::size_t>(ch) * dims.h + y) * dims.w + x];
  }
  std::uint8_t at(int ch, int y, int x) const {
    return data[(static_cast<std::size_t>(ch) * dims.h + y) * dims.w + x];
  }

  // Checks the element-range and length invariants; throws on violation.
  void validate() const;
};

// Signed 16-bit tensor for detection-head outputs (no requantize stage).
struct Int16Tensor {
  Dims3 dims;
  std::vector<std::int16_t> data;

  Int16Tensor() = default;
  Int16Tensor(Dims3 d) : dims(d), data(d.size(), 0) {}

  std::int16_t& at(int ch, int y, int x) {
    return data[(static_cast<std::size_t>(ch) * dims.h + y) * dims.w + x];
  }
  std::int16_t at(int ch, int y, int x) const {
    return data[(static_cast<std::size_t>(ch) * dims.h + y) * dims.w + x];
  }
};

// One power-of-two weight code: value = sign * 2^exponent, sign == 0 encodes
// the value 0 (exponent ignored).
struct PowCode {
  std::int8_t sign = 0;
  std::uint8_t exponent = 0;

  std::int32_t value() const {
    return sign == 0 ? 0 : static_cast<std::int32_t>(sign) << exponent;
  }
  bool operator==(const PowCode&) const = default;
};

// Per-kernel power-of-two weight codes with informational scaling factors.
// Codes are kernel-major; within a kernel the layout is channel-major, then
// row, then column, matching QTensor.
struct Pow2Weights {
  int kernels = 0;
  int kw = 0;
  int kh = 0;
  int c = 0;
  int bits = 3; // N; exponent <= 2^(N-1) - 2
  std::vector<PowCode> codes;
  std::vector<double> scales; // beta_i, informational

  Pow2Weights() = default;
  Pow2Weights(int n, int kw_, int kh_, int c_, int n_bits);

  static int max_exponent(int n_bits) { return (1 << (n_bits - 1)) - 2; }

  PowCode& code(int k, int ch, int ky, int kx) {
    return codes[((static_cast<std::size_t>(k) * c + ch) * kh + ky) * kw + kx];
  }
  PowCode code(int k, int ch, int ky, int kx) const {
    return codes[((static_cast<std::size_t>(k) * c + ch) * kh + ky) * kw + kx];
  }

  void validate() const;
};

// Plain signed 8-bit weights for the detection head (not power-of-two).
struct HeadWeights {
  int kernels = 0;
  int c = 0;
  std::vector<std::int8_t> codes;  // kernel-major, kernels * c entries
  std::vector<std::int16_t> bias;  // per kernel, accumulator units
  std::vector<double> scales;      // informational

  HeadWeights() = default;
  HeadWeights(int n, int c_)
      : kernels(n), c(c_), codes(static_cast<std::size_t>(n) * c_, 0),
        bias(n, 0), scales(n, 1.0) {}

  std::int8_t& code(int k, int ch) {
    return codes[static_cast<std::size_t>(k) * c + ch];
  }
  std::int8_t code(int k, int ch) const {
    return codes[static_cast<std::size_t>(k) * c + ch];
  }
};

// K-bit fixed-point scalar: value = mantissa * 2^dexp with |mantissa| <
// 2^(K-1) and dexp in [-15, 0].
struct FixedScalar {
  std::int32_t mantissa = 0;
  int dexp = 0;
  int bits = 8; // K

  FixedScalar() = default;
  FixedScalar(std::int32_t m, int d, int k_bits);

  // Reconstructs the real value. Audited: not part of integer inference.
  double real_value() const;
};

// acc + sign * (act << exponent). Exactly equals acc + act * (sign * 2^e).
// Throws std::overflow_error if the 32-bit accumulator range is exceeded.
std::int32_t shift_mac(std::uint32_t act, PowCode code, std::int32_t acc);

// round(clip(acc * a + b, 0, 2^M - 1)) evaluated purely on mantissas with a
// single half-away-from-zero rounding after binary-point alignment.
std::uint32_t requantize(std::int32_t acc, FixedScalar a, FixedScalar b,
                         int m_bits);

// ---------------------------------------------------------------------------
// File formats. Text header line, then a fixed-size binary payload:
//   qtensor v1 c h w M alpha\n          + c*h*w bytes, one element each
//   pow2w v1 n w h c N\n + betas ...\n  + n*w*h*c code bytes
//   fxparam v1 n K d_a d_b\n            + 2n little-endian int16 mantissas
//   headw v1 n c\n + scales ...\n       + n*c int8 codes + n int16 biases
// Code byte: 0x00 = zero, else bit7 = sign (1 negative), low 7 bits = e + 1.
// ---------------------------------------------------------------------------

void save_qtensor(const QTensor& t, const std::string& path);
QTensor load_qtensor(const std::string& path);

void save_pow2_weights(const Pow2Weights& w, const std::string& path);
Pow2Weights load_pow2_weights(const std::string& path);

// a and b must be same-length vectors, each with one shared dexp.
void save_fx_params(const std::vector<FixedScalar>& a,
                    const std::vector<FixedScalar>& b,
                    const std::string& path);
void load_fx_params(const std::string& path, std::vector<FixedScalar>* a,
                    std::vector<FixedScalar>* b);

void save_head_weights(const HeadWeights& w, const std::string& path);
HeadWeights load_head_weights(const std::string& path);

}  // namespace shiftflow

#endif  // SHIFTFLOW_FIXQ_HPP_
