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

#ifndef SHIFTFLOW_QUANTIZER_HPP_
#define SHIFTFLOW_QUANTIZER_HPP_

#include <cstdint>
#include <vector>

#include "shiftflow/model.hpp"

namespace shiftflow {

// Uniform quantization of x to a level in [0, 2^M - 1] with step alpha.
// Decision thresholds sit at (i - 1/2) * alpha; a value exactly on a
// threshold takes the lower level, and everything <= alpha/2 maps to 0.
std::uint32_t quantize_activation(double x, double alpha, int m_bits);

struct ActQuantResult {
  double alpha = 0.0;
  int bits = 0;
  std::vector<double> thresholds;     // t_1 .. t_{2^M - 1}
  double error = 0.0;                 // mean squared error at the fix point
  std::vector<double> error_history;  // per-iteration, non-increasing
  int iterations = 0;
};

// Alternating fit of the activation step: assign levels with the current
// alpha, then set alpha to the least-squares optimum sum(x*q) / sum(q^2).
// Starts from alpha = max(x) / (2^M - 1); needs at least one positive sample.
ActQuantResult lloyd_activation_fit(const std::vector<double>& samples,
                                    int m_bits, int max_iterations = 100,
                                    double tolerance = 1e-6);

// Nearest value in {0, +-beta, +-2 beta, ..., +-2^E beta}, E = 2^(N-1) - 2;
// magnitude ties go to the smaller exponent.
PowCode assign_pow2(double w, double beta, int n_bits);

struct WeightQuantResult {
  double beta = 0.0;
  int bits = 0;
  std::vector<PowCode> codes;
  double error = 0.0;
  std::vector<double> error_history;
  int iterations = 0;
};

// Same alternating scheme for one kernel's weights against the power-of-two
// set. Starts from beta = max|w| / 2^E. An all-zero kernel keeps beta = 1.
WeightQuantResult pow2_weight_fit(const std::vector<double>& weights,
                                  int n_bits, int max_iterations = 100,
                                  double tolerance = 1e-6);

// The convolution-scale / BN-scale / activation-step product folded into one
// affine pair, so inference is y_level = round(clip(a * acc + b)):
//   a = gamma * alpha_in * beta / alpha_out,   b = bias / alpha_out.
struct MergedScale {
  double a = 0.0;
  double b = 0.0;
};
MergedScale merge_scales(double gamma, double alpha_in, double beta,
                         double bias, double alpha_out);

// K-bit fixed-point fit m * 2^d of a real scale: the binary point d walks
// from 0 down to -15 and keeps the first d with the smallest absolute error
// (so ties prefer the larger d). Mantissas clamp to +-(2^(K-1) - 1).
FixedScalar quantize_scale(double value, int k_bits);

// One shared binary point for a whole vector, chosen to minimize the summed
// squared error; mantissas fit per element.
std::vector<FixedScalar> quantize_scale_shared(
    const std::vector<double>& values, int k_bits);

// Head layers: per-kernel symmetric 8-bit weights s_i = max|w| / 127 and an
// integer bias in accumulator units (alpha_in * s_i per count).
HeadWeights quantize_head(const FloatConvLayer& l, const LayerDesc& d,
                          double alpha_in);

struct QuantizeOptions {
  int max_lloyd_iterations = 100;
  double tolerance = 1e-6;
};

// Deployable network plus the informational real-valued activation steps.
struct QuantizedNetwork {
  NetworkDescription desc;
  double input_alpha = 1.0;
  std::vector<ConvLayerData> layers;
  std::vector<double> out_alpha;  // per layer; heads: the input step alpha_in
};

// Full three-step pipeline, layer by layer: fit power-of-two weights, collect
// real pre-activations over the calibration batch, fit the output step, merge
// scales per kernel and fix them to K bits, then propagate the calibration
// batch through the quantized activation grid to feed the next layer.
QuantizedNetwork quantize_network(
    const FloatNetwork& net,
    const std::vector<std::vector<float>>& calibration,
    const QuantizeOptions& opts = {});

// Maps a float image onto the network's input activation grid.
QTensor quantize_input(const std::vector<float>& image, Dims3 dims, int m_bits,
                       double alpha);

}  // namespace shiftflow

#endif  // SHIFTFLOW_QUANTIZER_HPP_
