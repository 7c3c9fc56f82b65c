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

#ifndef SHIFTFLOW_MODEL_HPP_
#define SHIFTFLOW_MODEL_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "shiftflow/kernels.hpp"

namespace shiftflow {

// One layer of the topology description, before any quantization.
struct LayerDesc {
  ConvKind kind = ConvKind::conv33;
  int stride = 1;
  int out_channels = 0;  // dw33: must equal the input channel count
  int in_bits = 8;       // M of the activations this layer consumes
  int weight_bits = 3;   // N of the power-of-two weight set
  int out_bits = 4;      // M of the activations this layer produces
  int scale_bits = 8;    // K of the requantization scalars
  bool fuse_into_next_dw = false;
};

// Text topology. Format:
//   shiftflow-net v1
//   input <c> <h> <w>
//   layer <kind> stride <s> out <n> bits <Min> <Nw> <Mout> [K <k>] [fuse]
// Kinds: conv33, conv11, dw33, head11. Blank lines and '#' comments allowed.
struct NetworkDescription {
  Dims3 input;
  std::vector<LayerDesc> layers;

  // Chain checks: channel counts line up, dw33 preserves channels, bit widths
  // are consistent between producer and consumer, head layers come last and
  // read from the last backbone layer. Throws std::runtime_error.
  void validate() const;

  // Dims of the activations flowing into layer `index` (head layers all read
  // the final backbone feature map).
  Dims3 layer_input_dims(int index) const;
  int backbone_layers() const;  // count of non-head layers (head is a suffix)
};

NetworkDescription parse_network_description(std::istream& in);
NetworkDescription load_network_description(const std::string& path);
void save_network_description(const NetworkDescription& d,
                              const std::string& path);

// Float-domain layer: convolution weights with a folded batch-norm scale and
// bias. Head layers use gamma == 1. Weight layout matches Pow2Weights.
struct FloatConvLayer {
  std::vector<float> weights;  // out_channels * kh * kw * in_channels
  std::vector<float> gamma;    // out_channels
  std::vector<float> bias;     // out_channels
};

struct FloatNetwork {
  NetworkDescription desc;
  std::vector<FloatConvLayer> layers;
};

// Directory with model.net (topology) and weights.bin (little-endian float32,
// per layer: weights, gamma, bias; head layers omit gamma).
FloatNetwork load_float_network(const std::string& dir);
void save_float_network(const FloatNetwork& net, const std::string& dir);

// Reference float convolution for one layer (same padding, ReLU on backbone
// layers, plain affine output on head layers). Real arithmetic: audited.
std::vector<float> float_conv(const std::vector<float>& in, Dims3 in_dims,
                              const FloatConvLayer& l, const LayerDesc& d,
                              Dims3* out_dims);

// Full float forward pass; returns every layer's output activations (backbone
// post-ReLU, heads affine), in layer order.
std::vector<std::vector<float>> float_forward(const FloatNetwork& net,
                                              const std::vector<float>& input);

}  // namespace shiftflow

#endif  // SHIFTFLOW_MODEL_HPP_
