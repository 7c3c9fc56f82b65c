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

#ifndef SHIFTFLOW_STORAGE_HPP_
#define SHIFTFLOW_STORAGE_HPP_

#include <string>
#include <vector>

#include "shiftflow/quantizer.hpp"

namespace shiftflow {

// Quantized model directory: a model.manifest text file
//   shiftflow-model v1
//   input <c> <h> <w> bits <M> alpha <alpha>
//   layers <N>
//   layer <i> <kind> stride <s> out <n> bits <Min> <Nw> <Mout> K <k>
//         alpha <out_alpha> files <weights> [<fxparams>] [fuse]
// plus one weight file (and for non-head layers one fixed-point parameter
// file) per layer, all in the same directory.
void save_quantized_network(const QuantizedNetwork& net,
                            const std::string& dir);
QuantizedNetwork load_quantized_network(const std::string& dir);

// Float tensor file: "ftensor v1 c h w\n" + c*h*w little-endian float32.
void save_ftensor(const std::vector<float>& data, Dims3 dims,
                  const std::string& path);
std::vector<float> load_ftensor(const std::string& path, Dims3* dims);

// Binary 8-bit P6 PPM, scaled to [0, 1] floats, channel-major (c = 3).
std::vector<float> load_ppm(const std::string& path, Dims3* dims);

}  // namespace shiftflow

#endif  // SHIFTFLOW_STORAGE_HPP_
