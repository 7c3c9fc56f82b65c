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
//
// Deterministic fixture generator: instantiates a topology with pseudo-random
// dyadic weights (exactly representable in binary, so runs reproduce across
// platforms) and writes matching calibration images.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shiftflow/model.hpp"
#include "shiftflow/storage.hpp"

namespace {

using namespace shiftflow;

// [-1, 1) in steps of 1/1024.
float dyadic_signed(std::mt19937& rng) {
  return (static_cast<int>(rng() % 2048) - 1024) / 1024.0f;
}

// [0.25, 1.75) in steps of 1/1024: a plausible folded BN scale.
float dyadic_gamma(std::mt19937& rng) {
  return (256 + static_cast<int>(rng() % 1536)) / 1024.0f;
}

// [-0.25, 0.25) in steps of 1/4096.
float dyadic_bias(std::mt19937& rng) {
  return (static_cast<int>(rng() % 2048) - 1024) / 4096.0f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic float model and calibration generator"};
  std::string net_path, out_dir, image_path;
  int calib = 4;
  unsigned seed = 7;
  app.add_option("--net", net_path, "topology description (.net)")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--calib", calib, "calibration images to generate");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--image", image_path, "also write one ppm test image here");
  CLI11_PARSE(app, argc, argv);

  try {
    NetworkDescription desc = load_network_description(net_path);
    std::mt19937 rng(seed);

    FloatNetwork net;
    net.desc = desc;
    for (std::size_t i = 0; i < desc.layers.size(); ++i) {
      const LayerDesc& d = desc.layers[i];
      const int in_c = desc.layer_input_dims(static_cast<int>(i)).c;
      const bool head = d.kind == ConvKind::head11;
      const bool depthwise = d.kind == ConvKind::dw33;
      const int k = d.kind == ConvKind::conv33 || depthwise ? 3 : 1;
      FloatConvLayer l;
      const int fan_in = (depthwise ? 1 : in_c) * k * k;
      // Power-of-two fan-in scaling keeps activations in a workable range
      // layer over layer without leaving the dyadic grid.
      const float wscale = std::exp2f(
          std::roundf(std::log2f(std::sqrt(3.0f / static_cast<float>(fan_in)))));
      l.weights.resize(static_cast<std::size_t>(d.out_channels) * fan_in);
      for (float& v : l.weights) v = dyadic_signed(rng) * wscale;
      l.gamma.resize(d.out_channels);
      for (float& v : l.gamma) v = head ? 1.0f : dyadic_gamma(rng);
      l.bias.resize(d.out_channels);
      for (float& v : l.bias) v = dyadic_bias(rng);
      net.layers.push_back(std::move(l));
    }

    std::filesystem::create_directories(out_dir);
    save_float_network(net, out_dir);
    std::printf("wrote float model to %s\n", out_dir.c_str());

    for (int n = 0; n < calib; ++n) {
      std::vector<float> img(desc.input.size());
      for (float& v : img) v = (rng() % 1024) / 1024.0f;
      char name[64];
      std::snprintf(name, sizeof(name), "%s/calib%02d.ft", out_dir.c_str(), n);
      save_ftensor(img, desc.input, name);
    }
    if (calib > 0)
      std::printf("wrote %d calibration images (calib*.ft)\n", calib);

    if (!image_path.empty()) {
      if (desc.input.c != 3)
        throw std::runtime_error("ppm needs a 3-channel input");
      std::ofstream out(image_path, std::ios::binary);
      if (!out.good())
        throw std::runtime_error("cannot write " + image_path);
      out << "P6\n" << desc.input.w << ' ' << desc.input.h << "\n255\n";
      for (int y = 0; y < desc.input.h; ++y)
        for (int x = 0; x < desc.input.w; ++x)
          for (int ch = 0; ch < 3; ++ch)
            out.put(static_cast<char>(rng() % 256));
      std::printf("wrote %s\n", image_path.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
