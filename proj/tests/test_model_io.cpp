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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "shiftflow/model.hpp"
#include "shiftflow/storage.hpp"

using namespace shiftflow;

namespace {

std::string fixture(const char* name) {
  return std::string(SHIFTFLOW_FIXTURE_DIR) + "/" + name;
}

std::string temp_dir(const char* stem) {
  auto dir = std::filesystem::temp_directory_path() / "shiftflow_model_tests" /
             stem;
  std::filesystem::create_directories(dir);
  return dir.string();
}

NetworkDescription tiny_desc() {
  std::istringstream in(
      "shiftflow-net v1\n"
      "input 1 5 5\n"
      "layer conv33 stride 1 out 2 bits 8 3 4 K 8\n"
      "layer head11 stride 1 out 1 bits 4 8 16 K 8\n");
  return parse_network_description(in);
}

}  // namespace

TEST_CASE("network description parsing") {
  NetworkDescription d = load_network_description(fixture("mobilenet_like.net"));
  d.validate();
  CHECK(d.input == Dims3{3, 512, 512});
  REQUIRE(d.layers.size() == 24);
  CHECK(d.backbone_layers() == 22);
  CHECK(d.layers[0].kind == ConvKind::conv33);
  CHECK(d.layers[0].stride == 2);
  CHECK(d.layers[0].out_channels == 16);
  CHECK(d.layers[0].in_bits == 8);
  CHECK(d.layers[0].weight_bits == 3);
  CHECK(d.layers[0].out_bits == 4);
  CHECK(d.layers[0].scale_bits == 8);
  CHECK(d.layers[0].fuse_into_next_dw);
  CHECK(d.layers[1].kind == ConvKind::dw33);
  CHECK_FALSE(d.layers[1].fuse_into_next_dw);
  CHECK(d.layers[20].kind == ConvKind::conv11);
  CHECK_FALSE(d.layers[20].fuse_into_next_dw);
  CHECK(d.layers[22].kind == ConvKind::head11);
  CHECK(d.layers[22].out_channels == 24);
  CHECK(d.layers[22].out_bits == 16);
  CHECK(d.layers[23].out_channels == 126);

  // Five stride-2 stages: 512 -> 256 -> 128 -> 64 -> 32 -> 16.
  CHECK(d.layer_input_dims(0) == Dims3{3, 512, 512});
  CHECK(d.layer_input_dims(1) == Dims3{16, 256, 256});
  CHECK(d.layer_input_dims(4) == Dims3{32, 128, 128});
  CHECK(d.layer_input_dims(22) == Dims3{512, 16, 16});
  CHECK(d.layer_input_dims(23) == Dims3{512, 16, 16});
}

TEST_CASE("network description save/load round trip") {
  NetworkDescription d = load_network_description(fixture("mobilenet_like.net"));
  std::string path = temp_dir("netrt") + "/model.net";
  save_network_description(d, path);
  NetworkDescription back = load_network_description(path);
  CHECK(back.input == d.input);
  REQUIRE(back.layers.size() == d.layers.size());
  for (std::size_t i = 0; i < d.layers.size(); ++i) {
    CHECK(back.layers[i].kind == d.layers[i].kind);
    CHECK(back.layers[i].stride == d.layers[i].stride);
    CHECK(back.layers[i].out_channels == d.layers[i].out_channels);
    CHECK(back.layers[i].in_bits == d.layers[i].in_bits);
    CHECK(back.layers[i].weight_bits == d.layers[i].weight_bits);
    CHECK(back.layers[i].out_bits == d.layers[i].out_bits);
    CHECK(back.layers[i].scale_bits == d.layers[i].scale_bits);
    CHECK(back.layers[i].fuse_into_next_dw == d.layers[i].fuse_into_next_dw);
  }
}

TEST_CASE("network validation catches broken chains") {
  NetworkDescription d = tiny_desc();
  d.validate();

  NetworkDescription bad = d;
  bad.layers[0].kind = ConvKind::dw33;  // dw33 must preserve channels (1 != 2)
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = tiny_desc();
  bad.layers[0].out_bits = 8;  // head expects 4-bit input activations
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = tiny_desc();
  std::swap(bad.layers[0], bad.layers[1]);  // head before backbone
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = tiny_desc();
  bad.layers[0].stride = 3;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = tiny_desc();
  bad.layers[1].stride = 2;  // pointwise head has no strided addressing
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = tiny_desc();
  bad.layers[0].fuse_into_next_dw = true;  // next layer is not a dw33
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  std::istringstream garbage("shiftflow-net v2\ninput 1 2 3\n");
  CHECK_THROWS_AS(parse_network_description(garbage), std::runtime_error);
  CHECK_THROWS_AS(load_network_description(fixture("nope.net")),
                  std::runtime_error);
}

TEST_CASE("float reference convolution") {
  LayerDesc d;
  d.kind = ConvKind::conv33;
  d.stride = 1;
  d.out_channels = 1;
  FloatConvLayer l;
  l.weights.assign(9, 1.0f);
  l.gamma = {2.0f};
  l.bias = {0.5f};
  std::vector<float> in(9);
  for (int i = 0; i < 9; ++i) in[i] = static_cast<float>(i);  // 0..8
  Dims3 od{};
  std::vector<float> out = float_conv(in, {1, 3, 3}, l, d, &od);
  CHECK(od == Dims3{1, 3, 3});
  // Center tap sees the whole 3x3 patch: 2 * 36 + 0.5.
  CHECK(out[4] == doctest::Approx(72.5));
  // Top-left sees {0,1,3,4}: 2 * 8 + 0.5.
  CHECK(out[0] == doctest::Approx(16.5));

  // ReLU clips the backbone.
  l.bias = {-1000.0f};
  out = float_conv(in, {1, 3, 3}, l, d, &od);
  for (float v : out) CHECK(v == 0.0f);

  // Head layers stay affine.
  LayerDesc hd;
  hd.kind = ConvKind::head11;
  hd.out_channels = 1;
  FloatConvLayer hl;
  hl.weights = {1.0f, 1.0f};
  hl.gamma = {1.0f};
  hl.bias = {-100.0f};
  std::vector<float> hin{1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f, 7.0f, 8.0f};
  out = float_conv(hin, {2, 2, 2}, hl, hd, &od);
  CHECK(od == Dims3{1, 2, 2});
  CHECK(out[0] == doctest::Approx(1.0 + 5.0 - 100.0));
  CHECK(out[3] == doctest::Approx(4.0 + 8.0 - 100.0));
}

TEST_CASE("float forward pass feeds both heads from the backbone tail") {
  FloatNetwork net;
  net.desc = tiny_desc();
  net.desc.layers.push_back(net.desc.layers[1]);  // second head, same shape
  FloatConvLayer conv;
  conv.weights.assign(9 * 2, 0.25f);
  conv.gamma = {1.0f, 1.0f};
  conv.bias = {0.0f, 0.1f};
  FloatConvLayer head;
  head.weights = {0.5f, -0.5f};
  head.gamma = {1.0f};
  head.bias = {0.2f};
  net.layers = {conv, head, head};

  std::vector<float> image(25, 1.0f);
  std::vector<std::vector<float>> outs = float_forward(net, image);
  REQUIRE(outs.size() == 3);
  CHECK(outs[0].size() == 2u * 5 * 5);
  CHECK(outs[1].size() == 1u * 5 * 5);
  // Both heads read the same tail activations.
  CHECK(outs[1] == outs[2]);
  Dims3 od{};
  std::vector<float> want =
      float_conv(outs[0], {2, 5, 5}, head, net.desc.layers[1], &od);
  CHECK(outs[1] == want);
}

TEST_CASE("float network directory round trip") {
  FloatNetwork net;
  net.desc = tiny_desc();
  std::mt19937 rng(61);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  FloatConvLayer conv;
  for (int i = 0; i < 9 * 2; ++i) conv.weights.push_back(u(rng));
  conv.gamma = {u(rng) + 1.5f, u(rng) + 1.5f};
  conv.bias = {u(rng), u(rng)};
  FloatConvLayer head;
  head.weights = {u(rng), u(rng)};
  head.gamma = {1.0f};
  head.bias = {u(rng)};
  net.layers = {conv, head};

  std::string dir = temp_dir("floatrt");
  save_float_network(net, dir);
  FloatNetwork back = load_float_network(dir);
  REQUIRE(back.layers.size() == 2);
  CHECK(back.desc.layers.size() == net.desc.layers.size());
  CHECK(back.layers[0].weights == net.layers[0].weights);
  CHECK(back.layers[0].gamma == net.layers[0].gamma);
  CHECK(back.layers[0].bias == net.layers[0].bias);
  CHECK(back.layers[1].weights == net.layers[1].weights);
  // Head layers come back with the implicit unit norm scale.
  CHECK(back.layers[1].gamma == std::vector<float>{1.0f});
  CHECK(back.layers[1].bias == net.layers[1].bias);
}

TEST_CASE("ftensor round trip") {
  std::vector<float> data(24);
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<float>(i) * 0.125f - 1.0f;
  std::string path = temp_dir("ftrt") + "/t.ft";
  save_ftensor(data, {2, 3, 4}, path);
  Dims3 dims{};
  std::vector<float> back = load_ftensor(path, &dims);
  CHECK(dims == Dims3{2, 3, 4});
  CHECK(back == data);
  CHECK_THROWS_AS(load_ftensor(temp_dir("ftrt") + "/nope.ft", &dims),
                  std::runtime_error);
}

TEST_CASE("ppm loader") {
  std::string path = temp_dir("ppm") + "/img.ppm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n# a comment line\n2 2\n255\n";
    const unsigned char px[12] = {255, 0,  10,  128, 64, 32,
                                  0,   255, 51, 204, 102, 153};
    out.write(reinterpret_cast<const char*>(px), 12);
  }
  Dims3 dims{};
  std::vector<float> img = load_ppm(path, &dims);
  CHECK(dims == Dims3{3, 2, 2});
  REQUIRE(img.size() == 12);
  // Channel-major: red plane first, pixel (0,0) was (255, 0, 10).
  CHECK(img[0] == doctest::Approx(1.0));
  CHECK(img[4] == doctest::Approx(0.0));          // green plane, pixel (0,0)
  CHECK(img[8] == doctest::Approx(10.0 / 255.0)); // blue plane, pixel (0,0)
  CHECK(img[3] == doctest::Approx(204.0 / 255.0)); // red plane, pixel (1,1)

  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n2 2\n255\n";
    out.write("abcd", 4);
  }
  CHECK_THROWS_AS(load_ppm(path, &dims), std::runtime_error);
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n2 2\n65535\n";
  }
  CHECK_THROWS_AS(load_ppm(path, &dims), std::runtime_error);
}
