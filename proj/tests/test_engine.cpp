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
#include <random>
#include <sstream>

#include "oracle.hpp"
#include "shiftflow/audit.hpp"
#include "shiftflow/engine.hpp"
#include "shiftflow/storage.hpp"

using namespace shiftflow;
namespace tt = shiftflow::testing;

namespace {

std::string temp_dir(const char* stem) {
  auto dir = std::filesystem::temp_directory_path() / "shiftflow_engine_tests" /
             stem;
  std::filesystem::create_directories(dir);
  return dir.string();
}

// conv33 -> conv11 -> dw33 -> head11 with hand-rolled deployable data.
QuantizedNetwork tiny_qnet(std::mt19937& rng, bool fuse) {
  NetworkDescription d;
  d.input = {2, 6, 6};
  LayerDesc l0;
  l0.kind = ConvKind::conv33;
  l0.out_channels = 3;
  l0.in_bits = 4;
  LayerDesc l1;
  l1.kind = ConvKind::conv11;
  l1.out_channels = 4;
  l1.in_bits = 4;
  l1.fuse_into_next_dw = fuse;
  LayerDesc l2;
  l2.kind = ConvKind::dw33;
  l2.out_channels = 4;
  l2.in_bits = 4;
  LayerDesc h;
  h.kind = ConvKind::head11;
  h.out_channels = 2;
  h.in_bits = 4;
  h.weight_bits = 8;
  h.out_bits = 16;
  d.layers = {l0, l1, l2, h};
  d.validate();

  QuantizedNetwork q;
  q.desc = d;
  q.input_alpha = 0.25;
  q.layers.push_back(tt::random_conv_layer(rng, ConvKind::conv33, 2, 3, 1));
  q.layers.push_back(tt::random_conv_layer(rng, ConvKind::conv11, 3, 4, 1));
  q.layers.back().fuse_into_next_dw = fuse;
  q.layers.push_back(tt::random_conv_layer(rng, ConvKind::dw33, 4, 4, 1));
  q.layers.push_back(tt::random_head_layer(rng, 4, 2));
  q.out_alpha = {0.25, 0.25, 0.25, 0.25};
  return q;
}

// A small float network with strictly positive bias so the calibration batch
// keeps every ReLU alive.
FloatNetwork tiny_float_net(std::mt19937& rng) {
  std::istringstream desc(
      "shiftflow-net v1\n"
      "input 1 6 6\n"
      "layer conv33 stride 1 out 2 bits 8 3 4 K 8\n"
      "layer conv11 stride 1 out 3 bits 4 3 4 K 8 fuse\n"
      "layer dw33 stride 1 out 3 bits 4 3 4 K 8\n"
      "layer head11 stride 1 out 2 bits 4 8 16 K 8\n");
  FloatNetwork net;
  net.desc = parse_network_description(desc);
  std::uniform_real_distribution<float> w(-0.4f, 0.6f), g(0.6f, 1.4f),
      b(0.05f, 0.3f);
  auto layer = [&](int n, int k, int c, bool head) {
    FloatConvLayer l;
    for (int i = 0; i < n * k * k * c; ++i) l.weights.push_back(w(rng));
    for (int i = 0; i < n; ++i) l.gamma.push_back(head ? 1.0f : g(rng));
    for (int i = 0; i < n; ++i) l.bias.push_back(b(rng));
    return l;
  };
  net.layers = {layer(2, 3, 1, false), layer(3, 1, 2, false),
                layer(3, 3, 1, false), layer(2, 1, 3, true)};
  return net;
}

}  // namespace

TEST_CASE("fnv1a64 known vectors") {
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("integer-only guard sees real arithmetic") {
  audit::reset_violations();
  // Outside a guard nothing counts.
  FixedScalar(3, -2, 8).real_value();
  CHECK(audit::violation_count() == 0);
  {
    audit::IntegerOnlyGuard guard;
    CHECK(guard.violations() == 0);
    FixedScalar(3, -2, 8).real_value();
    CHECK(guard.violations() == 1);
    quantize_activation(0.3, 0.25, 4);
    CHECK(guard.violations() == 2);
  }
  CHECK(audit::violation_count() == 2);
  CHECK(audit::first_violation_site() == "FixedScalar::real_value");
  audit::reset_violations();
  CHECK(audit::violation_count() == 0);
}

TEST_CASE("inference equals the hand-composed kernel chain") {
  std::mt19937 rng(71);
  QuantizedNetwork q = tiny_qnet(rng, /*fuse=*/false);
  QTensor in = tt::random_qtensor(rng, {2, 6, 6}, 4, q.input_alpha);

  QTensor s0 = run_conv_layer(in, q.layers[0]);
  QTensor s1 = run_conv_layer(s0, q.layers[1]);
  QTensor s2 = run_conv_layer(s1, q.layers[2]);
  std::uint64_t want_sat = 0;
  Int16Tensor head = head11(s2, q.layers[3].head, &want_sat);

  RunResult r = run_inference(q, in);
  CHECK(r.feature.dims == Dims3{4, 6, 6});
  CHECK(r.feature.data == s2.data);
  REQUIRE(r.heads.size() == 1);
  CHECK(r.heads[0].data == head.data);
  CHECK(r.head_saturations[0] == want_sat);
  CHECK(r.audit_violations == 0);
  REQUIRE(r.layers.size() == 4);
  CHECK(r.layers[0].name == "conv33");
  CHECK(r.layers[3].name == "head11");

  // Byte-for-byte deterministic, hash included.
  RunResult again = run_inference(q, in);
  CHECK(again.output_hash == r.output_hash);
  CHECK(again.feature.data == r.feature.data);

  // The hash covers the head outputs too.
  QuantizedNetwork q2 = q;
  q2.layers[3].head.bias[0] ^= 1;
  RunResult other = run_inference(q2, in);
  CHECK(other.output_hash != r.output_hash);
}

TEST_CASE("fused and tiled runs reproduce the plain run exactly") {
  std::mt19937 rng(72);
  for (int i = 0; i < 10; ++i) {
    QuantizedNetwork plain = tiny_qnet(rng, false);
    QuantizedNetwork fused = plain;
    fused.desc.layers[1].fuse_into_next_dw = true;
    fused.layers[1].fuse_into_next_dw = true;
    QTensor in = tt::random_qtensor(rng, {2, 6, 6}, 4, plain.input_alpha);

    RunResult want = run_inference(plain, in);
    RunResult got = run_inference(fused, in);
    CHECK(got.feature.data == want.feature.data);
    CHECK(got.heads[0].data == want.heads[0].data);
    CHECK(got.output_hash == want.output_hash);
    REQUIRE(got.layers.size() == 3);
    CHECK(got.layers[1].name == "fused(conv11+dw33)");
    CHECK(got.layers[1].line_buffer.capacity == register_cost(6));

    RunOptions tiled;
    tiled.tile_limit = 5;
    RunResult t1 = run_inference(plain, in, tiled);
    RunResult t2 = run_inference(fused, in, tiled);
    CHECK(t1.output_hash == want.output_hash);
    CHECK(t2.output_hash == want.output_hash);
    CHECK(t1.feature.data == want.feature.data);
    CHECK(t2.feature.data == want.feature.data);
    CHECK(t1.audit_violations == 0);
    CHECK(t2.audit_violations == 0);
  }
}

TEST_CASE("pointwise steps report their dataflow") {
  std::mt19937 rng(73);
  QuantizedNetwork q = tiny_qnet(rng, false);
  QTensor in = tt::random_qtensor(rng, {2, 6, 6}, 4, q.input_alpha);

  RunOptions roomy;
  roomy.weight_buffer_capacity = 4096;  // 16 * 3 = 48 fits easily
  RunResult r = run_inference(q, in, roomy);
  REQUIRE(r.layers.size() == 4);
  CHECK_FALSE(r.layers[0].has_schedule);
  REQUIRE(r.layers[1].has_schedule);
  CHECK(r.layers[1].schedule == ScheduleKind::output_stationary);
  CHECK(r.layers[1].counts ==
        schedule_cost({6, 6, 3, 4}, ScheduleKind::output_stationary, kPe11.kt,
                      kPe11.ct));

  RunOptions tight;
  tight.weight_buffer_capacity = 40;  // 16 * 3 = 48 no longer fits
  RunResult r2 = run_inference(q, in, tight);
  CHECK(r2.layers[1].schedule == ScheduleKind::weight_stationary);
  CHECK(r2.layers[1].counts ==
        schedule_cost({6, 6, 3, 4}, ScheduleKind::weight_stationary, kPe11.kt,
                      kPe11.ct));
  // The dataflow choice never changes the numbers.
  CHECK(r2.output_hash == r.output_hash);
}

TEST_CASE("input validation") {
  std::mt19937 rng(74);
  QuantizedNetwork q = tiny_qnet(rng, false);
  QTensor wrong_dims = tt::random_qtensor(rng, {2, 5, 6}, 4, 0.25);
  CHECK_THROWS_AS(run_inference(q, wrong_dims), std::runtime_error);
  QTensor wrong_bits = tt::random_qtensor(rng, {2, 6, 6}, 8, 0.25);
  CHECK_THROWS_AS(run_inference(q, wrong_bits), std::runtime_error);
}

TEST_CASE("quantize_network produces a usable deployable model") {
  std::mt19937 rng(75);
  FloatNetwork fnet = tiny_float_net(rng);
  std::uniform_real_distribution<float> px(0.0f, 1.0f);
  std::vector<std::vector<float>> calib(3, std::vector<float>(36));
  for (auto& img : calib)
    for (auto& v : img) v = px(rng);

  QuantizedNetwork q = quantize_network(fnet, calib);
  REQUIRE(q.layers.size() == 4);
  CHECK(q.input_alpha > 0.0);
  for (int i = 0; i < 3; ++i) CHECK(q.out_alpha[i] > 0.0);
  CHECK(q.layers[1].fuse_into_next_dw);
  // Requantization pairs: one per kernel, shared binary point per layer.
  REQUIRE(q.layers[0].a.size() == 2);
  CHECK(q.layers[0].a[0].dexp == q.layers[0].a[1].dexp);
  CHECK(q.layers[0].b[0].dexp == q.layers[0].b[1].dexp);

  QTensor in = quantize_input(calib[0], {1, 6, 6}, 8, q.input_alpha);
  for (int i = 0; i < 36; ++i)
    CHECK(in.data[i] == quantize_activation(calib[0][i], q.input_alpha, 8));

  RunResult r = run_inference(q, in);
  CHECK(r.audit_violations == 0);
  CHECK(r.feature.dims == Dims3{3, 6, 6});

  CompareResult cmp = compare_float(q, fnet, calib[0]);
  REQUIRE(cmp.layer_sqnr_db.size() == 4);
  CHECK(cmp.feature_sqnr_db > 5.0);
}

TEST_CASE("quantized model directory round trip") {
  std::mt19937 rng(76);
  FloatNetwork fnet = tiny_float_net(rng);
  std::uniform_real_distribution<float> px(0.0f, 1.0f);
  std::vector<std::vector<float>> calib(2, std::vector<float>(36));
  for (auto& img : calib)
    for (auto& v : img) v = px(rng);
  QuantizedNetwork q = quantize_network(fnet, calib);

  std::string dir = temp_dir("qdir");
  save_quantized_network(q, dir);
  QuantizedNetwork back = load_quantized_network(dir);
  CHECK(back.input_alpha == doctest::Approx(q.input_alpha));
  REQUIRE(back.layers.size() == q.layers.size());
  for (std::size_t i = 0; i < q.layers.size(); ++i) {
    CHECK(back.layers[i].kind == q.layers[i].kind);
    CHECK(back.layers[i].out_bits == q.layers[i].out_bits);
    CHECK(back.out_alpha[i] == doctest::Approx(q.out_alpha[i]));
  }
  CHECK(back.layers[1].fuse_into_next_dw);
  CHECK(back.layers[0].weights.codes == q.layers[0].weights.codes);
  CHECK(back.layers[3].head.codes == q.layers[3].head.codes);
  CHECK(back.layers[3].head.bias == q.layers[3].head.bias);

  QTensor in = quantize_input(calib[0], {1, 6, 6}, 8, q.input_alpha);
  RunResult a = run_inference(q, in);
  RunResult b = run_inference(back, in);
  CHECK(a.output_hash == b.output_hash);
  CHECK(a.feature.data == b.feature.data);
}

TEST_CASE("peak throughput table") {
  std::vector<PeakRow> rows = peak_throughput(215.0);
  REQUIRE(rows.size() == 4);
  bool saw_pe11 = false;
  for (const PeakRow& r : rows) {
    CHECK(r.gops == doctest::Approx(2.0 * r.kt * r.ct * 215e6 / 1e9));
    if (std::string(r.pe) == "pe11") {
      saw_pe11 = true;
      CHECK(r.gops == doctest::Approx(220.16));
    }
  }
  CHECK(saw_pe11);
}
