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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracle.hpp"
#include "shiftflow/fixq.hpp"

using namespace shiftflow;
namespace tt = shiftflow::testing;

namespace {

std::string temp_path(const char* stem) {
  auto dir = std::filesystem::temp_directory_path() / "shiftflow_fixq_tests";
  std::filesystem::create_directories(dir);
  return (dir / stem).string();
}

}  // namespace

TEST_CASE("shift_mac equals plain multiply-accumulate") {
  std::vector<PowCode> codes{{0, 0}};
  for (int e = 0; e <= 6; ++e) {
    codes.push_back({1, static_cast<std::uint8_t>(e)});
    codes.push_back({-1, static_cast<std::uint8_t>(e)});
  }
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> acc_dist(-2000000, 2000000);
  for (std::uint32_t act = 0; act < 256; ++act)
    for (const PowCode& c : codes) {
      std::int32_t acc = acc_dist(rng);
      CHECK(shift_mac(act, c, acc) == tt::ref_shift_mac(act, c, acc));
    }
}

TEST_CASE("shift_mac refuses to wrap the 32-bit accumulator") {
  PowCode plus1{1, 0};
  CHECK_THROWS_AS(shift_mac(1, plus1, 2147483647), std::overflow_error);
  PowCode minus4{-1, 2};
  CHECK_THROWS_AS(shift_mac(600000000, minus4, -200000000),
                  std::overflow_error);
  // One step inside the edge is fine.
  CHECK(shift_mac(0, plus1, 2147483647) == 2147483647);
}

TEST_CASE("requantize pinned values") {
  // 10 * 0.75 + 1 = 8.5 rounds away from zero.
  CHECK(requantize(10, FixedScalar(3, -2, 8), FixedScalar(1, 0, 8), 4) == 9);
  // 0 * a + 2.5 -> 3.
  CHECK(requantize(0, FixedScalar(1, 0, 8), FixedScalar(5, -1, 8), 4) == 3);
  // -2 * 0.25 = -0.5 rounds to -1, clipped to 0.
  CHECK(requantize(-2, FixedScalar(1, -2, 8), FixedScalar(0, 0, 8), 4) == 0);
  // Far past the top level clips to 2^M - 1.
  CHECK(requantize(100000, FixedScalar(100, 0, 8), FixedScalar(0, 0, 8), 4) ==
        15);
  // Identity pair passes small accumulators through.
  CHECK(requantize(7, FixedScalar(1, 0, 8), FixedScalar(0, 0, 8), 4) == 7);
}

TEST_CASE("requantize matches real-arithmetic reference") {
  std::mt19937 rng(12);
  std::uniform_int_distribution<int> acc_dist(-300000, 300000);
  std::uniform_int_distribution<int> d_dist(-15, 0);
  std::uniform_int_distribution<int> k_pick(0, 3);
  const int k_choices[4] = {4, 8, 12, 16};
  const int m_choices[4] = {2, 4, 8, 16};
  for (int i = 0; i < 20000; ++i) {
    int k_bits = k_choices[k_pick(rng)];
    int lim = (1 << (k_bits - 1)) - 1;
    std::uniform_int_distribution<int> m_dist(-lim, lim);
    FixedScalar a(m_dist(rng), d_dist(rng), k_bits);
    FixedScalar b(m_dist(rng), d_dist(rng), k_bits);
    int m_bits = m_choices[k_pick(rng)];
    std::int32_t acc = acc_dist(rng);
    CHECK(requantize(acc, a, b, m_bits) ==
          tt::ref_requantize(acc, a, b, m_bits));
  }
}

TEST_CASE("requantize hits exact rounding ties") {
  // acc * 2^-1 produces .5 endings for every odd acc; all must round away
  // from zero before the clip.
  FixedScalar half(1, -1, 8), zero(0, 0, 8);
  CHECK(requantize(1, half, zero, 8) == 1);    // 0.5 -> 1
  CHECK(requantize(3, half, zero, 8) == 2);    // 1.5 -> 2
  CHECK(requantize(5, half, zero, 8) == 3);    // 2.5 -> 3
  CHECK(requantize(-1, half, zero, 8) == 0);   // -0.5 -> -1 -> clip
  for (int acc = -41; acc <= 41; acc += 2)
    CHECK(requantize(acc, half, zero, 8) ==
          tt::ref_requantize(acc, half, zero, 8));
}

TEST_CASE("fixed scalar construction enforces its invariants") {
  CHECK_THROWS_AS(FixedScalar(128, 0, 8), std::runtime_error);   // m too big
  CHECK_THROWS_AS(FixedScalar(-128, 0, 8), std::runtime_error);
  CHECK_THROWS_AS(FixedScalar(1, 1, 8), std::runtime_error);     // d > 0
  CHECK_THROWS_AS(FixedScalar(1, -16, 8), std::runtime_error);   // d < -15
  CHECK_THROWS_AS(FixedScalar(0, 0, 1), std::runtime_error);     // K too small
  CHECK_THROWS_AS(FixedScalar(0, 0, 17), std::runtime_error);    // K too big
  FixedScalar s(127, -15, 8);
  CHECK(s.real_value() == doctest::Approx(127.0 / 32768.0));
}

TEST_CASE("qtensor validate and file round trip") {
  QTensor t({3, 4, 5}, 4, 0.125);
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> level(0, 15);
  for (auto& v : t.data) v = static_cast<std::uint8_t>(level(rng));
  t.validate();

  const std::string path = temp_path("roundtrip.qt");
  save_qtensor(t, path);
  QTensor back = load_qtensor(path);
  CHECK(back.dims == t.dims);
  CHECK(back.bits == t.bits);
  CHECK(back.scale == doctest::Approx(t.scale));
  CHECK(back.data == t.data);

  QTensor bad = t;
  bad.data[0] = 16;  // above 2^4 - 1
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  bad = t;
  bad.data.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
}

TEST_CASE("pow2 weights validate and file round trip") {
  std::mt19937 rng(14);
  Pow2Weights w = tt::random_pow2(rng, 4, 3, 5, 3);
  w.validate();

  const std::string path = temp_path("roundtrip.pw");
  save_pow2_weights(w, path);
  Pow2Weights back = load_pow2_weights(path);
  CHECK(back.kernels == w.kernels);
  CHECK(back.kw == w.kw);
  CHECK(back.kh == w.kh);
  CHECK(back.c == w.c);
  CHECK(back.bits == w.bits);
  CHECK(back.codes == w.codes);
  REQUIRE(back.scales.size() == w.scales.size());
  for (std::size_t i = 0; i < w.scales.size(); ++i)
    CHECK(back.scales[i] == doctest::Approx(w.scales[i]));

  Pow2Weights bad = w;
  bad.codes[0] = PowCode{2, 0};  // sign out of range
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  bad = w;
  bad.codes[0] = PowCode{0, 1};  // zero must carry exponent 0
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  bad = w;
  bad.codes[0] = PowCode{1, 3};  // exponent above 2^(N-1) - 2 = 2
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
}

TEST_CASE("fx param file round trip wants one shared binary point per side") {
  std::vector<FixedScalar> a{FixedScalar(12, -7, 8), FixedScalar(-3, -7, 8)};
  std::vector<FixedScalar> b{FixedScalar(5, -3, 8), FixedScalar(0, -3, 8)};
  const std::string path = temp_path("roundtrip.fx");
  save_fx_params(a, b, path);
  std::vector<FixedScalar> a2, b2;
  load_fx_params(path, &a2, &b2);
  REQUIRE(a2.size() == 2);
  REQUIRE(b2.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(a2[i].mantissa == a[i].mantissa);
    CHECK(a2[i].dexp == a[i].dexp);
    CHECK(b2[i].mantissa == b[i].mantissa);
    CHECK(b2[i].dexp == b[i].dexp);
  }

  std::vector<FixedScalar> mixed{FixedScalar(1, -2, 8), FixedScalar(1, -3, 8)};
  CHECK_THROWS_AS(save_fx_params(mixed, b, path), std::runtime_error);
}

TEST_CASE("head weight file round trip") {
  HeadWeights w(3, 7);
  std::mt19937 rng(15);
  std::uniform_int_distribution<int> code(-127, 127);
  std::uniform_int_distribution<int> bias(-30000, 30000);
  for (auto& v : w.codes) v = static_cast<std::int8_t>(code(rng));
  for (auto& v : w.bias) v = static_cast<std::int16_t>(bias(rng));
  w.scales = {0.5, 0.25, 2.0};

  const std::string path = temp_path("roundtrip.hw");
  save_head_weights(w, path);
  HeadWeights back = load_head_weights(path);
  CHECK(back.kernels == w.kernels);
  CHECK(back.c == w.c);
  CHECK(back.codes == w.codes);
  CHECK(back.bias == w.bias);
  REQUIRE(back.scales.size() == 3);
  for (int i = 0; i < 3; ++i)
    CHECK(back.scales[i] == doctest::Approx(w.scales[i]));
}

TEST_CASE("loaders reject foreign or truncated files") {
  const std::string path = temp_path("corrupt.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a shiftflow file\n";
  }
  CHECK_THROWS_AS(load_qtensor(path), std::runtime_error);
  CHECK_THROWS_AS(load_pow2_weights(path), std::runtime_error);
  CHECK_THROWS_AS(load_head_weights(path), std::runtime_error);
  {
    std::ofstream out(path, std::ios::binary);
    out << "qtensor v1 2 2 2 4 1.0\n";  // header promises 8 bytes, file has 3
    out.write("abc", 3);
  }
  CHECK_THROWS_AS(load_qtensor(path), std::runtime_error);
  CHECK_THROWS_AS(load_qtensor(temp_path("missing.qt")), std::runtime_error);
}
