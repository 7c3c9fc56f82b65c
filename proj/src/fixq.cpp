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

#include "shiftflow/fixq.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "shiftflow/audit.hpp"

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open for reading: " + path);
  return in;
}

std::string read_header_line(std::istream& in, const std::string& path) {
  std::string line;
  check(static_cast<bool>(std::getline(in, line)), "truncated header: " + path);
  return line;
}

void write_i16le(std::ostream& out, std::int16_t v) {
  const auto u = static_cast<std::uint16_t>(v);
  char b[2] = {static_cast<char>(u & 0xff), static_cast<char>(u >> 8)};
  out.write(b, 2);
}

std::int16_t read_i16le(std::istream& in, const std::string& path) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  check(in.gcount() == 2, "truncated payload: " + path);
  return static_cast<std::int16_t>(
      static_cast<std::uint16_t>(b[0]) |
      (static_cast<std::uint16_t>(b[1]) << 8));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

QTensor::QTensor(Dims3 d, int m_bits, double alpha)
    : dims(d), bits(m_bits), scale(alpha), data(d.size(), 0) {}

void QTensor::validate() const {
  check(bits >= 1 && bits <= 8, "qtensor: bits out of range");
  check(dims.c > 0 && dims.h > 0 && dims.w > 0, "qtensor: empty dims");
  check(data.size() == dims.size(), "qtensor: payload size mismatch");
  const std::uint8_t max = static_cast<std::uint8_t>((1u << bits) - 1);
  for (std::uint8_t v : data)
    check(v <= max, "qtensor: element exceeds 2^M - 1");
}

Pow2Weights::Pow2Weights(int n, int kw_, int kh_, int c_, int n_bits)
    : kernels(n), kw(kw_), kh(kh_), c(c_), bits(n_bits),
      codes(static_cast<std::size_t>(n) * kw_ * kh_ * c_),
      scales(n, 1.0) {}

void Pow2Weights::validate() const {
  check(bits >= 2 && bits <= 8, "pow2w: bits out of range");
  check(kernels > 0 && kw > 0 && kh > 0 && c > 0, "pow2w: empty dims");
  check(codes.size() == static_cast<std::size_t>(kernels) * kw * kh * c,
        "pow2w: code count mismatch");
  check(scales.size() == static_cast<std::size_t>(kernels),
        "pow2w: scale count mismatch");
  const int emax = max_exponent(bits);
  for (const PowCode& pc : codes) {
    check(pc.sign == -1 || pc.sign == 0 || pc.sign == 1, "pow2w: bad sign");
    if (pc.sign == 0)
      check(pc.exponent == 0, "pow2w: zero code with nonzero exponent");
    else
      check(pc.exponent <= emax, "pow2w: exponent exceeds the code set");
  }
}

FixedScalar::FixedScalar(std::int32_t m, int d, int k_bits)
    : mantissa(m), dexp(d), bits(k_bits) {
  check(k_bits >= 2 && k_bits <= 16, "fixed scalar: bits out of range");
  check(d <= 0 && d >= -15, "fixed scalar: binary point out of range");
  const std::int32_t lim = 1 << (k_bits - 1);
  check(m > -lim && m < lim, "fixed scalar: mantissa exceeds K bits");
}

double FixedScalar::real_value() const {
  audit::note_real_arithmetic("FixedScalar::real_value");
  return std::ldexp(static_cast<double>(mantissa), dexp);
}

std::int32_t shift_mac(std::uint32_t act, PowCode code, std::int32_t acc) {
  if (code.sign == 0) return acc;
  const std::int64_t term = static_cast<std::int64_t>(code.sign) *
                            (static_cast<std::int64_t>(act) << code.exponent);
  const std::int64_t sum = static_cast<std::int64_t>(acc) + term;
  if (sum < std::numeric_limits<std::int32_t>::min() ||
      sum > std::numeric_limits<std::int32_t>::max())
    throw std::overflow_error("shift_mac: 32-bit accumulator overflow");
  return static_cast<std::int32_t>(sum);
}

std::uint32_t requantize(std::int32_t acc, FixedScalar a, FixedScalar b,
                         int m_bits) {
  check(m_bits >= 1 && m_bits <= 16, "requantize: bits out of range");
  // acc * ma * 2^da + mb * 2^db, aligned to the finer binary point, then one
  // half-away-from-zero rounding back to integer units.
  const int dmin = a.dexp < b.dexp ? a.dexp : b.dexp;
  const std::int64_t p = static_cast<std::int64_t>(acc) * a.mantissa;
  const std::int64_t s = (p << (a.dexp - dmin)) +
                         (static_cast<std::int64_t>(b.mantissa)
                          << (b.dexp - dmin));
  const int shift = -dmin;
  std::int64_t r;
  if (shift == 0) {
    r = s;
  } else {
    const std::int64_t mag = s < 0 ? -s : s;
    const std::int64_t rounded =
        (mag + (static_cast<std::int64_t>(1) << (shift - 1))) >> shift;
    r = s < 0 ? -rounded : rounded;
  }
  const std::int64_t top = (static_cast<std::int64_t>(1) << m_bits) - 1;
  if (r < 0) r = 0;
  if (r > top) r = top;
  return static_cast<std::uint32_t>(r);
}

// --------------------------------------------------------------------------
// File formats
// --------------------------------------------------------------------------

void save_qtensor(const QTensor& t, const std::string& path) {
  t.validate();
  std::ofstream out = open_out(path);
  out << "qtensor v1 " << t.dims.c << ' ' << t.dims.h << ' ' << t.dims.w << ' '
      << t.bits << ' ' << format_double(t.scale) << '\n';
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size()));
  check(out.good(), "write failed: " + path);
}

QTensor load_qtensor(const std::string& path) {
  std::ifstream in = open_in(path);
  std::istringstream hdr(read_header_line(in, path));
  std::string magic, version;
  QTensor t;
  hdr >> magic >> version >> t.dims.c >> t.dims.h >> t.dims.w >> t.bits >>
      t.scale;
  check(!hdr.fail() && magic == "qtensor" && version == "v1",
        "not a qtensor v1 file: " + path);
  t.data.resize(t.dims.size());
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size()));
  check(in.gcount() == static_cast<std::streamsize>(t.data.size()),
        "truncated payload: " + path);
  t.validate();
  return t;
}

namespace {

std::uint8_t encode_pow2(PowCode pc) {
  if (pc.sign == 0) return 0;
  std::uint8_t b = static_cast<std::uint8_t>(pc.exponent + 1);
  if (pc.sign < 0) b |= 0x80;
  return b;
}

PowCode decode_pow2(std::uint8_t b, const std::string& path) {
  PowCode pc;
  if (b == 0) return pc;
  const std::uint8_t mag = b & 0x7f;
  check(mag >= 1, "pow2w: bad code byte in " + path);
  pc.sign = (b & 0x80) ? -1 : 1;
  pc.exponent = static_cast<std::uint8_t>(mag - 1);
  return pc;
}

}  // namespace

void save_pow2_weights(const Pow2Weights& w, const std::string& path) {
  w.validate();
  std::ofstream out = open_out(path);
  out << "pow2w v1 " << w.kernels << ' ' << w.kw << ' ' << w.kh << ' ' << w.c
      << ' ' << w.bits << '\n';
  out << "betas";
  for (double b : w.scales) out << ' ' << format_double(b);
  out << '\n';
  for (const PowCode& pc : w.codes) {
    const char b = static_cast<char>(encode_pow2(pc));
    out.write(&b, 1);
  }
  check(out.good(), "write failed: " + path);
}

Pow2Weights load_pow2_weights(const std::string& path) {
  std::ifstream in = open_in(path);
  std::istringstream hdr(read_header_line(in, path));
  std::string magic, version;
  int n = 0, kw = 0, kh = 0, c = 0, bits = 0;
  hdr >> magic >> version >> n >> kw >> kh >> c >> bits;
  check(!hdr.fail() && magic == "pow2w" && version == "v1",
        "not a pow2w v1 file: " + path);
  Pow2Weights w(n, kw, kh, c, bits);
  std::istringstream betas(read_header_line(in, path));
  std::string tag;
  betas >> tag;
  check(tag == "betas", "pow2w: missing betas line in " + path);
  for (double& b : w.scales) {
    betas >> b;
    check(!betas.fail(), "pow2w: short betas line in " + path);
  }
  std::vector<std::uint8_t> raw(w.codes.size());
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  check(in.gcount() == static_cast<std::streamsize>(raw.size()),
        "truncated payload: " + path);
  for (std::size_t i = 0; i < raw.size(); ++i)
    w.codes[i] = decode_pow2(raw[i], path);
  w.validate();
  return w;
}

void save_fx_params(const std::vector<FixedScalar>& a,
                    const std::vector<FixedScalar>& b,
                    const std::string& path) {
  check(!a.empty() && a.size() == b.size(),
        "fxparam: a and b must be same-length and non-empty");
  const int k = a[0].bits;
  for (std::size_t i = 0; i < a.size(); ++i) {
    check(a[i].bits == k && b[i].bits == k, "fxparam: mixed K");
    check(a[i].dexp == a[0].dexp, "fxparam: a mantissas must share one d");
    check(b[i].dexp == b[0].dexp, "fxparam: b mantissas must share one d");
  }
  std::ofstream out = open_out(path);
  out << "fxparam v1 " << a.size() << ' ' << k << ' ' << a[0].dexp << ' '
      << b[0].dexp << '\n';
  for (const FixedScalar& f : a)
    write_i16le(out, static_cast<std::int16_t>(f.mantissa));
  for (const FixedScalar& f : b)
    write_i16le(out, static_cast<std::int16_t>(f.mantissa));
  check(out.good(), "write failed: " + path);
}

void load_fx_params(const std::string& path, std::vector<FixedScalar>* a,
                    std::vector<FixedScalar>* b) {
  std::ifstream in = open_in(path);
  std::istringstream hdr(read_header_line(in, path));
  std::string magic, version;
  std::size_t n = 0;
  int k = 0, da = 0, db = 0;
  hdr >> magic >> version >> n >> k >> da >> db;
  check(!hdr.fail() && magic == "fxparam" && version == "v1",
        "not a fxparam v1 file: " + path);
  a->clear();
  b->clear();
  a->reserve(n);
  b->reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    a->emplace_back(read_i16le(in, path), da, k);
  for (std::size_t i = 0; i < n; ++i)
    b->emplace_back(read_i16le(in, path), db, k);
}

void save_head_weights(const HeadWeights& w, const std::string& path) {
  check(w.kernels > 0 && w.c > 0, "headw: empty dims");
  check(w.codes.size() == static_cast<std::size_t>(w.kernels) * w.c &&
            w.bias.size() == static_cast<std::size_t>(w.kernels) &&
            w.scales.size() == static_cast<std::size_t>(w.kernels),
        "headw: size mismatch");
  std::ofstream out = open_out(path);
  out << "headw v1 " << w.kernels << ' ' << w.c << '\n';
  out << "scales";
  for (double s : w.scales) out << ' ' << format_double(s);
  out << '\n';
  out.write(reinterpret_cast<const char*>(w.codes.data()),
            static_cast<std::streamsize>(w.codes.size()));
  for (std::int16_t b : w.bias) write_i16le(out, b);
  check(out.good(), "write failed: " + path);
}

HeadWeights load_head_weights(const std::string& path) {
  std::ifstream in = open_in(path);
  std::istringstream hdr(read_header_line(in, path));
  std::string magic, version;
  int n = 0, c = 0;
  hdr >> magic >> version >> n >> c;
  check(!hdr.fail() && magic == "headw" && version == "v1",
        "not a headw v1 file: " + path);
  HeadWeights w(n, c);
  std::istringstream scales(read_header_line(in, path));
  std::string tag;
  scales >> tag;
  check(tag == "scales", "headw: missing scales line in " + path);
  for (double& s : w.scales) {
    scales >> s;
    check(!scales.fail(), "headw: short scales line in " + path);
  }
  in.read(reinterpret_cast<char*>(w.codes.data()),
          static_cast<std::streamsize>(w.codes.size()));
  check(in.gcount() == static_cast<std::streamsize>(w.codes.size()),
        "truncated payload: " + path);
  for (std::int16_t& b : w.bias) b = read_i16le(in, path);
  return w;
}

}  // namespace shiftflow
