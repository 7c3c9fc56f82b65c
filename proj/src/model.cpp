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

#include "shiftflow/model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "shiftflow/audit.hpp"

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

bool is_head(const LayerDesc& d) { return d.kind == ConvKind::head11; }

int out_extent(int in, int stride) { return (in - 1) / stride + 1; }

}  // namespace

void NetworkDescription::validate() const {
  check(input.c > 0 && input.h > 0 && input.w > 0, "net: empty input dims");
  check(!layers.empty(), "net: no layers");

  bool in_head_suffix = false;
  int channels = input.c;
  int tail_bits = layers.empty() ? 0 : layers[0].in_bits;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerDesc& d = layers[i];
    const std::string where = "net: layer " + std::to_string(i) + ": ";
    check(d.stride == 1 || d.stride == 2, where + "stride must be 1 or 2");
    if (d.kind == ConvKind::conv11 || d.kind == ConvKind::head11)
      check(d.stride == 1, where + "pointwise layers are stride 1");
    check(d.out_channels > 0, where + "out channels missing");
    check(d.in_bits >= 1 && d.in_bits <= 8, where + "input bits out of range");

    if (is_head(d)) {
      in_head_suffix = true;
      check(d.stride == 1, where + "head layers are stride 1");
      check(d.in_bits == tail_bits, where + "head input bits mismatch");
    } else {
      check(!in_head_suffix, where + "backbone layer after a head layer");
      check(d.weight_bits >= 2 && d.weight_bits <= 8,
            where + "weight bits out of range");
      check(d.out_bits >= 1 && d.out_bits <= 8,
            where + "output bits out of range");
      check(d.scale_bits >= 2 && d.scale_bits <= 16,
            where + "scale bits out of range");
      if (d.kind == ConvKind::dw33)
        check(d.out_channels == channels,
              where + "depthwise must preserve the channel count");
      if (i > 0 && !is_head(layers[i - 1]))
        check(d.in_bits == layers[i - 1].out_bits,
              where + "input bits disagree with the previous layer");
      if (d.fuse_into_next_dw) {
        check(d.kind == ConvKind::conv33 || d.kind == ConvKind::conv11,
              where + "only conv33/conv11 can fuse into a depthwise");
        check(i + 1 < layers.size() && layers[i + 1].kind == ConvKind::dw33,
              where + "fuse flag without a following dw33");
      }
      channels = d.out_channels;
      tail_bits = d.out_bits;
    }
  }
  // Head layers read the backbone tail.
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (is_head(layers[i]))
      check(layers[i].in_bits == tail_bits,
            "net: head layer " + std::to_string(i) + " bits mismatch");
}

int NetworkDescription::backbone_layers() const {
  int n = 0;
  for (const LayerDesc& d : layers) {
    if (is_head(d)) break;
    ++n;
  }
  return n;
}

Dims3 NetworkDescription::layer_input_dims(int index) const {
  Dims3 cur = input;
  const int backbone = backbone_layers();
  const int stop = index < backbone ? index : backbone;
  for (int i = 0; i < stop; ++i) {
    const LayerDesc& d = layers[i];
    cur = {d.out_channels, out_extent(cur.h, d.stride),
           out_extent(cur.w, d.stride)};
  }
  return cur;
}

NetworkDescription parse_network_description(std::istream& in) {
  NetworkDescription net;
  std::string line;
  bool saw_magic = false;
  bool saw_input = false;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (!saw_magic) {
      std::string version;
      ls >> version;
      check(tok == "shiftflow-net" && version == "v1",
            "not a shiftflow-net v1 description");
      saw_magic = true;
      continue;
    }
    if (tok == "input") {
      ls >> net.input.c >> net.input.h >> net.input.w;
      check(!ls.fail(), "net: bad input line");
      saw_input = true;
      continue;
    }
    check(tok == "layer", "net: unexpected line: " + line);
    std::string kind;
    ls >> kind;
    LayerDesc d;
    d.kind = parse_conv_kind(kind);
    if (d.kind == ConvKind::head11) d.out_bits = 16;
    std::string key;
    while (ls >> key) {
      if (key == "stride") {
        ls >> d.stride;
      } else if (key == "out") {
        ls >> d.out_channels;
      } else if (key == "bits") {
        ls >> d.in_bits >> d.weight_bits >> d.out_bits;
      } else if (key == "K") {
        ls >> d.scale_bits;
      } else if (key == "fuse") {
        d.fuse_into_next_dw = true;
      } else {
        throw std::runtime_error("net: unknown layer attribute: " + key);
      }
      check(!ls.fail(), "net: bad layer line: " + line);
    }
    net.layers.push_back(d);
  }
  check(saw_magic, "net: missing shiftflow-net header");
  check(saw_input, "net: missing input line");
  net.validate();
  return net;
}

NetworkDescription load_network_description(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open: " + path);
  return parse_network_description(in);
}

void save_network_description(const NetworkDescription& d,
                              const std::string& path) {
  d.validate();
  std::ofstream out(path);
  check(out.good(), "cannot open for writing: " + path);
  out << "shiftflow-net v1\n";
  out << "input " << d.input.c << ' ' << d.input.h << ' ' << d.input.w << '\n';
  for (const LayerDesc& l : d.layers) {
    out << "layer " << conv_kind_name(l.kind) << " stride " << l.stride
        << " out " << l.out_channels << " bits " << l.in_bits << ' '
        << l.weight_bits << ' ' << l.out_bits << " K " << l.scale_bits;
    if (l.fuse_into_next_dw) out << " fuse";
    out << '\n';
  }
  check(out.good(), "write failed: " + path);
}

// --------------------------------------------------------------------------
// Float weights
// --------------------------------------------------------------------------

namespace {

void write_f32le(std::ostream& out, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
               static_cast<char>((u >> 16) & 0xff),
               static_cast<char>(u >> 24)};
  out.write(b, 4);
}

float read_f32le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  check(in.gcount() == 4, "truncated weights: " + path);
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) |
                          (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

std::size_t weight_count(const LayerDesc& d, int in_channels) {
  const int k = d.kind == ConvKind::conv33 || d.kind == ConvKind::dw33 ? 3 : 1;
  const int c = d.kind == ConvKind::dw33 ? 1 : in_channels;
  return static_cast<std::size_t>(d.out_channels) * k * k * c;
}

}  // namespace

FloatNetwork load_float_network(const std::string& dir) {
  FloatNetwork net;
  net.desc = load_network_description(dir + "/model.net");
  const std::string wpath = dir + "/weights.bin";
  std::ifstream in(wpath, std::ios::binary);
  check(in.good(), "cannot open: " + wpath);
  for (std::size_t i = 0; i < net.desc.layers.size(); ++i) {
    const LayerDesc& d = net.desc.layers[i];
    const int in_c = net.desc.layer_input_dims(static_cast<int>(i)).c;
    FloatConvLayer l;
    l.weights.resize(weight_count(d, in_c));
    for (float& v : l.weights) v = read_f32le(in, wpath);
    l.gamma.assign(d.out_channels, 1.0f);
    if (!is_head(d))
      for (float& v : l.gamma) v = read_f32le(in, wpath);
    l.bias.resize(d.out_channels);
    for (float& v : l.bias) v = read_f32le(in, wpath);
    net.layers.push_back(std::move(l));
  }
  return net;
}

void save_float_network(const FloatNetwork& net, const std::string& dir) {
  net.desc.validate();
  check(net.layers.size() == net.desc.layers.size(),
        "float net: layer count mismatch");
  save_network_description(net.desc, dir + "/model.net");
  const std::string wpath = dir + "/weights.bin";
  std::ofstream out(wpath, std::ios::binary);
  check(out.good(), "cannot open for writing: " + wpath);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& d = net.desc.layers[i];
    const FloatConvLayer& l = net.layers[i];
    const int in_c = net.desc.layer_input_dims(static_cast<int>(i)).c;
    check(l.weights.size() == weight_count(d, in_c),
          "float net: weight count mismatch at layer " + std::to_string(i));
    check(l.bias.size() == static_cast<std::size_t>(d.out_channels),
          "float net: bias count mismatch at layer " + std::to_string(i));
    for (float v : l.weights) write_f32le(out, v);
    if (!is_head(d)) {
      check(l.gamma.size() == static_cast<std::size_t>(d.out_channels),
            "float net: gamma count mismatch at layer " + std::to_string(i));
      for (float v : l.gamma) write_f32le(out, v);
    }
    for (float v : l.bias) write_f32le(out, v);
  }
  check(out.good(), "write failed: " + wpath);
}

// --------------------------------------------------------------------------
// Float reference path
// --------------------------------------------------------------------------

std::vector<float> float_conv(const std::vector<float>& in, Dims3 in_dims,
                              const FloatConvLayer& l, const LayerDesc& d,
                              Dims3* out_dims) {
  audit::note_real_arithmetic("float_conv");
  check(in.size() == in_dims.size(), "float_conv: input size mismatch");
  const int k = d.kind == ConvKind::conv33 || d.kind == ConvKind::dw33 ? 3 : 1;
  const int pad = k / 2;
  const Dims3 od = conv_output_dims(in_dims, d.kind, d.out_channels, d.stride);
  std::vector<float> out(od.size(), 0.0f);
  const bool depthwise = d.kind == ConvKind::dw33;
  const int wc = depthwise ? 1 : in_dims.c;

  for (int n = 0; n < od.c; ++n) {
    for (int oy = 0; oy < od.h; ++oy) {
      for (int ox = 0; ox < od.w; ++ox) {
        double acc = 0.0;
        const int cy = oy * d.stride;
        const int cx = ox * d.stride;
        const int ch0 = depthwise ? n : 0;
        const int ch1 = depthwise ? n + 1 : in_dims.c;
        for (int ch = ch0; ch < ch1; ++ch) {
          for (int ky = 0; ky < k; ++ky) {
            const int y = cy + ky - pad;
            if (y < 0 || y >= in_dims.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int x = cx + kx - pad;
              if (x < 0 || x >= in_dims.w) continue;
              const std::size_t wi =
                  ((static_cast<std::size_t>(n) * wc + (depthwise ? 0 : ch)) *
                       k + ky) * k + kx;
              acc += static_cast<double>(l.weights[wi]) *
                     in[(static_cast<std::size_t>(ch) * in_dims.h + y) *
                            in_dims.w + x];
            }
          }
        }
        double v = static_cast<double>(l.gamma[n]) * acc +
                   static_cast<double>(l.bias[n]);
        if (d.kind != ConvKind::head11 && v < 0.0) v = 0.0;  // ReLU
        out[(static_cast<std::size_t>(n) * od.h + oy) * od.w + ox] =
            static_cast<float>(v);
      }
    }
  }
  if (out_dims != nullptr) *out_dims = od;
  return out;
}

std::vector<std::vector<float>> float_forward(
    const FloatNetwork& net, const std::vector<float>& input) {
  audit::note_real_arithmetic("float_forward");
  std::vector<std::vector<float>> acts;
  std::vector<float> cur = input;
  Dims3 cur_dims = net.desc.input;
  std::vector<float> tail;
  Dims3 tail_dims{};
  const int backbone = net.desc.backbone_layers();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& d = net.desc.layers[i];
    if (static_cast<int>(i) == backbone) {
      tail = cur;
      tail_dims = cur_dims;
    }
    const std::vector<float>& src = is_head(d) ? tail : cur;
    const Dims3 src_dims = is_head(d) ? tail_dims : cur_dims;
    Dims3 od;
    std::vector<float> out = float_conv(src, src_dims, net.layers[i], d, &od);
    acts.push_back(out);
    if (!is_head(d)) {
      cur = std::move(out);
      cur_dims = od;
    }
  }
  return acts;
}

}  // namespace shiftflow
