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

#include "shiftflow/storage.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string layer_stem(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer%02d", i);
  return buf;
}

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
  check(in.gcount() == 4, "truncated payload: " + path);
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) |
                          (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace

void save_quantized_network(const QuantizedNetwork& net,
                            const std::string& dir) {
  net.desc.validate();
  check(net.layers.size() == net.desc.layers.size() &&
            net.out_alpha.size() == net.desc.layers.size(),
        "model save: layer count mismatch");
  std::filesystem::create_directories(dir);

  std::ofstream man(dir + "/model.manifest");
  check(man.good(), "cannot open for writing: " + dir + "/model.manifest");
  man << "shiftflow-model v1\n";
  man << "input " << net.desc.input.c << ' ' << net.desc.input.h << ' '
      << net.desc.input.w << " bits " << net.desc.layers[0].in_bits
      << " alpha " << format_double(net.input_alpha) << '\n';
  man << "layers " << net.layers.size() << '\n';

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& d = net.desc.layers[i];
    const ConvLayerData& l = net.layers[i];
    const std::string stem = layer_stem(static_cast<int>(i));
    man << "layer " << i << ' ' << conv_kind_name(d.kind) << " stride "
        << d.stride << " out " << d.out_channels << " bits " << d.in_bits
        << ' ' << d.weight_bits << ' ' << d.out_bits << " K " << d.scale_bits
        << " alpha " << format_double(net.out_alpha[i]) << " files ";
    if (d.kind == ConvKind::head11) {
      man << stem << ".hw";
      save_head_weights(l.head, dir + "/" + stem + ".hw");
    } else {
      man << stem << ".pw " << stem << ".fx";
      save_pow2_weights(l.weights, dir + "/" + stem + ".pw");
      save_fx_params(l.a, l.b, dir + "/" + stem + ".fx");
    }
    if (d.fuse_into_next_dw) man << " fuse";
    man << '\n';
  }
  check(man.good(), "write failed: " + dir + "/model.manifest");
}

QuantizedNetwork load_quantized_network(const std::string& dir) {
  const std::string mpath = dir + "/model.manifest";
  std::ifstream man(mpath);
  check(man.good(), "cannot open: " + mpath);

  QuantizedNetwork net;
  std::string line;
  check(static_cast<bool>(std::getline(man, line)) &&
            line == "shiftflow-model v1",
        "not a shiftflow-model v1 manifest: " + mpath);

  check(static_cast<bool>(std::getline(man, line)), "truncated: " + mpath);
  {
    std::istringstream ls(line);
    std::string tag, bits_tag, alpha_tag;
    int bits = 0;
    ls >> tag >> net.desc.input.c >> net.desc.input.h >> net.desc.input.w >>
        bits_tag >> bits >> alpha_tag >> net.input_alpha;
    check(!ls.fail() && tag == "input" && bits_tag == "bits" &&
              alpha_tag == "alpha",
          "bad input line: " + mpath);
  }

  check(static_cast<bool>(std::getline(man, line)), "truncated: " + mpath);
  std::size_t layer_count = 0;
  {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag >> layer_count;
    check(!ls.fail() && tag == "layers", "bad layers line: " + mpath);
  }

  for (std::size_t i = 0; i < layer_count; ++i) {
    check(static_cast<bool>(std::getline(man, line)), "truncated: " + mpath);
    std::istringstream ls(line);
    std::string tag, kind, key;
    std::size_t idx = 0;
    LayerDesc d;
    double out_alpha = 1.0;
    std::string wfile, fxfile;
    bool fuse = false;
    ls >> tag >> idx >> kind;
    check(!ls.fail() && tag == "layer" && idx == i,
          "bad layer line: " + line);
    d.kind = parse_conv_kind(kind);
    while (ls >> key) {
      if (key == "stride") {
        ls >> d.stride;
      } else if (key == "out") {
        ls >> d.out_channels;
      } else if (key == "bits") {
        ls >> d.in_bits >> d.weight_bits >> d.out_bits;
      } else if (key == "K") {
        ls >> d.scale_bits;
      } else if (key == "alpha") {
        ls >> out_alpha;
      } else if (key == "files") {
        ls >> wfile;
        if (d.kind != ConvKind::head11) ls >> fxfile;
      } else if (key == "fuse") {
        fuse = true;
      } else {
        throw std::runtime_error("manifest: unknown attribute: " + key);
      }
      check(!ls.fail(), "bad layer line: " + line);
    }
    d.fuse_into_next_dw = fuse;

    ConvLayerData l;
    l.kind = d.kind;
    l.stride = d.stride;
    l.out_bits = d.out_bits;
    l.fuse_into_next_dw = fuse;
    if (d.kind == ConvKind::head11) {
      check(!wfile.empty(), "manifest: missing head weight file");
      l.head = load_head_weights(dir + "/" + wfile);
    } else {
      check(!wfile.empty() && !fxfile.empty(),
            "manifest: missing layer files");
      l.weights = load_pow2_weights(dir + "/" + wfile);
      load_fx_params(dir + "/" + fxfile, &l.a, &l.b);
      check(l.a.size() == static_cast<std::size_t>(l.weights.kernels),
            "manifest: fx parameter count mismatch");
    }
    net.desc.layers.push_back(d);
    net.layers.push_back(std::move(l));
    net.out_alpha.push_back(out_alpha);
  }
  net.desc.validate();
  return net;
}

void save_ftensor(const std::vector<float>& data, Dims3 dims,
                  const std::string& path) {
  check(data.size() == dims.size(), "ftensor: size mismatch");
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot open for writing: " + path);
  out << "ftensor v1 " << dims.c << ' ' << dims.h << ' ' << dims.w << '\n';
  for (float v : data) write_f32le(out, v);
  check(out.good(), "write failed: " + path);
}

std::vector<float> load_ftensor(const std::string& path, Dims3* dims) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open: " + path);
  std::string line;
  check(static_cast<bool>(std::getline(in, line)), "truncated: " + path);
  std::istringstream hdr(line);
  std::string magic, version;
  Dims3 d;
  hdr >> magic >> version >> d.c >> d.h >> d.w;
  check(!hdr.fail() && magic == "ftensor" && version == "v1",
        "not a ftensor v1 file: " + path);
  std::vector<float> data(d.size());
  for (float& v : data) v = read_f32le(in, path);
  if (dims != nullptr) *dims = d;
  return data;
}

std::vector<float> load_ppm(const std::string& path, Dims3* dims) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open: " + path);
  auto next_token = [&in, &path]() {
    std::string tok;
    for (;;) {
      check(static_cast<bool>(in >> tok), "truncated ppm: " + path);
      if (tok[0] != '#') return tok;
      std::string rest;
      std::getline(in, rest);  // comment runs to end of line
    }
  };
  check(next_token() == "P6", "only binary P6 ppm supported: " + path);
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  check(w > 0 && h > 0 && maxval > 0 && maxval <= 255,
        "unsupported ppm geometry: " + path);
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  check(in.gcount() == static_cast<std::streamsize>(raw.size()),
        "truncated ppm: " + path);

  Dims3 d{3, h, w};
  std::vector<float> out(d.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        out[(static_cast<std::size_t>(ch) * h + y) * w + x] =
            static_cast<float>(raw[(static_cast<std::size_t>(y) * w + x) * 3 +
                                   ch]) /
            static_cast<float>(maxval);
  if (dims != nullptr) *dims = d;
  return out;
}

}  // namespace shiftflow
