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
// Command line front end: quantize float models, run the bit-exact
// simulator, plan column tiles, sweep dataflow choices, and evaluate the
// system pipeline model.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shiftflow/engine.hpp"
#include "shiftflow/storage.hpp"
#include "shiftflow/sysmodel.hpp"

namespace {

using namespace shiftflow;

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Accepts a quantized tensor directly, or a float image (ppm / ftensor)
// mapped onto the model's input grid.
QTensor load_input(const std::string& path, const QuantizedNetwork& net) {
  if (has_suffix(path, ".qt")) return load_qtensor(path);
  Dims3 dims{};
  std::vector<float> img;
  if (has_suffix(path, ".ppm"))
    img = load_ppm(path, &dims);
  else
    img = load_ftensor(path, &dims);
  if (!(dims == net.desc.input))
    throw std::runtime_error("input dims do not match the model input");
  return quantize_input(img, dims, net.desc.layers[0].in_bits,
                        net.input_alpha);
}

int cmd_quantize(const std::string& model_dir,
                 const std::vector<std::string>& calib_files, int batch,
                 int k_override, const std::string& out_dir) {
  FloatNetwork fnet = load_float_network(model_dir);
  if (k_override > 0)
    for (LayerDesc& d : fnet.desc.layers)
      if (d.kind != ConvKind::head11) d.scale_bits = k_override;

  std::vector<std::vector<float>> calib;
  for (const std::string& f : calib_files) {
    if (static_cast<int>(calib.size()) >= batch) break;
    Dims3 dims{};
    std::vector<float> img = f.size() > 4 && has_suffix(f, ".ppm")
                                 ? load_ppm(f, &dims)
                                 : load_ftensor(f, &dims);
    if (!(dims == fnet.desc.input))
      throw std::runtime_error("calibration image dims mismatch: " + f);
    calib.push_back(std::move(img));
  }

  QuantizedNetwork qnet = quantize_network(fnet, calib);
  save_quantized_network(qnet, out_dir);

  std::printf("quantized %zu layers over %zu calibration images\n",
              qnet.layers.size(), calib.size());
  std::printf("input alpha %.9g (%d bits)\n", qnet.input_alpha,
              qnet.desc.layers[0].in_bits);
  for (std::size_t i = 0; i < qnet.layers.size(); ++i)
    std::printf("layer %2zu %-7s alpha %.9g\n", i,
                conv_kind_name(qnet.desc.layers[i].kind), qnet.out_alpha[i]);
  std::printf("wrote %s\n", out_dir.c_str());
  return 0;
}

int cmd_run(const std::string& model_dir, const std::string& input_path,
            int tile_limit, std::uint64_t wbuf, const std::string& out_path,
            const std::string& csv_path) {
  QuantizedNetwork net = load_quantized_network(model_dir);
  QTensor input = load_input(input_path, net);

  RunOptions opts;
  opts.tile_limit = tile_limit;
  opts.weight_buffer_capacity = wbuf;
  RunResult r = run_inference(net, input, opts);

  std::printf("%-5s %-18s %-12s %12s %8s %10s  %s\n", "step", "kind", "out",
              "compute", "fill", "macs", "dataflow");
  for (const LayerReport& rep : r.layers) {
    char dims[32];
    std::snprintf(dims, sizeof(dims), "%dx%dx%d", rep.out_dims.c,
                  rep.out_dims.h, rep.out_dims.w);
    std::printf("%-5d %-18s %-12s %12" PRIu64 " %8" PRIu64 " %10" PRIu64
                "  %s\n",
                rep.index, rep.name.c_str(), dims, rep.cost.compute_cycles,
                rep.cost.fill_cycles, rep.cost.macs,
                rep.has_schedule ? schedule_kind_name(rep.schedule) : "-");
  }
  std::printf("total cycles %" PRIu64 " (compute %" PRIu64 ", fill %" PRIu64
              "), macs %" PRIu64 "\n",
              r.total_cost.total_cycles(), r.total_cost.compute_cycles,
              r.total_cost.fill_cycles, r.total_cost.macs);
  for (std::size_t i = 0; i < r.head_saturations.size(); ++i)
    std::printf("head %zu saturations %" PRIu64 "\n", i,
                r.head_saturations[i]);
  std::printf("audit violations %" PRIu64 "\n", r.audit_violations);
  std::printf("output hash %016" PRIx64 "\n", r.output_hash);

  if (!out_path.empty()) {
    save_qtensor(r.feature, out_path);
    std::printf("wrote %s\n", out_path.c_str());
  }
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv.good()) throw std::runtime_error("cannot write " + csv_path);
    csv << "step,kind,out_c,out_h,out_w,compute_cycles,fill_cycles,macs,"
           "dataflow,iaram_reads,wram_reads,oaram_writes,inter_writes,"
           "inter_reads,inter_peak\n";
    for (const LayerReport& rep : r.layers) {
      csv << rep.index << ',' << rep.name << ',' << rep.out_dims.c << ','
          << rep.out_dims.h << ',' << rep.out_dims.w << ','
          << rep.cost.compute_cycles << ',' << rep.cost.fill_cycles << ','
          << rep.cost.macs << ','
          << (rep.has_schedule ? schedule_kind_name(rep.schedule) : "-") << ','
          << rep.counts.iaram_reads << ',' << rep.counts.wram_reads << ','
          << rep.counts.oaram_writes << ',' << rep.counts.inter_writes << ','
          << rep.counts.inter_reads << ',' << rep.counts.inter_peak << '\n';
    }
    std::printf("wrote %s\n", csv_path.c_str());
  }
  return 0;
}

int cmd_tile_plan(int width, int limit, const std::string& kind, int stride,
                  int dw_stride) {
  std::vector<StageGeom> stages;
  if (kind == "conv33" || kind == "dw33") {
    stages.push_back({3, stride, 1});
  } else if (kind == "conv11") {
    stages.push_back({1, 1, 0});
  } else if (kind == "fused11dw") {
    stages.push_back({1, 1, 0});
    stages.push_back({3, dw_stride, 1});
  } else if (kind == "fused33dw") {
    stages.push_back({3, stride, 1});
    stages.push_back({3, dw_stride, 1});
  } else {
    throw std::runtime_error("unknown kind: " + kind +
                             " (conv33|conv11|dw33|fused11dw|fused33dw)");
  }
  TilePlan plan = plan_tiles(width, stages, limit);
  std::fputs(format_tile_plan(plan).c_str(), stdout);
  std::printf("tiles %zu, output width %d, fetched columns %" PRIu64 "\n",
              plan.tiles.size(), plan.out_width, plan.ddr_columns);
  return 0;
}

NetworkDescription load_description_arg(const std::string& path) {
  if (std::filesystem::is_directory(path))
    return load_quantized_network(path).desc;
  return load_network_description(path);
}

int cmd_dataflow_sweep(const std::string& model,
                       std::vector<std::uint64_t> capacities) {
  const NetworkDescription desc = load_description_arg(model);
  std::vector<LayerShape> shapes;
  std::vector<int> indices;
  for (std::size_t i = 0; i < desc.layers.size(); ++i) {
    if (desc.layers[i].kind != ConvKind::conv11) continue;
    const Dims3 in = desc.layer_input_dims(static_cast<int>(i));
    shapes.push_back({in.h, in.w, in.c, desc.layers[i].out_channels});
    indices.push_back(static_cast<int>(i));
  }
  if (shapes.empty()) {
    std::printf("no pointwise layers in %s\n", model.c_str());
    return 0;
  }
  std::printf("%-6s %-10s %-19s %14s %14s %14s %12s\n", "layer", "capacity",
              "dataflow", "wram_reads", "inter_writes", "inter_peak",
              "cycles");
  const std::vector<SweepEntry> sweep =
      dataflow_sweep(shapes, capacities, kPe11.kt, kPe11.ct);
  for (const SweepEntry& e : sweep)
    std::printf("%-6d %-10" PRIu64 " %-19s %14" PRIu64 " %14" PRIu64
                " %14" PRIu64 " %12" PRIu64 "\n",
                indices[static_cast<std::size_t>(e.layer)], e.capacity,
                schedule_kind_name(e.chosen), e.counts.wram_reads,
                e.counts.inter_writes, e.counts.inter_peak,
                e.counts.compute_cycles);
  return 0;
}

int cmd_pipeline(const std::string& stages_path, double cores, bool assign,
                 bool peak, double freq_mhz) {
  if (peak) {
    std::printf("%-8s %4s %4s %12s\n", "pe", "kt", "ct", "GOP/s");
    for (const PeakRow& row : peak_throughput(freq_mhz))
      std::printf("%-8s %4d %4d %12.2f\n", row.pe, row.kt, row.ct, row.gops);
    if (stages_path.empty()) return 0;
    std::printf("\n");
  }
  std::vector<StageSpec> stages = load_stage_table(stages_path);
  if (assign) stages = assign_threads(stages, cores);
  const PipelineEstimate est = pipeline_throughput(stages);
  std::printf("%-24s %10s %8s %10s %6s\n", "stage", "latency", "threads",
              "fps-cap", "util");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageSpec& s = stages[i];
    std::printf("%-24s %9.2fms %8.2f %10.2f %5.0f%%%s\n", s.name.c_str(),
                s.latency_ms, s.threads,
                1000.0 * s.threads / s.latency_ms, est.utilization[i] * 100.0,
                static_cast<int>(i) == est.bottleneck ? "  <- bottleneck"
                                                      : "");
  }
  std::printf("pipelined %.2f fps, sequential %.2f fps\n", est.fps,
              est.sequential_fps);
  return 0;
}

int cmd_compare(const std::string& model_dir, const std::string& float_dir,
                const std::string& input_path) {
  QuantizedNetwork qnet = load_quantized_network(model_dir);
  FloatNetwork fnet = load_float_network(float_dir);
  Dims3 dims{};
  std::vector<float> img = has_suffix(input_path, ".ppm")
                               ? load_ppm(input_path, &dims)
                               : load_ftensor(input_path, &dims);
  if (!(dims == qnet.desc.input))
    throw std::runtime_error("input dims do not match the model input");

  const CompareResult res = compare_float(qnet, fnet, img);
  for (std::size_t i = 0; i < res.layer_sqnr_db.size(); ++i)
    std::printf("layer %2zu %-7s sqnr %8.2f dB\n", i,
                conv_kind_name(qnet.desc.layers[i].kind),
                res.layer_sqnr_db[i]);
  std::printf("backbone feature sqnr %.2f dB\n", res.feature_sqnr_db);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shift-based CNN accelerator quantizer and simulator"};
  app.require_subcommand(1);
  int rc = 0;

  // quantize
  std::string q_model, q_out;
  std::vector<std::string> q_calib;
  int q_batch = 8, q_k = 0;
  CLI::App* q = app.add_subcommand(
      "quantize", "fit a float model to power-of-two weights and fixed-point "
                  "scales");
  q->add_option("--model", q_model, "float model directory")->required();
  q->add_option("--calib", q_calib, "calibration images (ftensor or ppm)")
      ->required();
  q->add_option("--batch", q_batch, "max calibration images used");
  q->add_option("--K", q_k, "override scale bits for every layer");
  q->add_option("--out", q_out, "output model directory")->required();
  q->callback([&] { rc = cmd_quantize(q_model, q_calib, q_batch, q_k, q_out); });

  // run
  std::string r_model, r_input, r_out, r_csv;
  int r_tile = 0;
  std::uint64_t r_wbuf = 4096;
  CLI::App* r = app.add_subcommand("run", "bit-exact integer inference");
  r->add_option("--model", r_model, "quantized model directory")->required();
  r->add_option("--input", r_input, "input tensor (.qt, .ppm, or ftensor)")
      ->required();
  r->add_option("--tile-limit", r_tile, "max input columns per tile (0: off)");
  r->add_option("--wbuf", r_wbuf, "weight buffer capacity in entries");
  r->add_option("--out", r_out, "write final feature map as qtensor");
  r->add_option("--costs-csv", r_csv, "write per-step cost table");
  r->callback(
      [&] { rc = cmd_run(r_model, r_input, r_tile, r_wbuf, r_out, r_csv); });

  // tile-plan
  int t_width = 512, t_limit = 128, t_stride = 1, t_dw_stride = 1;
  std::string t_kind = "conv33";
  CLI::App* t = app.add_subcommand("tile-plan", "column tiling for one stage "
                                                "or a fused pair");
  t->add_option("--width", t_width, "input width in columns")->required();
  t->add_option("--limit", t_limit, "max input columns per tile")->required();
  t->add_option("--kind", t_kind,
                "conv33|conv11|dw33|fused11dw|fused33dw");
  t->add_option("--stride", t_stride, "stride of the (first) stage");
  t->add_option("--dw-stride", t_dw_stride, "stride of the fused depthwise");
  t->callback([&] {
    rc = cmd_tile_plan(t_width, t_limit, t_kind, t_stride, t_dw_stride);
  });

  // dataflow-sweep
  std::string d_model;
  std::vector<std::uint64_t> d_caps;
  CLI::App* d = app.add_subcommand(
      "dataflow-sweep", "dataflow choice and RAM traffic per weight buffer "
                        "capacity");
  d->add_option("--model", d_model,
                "quantized model directory or .net topology")
      ->required();
  d->add_option("--capacities", d_caps, "weight buffer capacities to sweep")
      ->required()
      ->delimiter(',');
  d->callback([&] { rc = cmd_dataflow_sweep(d_model, d_caps); });

  // pipeline
  std::string p_stages;
  double p_cores = 4.0, p_freq = 215.0;
  bool p_assign = false, p_peak = false;
  CLI::App* p = app.add_subcommand("pipeline",
                                   "system pipeline throughput model");
  p->add_option("--stages", p_stages, "stage table file");
  p->add_option("--cores", p_cores, "CPU thread budget for --assign");
  p->add_flag("--assign", p_assign, "distribute the thread budget first");
  p->add_flag("--peak", p_peak, "print peak PE throughput");
  p->add_option("--freq-mhz", p_freq, "accelerator clock for --peak");
  p->callback([&] {
    if (p_stages.empty() && !p_peak)
      throw CLI::ValidationError("pipeline", "need --stages or --peak");
    rc = cmd_pipeline(p_stages, p_cores, p_assign, p_peak, p_freq);
  });

  // compare
  std::string c_model, c_float, c_input;
  CLI::App* c = app.add_subcommand(
      "compare", "signal-to-quantization-noise against the float reference");
  c->add_option("--model", c_model, "quantized model directory")->required();
  c->add_option("--float", c_float, "float model directory")->required();
  c->add_option("--input", c_input, "input image (ftensor or ppm)")
      ->required();
  c->callback([&] { rc = cmd_compare(c_model, c_float, c_input); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}
