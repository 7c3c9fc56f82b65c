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

#include "shiftflow/sysmodel.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace shiftflow {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

double stage_rate(const StageSpec& s) {
  return 1000.0 * s.threads / s.latency_ms;  // frames per second
}

}  // namespace

PipelineEstimate pipeline_throughput(const std::vector<StageSpec>& stages) {
  check(!stages.empty(), "pipeline: no stages");
  PipelineEstimate e;
  double total_latency = 0.0;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageSpec& s = stages[i];
    check(s.latency_ms > 0.0, "pipeline: stage '" + s.name +
                                   "' needs a positive latency");
    check(s.threads > 0.0, "pipeline: stage '" + s.name +
                               "' needs at least a fractional thread");
    total_latency += s.latency_ms;
    const double rate = stage_rate(s);
    if (i == 0 || rate < stage_rate(stages[e.bottleneck])) {
      e.bottleneck = static_cast<int>(i);
    }
  }
  e.fps = stage_rate(stages[static_cast<std::size_t>(e.bottleneck)]);
  e.sequential_fps = 1000.0 / total_latency;
  e.utilization.reserve(stages.size());
  for (const StageSpec& s : stages)
    e.utilization.push_back(e.fps * s.latency_ms / 1000.0 / s.threads);
  return e;
}

std::vector<StageSpec> assign_threads(std::vector<StageSpec> stages,
                                      double core_budget) {
  if (!(core_budget > 0.0))
    throw std::invalid_argument("assign_threads: budget must be positive");
  std::size_t cpu_stages = 0;
  for (const StageSpec& s : stages) {
    check(s.latency_ms > 0.0, "assign_threads: stage '" + s.name +
                                   "' needs a positive latency");
    if (s.is_cpu) ++cpu_stages;
  }
  if (cpu_stages == 0) return stages;

  if (core_budget < static_cast<double>(cpu_stages)) {
    // Not enough cores to give every stage its own; they time-slice evenly.
    const double share = core_budget / static_cast<double>(cpu_stages);
    for (StageSpec& s : stages)
      if (s.is_cpu) s.threads = share;
    return stages;
  }

  for (StageSpec& s : stages)
    if (s.is_cpu) s.threads = 0.0;
  for (std::uint64_t grant = 0;
       grant < static_cast<std::uint64_t>(core_budget); ++grant) {
    // Give the next core to the slowest CPU stage; break rate ties toward
    // the longer latency, then the earlier stage.
    int pick = -1;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (!stages[i].is_cpu) continue;
      if (pick < 0) {
        pick = static_cast<int>(i);
        continue;
      }
      const StageSpec& a = stages[i];
      const StageSpec& b = stages[static_cast<std::size_t>(pick)];
      const double ra = a.threads / a.latency_ms;
      const double rb = b.threads / b.latency_ms;
      if (ra < rb || (ra == rb && a.latency_ms > b.latency_ms))
        pick = static_cast<int>(i);
    }
    stages[static_cast<std::size_t>(pick)].threads += 1.0;
  }
  return stages;
}

std::vector<StageSpec> parse_stage_table(std::istream& in) {
  std::vector<StageSpec> stages;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    StageSpec s;
    if (!(ls >> s.name)) continue;
    ls >> s.latency_ms >> s.threads;
    check(!ls.fail(), "stage table: bad line: " + line);
    std::string flag;
    if (ls >> flag) {
      check(flag == "fixed", "stage table: unknown flag: " + flag);
      s.is_cpu = false;
    }
    stages.push_back(std::move(s));
  }
  check(!stages.empty(), "stage table: no stages");
  return stages;
}

std::vector<StageSpec> load_stage_table(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open: " + path);
  return parse_stage_table(in);
}

}  // namespace shiftflow
