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

#ifndef SHIFTFLOW_SYSMODEL_HPP_
#define SHIFTFLOW_SYSMODEL_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace shiftflow {

// One stage of the camera-to-detection pipeline. `threads` is how many
// workers run the stage concurrently; fractional values model time-sliced
// sharing. Fixed-function stages (the accelerator itself) are not CPU stages
// and keep whatever replica count they were declared with.
struct StageSpec {
  std::string name;
  double latency_ms = 0.0;  // per-frame latency of one worker
  double threads = 1.0;
  bool is_cpu = true;
};

struct PipelineEstimate {
  double fps = 0.0;       // steady-state frames per second
  int bottleneck = 0;     // index of the stage that caps throughput
  std::vector<double> utilization;  // busy fraction per stage at that rate
  double sequential_fps = 0.0;      // no overlap: 1000 / sum(latency)
};

// Steady state of a fully overlapped pipeline: each stage sustains
// 1000 * threads / latency_ms frames per second and the slowest stage sets
// the pace. Throws on non-positive latency or threads.
PipelineEstimate pipeline_throughput(const std::vector<StageSpec>& stages);

// Splits an integer thread budget over the CPU stages by repeatedly granting
// one thread to the stage with the lowest current rate (threads / latency;
// ties: larger latency, then lower index). A budget below the CPU stage
// count degrades to an equal fractional share per CPU stage. Fixed-function
// stages are left untouched. Throws on a non-positive budget.
std::vector<StageSpec> assign_threads(std::vector<StageSpec> stages,
                                      double core_budget);

// Text table, one stage per line: name latency_ms threads [fixed]
// Blank lines and '#' comments allowed.
std::vector<StageSpec> parse_stage_table(std::istream& in);
std::vector<StageSpec> load_stage_table(const std::string& path);

}  // namespace shiftflow

#endif  // SHIFTFLOW_SYSMODEL_HPP_
