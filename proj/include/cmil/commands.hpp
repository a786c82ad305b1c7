// Copyright 2026 The cmil Authors
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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmil/eval.hpp"
#include "cmil/optimizer.hpp"
#include "cmil/synthdata.hpp"

namespace cmil {

/// Everything a run needs, mirroring the JSON config file. Every field can be
/// overridden from the command line; the fully resolved config is echoed into
/// the output directory so a run can be reproduced from its artifacts alone.
struct RunConfig {
  // data
  SynthConfig synth;
  int test_bags = 100;
  std::string train_dataset;  // when set, load instead of synthesizing
  std::string test_dataset;
  std::string dataset_format = "jsonl";  // generate output: jsonl | bin

  // training
  int epochs = 20;
  double lr_first_half = 5e-3;
  double lr_second_half = 5e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  std::string schedule = "log";
  double schedule_k = -1.0;  // negative selects the per-kind default
  bool continuation_selector = true;
  bool continuation_detector = true;
  std::string detector_loss_reduction = "mean";  // mean | sum
  bool lambda_per_iteration = false;
  int hidden_dim = 0;
  double init_scale = 0.0;
  int checkpoint_every = 0;  // 0 writes only the final checkpoint

  // evaluation
  double nms_threshold = 0.3;
  double iou_threshold = 0.5;
  std::string ap_mode = "all-points";  // all-points | 11-point

  // run
  std::string out_dir = "runs/out";
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  bool check_thresholds = false;  // sweep/ablate: exit 3 when direction checks fail
  std::string checkpoint;        // eval input
  std::string export_detections;  // eval: optional detections dump path

  TrainConfig make_train_config(std::uint64_t run_seed) const;
  EvalConfig make_eval_config() const;
};

RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

/// Exit codes shared by every subcommand: 0 success, 1 config error,
/// 2 runtime error, 3 direction-check/threshold failure.
int cmd_generate(const RunConfig& config);
int cmd_train(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_sweep(const RunConfig& config);
int cmd_ablate(const RunConfig& config);
int cmd_gradcheck(const RunConfig& config, int sample_bags, double lambda);

}  // namespace cmil
