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
#include <functional>
#include <string>
#include <vector>

#include "cmil/cmil.hpp"
#include "cmil/model.hpp"
#include "cmil/schedule.hpp"

namespace cmil {

/// Continuation switches. Turning one off pins the corresponding lambda to 1
/// (plain max selection / fixed 0.5 label thresholds); both off is the
/// baseline MIL configuration.
struct AblationFlags {
  bool continuation_selector = true;
  bool continuation_detector = true;
};

struct TrainConfig {
  int epochs = 20;
  double lr_first_half = 5e-3;   // first floor(epochs/2) epochs
  double lr_second_half = 5e-4;  // remaining epochs
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  Schedule schedule = Schedule::make(ScheduleKind::log);
  AblationFlags ablation;
  DetectorLossReduction detector_reduction = DetectorLossReduction::mean;
  /// Advance lambda every bag step instead of every epoch.
  bool lambda_per_iteration = false;
  int hidden_dim = 0;
  /// 0 selects zero initialization; > 0 draws N(0, init_scale) weights.
  double init_scale = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double lambda = 0.0;
  double learning_rate = 0.0;
  double mean_selection_loss = 0.0;  // summed over classes, averaged over bags
  double mean_detector_loss = 0.0;
  double bag_accuracy = 0.0;   // sign of the per-instance max selector score
  double train_corloc = 0.0;   // NaN when the dataset has no usable ground truth
  double mean_selected_subset_size = 0.0;    // over positive (bag, class) pairs
  double median_selected_subset_size = 0.0;  // NaN when there were none
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

/// One row per epoch; doubles rendered with 17 significant digits so equal
/// runs produce byte-identical tables.
std::string trainlog_to_csv(const TrainLog& log);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

using EpochCallback = std::function<void(int epoch, const ModelParams& params)>;

/// Bag-at-a-time SGD with momentum and weight decay over total_loss, with the
/// continuation parameter advanced by the schedule. Deterministic for a fixed
/// (dataset, config): bag order is reshuffled per epoch from a seed derived
/// off (config.seed, epoch). Throws on non-finite loss, naming bag and epoch.
TrainResult train(const std::vector<Bag>& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct GradCheckConfig {
  double step = 1e-5;            // central-difference half step
  double kink_tolerance = 1e-3;  // skip coordinates with |1 - margin| below this
  double rel_tolerance = 1e-4;
  double abs_floor = 1e-7;  // |analytic - numeric| below this always passes
  int coords_per_bag = 24;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t skipped_kink = 0;
  std::size_t skipped_structure = 0;  // discrete selection changed under the probe
  std::size_t failures = 0;
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;

  bool passed() const { return failures == 0; }
  std::string summary() const;
};

/// Central finite differences of total_loss against the analytic gradients,
/// on randomly sampled coordinates per bag. Coordinates where a hinge sits at
/// its kink, or where the probe flips the discrete partition/anchor/labels,
/// are excluded and counted as skipped.
GradCheckReport check_gradients(const std::vector<Bag>& sample, const ModelParams& params,
                                double lambda, const GradCheckConfig& config = {});

}  // namespace cmil
