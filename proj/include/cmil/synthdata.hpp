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

#include "cmil/model.hpp"

namespace cmil {

/// Generator settings for the synthetic bag benchmark, engineered so that a
/// max-over-instances learner is rewarded for latching onto object parts
/// while the object's full extent is only discoverable in aggregate:
///   - the part direction carries a strictly larger coefficient than the
///     extent direction and is active only on true parts;
///   - negative bags contain a few strong "phantom object" distractors that
///     activate the extent and class axes (never the part axis), so scoring
///     bags by their max poisons the extent direction while scoring them by
///     their mean barely notices the handful of distractors.
struct SynthConfig {
  int num_bags = 200;
  int proposals_per_bag = 30;
  int num_classes = 3;
  int feature_dim = 16;

  double part_strength = 2.0;    // coefficient on the part direction (beta_part)
  double extent_strength = 1.0;  // coefficient on the extent direction (beta_obj)
  double class_strength = 1.0;   // class-identity direction, scaled by object overlap
  double noise_sigma = 0.1;
  double positive_fraction = 0.75;
  std::uint64_t seed = 0;
  double min_proposal_side = 0.02;

  // proposal mixture per positive bag; the remainder is background
  double extent_fraction = 0.30;
  double part_fraction = 0.10;
  double partial_fraction = 0.15;

  // phantom-object distractors in negative bags
  double distractor_fraction = 0.10;
  double distractor_strength = 0.5;  // phantom signal relative to a true object

  // geometry
  double part_area_fraction = 0.12;  // part box area relative to the object box
  double extent_jitter = 0.04;       // corner jitter of extent proposals, relative to side
  double part_jitter = 0.16;         // corner jitter of part proposals
  double partial_jitter = 0.03;      // extra jitter on part-to-extent interpolations
  double partial_t_min = 0.20;       // interpolation range for partial proposals
  double partial_t_max = 0.90;
  double background_side_min = 0.10;  // background proposal side range
  double background_side_max = 0.40;
  double background_max_gt_iou = 0.30;
};

/// Throws ConfigError when a field is out of range (requires
/// feature_dim >= 3 * num_classes, part_strength > extent_strength, ...).
void validate(const SynthConfig& config);

/// Feature axes used by the generator; exposed so tests can read projections.
int part_axis(int class_index);    // 3c
int extent_axis(int class_index);  // 3c + 1
int class_axis(int class_index);   // 3c + 2

/// Generation-side geometry of one bag, for inspection by tests and
/// diagnostics (the part box is never part of the dataset itself).
struct BagGeometry {
  bool positive = false;
  int class_index = -1;
  Box object;
  Box part;
};

/// Deterministic generation: each bag derives its own seed from
/// (config.seed, bag index), so the result is independent of evaluation
/// order and reproducible bit-for-bit. When `geometry` is non-null it
/// receives one entry per bag.
std::vector<Bag> generate(const SynthConfig& config, std::vector<BagGeometry>* geometry = nullptr);

/// Dataset files carry a (version, classes, feature_dim) header plus one
/// record per bag. A ".bin" extension selects the compact binary form;
/// anything else is line-delimited JSON. Both round-trip losslessly.
void write_dataset(const std::string& path, const std::vector<Bag>& bags);
std::vector<Bag> read_dataset(const std::string& path);

}  // namespace cmil
