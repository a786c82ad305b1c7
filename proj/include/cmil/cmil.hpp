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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cmil/model.hpp"

namespace cmil {

/// The lambda-dependent minimum sufficient cover of a bag: pairwise-disjoint
/// index subsets whose union is every instance. At lambda = 0 there is a
/// single subset holding the whole bag; at lambda = 1 every pairwise-distinct
/// box sits in its own singleton.
struct SubsetPartition {
  double lambda = 0.0;
  std::vector<std::vector<std::size_t>> subsets;  // creation order; members ascending
  std::vector<std::size_t> seeds;                 // seeds[k]: top-scoring member of subsets[k]
};

/// Two-step cover construction: (1) seed a new subset with the highest-scored
/// instance not yet covered, (2) move every uncovered instance whose IoU with
/// that seed is >= lambda into the subset; repeat until the bag is covered.
/// Score ties break toward the lower instance index.
SubsetPartition partition_subsets(const Bag& bag, std::span<const double> scores, double lambda);

/// Mean of the member instance scores of one subset.
double subset_score(const SubsetPartition& partition, std::size_t subset_index,
                    std::span<const double> scores);

enum class InstanceLabel : std::int8_t { negative = -1, ignore = 0, positive = 1 };

/// Thresholded pseudo labels around an anchor instance: positive when
/// IoU(instance, anchor) >= 1 - lambda/2, negative when IoU < lambda/2,
/// ignored in between. Positives target the detector channel of
/// `class_index`; negatives target the background channel.
struct LabelAssignment {
  int class_index = 0;
  std::size_t anchor = 0;
  std::vector<InstanceLabel> labels;

  friend bool operator==(const LabelAssignment&, const LabelAssignment&) = default;
};

LabelAssignment assign_labels(const Bag& bag, std::size_t anchor_index, double lambda,
                              int class_index);

enum class DetectorLossReduction { mean, sum };

/// Cross-entropy of the detector over the non-ignored instances of an
/// assignment (mean by default, plain sum behind the reduction switch).
/// Returns 0 with a warning if every instance is ignored.
double detector_loss(const Bag& bag, const LabelAssignment& assignment, const ModelParams& params,
                     DetectorLossReduction reduction = DetectorLossReduction::mean);

struct SelectionResult {
  double loss = 0.0;
  std::size_t selected_subset = 0;
};

/// Score-level smoothed selection objective: partitions the bag with the
/// given per-instance scores, then applies the hinge to the best subset mean.
/// Subset-mean ties break toward earlier creation order.
struct ScoreSelection {
  double loss = 0.0;
  std::size_t selected_subset = 0;
  double best_score = 0.0;  // the winning subset mean
};
ScoreSelection selection_from_scores(const Bag& bag, std::span<const double> scores, int bag_label,
                                     double lambda);

/// hinge(1 - y * max_J mean-score(J)) over the lambda-partition, where the
/// scores come from the instance selector.
SelectionResult selection_loss(const Bag& bag, int class_index, int bag_label,
                               const ModelParams& params, double lambda);

/// Plain hinge over the per-instance max — the baseline objective, and the
/// lambda = 1 special case of selection_loss (for pairwise-distinct boxes).
struct MilSelectionResult {
  double loss = 0.0;
  std::size_t selected_instance = 0;
};
MilSelectionResult mil_selection_loss(const Bag& bag, int class_index, int bag_label,
                                      const ModelParams& params);

/// Per-class record of everything the combined objective decided for one bag,
/// kept for logging and for freezing discrete structure in gradient checks.
struct ClassDiagnostics {
  int class_index = 0;
  int bag_label = 0;
  double selection_loss = 0.0;
  double selection_margin = 0.0;  // y * selected subset mean
  std::size_t selected_subset = 0;
  std::vector<std::size_t> selected_members;
  bool has_detector_term = false;
  std::size_t anchor = 0;
  double detector_loss = 0.0;
  std::vector<InstanceLabel> assignment;  // empty when no detector term
  std::size_t num_positive = 0;
  std::size_t num_negative = 0;
  std::size_t num_ignored = 0;
};

struct LossOptions {
  double selection_lambda = 1.0;  // drives the subset partition
  double label_lambda = 1.0;      // drives the pseudo-label thresholds
  DetectorLossReduction reduction = DetectorLossReduction::mean;
};

struct TotalLossResult {
  double loss = 0.0;
  std::vector<ClassDiagnostics> per_class;
};

/// Combined objective over all classes of one bag: every class contributes
/// its selection hinge; classes labeled +1 additionally contribute the
/// detector term, anchored at the top-scoring instance of the selected
/// subset.
TotalLossResult total_loss(const Bag& bag, const ModelParams& params, const LossOptions& options);
TotalLossResult total_loss(const Bag& bag, const ModelParams& params, double lambda,
                           DetectorLossReduction reduction = DetectorLossReduction::mean);

/// Same objective plus analytic gradients. The partition, the selected
/// subset, the anchor and the label assignment are treated as constants;
/// gradients flow through the subset mean and the detector log-probabilities.
TotalLossResult total_loss_grad(const Bag& bag, const ModelParams& params,
                                const LossOptions& options, GradientBuffer& grad);

}  // namespace cmil
