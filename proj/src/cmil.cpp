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

#include "cmil/cmil.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmil/errors.hpp"

namespace cmil {

namespace {

void check_lambda(double lambda, const char* where) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError(std::string(where) + ": lambda must lie in [0, 1]");
  }
}

void check_bag_label(int bag_label, const char* where) {
  if (bag_label != 1 && bag_label != -1) {
    throw ConfigError(std::string(where) + ": bag label must be +1 or -1");
  }
}

std::vector<double> selector_scores(const Bag& bag, const ModelParams& params, int class_index) {
  std::vector<double> scores(bag.size());
  for (std::size_t j = 0; j < bag.size(); ++j) {
    scores[j] = selector_score(params, bag.instances[j], class_index);
  }
  return scores;
}

// Highest score wins, ties go to the lower index.
std::size_t argmax_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) {
      best = i;
    }
  }
  return best;
}

}  // namespace

SubsetPartition partition_subsets(const Bag& bag, std::span<const double> scores, double lambda) {
  if (bag.size() == 0) {
    throw ConfigError("partition_subsets: bag must hold at least one instance");
  }
  if (scores.size() != bag.size()) {
    throw ConfigError("partition_subsets: one score per instance required");
  }
  check_lambda(lambda, "partition_subsets");

  const std::size_t n = bag.size();
  // visit order: descending score, ties by lower index
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  SubsetPartition partition;
  partition.lambda = lambda;
  std::vector<bool> covered(n, false);
  for (std::size_t seed : order) {
    if (covered[seed]) {
      continue;
    }
    covered[seed] = true;
    std::vector<std::size_t> members{seed};
    for (std::size_t j = 0; j < n; ++j) {
      if (!covered[j] && iou(bag.instances[j].box, bag.instances[seed].box) >= lambda) {
        covered[j] = true;
        members.push_back(j);
      }
    }
    std::sort(members.begin(), members.end());
    partition.subsets.push_back(std::move(members));
    partition.seeds.push_back(seed);
  }
  return partition;
}

double subset_score(const SubsetPartition& partition, std::size_t subset_index,
                    std::span<const double> scores) {
  if (subset_index >= partition.subsets.size()) {
    throw ConfigError("subset_score: subset index out of range");
  }
  const std::vector<std::size_t>& members = partition.subsets[subset_index];
  double sum = 0.0;
  for (std::size_t j : members) {
    sum += scores[j];
  }
  return sum / static_cast<double>(members.size());
}

LabelAssignment assign_labels(const Bag& bag, std::size_t anchor_index, double lambda,
                              int class_index) {
  if (anchor_index >= bag.size()) {
    throw ConfigError("assign_labels: anchor index out of range");
  }
  check_lambda(lambda, "assign_labels");

  const double positive_threshold = 1.0 - lambda / 2.0;
  const double negative_threshold = lambda / 2.0;
  LabelAssignment assignment;
  assignment.class_index = class_index;
  assignment.anchor = anchor_index;
  assignment.labels.resize(bag.size());
  const Box& anchor_box = bag.instances[anchor_index].box;
  for (std::size_t j = 0; j < bag.size(); ++j) {
    const double overlap = iou(bag.instances[j].box, anchor_box);
    if (overlap >= positive_threshold) {
      assignment.labels[j] = InstanceLabel::positive;
    } else if (overlap < negative_threshold) {
      assignment.labels[j] = InstanceLabel::negative;
    } else {
      assignment.labels[j] = InstanceLabel::ignore;
    }
  }
  return assignment;
}

double detector_loss(const Bag& bag, const LabelAssignment& assignment, const ModelParams& params,
                     DetectorLossReduction reduction) {
  if (assignment.labels.size() != bag.size()) {
    throw ConfigError("detector_loss: assignment does not match bag size");
  }
  std::size_t labeled = 0;
  for (InstanceLabel l : assignment.labels) {
    labeled += l != InstanceLabel::ignore;
  }
  if (labeled == 0) {
    warn("detector_loss: every instance ignored; contributing 0");
    return 0.0;
  }
  const double weight =
      reduction == DetectorLossReduction::mean ? 1.0 / static_cast<double>(labeled) : 1.0;
  double loss = 0.0;
  for (std::size_t j = 0; j < bag.size(); ++j) {
    if (assignment.labels[j] == InstanceLabel::ignore) {
      continue;
    }
    const int target = assignment.labels[j] == InstanceLabel::positive
                           ? assignment.class_index
                           : params.background_channel();
    const std::vector<double> p = detector_prob(params, bag.instances[j]);
    loss += -std::log(p[target]) * weight;
  }
  return loss;
}

ScoreSelection selection_from_scores(const Bag& bag, std::span<const double> scores, int bag_label,
                                     double lambda) {
  check_bag_label(bag_label, "selection_from_scores");
  const SubsetPartition partition = partition_subsets(bag, scores, lambda);
  ScoreSelection result;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < partition.subsets.size(); ++k) {
    const double mean = subset_score(partition, k, scores);
    if (mean > best) {
      best = mean;
      result.selected_subset = k;
    }
  }
  result.best_score = best;
  result.loss = std::max(0.0, 1.0 - static_cast<double>(bag_label) * best);
  return result;
}

SelectionResult selection_loss(const Bag& bag, int class_index, int bag_label,
                               const ModelParams& params, double lambda) {
  const std::vector<double> scores = selector_scores(bag, params, class_index);
  const ScoreSelection s = selection_from_scores(bag, scores, bag_label, lambda);
  return {s.loss, s.selected_subset};
}

MilSelectionResult mil_selection_loss(const Bag& bag, int class_index, int bag_label,
                                      const ModelParams& params) {
  check_bag_label(bag_label, "mil_selection_loss");
  if (bag.size() == 0) {
    throw ConfigError("mil_selection_loss: bag must hold at least one instance");
  }
  const std::vector<double> scores = selector_scores(bag, params, class_index);
  const std::size_t best = argmax_index(scores);
  MilSelectionResult result;
  result.selected_instance = best;
  result.loss = std::max(0.0, 1.0 - static_cast<double>(bag_label) * scores[best]);
  return result;
}

namespace {

TotalLossResult total_loss_impl(const Bag& bag, const ModelParams& params,
                                const LossOptions& options, GradientBuffer* grad) {
  if (bag.num_classes() != params.num_classes) {
    throw ConfigError("total_loss: bag label count does not match model classes");
  }
  check_lambda(options.selection_lambda, "total_loss (selection)");
  check_lambda(options.label_lambda, "total_loss (labels)");

  TotalLossResult result;
  result.per_class.reserve(bag.labels.size());

  for (int c = 0; c < params.num_classes; ++c) {
    const int y = bag.labels[c];
    check_bag_label(y, "total_loss");

    const std::vector<double> scores = selector_scores(bag, params, c);
    const SubsetPartition partition =
        partition_subsets(bag, scores, options.selection_lambda);

    std::size_t best_subset = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < partition.subsets.size(); ++k) {
      const double mean = subset_score(partition, k, scores);
      if (mean > best_mean) {
        best_mean = mean;
        best_subset = k;
      }
    }

    ClassDiagnostics diag;
    diag.class_index = c;
    diag.bag_label = y;
    diag.selected_subset = best_subset;
    diag.selected_members = partition.subsets[best_subset];
    diag.selection_margin = y * best_mean;
    diag.selection_loss = std::max(0.0, 1.0 - diag.selection_margin);
    result.loss += diag.selection_loss;

    const std::vector<std::size_t>& members = partition.subsets[best_subset];
    if (grad != nullptr && diag.selection_loss > 0.0) {
      // d hinge / d score_j = -y / |J*| for members of the selected subset
      const double upstream = -static_cast<double>(y) / static_cast<double>(members.size());
      for (std::size_t j : members) {
        selector_backward(params, bag.instances[j], c, upstream, *grad);
      }
    }

    if (y == 1) {
      // anchor: top-scoring instance inside the selected subset
      std::size_t anchor = members.front();
      for (std::size_t j : members) {
        if (scores[j] > scores[anchor]) {
          anchor = j;
        }
      }
      const LabelAssignment assignment = assign_labels(bag, anchor, options.label_lambda, c);

      std::size_t labeled = 0;
      for (InstanceLabel l : assignment.labels) {
        labeled += l != InstanceLabel::ignore;
      }
      diag.has_detector_term = true;
      diag.anchor = anchor;
      diag.assignment = assignment.labels;
      for (InstanceLabel l : assignment.labels) {
        diag.num_positive += l == InstanceLabel::positive;
        diag.num_negative += l == InstanceLabel::negative;
        diag.num_ignored += l == InstanceLabel::ignore;
      }

      if (labeled == 0) {
        warn("total_loss: every instance ignored for bag " + bag.id);
      } else {
        const double weight = options.reduction == DetectorLossReduction::mean
                                  ? 1.0 / static_cast<double>(labeled)
                                  : 1.0;
        double det = 0.0;
        std::vector<double> prob_grad(static_cast<std::size_t>(params.num_classes) + 1);
        for (std::size_t j = 0; j < bag.size(); ++j) {
          if (assignment.labels[j] == InstanceLabel::ignore) {
            continue;
          }
          const int target = assignment.labels[j] == InstanceLabel::positive
                                 ? c
                                 : params.background_channel();
          const std::vector<double> p = detector_prob(params, bag.instances[j]);
          det += -std::log(p[target]) * weight;
          if (grad != nullptr) {
            std::fill(prob_grad.begin(), prob_grad.end(), 0.0);
            prob_grad[target] = -weight / p[target];
            detector_backward(params, bag.instances[j], prob_grad, *grad);
          }
        }
        diag.detector_loss = det;
        result.loss += det;
      }
    }

    result.per_class.push_back(std::move(diag));
  }
  return result;
}

}  // namespace

TotalLossResult total_loss(const Bag& bag, const ModelParams& params, const LossOptions& options) {
  return total_loss_impl(bag, params, options, nullptr);
}

TotalLossResult total_loss(const Bag& bag, const ModelParams& params, double lambda,
                           DetectorLossReduction reduction) {
  return total_loss_impl(bag, params, LossOptions{lambda, lambda, reduction}, nullptr);
}

TotalLossResult total_loss_grad(const Bag& bag, const ModelParams& params,
                                const LossOptions& options, GradientBuffer& grad) {
  return total_loss_impl(bag, params, options, &grad);
}

}  // namespace cmil
