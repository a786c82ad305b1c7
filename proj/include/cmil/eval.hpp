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

#include <string>
#include <unordered_map>
#include <vector>

#include "cmil/model.hpp"

namespace cmil {

struct Detection {
  std::string bag_id;
  int class_index = 0;
  Box box;
  double confidence = 0.0;
};

enum class ApMode { all_points, eleven_point };

struct EvalConfig {
  double nms_threshold = 0.3;
  double iou_threshold = 0.5;
  ApMode ap_mode = ApMode::all_points;
};

/// Ground-truth boxes of one class, grouped by bag id.
struct GroundTruthSet {
  std::unordered_map<std::string, std::vector<Box>> by_bag;
  std::size_t total = 0;
};
GroundTruthSet collect_ground_truth(const std::vector<Bag>& bags, int class_index);

/// Per class: detector probability of that class as the confidence of every
/// instance, then per-class NMS; all survivors are returned.
std::vector<Detection> detect(const Bag& bag, const ModelParams& params, double nms_threshold);

/// Fraction of positive bags (of each class, restricted to bags carrying
/// ground truth) whose highest-confidence instance overlaps some ground-truth
/// box of the class with IoU >= 0.5. Classes without such bags report NaN.
std::vector<double> corloc(const std::vector<Bag>& bags, const ModelParams& params);

/// VOC-style average precision of ranked detections against a ground-truth
/// set: greedy matching (confidence order, each gt used at most once, ties in
/// confidence broken by input order), then area under the interpolated PR
/// curve. Returns NaN when the set holds no ground truth.
double average_precision(const std::vector<Detection>& detections, const GroundTruthSet& gts,
                         double iou_threshold = 0.5, ApMode mode = ApMode::all_points);

struct ClassMetric {
  int class_index = 0;
  double ap = 0.0;          // NaN when the class has no ground truth
  double corloc = 0.0;      // NaN when the class has no positive bags
  std::size_t num_gt = 0;
  std::size_t num_positive_bags = 0;
};

struct MetricReport {
  std::vector<ClassMetric> per_class;
  double map = 0.0;          // mean AP over classes with ground truth
  double mean_corloc = 0.0;  // mean over classes with positive bags
  std::size_t bags_evaluated = 0;
  double nms_threshold = 0.0;
  double iou_threshold = 0.0;
  ApMode ap_mode = ApMode::all_points;
};

MetricReport evaluate(const std::vector<Bag>& bags, const ModelParams& params,
                      const EvalConfig& config);

/// Human-readable table of a MetricReport.
std::string format_metric_table(const MetricReport& report);

}  // namespace cmil
