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

#include "cmil/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cmil/errors.hpp"

namespace cmil {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

GroundTruthSet collect_ground_truth(const std::vector<Bag>& bags, int class_index) {
  GroundTruthSet gts;
  for (const Bag& bag : bags) {
    if (class_index >= bag.num_classes()) {
      continue;
    }
    const std::vector<Box>& boxes = bag.gt_boxes[class_index];
    if (!boxes.empty()) {
      gts.by_bag[bag.id] = boxes;
      gts.total += boxes.size();
    }
  }
  return gts;
}

std::vector<Detection> detect(const Bag& bag, const ModelParams& params, double nms_threshold) {
  // one softmax per instance, shared across the per-class passes
  std::vector<std::vector<double>> probs(bag.size());
  for (std::size_t j = 0; j < bag.size(); ++j) {
    probs[j] = detector_prob(params, bag.instances[j]);
  }
  std::vector<Detection> detections;
  std::vector<ScoredBox> scored(bag.size());
  for (int c = 0; c < params.num_classes; ++c) {
    for (std::size_t j = 0; j < bag.size(); ++j) {
      scored[j].box = bag.instances[j].box;
      scored[j].score = probs[j][c];
    }
    for (std::size_t idx : nms(scored, nms_threshold)) {
      detections.push_back(Detection{bag.id, c, scored[idx].box, scored[idx].score});
    }
  }
  return detections;
}

std::vector<double> corloc(const std::vector<Bag>& bags, const ModelParams& params) {
  const int classes = params.num_classes;
  std::vector<std::size_t> hits(classes, 0);
  std::vector<std::size_t> counts(classes, 0);
  std::vector<std::vector<double>> probs;
  for (const Bag& bag : bags) {
    if (bag.num_classes() != classes) {
      throw ConfigError("corloc: bag class count does not match model");
    }
    probs.assign(bag.size(), {});
    bool have_probs = false;
    // top instance by raw class confidence, before any NMS
    for (int c = 0; c < classes; ++c) {
      if (bag.labels[c] != 1 || bag.gt_boxes[c].empty()) {
        continue;
      }
      if (!have_probs) {
        for (std::size_t j = 0; j < bag.size(); ++j) {
          probs[j] = detector_prob(params, bag.instances[j]);
        }
        have_probs = true;
      }
      std::size_t top = 0;
      double top_conf = -1.0;
      for (std::size_t j = 0; j < bag.size(); ++j) {
        if (probs[j][c] > top_conf) {
          top_conf = probs[j][c];
          top = j;
        }
      }
      ++counts[c];
      for (const Box& gt : bag.gt_boxes[c]) {
        if (iou(bag.instances[top].box, gt) >= 0.5) {
          ++hits[c];
          break;
        }
      }
    }
  }
  std::vector<double> result(classes, kNaN);
  for (int c = 0; c < classes; ++c) {
    if (counts[c] > 0) {
      result[c] = static_cast<double>(hits[c]) / static_cast<double>(counts[c]);
    }
  }
  return result;
}

double average_precision(const std::vector<Detection>& detections, const GroundTruthSet& gts,
                         double iou_threshold, ApMode mode) {
  if (gts.total == 0) {
    return kNaN;
  }

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  // greedy matching: highest confidence first, each gt used at most once
  std::unordered_map<std::string, std::vector<bool>> used;
  for (const auto& [bag_id, boxes] : gts.by_bag) {
    used[bag_id].assign(boxes.size(), false);
  }

  std::vector<bool> is_tp(order.size(), false);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Detection& det = detections[order[rank]];
    auto it = gts.by_bag.find(det.bag_id);
    if (it == gts.by_bag.end()) {
      continue;
    }
    const std::vector<Box>& boxes = it->second;
    std::vector<bool>& flags = used[det.bag_id];
    double best_iou = 0.0;
    std::size_t best_gt = boxes.size();
    for (std::size_t g = 0; g < boxes.size(); ++g) {
      if (flags[g]) {
        continue;
      }
      const double overlap = iou(det.box, boxes[g]);
      if (overlap >= iou_threshold && overlap > best_iou) {
        best_iou = overlap;
        best_gt = g;
      }
    }
    if (best_gt < boxes.size()) {
      flags[best_gt] = true;
      is_tp[rank] = true;
    }
  }

  const double npos = static_cast<double>(gts.total);
  std::vector<double> recall(order.size());
  std::vector<double> precision(order.size());
  double tp = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    tp += is_tp[rank] ? 1.0 : 0.0;
    recall[rank] = tp / npos;
    precision[rank] = tp / static_cast<double>(rank + 1);
  }

  // interpolate: precision at recall r becomes max precision at recall >= r
  std::vector<double> interp = precision;
  for (std::size_t i = interp.size(); i-- > 1;) {
    interp[i - 1] = std::max(interp[i - 1], interp[i]);
  }

  if (mode == ApMode::eleven_point) {
    double ap = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double r = static_cast<double>(i) / 10.0;
      double p = 0.0;
      for (std::size_t j = 0; j < recall.size(); ++j) {
        if (recall[j] >= r) {
          p = interp[j];
          break;
        }
      }
      ap += p / 11.0;
    }
    return ap;
  }

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * interp[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

MetricReport evaluate(const std::vector<Bag>& bags, const ModelParams& params,
                      const EvalConfig& config) {
  MetricReport report;
  report.bags_evaluated = bags.size();
  report.nms_threshold = config.nms_threshold;
  report.iou_threshold = config.iou_threshold;
  report.ap_mode = config.ap_mode;

  std::vector<std::vector<Detection>> per_class(static_cast<std::size_t>(params.num_classes));
  for (const Bag& bag : bags) {
    for (Detection& det : detect(bag, params, config.nms_threshold)) {
      per_class[det.class_index].push_back(std::move(det));
    }
  }
  const std::vector<double> corlocs = corloc(bags, params);

  double ap_sum = 0.0;
  std::size_t ap_classes = 0;
  double corloc_sum = 0.0;
  std::size_t corloc_classes = 0;
  for (int c = 0; c < params.num_classes; ++c) {
    ClassMetric m;
    m.class_index = c;
    const GroundTruthSet gts = collect_ground_truth(bags, c);
    m.num_gt = gts.total;
    m.ap = average_precision(per_class[c], gts, config.iou_threshold, config.ap_mode);
    m.corloc = corlocs[c];
    for (const Bag& bag : bags) {
      m.num_positive_bags += bag.labels[c] == 1;
    }
    if (!std::isnan(m.ap)) {
      ap_sum += m.ap;
      ++ap_classes;
    }
    if (!std::isnan(m.corloc)) {
      corloc_sum += m.corloc;
      ++corloc_classes;
    }
    report.per_class.push_back(m);
  }
  report.map = ap_classes > 0 ? ap_sum / static_cast<double>(ap_classes) : kNaN;
  report.mean_corloc =
      corloc_classes > 0 ? corloc_sum / static_cast<double>(corloc_classes) : kNaN;
  return report;
}

std::string format_metric_table(const MetricReport& report) {
  std::ostringstream out;
  char line[128];
  out << "class        AP    CorLoc   #gt  #pos-bags\n";
  for (const ClassMetric& m : report.per_class) {
    std::snprintf(line, sizeof(line), "%5d   %7.4f   %7.4f  %4zu  %9zu\n", m.class_index, m.ap,
                  m.corloc, m.num_gt, m.num_positive_bags);
    out << line;
  }
  std::snprintf(line, sizeof(line), "mAP %.4f   mean CorLoc %.4f   (%zu bags, nms %.2f, iou %.2f, %s)\n",
                report.map, report.mean_corloc, report.bags_evaluated, report.nms_threshold,
                report.iou_threshold,
                report.ap_mode == ApMode::all_points ? "all-points AP" : "11-point AP");
  out << line;
  return out.str();
}

}  // namespace cmil
