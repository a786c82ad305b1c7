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

#include "cmil/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "cmil/errors.hpp"
#include "cmil/eval.hpp"
#include "cmil/rng.hpp"

namespace cmil {

namespace {

constexpr std::uint64_t kShuffleStream = 0xEB0C0000ULL;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate(const TrainConfig& c) {
  if (c.epochs < 2) {
    throw ConfigError("train: epochs must be at least 2");
  }
  if (!(c.lr_first_half > 0.0) || !(c.lr_second_half > 0.0)) {
    throw ConfigError("train: learning rates must be positive");
  }
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) {
    throw ConfigError("train: momentum must lie in [0, 1)");
  }
  if (c.weight_decay < 0.0) {
    throw ConfigError("train: weight_decay must be non-negative");
  }
  if (c.hidden_dim < 0 || c.init_scale < 0.0) {
    throw ConfigError("train: hidden_dim and init_scale must be non-negative");
  }
}

int dataset_feature_dim(const std::vector<Bag>& dataset) {
  if (dataset.empty()) {
    throw ConfigError("train: dataset must hold at least one bag");
  }
  int dim = -1;
  for (const Bag& bag : dataset) {
    if (bag.size() == 0) {
      throw ConfigError("train: bag " + bag.id + " holds no instances");
    }
    for (const Instance& inst : bag.instances) {
      const int d = static_cast<int>(inst.features.size());
      if (dim == -1) {
        dim = d;
      }
      if (d != dim) {
        throw ConfigError("train: inconsistent feature dimension in bag " + bag.id);
      }
    }
  }
  return dim;
}

void sgd_step(std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g,
              double lr, double momentum, double weight_decay) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = momentum * v[i] - lr * (g[i] + weight_decay * w[i]);
    w[i] += v[i];
  }
}

double median_of(std::vector<double> values) {
  if (values.empty()) {
    return kNaN;
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double format_safe_mean(const std::vector<double>& corlocs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : corlocs) {
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : kNaN;
}

}  // namespace

std::string trainlog_to_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch,lambda,learning_rate,mean_selection_loss,mean_detector_loss,bag_accuracy,"
         "train_corloc,mean_selected_subset_size,median_selected_subset_size\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
    out << buf;
  };
  for (const EpochRecord& r : log.epochs) {
    out << r.epoch << ',';
    put(r.lambda, ',');
    put(r.learning_rate, ',');
    put(r.mean_selection_loss, ',');
    put(r.mean_detector_loss, ',');
    put(r.bag_accuracy, ',');
    put(r.train_corloc, ',');
    put(r.mean_selected_subset_size, ',');
    put(r.median_selected_subset_size, '\n');
  }
  return out.str();
}

TrainResult train(const std::vector<Bag>& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  validate(config);
  const int feature_dim = dataset_feature_dim(dataset);
  const int num_classes = dataset.front().num_classes();
  for (const Bag& bag : dataset) {
    if (bag.num_classes() != num_classes) {
      throw ConfigError("train: inconsistent class count in bag " + bag.id);
    }
  }

  ModelParams params =
      config.init_scale > 0.0
          ? ModelParams::gaussian(num_classes, feature_dim, config.init_scale, config.seed,
                                  config.hidden_dim)
          : ModelParams::zeros(num_classes, feature_dim, config.hidden_dim);
  GradientBuffer velocity = GradientBuffer::zeros_like(params);
  GradientBuffer grad = GradientBuffer::zeros_like(params);

  TrainLog log;
  log.epochs.reserve(static_cast<std::size_t>(config.epochs));

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t steps_per_epoch = dataset.size();
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config.epochs);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double epoch_lam = epoch_lambda(config.schedule, epoch, config.epochs);
    const double lr =
        epoch < config.epochs / 2 ? config.lr_first_half : config.lr_second_half;

    Rng shuffle_rng(mix_seed(config.seed, kShuffleStream + static_cast<std::uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    double selection_sum = 0.0;
    double detector_sum = 0.0;
    std::vector<double> subset_sizes;

    for (std::size_t step = 0; step < order.size(); ++step) {
      const Bag& bag = dataset[order[step]];
      double lam = epoch_lam;
      if (config.lambda_per_iteration) {
        const std::size_t global = static_cast<std::size_t>(epoch) * steps_per_epoch + step;
        lam = lambda_at(config.schedule,
                        static_cast<double>(global) / static_cast<double>(total_steps - 1));
      }
      LossOptions options;
      options.selection_lambda = config.ablation.continuation_selector ? lam : 1.0;
      options.label_lambda = config.ablation.continuation_detector ? lam : 1.0;
      options.reduction = config.detector_reduction;

      grad.reset();
      const TotalLossResult result = total_loss_grad(bag, params, options, grad);
      if (!std::isfinite(result.loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", bag " + bag.id);
      }
      for (const ClassDiagnostics& diag : result.per_class) {
        selection_sum += diag.selection_loss;
        detector_sum += diag.detector_loss;
        if (diag.bag_label == 1) {
          subset_sizes.push_back(static_cast<double>(diag.selected_members.size()));
        }
      }

      sgd_step(params.hidden_w, velocity.hidden_w, grad.hidden_w, lr, config.momentum,
               config.weight_decay);
      sgd_step(params.hidden_b, velocity.hidden_b, grad.hidden_b, lr, config.momentum,
               config.weight_decay);
      sgd_step(params.selector_w, velocity.selector_w, grad.selector_w, lr, config.momentum,
               config.weight_decay);
      sgd_step(params.selector_b, velocity.selector_b, grad.selector_b, lr, config.momentum,
               config.weight_decay);
      sgd_step(params.detector_w, velocity.detector_w, grad.detector_w, lr, config.momentum,
               config.weight_decay);
      sgd_step(params.detector_b, velocity.detector_b, grad.detector_b, lr, config.momentum,
               config.weight_decay);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lambda = epoch_lam;
    record.learning_rate = lr;
    record.mean_selection_loss = selection_sum / static_cast<double>(dataset.size());
    record.mean_detector_loss = detector_sum / static_cast<double>(dataset.size());

    std::size_t correct = 0;
    for (const Bag& bag : dataset) {
      for (int c = 0; c < num_classes; ++c) {
        double top = -std::numeric_limits<double>::infinity();
        for (const Instance& inst : bag.instances) {
          top = std::max(top, selector_score(params, inst, c));
        }
        const int predicted = top > 0.0 ? 1 : -1;
        correct += predicted == bag.labels[c];
      }
    }
    record.bag_accuracy =
        static_cast<double>(correct) / static_cast<double>(dataset.size() * num_classes);
    record.train_corloc = format_safe_mean(corloc(dataset, params));

    double size_sum = 0.0;
    for (double s : subset_sizes) {
      size_sum += s;
    }
    record.mean_selected_subset_size =
        subset_sizes.empty() ? kNaN : size_sum / static_cast<double>(subset_sizes.size());
    record.median_selected_subset_size = median_of(subset_sizes);

    log.epochs.push_back(record);
    if (on_epoch) {
      on_epoch(epoch, params);
    }
  }

  return TrainResult{std::move(params), std::move(log)};
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

namespace {

// discrete structure of one evaluation: selected members, anchors, labels
bool same_structure(const TotalLossResult& a, const TotalLossResult& b) {
  if (a.per_class.size() != b.per_class.size()) {
    return false;
  }
  for (std::size_t c = 0; c < a.per_class.size(); ++c) {
    const ClassDiagnostics& da = a.per_class[c];
    const ClassDiagnostics& db = b.per_class[c];
    if (da.selected_members != db.selected_members ||
        da.has_detector_term != db.has_detector_term || da.anchor != db.anchor ||
        da.assignment != db.assignment) {
      return false;
    }
  }
  return true;
}

bool near_kink(const TotalLossResult& result, double tolerance) {
  for (const ClassDiagnostics& diag : result.per_class) {
    if (std::abs(1.0 - diag.selection_margin) < tolerance) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::string GradCheckReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "gradcheck: %zu coordinates checked, %zu failures, max rel error %.3g "
                "(skipped: %zu hinge-kink, %zu structure-flip)",
                checked, failures, max_rel_error, skipped_kink, skipped_structure);
  return buf;
}

GradCheckReport check_gradients(const std::vector<Bag>& sample, const ModelParams& params,
                                double lambda, const GradCheckConfig& config) {
  GradCheckReport report;
  const std::size_t n_params = param_count(params);
  if (n_params == 0 || sample.empty()) {
    return report;
  }
  Rng rng(mix_seed(config.seed, 0x6DC0));
  const LossOptions options{lambda, lambda, DetectorLossReduction::mean};

  for (const Bag& bag : sample) {
    GradientBuffer grad = GradientBuffer::zeros_like(params);
    const TotalLossResult center = total_loss_grad(bag, params, options, grad);
    const bool center_kink = near_kink(center, config.kink_tolerance);

    for (int pick = 0; pick < config.coords_per_bag; ++pick) {
      const std::size_t coord = rng.uniform_index(n_params);
      ModelParams probe = params;
      const double original = get_param(probe, coord);

      set_param(probe, coord, original + config.step);
      const TotalLossResult plus = total_loss(bag, probe, options);
      set_param(probe, coord, original - config.step);
      const TotalLossResult minus = total_loss(bag, probe, options);

      if (center_kink || near_kink(plus, config.kink_tolerance) ||
          near_kink(minus, config.kink_tolerance)) {
        ++report.skipped_kink;
        continue;
      }
      if (!same_structure(plus, center) || !same_structure(minus, center)) {
        ++report.skipped_structure;
        continue;
      }

      const double numeric = (plus.loss - minus.loss) / (2.0 * config.step);
      const double analytic = get_grad(grad, coord);
      ++report.checked;

      const double diff = std::abs(analytic - numeric);
      if (diff <= config.abs_floor) {
        continue;
      }
      const double rel = diff / std::max(std::abs(analytic), std::abs(numeric));
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_coordinate = coord;
      }
      if (rel >= config.rel_tolerance) {
        ++report.failures;
      }
    }
  }
  return report;
}

}  // namespace cmil
