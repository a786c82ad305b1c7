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
#include <span>
#include <string>
#include <vector>

#include "cmil/geometry.hpp"

namespace cmil {

/// A candidate region inside a bag: its box plus a fixed-dimension feature
/// vector. Features stand in for pooled CNN descriptors.
struct Instance {
  Box box;
  std::vector<double> features;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// One weakly labeled example. Only the per-class {+1, -1} labels are visible
/// to training; ground-truth boxes ride along for evaluation.
struct Bag {
  std::string id;
  std::vector<Instance> instances;
  std::vector<int> labels;                 // size C, values +1 / -1
  std::vector<std::vector<Box>> gt_boxes;  // size C; empty per class when unknown

  std::size_t size() const { return instances.size(); }
  int num_classes() const { return static_cast<int>(labels.size()); }

  friend bool operator==(const Bag&, const Bag&) = default;
};

/// Instance selector (C linear heads) and detector (C+1 linear heads, last
/// channel = background), optionally sharing one tanh hidden layer when
/// hidden_dim > 0. All heads read the same per-instance input.
struct ModelParams {
  int num_classes = 0;
  int feature_dim = 0;
  int hidden_dim = 0;  // 0 disables the hidden layer

  std::vector<double> hidden_w;    // hidden_dim x feature_dim, row-major
  std::vector<double> hidden_b;    // hidden_dim
  std::vector<double> selector_w;  // num_classes x head_dim, row-major
  std::vector<double> selector_b;  // num_classes
  std::vector<double> detector_w;  // (num_classes + 1) x head_dim, row-major
  std::vector<double> detector_b;  // num_classes + 1

  int head_dim() const { return hidden_dim > 0 ? hidden_dim : feature_dim; }
  int background_channel() const { return num_classes; }

  static ModelParams zeros(int num_classes, int feature_dim, int hidden_dim = 0);
  static ModelParams gaussian(int num_classes, int feature_dim, double scale,
                              std::uint64_t seed, int hidden_dim = 0);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradient accumulator, shape-congruent with ModelParams.
struct GradientBuffer {
  std::vector<double> hidden_w;
  std::vector<double> hidden_b;
  std::vector<double> selector_w;
  std::vector<double> selector_b;
  std::vector<double> detector_w;
  std::vector<double> detector_b;

  static GradientBuffer zeros_like(const ModelParams& params);
  void reset();
};

// Flat coordinate view over the blocks (hidden_w, hidden_b, selector_w,
// selector_b, detector_w, detector_b) in that order. Shared by the SGD
// update and the finite-difference harness.
std::size_t param_count(const ModelParams& params);
double get_param(const ModelParams& params, std::size_t index);
void set_param(ModelParams& params, std::size_t index, double value);
double get_grad(const GradientBuffer& grad, std::size_t index);

/// Head input for one instance: the raw features, or tanh(hidden_w x + b)
/// when the hidden layer is enabled.
std::vector<double> head_input(const ModelParams& params, const Instance& instance);

/// Object score of `instance` for one class: selector_w[class] . head + bias.
double selector_score(const ModelParams& params, const Instance& instance, int class_index);

std::vector<double> detector_logits(const ModelParams& params, const Instance& instance);

/// Softmax over the C+1 detector logits (max-shifted for stability).
/// Components are positive and sum to 1.
std::vector<double> detector_prob(const ModelParams& params, const Instance& instance);

/// Accumulates upstream_grad * d(selector_score)/d(params) into `grad`.
void selector_backward(const ModelParams& params, const Instance& instance, int class_index,
                       double upstream_grad, GradientBuffer& grad);

/// Accumulates d(prob_grad . detector_prob)/d(params) into `grad`, i.e. the
/// softmax Jacobian applied to a probability-space gradient.
void detector_backward(const ModelParams& params, const Instance& instance,
                       std::span<const double> prob_grad, GradientBuffer& grad);

/// Versioned text checkpoint. Values are written with 17 significant digits,
/// so write -> read -> write is byte-identical.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace cmil
