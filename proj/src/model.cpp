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

#include "cmil/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cmil/errors.hpp"
#include "cmil/rng.hpp"

namespace cmil {

namespace {

void check_dims(const ModelParams& params, const Instance& instance, const char* where) {
  if (static_cast<int>(instance.features.size()) != params.feature_dim) {
    throw ConfigError(std::string(where) + ": feature dimension " +
                      std::to_string(instance.features.size()) + " does not match model (" +
                      std::to_string(params.feature_dim) + ")");
  }
}

double dot_row(const std::vector<double>& matrix, int row, std::span<const double> x) {
  const std::size_t n = x.size();
  const double* w = matrix.data() + static_cast<std::size_t>(row) * n;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += w[i] * x[i];
  }
  return acc;
}

}  // namespace

ModelParams ModelParams::zeros(int num_classes, int feature_dim, int hidden_dim) {
  if (num_classes < 1 || feature_dim < 1 || hidden_dim < 0) {
    throw ConfigError("ModelParams: num_classes and feature_dim must be positive");
  }
  ModelParams p;
  p.num_classes = num_classes;
  p.feature_dim = feature_dim;
  p.hidden_dim = hidden_dim;
  const int head = p.head_dim();
  p.hidden_w.assign(static_cast<std::size_t>(hidden_dim) * feature_dim, 0.0);
  p.hidden_b.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  p.selector_w.assign(static_cast<std::size_t>(num_classes) * head, 0.0);
  p.selector_b.assign(static_cast<std::size_t>(num_classes), 0.0);
  p.detector_w.assign(static_cast<std::size_t>(num_classes + 1) * head, 0.0);
  p.detector_b.assign(static_cast<std::size_t>(num_classes + 1), 0.0);
  return p;
}

ModelParams ModelParams::gaussian(int num_classes, int feature_dim, double scale,
                                  std::uint64_t seed, int hidden_dim) {
  ModelParams p = zeros(num_classes, feature_dim, hidden_dim);
  Rng rng(mix_seed(seed, 0x1217));
  for (std::vector<double>* block : {&p.hidden_w, &p.hidden_b, &p.selector_w, &p.selector_b,
                                     &p.detector_w, &p.detector_b}) {
    for (double& v : *block) {
      v = rng.normal(0.0, scale);
    }
  }
  return p;
}

GradientBuffer GradientBuffer::zeros_like(const ModelParams& params) {
  GradientBuffer g;
  g.hidden_w.assign(params.hidden_w.size(), 0.0);
  g.hidden_b.assign(params.hidden_b.size(), 0.0);
  g.selector_w.assign(params.selector_w.size(), 0.0);
  g.selector_b.assign(params.selector_b.size(), 0.0);
  g.detector_w.assign(params.detector_w.size(), 0.0);
  g.detector_b.assign(params.detector_b.size(), 0.0);
  return g;
}

void GradientBuffer::reset() {
  for (std::vector<double>* block :
       {&hidden_w, &hidden_b, &selector_w, &selector_b, &detector_w, &detector_b}) {
    std::fill(block->begin(), block->end(), 0.0);
  }
}

std::size_t param_count(const ModelParams& p) {
  return p.hidden_w.size() + p.hidden_b.size() + p.selector_w.size() + p.selector_b.size() +
         p.detector_w.size() + p.detector_b.size();
}

namespace {

template <typename Params>
auto locate(Params& p, std::size_t index) {
  auto blocks = {&p.hidden_w, &p.hidden_b, &p.selector_w, &p.selector_b, &p.detector_w,
                 &p.detector_b};
  using Pointer = decltype((*blocks.begin())->data());
  for (auto* block : blocks) {
    if (index < block->size()) {
      return block->data() + index;
    }
    index -= block->size();
  }
  return Pointer{nullptr};
}

}  // namespace

double get_param(const ModelParams& params, std::size_t index) {
  const double* p = locate(params, index);
  if (p == nullptr) {
    throw ConfigError("get_param: index out of range");
  }
  return *p;
}

void set_param(ModelParams& params, std::size_t index, double value) {
  double* p = locate(params, index);
  if (p == nullptr) {
    throw ConfigError("set_param: index out of range");
  }
  *p = value;
}

double get_grad(const GradientBuffer& grad, std::size_t index) {
  const double* p = locate(grad, index);
  if (p == nullptr) {
    throw ConfigError("get_grad: index out of range");
  }
  return *p;
}

std::vector<double> head_input(const ModelParams& params, const Instance& instance) {
  check_dims(params, instance, "head_input");
  if (params.hidden_dim == 0) {
    return instance.features;
  }
  std::vector<double> h(static_cast<std::size_t>(params.hidden_dim));
  for (int i = 0; i < params.hidden_dim; ++i) {
    h[i] = std::tanh(dot_row(params.hidden_w, i, instance.features) + params.hidden_b[i]);
  }
  return h;
}

double selector_score(const ModelParams& params, const Instance& instance, int class_index) {
  if (class_index < 0 || class_index >= params.num_classes) {
    throw ConfigError("selector_score: class index out of range");
  }
  const std::vector<double> h = head_input(params, instance);
  return dot_row(params.selector_w, class_index, h) + params.selector_b[class_index];
}

std::vector<double> detector_logits(const ModelParams& params, const Instance& instance) {
  const std::vector<double> h = head_input(params, instance);
  std::vector<double> logits(static_cast<std::size_t>(params.num_classes) + 1);
  for (int z = 0; z <= params.num_classes; ++z) {
    logits[z] = dot_row(params.detector_w, z, h) + params.detector_b[z];
  }
  return logits;
}

std::vector<double> detector_prob(const ModelParams& params, const Instance& instance) {
  std::vector<double> p = detector_logits(params, instance);
  const double top = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : p) {
    v /= sum;
  }
  return p;
}

namespace {

// Pushes a gradient w.r.t. the head input back through the hidden layer
// (no-op when the model is linear, where head == features).
void head_backward(const ModelParams& params, const Instance& instance,
                   std::span<const double> head, std::span<const double> d_head,
                   GradientBuffer& grad) {
  if (params.hidden_dim == 0) {
    return;
  }
  for (int i = 0; i < params.hidden_dim; ++i) {
    const double d_pre = d_head[i] * (1.0 - head[i] * head[i]);  // tanh'
    grad.hidden_b[i] += d_pre;
    double* row = grad.hidden_w.data() + static_cast<std::size_t>(i) * params.feature_dim;
    for (int j = 0; j < params.feature_dim; ++j) {
      row[j] += d_pre * instance.features[j];
    }
  }
}

}  // namespace

void selector_backward(const ModelParams& params, const Instance& instance, int class_index,
                       double upstream_grad, GradientBuffer& grad) {
  if (class_index < 0 || class_index >= params.num_classes) {
    throw ConfigError("selector_backward: class index out of range");
  }
  if (upstream_grad == 0.0) {
    return;
  }
  const std::vector<double> h = head_input(params, instance);
  const int head = params.head_dim();
  double* wrow = grad.selector_w.data() + static_cast<std::size_t>(class_index) * head;
  for (int i = 0; i < head; ++i) {
    wrow[i] += upstream_grad * h[i];
  }
  grad.selector_b[class_index] += upstream_grad;

  if (params.hidden_dim > 0) {
    std::vector<double> d_head(static_cast<std::size_t>(head));
    const double* w = params.selector_w.data() + static_cast<std::size_t>(class_index) * head;
    for (int i = 0; i < head; ++i) {
      d_head[i] = upstream_grad * w[i];
    }
    head_backward(params, instance, h, d_head, grad);
  }
}

void detector_backward(const ModelParams& params, const Instance& instance,
                       std::span<const double> prob_grad, GradientBuffer& grad) {
  const int channels = params.num_classes + 1;
  if (static_cast<int>(prob_grad.size()) != channels) {
    throw ConfigError("detector_backward: prob_grad size must be num_classes + 1");
  }
  const std::vector<double> p = detector_prob(params, instance);
  double gp = 0.0;
  for (int z = 0; z < channels; ++z) {
    gp += prob_grad[z] * p[z];
  }
  // d/d logit_z of (g . softmax) = p_z * (g_z - g.p)
  std::vector<double> d_logits(static_cast<std::size_t>(channels));
  bool all_zero = true;
  for (int z = 0; z < channels; ++z) {
    d_logits[z] = p[z] * (prob_grad[z] - gp);
    all_zero = all_zero && d_logits[z] == 0.0;
  }
  if (all_zero) {
    return;
  }

  const std::vector<double> h = head_input(params, instance);
  const int head = params.head_dim();
  for (int z = 0; z < channels; ++z) {
    double* wrow = grad.detector_w.data() + static_cast<std::size_t>(z) * head;
    for (int i = 0; i < head; ++i) {
      wrow[i] += d_logits[z] * h[i];
    }
    grad.detector_b[z] += d_logits[z];
  }

  if (params.hidden_dim > 0) {
    std::vector<double> d_head(static_cast<std::size_t>(head), 0.0);
    for (int z = 0; z < channels; ++z) {
      const double* w = params.detector_w.data() + static_cast<std::size_t>(z) * head;
      for (int i = 0; i < head; ++i) {
        d_head[i] += d_logits[z] * w[i];
      }
    }
    head_backward(params, instance, h, d_head, grad);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "cmil-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_block(std::ostream& out, const char* name, const std::vector<double>& block,
                 std::size_t row_len) {
  out << name << " " << block.size() << "\n";
  for (std::size_t i = 0; i < block.size(); ++i) {
    out << format_double(block[i]);
    out << (((i + 1) % row_len == 0 || i + 1 == block.size()) ? '\n' : ' ');
  }
}

std::vector<double> read_block(std::istream& in, const std::string& expected_name,
                               std::size_t expected_size, const std::string& path) {
  std::string name;
  std::size_t count = 0;
  if (!(in >> name >> count) || name != expected_name || count != expected_size) {
    throw ParseError(path + ": malformed checkpoint block '" + expected_name + "'");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> values[i])) {
      throw ParseError(path + ": truncated checkpoint block '" + expected_name + "' at value " +
                       std::to_string(i));
    }
  }
  return values;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ostringstream out;
  out << kCheckpointMagic << " " << kCheckpointVersion << "\n";
  out << "classes " << params.num_classes << "\n";
  out << "feature-dim " << params.feature_dim << "\n";
  out << "hidden-dim " << params.hidden_dim << "\n";
  const std::size_t head = static_cast<std::size_t>(params.head_dim());
  if (params.hidden_dim > 0) {
    write_block(out, "hidden-w", params.hidden_w, static_cast<std::size_t>(params.feature_dim));
    write_block(out, "hidden-b", params.hidden_b, params.hidden_b.size());
  }
  write_block(out, "selector-w", params.selector_w, head);
  write_block(out, "selector-b", params.selector_b, params.selector_b.size());
  write_block(out, "detector-w", params.detector_w, head);
  write_block(out, "detector-b", params.detector_b, params.detector_b.size());
  out << "end\n";

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot open checkpoint for writing: " + path);
  }
  file << out.str();
  if (!file) {
    throw IoError("failed writing checkpoint: " + path);
  }
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw IoError("cannot open checkpoint: " + path);
  }
  std::string magic;
  int version = 0;
  if (!(file >> magic >> version) || magic != kCheckpointMagic) {
    throw ParseError(path + ": not a cmil checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  auto read_int_field = [&](const char* key) {
    std::string name;
    int value = 0;
    if (!(file >> name >> value) || name != key) {
      throw ParseError(path + ": expected checkpoint field '" + key + "'");
    }
    return value;
  };
  const int classes = read_int_field("classes");
  const int feature_dim = read_int_field("feature-dim");
  const int hidden_dim = read_int_field("hidden-dim");
  ModelParams params = ModelParams::zeros(classes, feature_dim, hidden_dim);
  if (hidden_dim > 0) {
    params.hidden_w = read_block(file, "hidden-w", params.hidden_w.size(), path);
    params.hidden_b = read_block(file, "hidden-b", params.hidden_b.size(), path);
  }
  params.selector_w = read_block(file, "selector-w", params.selector_w.size(), path);
  params.selector_b = read_block(file, "selector-b", params.selector_b.size(), path);
  params.detector_w = read_block(file, "detector-w", params.detector_w.size(), path);
  params.detector_b = read_block(file, "detector-b", params.detector_b.size(), path);
  std::string tail;
  if (!(file >> tail) || tail != "end") {
    throw ParseError(path + ": missing checkpoint terminator");
  }
  return params;
}

}  // namespace cmil
