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

#include "cmil/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "cmil/errors.hpp"

namespace cmil {

const char* schedule_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::linear:
      return "linear";
    case ScheduleKind::piecewise_linear:
      return "pwlinear";
    case ScheduleKind::sigmoid:
      return "sigmoid";
    case ScheduleKind::exp:
      return "exp";
    case ScheduleKind::log:
      return "log";
  }
  return "?";
}

double default_shape(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::sigmoid:
      return 10.0;
    case ScheduleKind::exp:
      return 3.0;
    case ScheduleKind::log:
      return 10.0;
    default:
      return 1.0;
  }
}

Schedule Schedule::make(ScheduleKind kind) { return Schedule{kind, default_shape(kind)}; }

Schedule Schedule::parse(std::string_view name, double k) {
  ScheduleKind kind;
  if (name == "linear") {
    kind = ScheduleKind::linear;
  } else if (name == "pwlinear" || name == "piecewise-linear") {
    kind = ScheduleKind::piecewise_linear;
  } else if (name == "sigmoid") {
    kind = ScheduleKind::sigmoid;
  } else if (name == "exp") {
    kind = ScheduleKind::exp;
  } else if (name == "log") {
    kind = ScheduleKind::log;
  } else {
    throw ConfigError("unknown schedule '" + std::string(name) +
                      "' (expected linear|pwlinear|sigmoid|exp|log)");
  }
  if (k < 0.0) {
    k = default_shape(kind);
  }
  if (k <= 0.0) {
    throw ConfigError("schedule shape parameter must be positive");
  }
  return Schedule{kind, k};
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double lambda_at(const Schedule& schedule, double t) {
  if (t < 0.0 || t > 1.0) {
    warn("lambda_at: progress " + std::to_string(t) + " outside [0, 1]; clamping");
    t = std::clamp(t, 0.0, 1.0);
  }
  if (t == 0.0) {
    return 0.0;
  }
  if (t == 1.0) {
    return 1.0;
  }
  const double k = schedule.k;
  if (k <= 0.0 && (schedule.kind == ScheduleKind::sigmoid || schedule.kind == ScheduleKind::exp ||
                   schedule.kind == ScheduleKind::log)) {
    throw ConfigError("lambda_at: schedule shape parameter must be positive");
  }
  double value = t;
  switch (schedule.kind) {
    case ScheduleKind::linear:
      value = t;
      break;
    case ScheduleKind::piecewise_linear:
      // flat at 0 for the first quarter, affine to 1 by three quarters
      if (t <= 0.25) {
        value = 0.0;
      } else if (t >= 0.75) {
        value = 1.0;
      } else {
        value = (t - 0.25) * 2.0;
      }
      break;
    case ScheduleKind::sigmoid: {
      const double lo = logistic(-k / 2.0);
      const double hi = logistic(k / 2.0);
      value = (logistic(k * (t - 0.5)) - lo) / (hi - lo);
      break;
    }
    case ScheduleKind::exp:
      value = std::expm1(k * t) / std::expm1(k);
      break;
    case ScheduleKind::log:
      value = std::log1p(k * t) / std::log1p(k);
      break;
  }
  return std::clamp(value, 0.0, 1.0);
}

double epoch_lambda(const Schedule& schedule, int epoch, int total_epochs) {
  if (total_epochs < 2) {
    throw ConfigError("epoch_lambda: total_epochs must be at least 2");
  }
  if (epoch < 0 || epoch >= total_epochs) {
    throw ConfigError("epoch_lambda: epoch out of range");
  }
  return lambda_at(schedule, static_cast<double>(epoch) / static_cast<double>(total_epochs - 1));
}

}  // namespace cmil
