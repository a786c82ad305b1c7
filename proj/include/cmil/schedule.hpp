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
#include <string_view>

namespace cmil {

/// The five monotone maps from training progress t in [0,1] to the
/// continuation parameter lambda in [0,1]. All are endpoint-exact:
/// F(0) = 0 and F(1) = 1.
enum class ScheduleKind { linear, piecewise_linear, sigmoid, exp, log };

struct Schedule {
  ScheduleKind kind = ScheduleKind::linear;
  /// Shape parameter; ignored by linear and piecewise_linear. Defaults:
  /// sigmoid 10, exp 3, log 10.
  double k = 1.0;

  static Schedule make(ScheduleKind kind);
  /// Accepts {linear|pwlinear|sigmoid|exp|log}; k < 0 selects the default
  /// shape parameter for that kind.
  static Schedule parse(std::string_view name, double k = -1.0);
};

const char* schedule_name(ScheduleKind kind);
double default_shape(ScheduleKind kind);

/// F(t) for the given schedule. Arguments outside [0,1] are clamped with a
/// logged warning.
double lambda_at(const Schedule& schedule, double t);

/// lambda for a discrete epoch grid: lambda_at(epoch / (total_epochs - 1)).
/// Epoch 0 maps to 0 and the final epoch to exactly 1. Requires
/// 0 <= epoch < total_epochs and total_epochs >= 2.
double epoch_lambda(const Schedule& schedule, int epoch, int total_epochs);

}  // namespace cmil
