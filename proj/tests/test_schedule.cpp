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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cmil/errors.hpp"
#include "cmil/schedule.hpp"

using namespace cmil;

namespace {

const std::vector<ScheduleKind> kAllKinds = {ScheduleKind::linear, ScheduleKind::piecewise_linear,
                                             ScheduleKind::sigmoid, ScheduleKind::exp,
                                             ScheduleKind::log};

}  // namespace

TEST_CASE("every kind is endpoint-exact") {
  for (ScheduleKind kind : kAllKinds) {
    const Schedule s = Schedule::make(kind);
    CHECK(lambda_at(s, 0.0) == 0.0);
    CHECK(lambda_at(s, 1.0) == 1.0);
  }
}

TEST_CASE("linear is the identity") {
  const Schedule s = Schedule::make(ScheduleKind::linear);
  CHECK(lambda_at(s, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(lambda_at(s, 0.123) == doctest::Approx(0.123).epsilon(1e-15));
}

TEST_CASE("piecewise-linear plateaus at the quarters") {
  const Schedule s = Schedule::make(ScheduleKind::piecewise_linear);
  CHECK(lambda_at(s, 0.1) == 0.0);
  CHECK(lambda_at(s, 0.25) == 0.0);
  CHECK(lambda_at(s, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(lambda_at(s, 0.75) == 1.0);
  CHECK(lambda_at(s, 0.9) == 1.0);
}

TEST_CASE("log evaluates its closed form") {
  const Schedule s = Schedule::make(ScheduleKind::log);  // k = 10
  const double expected = std::log(3.0) / std::log(11.0);
  CHECK(lambda_at(s, 0.2) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(lambda_at(s, 0.2) == doctest::Approx(0.4581).epsilon(1e-4));
}

TEST_CASE("exp and sigmoid evaluate their closed forms") {
  const Schedule e = Schedule::make(ScheduleKind::exp);  // k = 3
  CHECK(lambda_at(e, 0.5) ==
        doctest::Approx(std::expm1(1.5) / std::expm1(3.0)).epsilon(1e-15));

  const Schedule g = Schedule::make(ScheduleKind::sigmoid);  // k = 10
  auto logistic = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double lo = logistic(-5.0);
  const double hi = logistic(5.0);
  CHECK(lambda_at(g, 0.3) ==
        doctest::Approx((logistic(10.0 * (0.3 - 0.5)) - lo) / (hi - lo)).epsilon(1e-15));
  CHECK(lambda_at(g, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("all kinds are monotone on a dense grid") {
  for (ScheduleKind kind : kAllKinds) {
    const Schedule s = Schedule::make(kind);
    double previous = 0.0;
    for (int i = 0; i <= 10000; ++i) {
      const double value = lambda_at(s, i / 10000.0);
      CHECK(value >= previous);
      CHECK(value >= 0.0);
      CHECK(value <= 1.0);
      previous = value;
    }
  }
}

TEST_CASE("log dominates linear dominates exp on the open interval") {
  const Schedule lg = Schedule::make(ScheduleKind::log);
  const Schedule ex = Schedule::make(ScheduleKind::exp);
  for (int i = 1; i < 1000; ++i) {
    const double t = i / 1000.0;
    CHECK(lambda_at(lg, t) >= t);
    CHECK(t >= lambda_at(ex, t));
  }
}

TEST_CASE("out-of-range progress clamps") {
  const Schedule s = Schedule::make(ScheduleKind::linear);
  CHECK(lambda_at(s, -0.5) == 0.0);
  CHECK(lambda_at(s, 1.5) == 1.0);
}

TEST_CASE("epoch_lambda walks the discrete grid") {
  const Schedule s = Schedule::make(ScheduleKind::linear);
  CHECK(epoch_lambda(s, 0, 20) == 0.0);
  CHECK(epoch_lambda(s, 19, 20) == 1.0);
  CHECK(epoch_lambda(s, 10, 20) == doctest::Approx(10.0 / 19.0).epsilon(1e-15));
  for (ScheduleKind kind : kAllKinds) {
    CHECK(epoch_lambda(Schedule::make(kind), 4, 5) == 1.0);
    CHECK(epoch_lambda(Schedule::make(kind), 0, 5) == 0.0);
  }
}

TEST_CASE("epoch_lambda validates its preconditions") {
  const Schedule s = Schedule::make(ScheduleKind::linear);
  CHECK_THROWS_AS(epoch_lambda(s, 0, 1), ConfigError);
  CHECK_THROWS_AS(epoch_lambda(s, -1, 10), ConfigError);
  CHECK_THROWS_AS(epoch_lambda(s, 10, 10), ConfigError);
}

TEST_CASE("schedule parsing") {
  CHECK(Schedule::parse("log").kind == ScheduleKind::log);
  CHECK(Schedule::parse("log").k == 10.0);
  CHECK(Schedule::parse("pwlinear").kind == ScheduleKind::piecewise_linear);
  CHECK(Schedule::parse("exp", 5.0).k == 5.0);
  CHECK_THROWS_AS(Schedule::parse("cosine"), ConfigError);
  CHECK_THROWS_AS(Schedule::parse("exp", 0.0), ConfigError);
}
