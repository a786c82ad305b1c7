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
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria 6, 7 and 9 share one benchmark phase (10 seeds x
// 4 train configurations on the default synthetic benchmark).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cmil/cmil.hpp"
#include "cmil/eval.hpp"
#include "cmil/optimizer.hpp"
#include "cmil/rng.hpp"
#include "cmil/schedule.hpp"
#include "cmil/synthdata.hpp"
#include "test_support.hpp"

using namespace cmil;

namespace {

struct CheckContext {
  std::ostringstream detail;
  bool ok = true;

  void require(bool condition, const std::string& label) {
    if (!condition) {
      ok = false;
      detail << (detail.tellp() > 0 ? "; " : "") << "violated: " << label;
    }
  }
};

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---------------------------------------------------------------------------
// Benchmark phase shared by criteria 6, 7, 9
// ---------------------------------------------------------------------------

struct VariantOutcome {
  double test_corloc = 0.0;
  double test_map = 0.0;
  std::vector<double> median_subset_sizes;  // per epoch, from the train log
};

struct BenchmarkOutcome {
  // variant name -> per-seed outcomes
  std::map<std::string, std::vector<VariantOutcome>> variants;
};

BenchmarkOutcome run_benchmark_phase() {
  const std::vector<std::pair<std::string, AblationFlags>> grid = {
      {"both", {true, true}},
      {"selector-only", {true, false}},
      {"detector-only", {false, true}},
      {"baseline", {false, false}},
  };
  BenchmarkOutcome outcome;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig data;  // the default benchmark: 200 train / 100 test, C=3, D=16
    data.seed = seed;
    const std::vector<Bag> train_bags = generate(data);
    SynthConfig test_data = data;
    test_data.num_bags = 100;
    test_data.seed = mix_seed(seed, 0x7E57DA7AULL);
    const std::vector<Bag> test_bags = generate(test_data);

    for (const auto& [name, flags] : grid) {
      TrainConfig tc;  // defaults: 20 epochs, log schedule, paper hyperparameters
      tc.seed = seed;
      tc.ablation = flags;
      const TrainResult result = train(train_bags, tc);
      const MetricReport report = evaluate(test_bags, result.params, EvalConfig{});
      VariantOutcome vo;
      vo.test_corloc = report.mean_corloc;
      vo.test_map = report.map;
      for (const EpochRecord& rec : result.log.epochs) {
        vo.median_subset_sizes.push_back(rec.median_selected_subset_size);
      }
      outcome.variants[name].push_back(vo);
    }
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void criterion_lambda1_equivalence(CheckContext& ctx) {
  Rng rng(0xC1);
  double worst_selection = 0.0;
  double worst_total = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = 1 + static_cast<int>(rng.uniform_index(3));
    const int n = 1 + static_cast<int>(rng.uniform_index(50));
    const Bag bag = testing::random_bag(rng, n, classes, 6, true);
    const ModelParams params = testing::random_params(rng, classes, 6);

    for (int c = 0; c < classes; ++c) {
      const double smoothed = selection_loss(bag, c, bag.labels[c], params, 1.0).loss;
      const double mil = mil_selection_loss(bag, c, bag.labels[c], params).loss;
      worst_selection = std::max(worst_selection, std::abs(smoothed - mil));
    }
    const double lib = total_loss(bag, params, 1.0).loss;
    const double oracle = testing::reference_mil_total_loss(bag, params);
    worst_total = std::max(worst_total, std::abs(lib - oracle));
  }
  ctx.detail << "max |selection diff| " << worst_selection << ", max |total diff| "
             << worst_total;
  ctx.require(worst_selection <= 1e-12, "selection_loss(1) == mil_selection_loss within 1e-12");
  ctx.require(worst_total <= 1e-12, "total_loss(1) == baseline objective within 1e-12");
}

void criterion_lambda0_convexity(CheckContext& ctx) {
  Rng rng(0xC2);
  double worst_gap = -1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    const Bag bag = testing::random_bag(rng, 2 + static_cast<int>(rng.uniform_index(20)), 1, 2);
    std::vector<double> s1(bag.size()), s2(bag.size()), mix(bag.size());
    const double alpha = rng.uniform();
    for (std::size_t j = 0; j < bag.size(); ++j) {
      s1[j] = rng.normal(0.0, 2.0);
      s2[j] = rng.normal(0.0, 2.0);
      mix[j] = alpha * s1[j] + (1.0 - alpha) * s2[j];
    }
    const double lhs = selection_from_scores(bag, mix, 1, 0.0).loss;
    const double rhs = alpha * selection_from_scores(bag, s1, 1, 0.0).loss +
                       (1.0 - alpha) * selection_from_scores(bag, s2, 1, 0.0).loss;
    worst_gap = std::max(worst_gap, lhs - rhs);
  }
  ctx.detail << "max convexity gap " << worst_gap;
  ctx.require(worst_gap <= 1e-9, "loss(alpha s1 + (1-alpha) s2) <= combo + 1e-9");
}

void criterion_partition_correctness(CheckContext& ctx) {
  Rng rng(0xC3);
  for (int trial = 0; trial < 1000 && ctx.ok; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(40));
    const Bag bag = testing::random_bag(rng, n, 1, 2);
    std::vector<double> scores(bag.size());
    for (double& s : scores) {
      s = rng.normal();
    }
    for (int grid = 0; grid <= 10; ++grid) {
      const double lambda = grid / 10.0;
      const SubsetPartition partition = partition_subsets(bag, scores, lambda);

      std::vector<int> seen(bag.size(), 0);
      std::size_t total = 0;
      for (const auto& subset : partition.subsets) {
        total += subset.size();
        for (std::size_t j : subset) {
          seen[j] += 1;
        }
      }
      ctx.require(total == bag.size() &&
                      std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }),
                  "exact cover");
      if (lambda == 0.0) {
        ctx.require(partition.subsets.size() == 1, "lambda 0 single subset");
      }
      if (lambda == 1.0) {
        ctx.require(partition.subsets.size() == bag.size(), "lambda 1 singleton count");
      }
      for (std::size_t k = 0; k < partition.subsets.size() && ctx.ok; ++k) {
        for (std::size_t j : partition.subsets[k]) {
          if (j != partition.seeds[k]) {
            ctx.require(iou(bag.instances[j].box, bag.instances[partition.seeds[k]].box) >= lambda,
                        "member-seed IoU >= lambda");
          }
        }
      }
      if (!ctx.ok) {
        break;
      }
    }
  }
  if (ctx.ok) {
    ctx.detail << "1000 bags x 11 lambdas clean";
  }
}

void criterion_label_monotonicity(CheckContext& ctx) {
  Rng rng(0xC4);
  for (int trial = 0; trial < 1000 && ctx.ok; ++trial) {
    const Bag bag = testing::random_bag(rng, 1 + static_cast<int>(rng.uniform_index(30)), 1, 2);
    const std::size_t anchor = rng.uniform_index(bag.size());
    std::vector<InstanceLabel> previous;
    std::size_t previous_ignored = 0;
    for (int grid = 0; grid <= 10; ++grid) {
      const LabelAssignment a = assign_labels(bag, anchor, grid / 10.0, 0);
      std::size_t ignored = 0;
      for (InstanceLabel l : a.labels) {
        ignored += l == InstanceLabel::ignore;
      }
      if (!previous.empty()) {
        for (std::size_t j = 0; j < a.labels.size(); ++j) {
          if (previous[j] == InstanceLabel::positive) {
            ctx.require(a.labels[j] == InstanceLabel::positive, "positive set non-decreasing");
          }
          if (previous[j] == InstanceLabel::negative) {
            ctx.require(a.labels[j] == InstanceLabel::negative, "negative set non-decreasing");
          }
        }
        ctx.require(ignored <= previous_ignored, "ignore set non-increasing");
      }
      previous = a.labels;
      previous_ignored = ignored;
      if (!ctx.ok) {
        break;
      }
    }
  }
  if (ctx.ok) {
    ctx.detail << "1000 (bag, anchor) pairs x 11 lambdas clean";
  }
}

void criterion_gradient_fidelity(CheckContext& ctx) {
  Rng rng(0xC5);
  GradCheckConfig gc;  // h = 1e-5, kink tolerance 1e-3, relative tolerance 1e-4
  gc.coords_per_bag = 12;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double worst = 0.0;
  for (int config = 0; config < 100; ++config) {
    const int classes = 1 + static_cast<int>(rng.uniform_index(3));
    const int hidden = config % 5 == 4 ? 5 : 0;  // every fifth draw uses the hidden layer
    const Bag bag =
        testing::random_bag(rng, 2 + static_cast<int>(rng.uniform_index(12)), classes, 4, true);
    const ModelParams params = testing::random_params(rng, classes, 4, 0.5, hidden);
    gc.seed = static_cast<std::uint64_t>(config);
    const GradCheckReport report = check_gradients({bag}, params, rng.uniform(), gc);
    checked += report.checked;
    skipped += report.skipped_kink + report.skipped_structure;
    worst = std::max(worst, report.max_rel_error);
    if (!report.passed()) {
      ctx.require(false, "relative error < 1e-4 (config " + std::to_string(config) + ")");
      break;
    }
  }
  ctx.detail << checked << " coordinates checked, " << skipped << " skipped, max rel error "
             << worst;
  ctx.require(worst < 1e-4, "max relative error < 1e-4");
}

void criterion_table1_direction(CheckContext& ctx, const BenchmarkOutcome& benchmark) {
  const auto& cmil_runs = benchmark.variants.at("both");
  const auto& baseline_runs = benchmark.variants.at("baseline");
  int wins = 0;
  std::vector<double> gains;
  for (std::size_t s = 0; s < cmil_runs.size(); ++s) {
    const double gain = cmil_runs[s].test_corloc - baseline_runs[s].test_corloc;
    gains.push_back(gain);
    wins += gain > 0.0;
  }
  const double median_gain = median_of(gains);
  ctx.detail << "log-schedule C-MIL beats MIL baseline on test CorLoc in " << wins
             << "/10 seeds, median gain " << median_gain << " (CorLoc points: "
             << median_gain * 100.0 << ")";
  ctx.require(wins >= 8, ">= 8/10 seeds improved");
  ctx.require(median_gain >= 0.10, "median improvement >= 10 CorLoc points");

  // generator precondition at the swept part/extent strength ratios: plain
  // MIL latches onto parts after 5 epochs
  for (double ratio : {1.5, 2.0, 3.0}) {
    std::vector<double> rates;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SynthConfig data;
      data.seed = seed;
      data.extent_strength = 1.0;
      data.part_strength = ratio;
      std::vector<BagGeometry> geometry;
      const std::vector<Bag> bags = generate(data, &geometry);
      TrainConfig tc;
      tc.epochs = 5;
      tc.seed = seed;
      tc.ablation = AblationFlags{false, false};
      const TrainResult result = train(bags, tc);
      int part_dominant = 0;
      int positives = 0;
      for (std::size_t i = 0; i < bags.size(); ++i) {
        if (!geometry[i].positive) {
          continue;
        }
        ++positives;
        const int cls = geometry[i].class_index;
        std::size_t top = 0;
        double top_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < bags[i].size(); ++j) {
          const double s = selector_score(result.params, bags[i].instances[j], cls);
          if (s > top_score) {
            top_score = s;
            top = j;
          }
        }
        const Box& box = bags[i].instances[top].box;
        part_dominant += iou(box, geometry[i].object) < 0.5 && iou(box, geometry[i].part) >= 0.5;
      }
      rates.push_back(static_cast<double>(part_dominant) / std::max(positives, 1));
    }
    const double median_rate = median_of(rates);
    ctx.detail << "; part-dominance at ratio " << ratio << ": " << median_rate;
    ctx.require(median_rate >= 0.6,
                "baseline latches parts at strength ratio " + std::to_string(ratio));
  }
}

void criterion_table2_direction(CheckContext& ctx, const BenchmarkOutcome& benchmark) {
  auto median_map = [&](const char* name) {
    std::vector<double> maps;
    for (const VariantOutcome& vo : benchmark.variants.at(name)) {
      maps.push_back(vo.test_map);
    }
    return median_of(maps);
  };
  const double both = median_map("both");
  const double sel = median_map("selector-only");
  const double det = median_map("detector-only");
  const double base = median_map("baseline");
  ctx.detail << "median test mAP: both " << both << ", selector-only " << sel
             << ", detector-only " << det << ", baseline " << base;
  ctx.require(both >= sel, "both >= selector-only");
  ctx.require(sel >= base, "selector-only >= baseline");
  ctx.require(both >= det, "both >= detector-only");
  ctx.require(det >= base, "detector-only >= baseline");
}

void criterion_metric_oracles(CheckContext& ctx) {
  // three AP fixtures against the brute-force PR oracle, exactly
  {
    const Box g1{0.0, 0.0, 0.3, 0.3};
    const Box g2{0.5, 0.5, 0.8, 0.8};
    const Box g3{0.1, 0.6, 0.35, 0.95};
    GroundTruthSet gts;
    gts.by_bag["a"] = {g1, g3};
    gts.by_bag["b"] = {g2};
    gts.total = 3;

    const std::vector<std::vector<Detection>> fixtures = {
        // perfect ranking
        {{"a", 0, g1, 0.9}, {"a", 0, g3, 0.8}, {"b", 0, g2, 0.7}},
        // nothing overlaps
        {{"a", 0, Box{0.6, 0.0, 0.9, 0.2}, 0.9}, {"b", 0, Box{0.0, 0.0, 0.2, 0.2}, 0.8}},
        // mixed: duplicates, weak overlaps, a late hit
        {{"a", 0, Box{0.01, 0.01, 0.31, 0.31}, 0.95},
         {"a", 0, Box{0.02, 0.0, 0.32, 0.3}, 0.9},
         {"b", 0, Box{0.7, 0.7, 0.99, 0.99}, 0.85},
         {"b", 0, Box{0.51, 0.51, 0.81, 0.81}, 0.6},
         {"a", 0, Box{0.6, 0.1, 0.9, 0.4}, 0.4}},
    };
    for (std::size_t f = 0; f < fixtures.size(); ++f) {
      const double lib = average_precision(fixtures[f], gts, 0.5, ApMode::all_points);
      const double oracle = testing::reference_average_precision(fixtures[f], gts, 0.5);
      ctx.require(lib == oracle, "AP fixture " + std::to_string(f) + " exact match");
    }
    ctx.require(average_precision(fixtures[0], gts, 0.5, ApMode::all_points) == 1.0,
                "perfect fixture AP == 1");
    ctx.require(average_precision(fixtures[1], gts, 0.5, ApMode::all_points) == 0.0,
                "disjoint fixture AP == 0");
  }

  // corloc hand count: 6 hits out of 10
  {
    const Box gt{0.1, 0.1, 0.6, 0.6};
    const Box far_box{0.7, 0.7, 0.95, 0.95};
    ModelParams ranked = ModelParams::zeros(1, 1);
    ranked.detector_w[0] = 4.0;
    std::vector<Bag> bags;
    for (int i = 0; i < 10; ++i) {
      Bag bag;
      bag.id = "b" + std::to_string(i);
      bag.labels = {1};
      bag.gt_boxes = {{gt}};
      const bool hit = i < 6;
      Instance a{gt, {hit ? 1.0 : 0.0}};
      Instance b{far_box, {hit ? 0.0 : 1.0}};
      bag.instances = {a, b};
      bags.push_back(std::move(bag));
    }
    ctx.require(corloc(bags, ranked)[0] == 0.6, "corloc hand count 6/10");
  }

  // NMS against the O(n^2) reference on 500 random cases
  {
    Rng rng(0xC8);
    bool all_match = true;
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<ScoredBox> boxes(1 + rng.uniform_index(30));
      for (ScoredBox& sb : boxes) {
        sb.box = testing::random_box(rng);
        sb.score = rng.uniform();
      }
      const double threshold = rng.uniform(0.05, 0.95);
      all_match = all_match && nms(boxes, threshold) == testing::reference_nms(boxes, threshold);
    }
    ctx.require(all_match, "nms == reference on 500 random cases");
  }
  if (ctx.ok) {
    ctx.detail << "AP fixtures exact, corloc hand count exact, 500 NMS cases exact";
  }
}

void criterion_subset_shrinkage(CheckContext& ctx, const BenchmarkOutcome& benchmark) {
  // per-epoch median subset size, median across seeds, on the log-schedule runs
  const auto& runs = benchmark.variants.at("both");
  const std::size_t epochs = runs.front().median_subset_sizes.size();
  std::vector<double> trace;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<double> sizes;
    for (const VariantOutcome& vo : runs) {
      sizes.push_back(vo.median_subset_sizes[e]);
    }
    trace.push_back(median_of(sizes));
  }
  int violations = 0;
  for (std::size_t e = 1; e < trace.size(); ++e) {
    violations += trace[e] > trace[e - 1];
  }
  ctx.detail << "trace: ";
  for (double v : trace) {
    ctx.detail << v << " ";
  }
  ctx.detail << "(" << violations << " violations)";
  ctx.require(violations <= 1, "median subset size non-increasing (<= 1 violation epoch)");
  ctx.require(trace.back() <= trace.front(), "final median <= initial median");
}

void criterion_determinism(CheckContext& ctx) {
  SynthConfig data;
  data.seed = 3;
  const std::vector<Bag> bags = generate(data);
  TrainConfig tc;
  tc.epochs = 8;
  tc.seed = 3;
  const TrainResult a = train(bags, tc);
  const TrainResult b = train(bags, tc);
  const std::string csv_a = trainlog_to_csv(a.log);
  const std::string csv_b = trainlog_to_csv(b.log);
  ctx.require(csv_a == csv_b, "bitwise-identical train logs");
  ctx.require(a.params == b.params, "bitwise-identical parameters");
  if (ctx.ok) {
    ctx.detail << "two 8-epoch runs byte-identical";
  }
}

}  // namespace

int main() {
  using Clock = std::chrono::steady_clock;
  int failures = 0;

  const auto phase_start = Clock::now();
  std::printf("running shared benchmark phase (10 seeds x 4 configurations)...\n");
  const BenchmarkOutcome benchmark = run_benchmark_phase();
  std::printf("benchmark phase done in %.1f s\n",
              std::chrono::duration<double>(Clock::now() - phase_start).count());

  struct Criterion {
    int id;
    const char* name;
    std::function<void(CheckContext&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "lambda=1 equivalence with the mil objective", criterion_lambda1_equivalence},
      {2, "lambda=0 selection loss convexity", criterion_lambda0_convexity},
      {3, "subset partition correctness", criterion_partition_correctness},
      {4, "pseudo-label monotonicity in lambda", criterion_label_monotonicity},
      {5, "analytic gradient fidelity", criterion_gradient_fidelity},
      {6, "direction check: continuation beats the baseline (schedule table)",
       [&](CheckContext& ctx) { criterion_table1_direction(ctx, benchmark); }},
      {7, "direction check: ablation ordering (module table)",
       [&](CheckContext& ctx) { criterion_table2_direction(ctx, benchmark); }},
      {8, "metric oracles: AP, corloc, nms", criterion_metric_oracles},
      {9, "selected-subset shrinkage over training",
       [&](CheckContext& ctx) { criterion_subset_shrinkage(ctx, benchmark); }},
      {10, "seeded determinism of training", criterion_determinism},
  };

  for (const Criterion& criterion : criteria) {
    CheckContext ctx;
    const auto start = Clock::now();
    criterion.run(ctx);
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    std::printf("[%s] criterion %2d: %s (%.1f s) %s\n", ctx.ok ? "PASS" : "FAIL", criterion.id,
                criterion.name, seconds, ctx.detail.str().c_str());
    failures += !ctx.ok;
  }

  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
  } else {
    std::printf("all 10 criteria passed\n");
  }
  return failures;
}
