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

#include "cmil/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cmil/errors.hpp"
#include "cmil/io_util.hpp"
#include "cmil/rng.hpp"

namespace cmil {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kTestSplitStream = 0x7E57DA7AULL;

// thresholds the sweep/ablate --check mode enforces
constexpr int kSweepMinWins = 8;
constexpr double kSweepMinMedianGain = 0.10;  // CorLoc points, on [0,1] scale

double median_of(std::vector<double> values) {
  if (values.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// interquartile range with linear interpolation between order statistics
double iqr_of(std::vector<double> values) {
  if (values.size() < 2) {
    return 0.0;
  }
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  return quantile(0.75) - quantile(0.25);
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// RunConfig <-> JSON
// ---------------------------------------------------------------------------

template <typename T>
void read_field(const json& section, const std::string& section_name, const char* key, T& out) {
  if (!section.contains(key)) {
    return;
  }
  try {
    section.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError("config field " + section_name + "." + key + ": " + e.what());
  }
}

void reject_unknown(const json& section, const std::string& section_name,
                    std::initializer_list<const char*> known) {
  for (const auto& item : section.items()) {
    if (std::none_of(known.begin(), known.end(),
                     [&](const char* k) { return item.key() == k; })) {
      throw ConfigError("unknown config field " + section_name + "." + item.key());
    }
  }
}

RunConfig run_config_from_json(const json& root) {
  if (!root.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }
  reject_unknown(root, "config", {"data", "train", "eval", "run"});
  RunConfig cfg;

  if (root.contains("data")) {
    const json& d = root.at("data");
    reject_unknown(d, "data",
                   {"num_bags", "test_bags", "proposals_per_bag", "num_classes", "feature_dim",
                    "part_strength", "extent_strength", "class_strength", "noise_sigma",
                    "positive_fraction", "min_proposal_side", "extent_fraction", "part_fraction",
                    "partial_fraction", "distractor_fraction", "distractor_strength",
                    "part_area_fraction", "extent_jitter", "part_jitter", "partial_jitter",
                    "partial_t_min", "partial_t_max", "background_side_min",
                    "background_side_max", "background_max_gt_iou", "train_dataset",
                    "test_dataset", "format"});
    read_field(d, "data", "num_bags", cfg.synth.num_bags);
    read_field(d, "data", "test_bags", cfg.test_bags);
    read_field(d, "data", "proposals_per_bag", cfg.synth.proposals_per_bag);
    read_field(d, "data", "num_classes", cfg.synth.num_classes);
    read_field(d, "data", "feature_dim", cfg.synth.feature_dim);
    read_field(d, "data", "part_strength", cfg.synth.part_strength);
    read_field(d, "data", "extent_strength", cfg.synth.extent_strength);
    read_field(d, "data", "class_strength", cfg.synth.class_strength);
    read_field(d, "data", "noise_sigma", cfg.synth.noise_sigma);
    read_field(d, "data", "positive_fraction", cfg.synth.positive_fraction);
    read_field(d, "data", "min_proposal_side", cfg.synth.min_proposal_side);
    read_field(d, "data", "extent_fraction", cfg.synth.extent_fraction);
    read_field(d, "data", "part_fraction", cfg.synth.part_fraction);
    read_field(d, "data", "partial_fraction", cfg.synth.partial_fraction);
    read_field(d, "data", "distractor_fraction", cfg.synth.distractor_fraction);
    read_field(d, "data", "distractor_strength", cfg.synth.distractor_strength);
    read_field(d, "data", "part_area_fraction", cfg.synth.part_area_fraction);
    read_field(d, "data", "extent_jitter", cfg.synth.extent_jitter);
    read_field(d, "data", "part_jitter", cfg.synth.part_jitter);
    read_field(d, "data", "partial_jitter", cfg.synth.partial_jitter);
    read_field(d, "data", "partial_t_min", cfg.synth.partial_t_min);
    read_field(d, "data", "partial_t_max", cfg.synth.partial_t_max);
    read_field(d, "data", "background_side_min", cfg.synth.background_side_min);
    read_field(d, "data", "background_side_max", cfg.synth.background_side_max);
    read_field(d, "data", "background_max_gt_iou", cfg.synth.background_max_gt_iou);
    read_field(d, "data", "train_dataset", cfg.train_dataset);
    read_field(d, "data", "test_dataset", cfg.test_dataset);
    read_field(d, "data", "format", cfg.dataset_format);
  }

  if (root.contains("train")) {
    const json& t = root.at("train");
    reject_unknown(t, "train",
                   {"epochs", "lr_first_half", "lr_second_half", "momentum", "weight_decay",
                    "seed", "schedule", "schedule_k", "continuation_selector",
                    "continuation_detector", "detector_loss_reduction", "lambda_per_iteration",
                    "hidden_dim", "init_scale", "checkpoint_every"});
    read_field(t, "train", "epochs", cfg.epochs);
    read_field(t, "train", "lr_first_half", cfg.lr_first_half);
    read_field(t, "train", "lr_second_half", cfg.lr_second_half);
    read_field(t, "train", "momentum", cfg.momentum);
    read_field(t, "train", "weight_decay", cfg.weight_decay);
    read_field(t, "train", "seed", cfg.seed);
    read_field(t, "train", "schedule", cfg.schedule);
    read_field(t, "train", "schedule_k", cfg.schedule_k);
    read_field(t, "train", "continuation_selector", cfg.continuation_selector);
    read_field(t, "train", "continuation_detector", cfg.continuation_detector);
    read_field(t, "train", "detector_loss_reduction", cfg.detector_loss_reduction);
    read_field(t, "train", "lambda_per_iteration", cfg.lambda_per_iteration);
    read_field(t, "train", "hidden_dim", cfg.hidden_dim);
    read_field(t, "train", "init_scale", cfg.init_scale);
    read_field(t, "train", "checkpoint_every", cfg.checkpoint_every);
  }

  if (root.contains("eval")) {
    const json& e = root.at("eval");
    reject_unknown(e, "eval", {"nms_threshold", "iou_threshold", "ap_mode"});
    read_field(e, "eval", "nms_threshold", cfg.nms_threshold);
    read_field(e, "eval", "iou_threshold", cfg.iou_threshold);
    read_field(e, "eval", "ap_mode", cfg.ap_mode);
  }

  if (root.contains("run")) {
    const json& r = root.at("run");
    reject_unknown(r, "run",
                   {"out_dir", "seeds", "check", "checkpoint", "export_detections"});
    read_field(r, "run", "out_dir", cfg.out_dir);
    read_field(r, "run", "seeds", cfg.seeds);
    read_field(r, "run", "check", cfg.check_thresholds);
    read_field(r, "run", "checkpoint", cfg.checkpoint);
    read_field(r, "run", "export_detections", cfg.export_detections);
  }
  return cfg;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  json root;
  try {
    root = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return run_config_from_json(root);
}

std::string run_config_to_json(const RunConfig& c) {
  json root;
  root["data"] = {{"num_bags", c.synth.num_bags},
                  {"test_bags", c.test_bags},
                  {"proposals_per_bag", c.synth.proposals_per_bag},
                  {"num_classes", c.synth.num_classes},
                  {"feature_dim", c.synth.feature_dim},
                  {"part_strength", c.synth.part_strength},
                  {"extent_strength", c.synth.extent_strength},
                  {"class_strength", c.synth.class_strength},
                  {"noise_sigma", c.synth.noise_sigma},
                  {"positive_fraction", c.synth.positive_fraction},
                  {"min_proposal_side", c.synth.min_proposal_side},
                  {"extent_fraction", c.synth.extent_fraction},
                  {"part_fraction", c.synth.part_fraction},
                  {"partial_fraction", c.synth.partial_fraction},
                  {"distractor_fraction", c.synth.distractor_fraction},
                  {"distractor_strength", c.synth.distractor_strength},
                  {"part_area_fraction", c.synth.part_area_fraction},
                  {"extent_jitter", c.synth.extent_jitter},
                  {"part_jitter", c.synth.part_jitter},
                  {"partial_jitter", c.synth.partial_jitter},
                  {"partial_t_min", c.synth.partial_t_min},
                  {"partial_t_max", c.synth.partial_t_max},
                  {"background_side_min", c.synth.background_side_min},
                  {"background_side_max", c.synth.background_side_max},
                  {"background_max_gt_iou", c.synth.background_max_gt_iou},
                  {"train_dataset", c.train_dataset},
                  {"test_dataset", c.test_dataset},
                  {"format", c.dataset_format}};
  root["train"] = {{"epochs", c.epochs},
                   {"lr_first_half", c.lr_first_half},
                   {"lr_second_half", c.lr_second_half},
                   {"momentum", c.momentum},
                   {"weight_decay", c.weight_decay},
                   {"seed", c.seed},
                   {"schedule", c.schedule},
                   {"schedule_k", c.schedule_k},
                   {"continuation_selector", c.continuation_selector},
                   {"continuation_detector", c.continuation_detector},
                   {"detector_loss_reduction", c.detector_loss_reduction},
                   {"lambda_per_iteration", c.lambda_per_iteration},
                   {"hidden_dim", c.hidden_dim},
                   {"init_scale", c.init_scale},
                   {"checkpoint_every", c.checkpoint_every}};
  root["eval"] = {{"nms_threshold", c.nms_threshold},
                  {"iou_threshold", c.iou_threshold},
                  {"ap_mode", c.ap_mode}};
  root["run"] = {{"out_dir", c.out_dir},
                 {"seeds", c.seeds},
                 {"check", c.check_thresholds},
                 {"checkpoint", c.checkpoint},
                 {"export_detections", c.export_detections}};
  return root.dump(2) + "\n";
}

TrainConfig RunConfig::make_train_config(std::uint64_t run_seed) const {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.lr_first_half = lr_first_half;
  tc.lr_second_half = lr_second_half;
  tc.momentum = momentum;
  tc.weight_decay = weight_decay;
  tc.seed = run_seed;
  tc.schedule = Schedule::parse(schedule, schedule_k);
  tc.ablation = AblationFlags{continuation_selector, continuation_detector};
  if (detector_loss_reduction == "mean") {
    tc.detector_reduction = DetectorLossReduction::mean;
  } else if (detector_loss_reduction == "sum") {
    tc.detector_reduction = DetectorLossReduction::sum;
  } else {
    throw ConfigError("train.detector_loss_reduction must be 'mean' or 'sum'");
  }
  tc.lambda_per_iteration = lambda_per_iteration;
  tc.hidden_dim = hidden_dim;
  tc.init_scale = init_scale;
  return tc;
}

EvalConfig RunConfig::make_eval_config() const {
  EvalConfig ec;
  ec.nms_threshold = nms_threshold;
  ec.iou_threshold = iou_threshold;
  if (ap_mode == "all-points") {
    ec.ap_mode = ApMode::all_points;
  } else if (ap_mode == "11-point") {
    ec.ap_mode = ApMode::eleven_point;
  } else {
    throw ConfigError("eval.ap_mode must be 'all-points' or '11-point'");
  }
  return ec;
}

namespace {

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
  }
}

void echo_config(const RunConfig& cfg) {
  atomic_write_text((fs::path(cfg.out_dir) / "config.json").string(), run_config_to_json(cfg));
}

std::string dataset_extension(const RunConfig& cfg) {
  if (cfg.dataset_format == "jsonl") {
    return ".jsonl";
  }
  if (cfg.dataset_format == "bin") {
    return ".bin";
  }
  throw ConfigError("data.format must be 'jsonl' or 'bin'");
}

struct BenchmarkData {
  std::vector<Bag> train;
  std::vector<Bag> test;
};

// Train split uses the run seed directly; the test split derives its seed so
// the two never share bags.
BenchmarkData make_benchmark(const RunConfig& cfg, std::uint64_t seed, bool need_test) {
  BenchmarkData data;
  if (!cfg.train_dataset.empty()) {
    data.train = read_dataset(cfg.train_dataset);
  } else {
    SynthConfig synth = cfg.synth;
    synth.seed = seed;
    data.train = generate(synth);
  }
  if (need_test) {
    if (!cfg.test_dataset.empty()) {
      data.test = read_dataset(cfg.test_dataset);
    } else {
      SynthConfig synth = cfg.synth;
      synth.num_bags = cfg.test_bags;
      synth.seed = mix_seed(seed, kTestSplitStream);
      data.test = generate(synth);
    }
  }
  return data;
}

json metrics_to_json(const MetricReport& report) {
  json per_class = json::array();
  for (const ClassMetric& m : report.per_class) {
    per_class.push_back({{"class", m.class_index},
                         {"ap", m.ap},
                         {"corloc", m.corloc},
                         {"num_gt", m.num_gt},
                         {"num_positive_bags", m.num_positive_bags}});
  }
  return json{{"map", report.map},
              {"mean_corloc", report.mean_corloc},
              {"per_class", per_class},
              {"bags_evaluated", report.bags_evaluated},
              {"nms_threshold", report.nms_threshold},
              {"iou_threshold", report.iou_threshold},
              {"ap_mode", report.ap_mode == ApMode::all_points ? "all-points" : "11-point"}};
}

void write_metrics(const std::string& dir, const MetricReport& report) {
  atomic_write_text((fs::path(dir) / "metrics.json").string(), metrics_to_json(report).dump(2) + "\n");
  atomic_write_text((fs::path(dir) / "metrics.txt").string(), format_metric_table(report));
}

void write_trainlog_and_checkpoint(const std::string& dir, const TrainResult& result) {
  atomic_write_text((fs::path(dir) / "trainlog.csv").string(), trainlog_to_csv(result.log));
  const std::string ckpt = (fs::path(dir) / "model.ckpt").string();
  save_checkpoint(ckpt, result.params);
}

struct AggregateRow {
  std::string name;
  std::vector<double> maps;
  std::vector<double> corlocs;
};

std::string raw_rows_csv(const std::vector<std::tuple<std::string, std::uint64_t, double, double>>& rows,
                         const char* key_column) {
  std::ostringstream out;
  out << key_column << ",seed,map,corloc\n";
  for (const auto& [name, seed, map, cl] : rows) {
    out << name << ',' << seed << ',' << fmt(map) << ',' << fmt(cl) << "\n";
  }
  return out.str();
}

std::string summary_csv(const std::vector<AggregateRow>& aggregates, const char* key_column) {
  std::ostringstream out;
  out << key_column << ",map_median,map_iqr,corloc_median,corloc_iqr\n";
  for (const AggregateRow& row : aggregates) {
    out << row.name << ',' << fmt(median_of(row.maps)) << ',' << fmt(iqr_of(row.maps)) << ','
        << fmt(median_of(row.corlocs)) << ',' << fmt(iqr_of(row.corlocs)) << "\n";
  }
  return out.str();
}

}  // namespace

int cmd_generate(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  echo_config(cfg);
  const std::string ext = dataset_extension(cfg);

  SynthConfig train_cfg = cfg.synth;
  train_cfg.seed = cfg.seed;
  const std::vector<Bag> train_bags = generate(train_cfg);
  const std::string train_path = (fs::path(cfg.out_dir) / ("train" + ext)).string();
  write_dataset(train_path, train_bags);

  SynthConfig test_cfg = cfg.synth;
  test_cfg.num_bags = cfg.test_bags;
  test_cfg.seed = mix_seed(cfg.seed, kTestSplitStream);
  const std::vector<Bag> test_bags = generate(test_cfg);
  const std::string test_path = (fs::path(cfg.out_dir) / ("test" + ext)).string();
  write_dataset(test_path, test_bags);

  std::cout << "wrote " << train_bags.size() << " train bags to " << train_path << "\n"
            << "wrote " << test_bags.size() << " test bags to " << test_path << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  echo_config(cfg);
  const BenchmarkData data = make_benchmark(cfg, cfg.seed, /*need_test=*/false);
  const TrainConfig tc = cfg.make_train_config(cfg.seed);

  EpochCallback callback;
  if (cfg.checkpoint_every > 0) {
    callback = [&cfg](int epoch, const ModelParams& params) {
      if ((epoch + 1) % cfg.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_epoch%03d.ckpt", epoch);
        save_checkpoint((fs::path(cfg.out_dir) / name).string(), params);
      }
    };
  }

  const TrainResult result = train(data.train, tc, callback);
  write_trainlog_and_checkpoint(cfg.out_dir, result);

  const EpochRecord& last = result.log.epochs.back();
  std::cout << "trained " << tc.epochs << " epochs on " << data.train.size() << " bags; "
            << "final selection loss " << fmt4(last.mean_selection_loss) << ", accuracy "
            << fmt4(last.bag_accuracy) << ", train CorLoc " << fmt4(last.train_corloc) << "\n"
            << "checkpoint: " << (fs::path(cfg.out_dir) / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) {
    throw ConfigError("eval requires --checkpoint");
  }
  if (cfg.train_dataset.empty()) {
    throw ConfigError("eval requires --dataset");
  }
  ensure_out_dir(cfg);
  echo_config(cfg);
  const ModelParams params = load_checkpoint(cfg.checkpoint);
  const std::vector<Bag> bags = read_dataset(cfg.train_dataset);
  const MetricReport report = evaluate(bags, params, cfg.make_eval_config());
  write_metrics(cfg.out_dir, report);

  if (!cfg.export_detections.empty()) {
    atomic_write_file(cfg.export_detections, [&](std::ostream& out) {
      for (const Bag& bag : bags) {
        for (const Detection& det : detect(bag, params, cfg.nms_threshold)) {
          out << json{{"bag", det.bag_id},
                      {"class", det.class_index},
                      {"box", {det.box.x1, det.box.y1, det.box.x2, det.box.y2}},
                      {"confidence", det.confidence}}
                     .dump()
              << "\n";
        }
      }
    });
  }

  std::cout << format_metric_table(report);
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  echo_config(cfg);

  const std::vector<std::string> schedules = {"linear", "pwlinear", "sigmoid", "exp", "log"};
  std::vector<std::tuple<std::string, std::uint64_t, double, double>> rows;
  std::map<std::string, AggregateRow> aggregates;
  std::map<std::pair<std::string, std::uint64_t>, double> corloc_by_run;

  for (std::uint64_t seed : cfg.seeds) {
    const BenchmarkData data = make_benchmark(cfg, seed, /*need_test=*/true);

    auto run_one = [&](const std::string& name, const TrainConfig& tc) {
      const TrainResult result = train(data.train, tc);
      const std::string run_dir =
          (fs::path(cfg.out_dir) / "runs" / name / ("seed" + std::to_string(seed))).string();
      std::error_code ec;
      fs::create_directories(run_dir, ec);
      write_trainlog_and_checkpoint(run_dir, result);
      const MetricReport report = evaluate(data.test, result.params, cfg.make_eval_config());
      rows.emplace_back(name, seed, report.map, report.mean_corloc);
      AggregateRow& agg = aggregates.try_emplace(name, AggregateRow{name, {}, {}}).first->second;
      agg.maps.push_back(report.map);
      agg.corlocs.push_back(report.mean_corloc);
      corloc_by_run[{name, seed}] = report.mean_corloc;
      std::cout << "sweep " << name << " seed " << seed << ": mAP " << fmt4(report.map)
                << ", CorLoc " << fmt4(report.mean_corloc) << "\n";
    };

    TrainConfig baseline = cfg.make_train_config(seed);
    baseline.ablation = AblationFlags{false, false};
    run_one("mil-baseline", baseline);

    for (const std::string& name : schedules) {
      TrainConfig tc = cfg.make_train_config(seed);
      tc.schedule = Schedule::parse(name, cfg.schedule_k);
      run_one(name, tc);
    }
  }

  std::vector<AggregateRow> ordered;
  ordered.push_back(aggregates.at("mil-baseline"));
  for (const std::string& name : schedules) {
    ordered.push_back(aggregates.at(name));
  }
  atomic_write_text((fs::path(cfg.out_dir) / "sweep_raw.csv").string(),
                    raw_rows_csv(rows, "schedule"));
  atomic_write_text((fs::path(cfg.out_dir) / "sweep_summary.csv").string(),
                    summary_csv(ordered, "schedule"));
  std::cout << summary_csv(ordered, "schedule");

  if (cfg.check_thresholds) {
    int wins = 0;
    std::vector<double> gains;
    for (std::uint64_t seed : cfg.seeds) {
      const double gain = corloc_by_run[{"log", seed}] - corloc_by_run[{"mil-baseline", seed}];
      gains.push_back(gain);
      wins += gain > 0.0;
    }
    const double median_gain = median_of(gains);
    const bool ok = wins >= kSweepMinWins && median_gain >= kSweepMinMedianGain;
    std::cout << "check: log schedule beats baseline CorLoc in " << wins << "/" << cfg.seeds.size()
              << " seeds, median gain " << fmt4(median_gain) << (ok ? " [ok]\n" : " [FAIL]\n");
    if (!ok) {
      return 3;
    }
  }
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  echo_config(cfg);

  const std::vector<std::pair<std::string, AblationFlags>> grid = {
      {"both", {true, true}},
      {"selector-only", {true, false}},
      {"detector-only", {false, true}},
      {"baseline", {false, false}},
  };

  std::vector<std::tuple<std::string, std::uint64_t, double, double>> rows;
  std::map<std::string, AggregateRow> aggregates;

  for (std::uint64_t seed : cfg.seeds) {
    const BenchmarkData data = make_benchmark(cfg, seed, /*need_test=*/true);
    for (const auto& [name, flags] : grid) {
      TrainConfig tc = cfg.make_train_config(seed);
      tc.ablation = flags;
      const TrainResult result = train(data.train, tc);
      const std::string run_dir =
          (fs::path(cfg.out_dir) / "runs" / name / ("seed" + std::to_string(seed))).string();
      std::error_code ec;
      fs::create_directories(run_dir, ec);
      write_trainlog_and_checkpoint(run_dir, result);
      const MetricReport report = evaluate(data.test, result.params, cfg.make_eval_config());
      rows.emplace_back(name, seed, report.map, report.mean_corloc);
      AggregateRow& agg = aggregates.try_emplace(name, AggregateRow{name, {}, {}}).first->second;
      agg.maps.push_back(report.map);
      agg.corlocs.push_back(report.mean_corloc);
      std::cout << "ablate " << name << " seed " << seed << ": mAP " << fmt4(report.map)
                << ", CorLoc " << fmt4(report.mean_corloc) << "\n";
    }
  }

  std::vector<AggregateRow> ordered;
  for (const auto& [name, flags] : grid) {
    ordered.push_back(aggregates.at(name));
  }
  atomic_write_text((fs::path(cfg.out_dir) / "ablation_raw.csv").string(),
                    raw_rows_csv(rows, "variant"));
  atomic_write_text((fs::path(cfg.out_dir) / "ablation_summary.csv").string(),
                    summary_csv(ordered, "variant"));
  std::cout << summary_csv(ordered, "variant");

  if (cfg.check_thresholds) {
    const double both = median_of(aggregates.at("both").maps);
    const double sel = median_of(aggregates.at("selector-only").maps);
    const double det = median_of(aggregates.at("detector-only").maps);
    const double base = median_of(aggregates.at("baseline").maps);
    const bool ok = both >= sel && sel >= base && both >= det && det >= base;
    std::cout << "check: median mAP both " << fmt4(both) << " >= selector-only " << fmt4(sel)
              << " >= baseline " << fmt4(base) << " and both >= detector-only " << fmt4(det)
              << " >= baseline" << (ok ? " [ok]\n" : " [FAIL]\n");
    if (!ok) {
      return 3;
    }
  }
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, int sample_bags, double lambda) {
  SynthConfig synth = cfg.synth;
  synth.num_bags = std::max(1, sample_bags);
  synth.seed = cfg.seed;
  const std::vector<Bag> sample = generate(synth);

  // random nonzero parameters make every loss branch active
  const ModelParams params = ModelParams::gaussian(
      synth.num_classes, synth.feature_dim, 0.05, mix_seed(cfg.seed, 0x9C0DE), cfg.hidden_dim);

  GradCheckConfig gc;
  gc.seed = cfg.seed;
  const GradCheckReport report = check_gradients(sample, params, lambda, gc);
  std::cout << report.summary() << "\n";
  return report.passed() ? 0 : 3;
}

}  // namespace cmil
