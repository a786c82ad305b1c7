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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "cmil/commands.hpp"
#include "cmil/errors.hpp"
#include "cmil/io_util.hpp"

using namespace cmil;
namespace fs = std::filesystem;

namespace {

// scratch directory, wiped per test case
struct Scratch {
  fs::path root;
  Scratch() {
    root = fs::temp_directory_path() /
           ("cmil_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(root);
  }
  ~Scratch() { fs::remove_all(root); }
  std::string dir(const char* name) const { return (root / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

RunConfig tiny_run() {
  RunConfig cfg;
  cfg.synth.num_bags = 8;
  cfg.synth.proposals_per_bag = 8;
  cfg.test_bags = 6;
  cfg.epochs = 2;
  cfg.seeds = {0, 1};
  return cfg;
}

std::vector<std::string> csv_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      lines.push_back(line);
    }
  }
  return lines;
}

double last_column_value(const std::string& csv_path, const char* column) {
  const auto lines = csv_lines(csv_path);
  REQUIRE(lines.size() >= 2);
  std::vector<std::string> header;
  std::vector<std::string> last;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::istringstream stream(s);
    std::string cell;
    while (std::getline(stream, cell, ',')) {
      cells.push_back(cell);
    }
    return cells;
  };
  header = split(lines.front());
  last = split(lines.back());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == column) {
      return std::strtod(last[i].c_str(), nullptr);
    }
  }
  FAIL("column not found: ", column);
  return 0.0;
}

}  // namespace

TEST_CASE("run config round-trips through json") {
  RunConfig cfg = tiny_run();
  cfg.schedule = "sigmoid";
  cfg.schedule_k = 7.5;
  cfg.synth.part_strength = 3.25;
  cfg.continuation_detector = false;
  cfg.seeds = {4, 5, 6};

  const std::string text = run_config_to_json(cfg);
  const Scratch scratch;
  const std::string path = scratch.dir("config.json");
  atomic_write_text(path, text);
  const RunConfig loaded = load_run_config(path);

  CHECK(loaded.schedule == "sigmoid");
  CHECK(loaded.schedule_k == 7.5);
  CHECK(loaded.synth.part_strength == 3.25);
  CHECK(loaded.continuation_detector == false);
  CHECK(loaded.seeds == std::vector<std::uint64_t>{4, 5, 6});
  CHECK(loaded.epochs == cfg.epochs);
  CHECK(run_config_to_json(loaded) == text);
}

TEST_CASE("unknown config fields are rejected by name") {
  const Scratch scratch;
  const std::string path = scratch.dir("bad.json");
  atomic_write_text(path, R"({"train": {"epochz": 3}})");
  try {
    load_run_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("epochz") != std::string::npos);
  }
}

TEST_CASE("generate writes both splits plus the echoed config") {
  const Scratch scratch;
  RunConfig cfg = tiny_run();
  cfg.out_dir = scratch.dir("gen");
  REQUIRE(cmd_generate(cfg) == 0);
  CHECK(fs::exists(cfg.out_dir + "/config.json"));
  const auto train_bags = read_dataset(cfg.out_dir + "/train.jsonl");
  const auto test_bags = read_dataset(cfg.out_dir + "/test.jsonl");
  CHECK(train_bags.size() == 8);
  CHECK(test_bags.size() == 6);
  CHECK_FALSE(train_bags == test_bags);

  // binary format switch
  cfg.dataset_format = "bin";
  cfg.out_dir = scratch.dir("gen_bin");
  REQUIRE(cmd_generate(cfg) == 0);
  CHECK(read_dataset(cfg.out_dir + "/train.bin") == train_bags);
}

TEST_CASE("train emits a log row per epoch and a loadable checkpoint") {
  const Scratch scratch;
  RunConfig cfg = tiny_run();
  cfg.synth.num_bags = 5;
  cfg.out_dir = scratch.dir("train");
  REQUIRE(cmd_train(cfg) == 0);

  const auto lines = csv_lines(cfg.out_dir + "/trainlog.csv");
  CHECK(lines.size() == 1 + 2);  // header + one row per epoch
  const ModelParams params = load_checkpoint(cfg.out_dir + "/model.ckpt");
  CHECK(params.num_classes == cfg.synth.num_classes);
  CHECK(params.feature_dim == cfg.synth.feature_dim);
}

TEST_CASE("periodic checkpoints follow the cadence flag") {
  const Scratch scratch;
  RunConfig cfg = tiny_run();
  cfg.epochs = 4;
  cfg.checkpoint_every = 2;
  cfg.out_dir = scratch.dir("ckpts");
  REQUIRE(cmd_train(cfg) == 0);
  CHECK(fs::exists(cfg.out_dir + "/checkpoint_epoch001.ckpt"));
  CHECK(fs::exists(cfg.out_dir + "/checkpoint_epoch003.ckpt"));
  CHECK_FALSE(fs::exists(cfg.out_dir + "/checkpoint_epoch000.ckpt"));
}

TEST_CASE("eval against the training set reproduces the final log row") {
  const Scratch scratch;
  RunConfig cfg = tiny_run();
  cfg.epochs = 3;
  cfg.synth.num_bags = 12;
  cfg.out_dir = scratch.dir("gen");
  REQUIRE(cmd_generate(cfg) == 0);

  cfg.train_dataset = cfg.out_dir + "/train.jsonl";
  cfg.out_dir = scratch.dir("train");
  REQUIRE(cmd_train(cfg) == 0);

  RunConfig eval_cfg = cfg;
  eval_cfg.checkpoint = cfg.out_dir + "/model.ckpt";
  eval_cfg.out_dir = scratch.dir("eval");
  REQUIRE(cmd_eval(eval_cfg) == 0);

  const double logged_corloc = last_column_value(cfg.out_dir + "/trainlog.csv", "train_corloc");
  const auto metrics = nlohmann::json::parse(read_file(eval_cfg.out_dir + "/metrics.json"));
  CHECK(metrics.at("mean_corloc").get<double>() == doctest::Approx(logged_corloc).epsilon(1e-15));
  CHECK(fs::exists(eval_cfg.out_dir + "/metrics.txt"));
}

TEST_CASE("eval can export per-bag detections") {
  const Scratch scratch;
  RunConfig cfg = tiny_run();
  cfg.out_dir = scratch.dir("gen");
  REQUIRE(cmd_generate(cfg) == 0);
  cfg.train_dataset = cfg.out_dir + "/train.jsonl";
  cfg.out_dir = scratch.dir("train");
  REQUIRE(cmd_train(cfg) == 0);

  RunConfig eval_cfg = cfg;
  eval_cfg.checkpoint = cfg.out_dir + "/model.ckpt";
  eval_cfg.out_dir = scratch.dir("eval");
  eval_cfg.export_detections = scratch.dir("detections.jsonl");
  REQUIRE(cmd_eval(eval_cfg) == 0);

  std::ifstream in(eval_cfg.export_detections);
  std::string line;
  REQUIRE(std::getline(in, line));
  const auto det = nlohmann::json::parse(line);
  CHECK(det.contains("bag"));
  CHECK(det.contains("confidence"));
}

TEST_CASE("eval validates its inputs") {
  RunConfig cfg = tiny_run();
  CHECK_THROWS_AS(cmd_eval(cfg), ConfigError);  // no checkpoint
  cfg.checkpoint = "/nonexistent/model.ckpt";
  cfg.train_dataset = "/nonexistent/data.jsonl";
  const Scratch scratch;
  cfg.out_dir = scratch.dir("eval");
  CHECK_THROWS_AS(cmd_eval(cfg), IoError);
}

TEST_CASE("train runs are reproducible from the echoed config") {
  const Scratch scratch;
  RunConfig cfg = tiny_run();
  cfg.out_dir = scratch.dir("a");
  REQUIRE(cmd_train(cfg) == 0);

  // re-load the echoed config and run into a different directory
  RunConfig echoed = load_run_config(cfg.out_dir + "/config.json");
  echoed.out_dir = scratch.dir("b");
  REQUIRE(cmd_train(echoed) == 0);

  CHECK(read_file(scratch.dir("a") + "/trainlog.csv") ==
        read_file(scratch.dir("b") + "/trainlog.csv"));
  CHECK(read_file(scratch.dir("a") + "/model.ckpt") == read_file(scratch.dir("b") + "/model.ckpt"));
}

TEST_CASE("sweep writes raw rows and aggregates for six variants") {
  const Scratch scratch;
  RunConfig cfg = tiny_run();
  cfg.out_dir = scratch.dir("sweep");
  REQUIRE(cmd_sweep(cfg) == 0);

  const auto raw = csv_lines(cfg.out_dir + "/sweep_raw.csv");
  CHECK(raw.size() == 1 + 6 * cfg.seeds.size());  // baseline + 5 schedules
  const auto summary = csv_lines(cfg.out_dir + "/sweep_summary.csv");
  CHECK(summary.size() == 1 + 6);
  CHECK(summary[1].rfind("mil-baseline,", 0) == 0);
  CHECK(fs::exists(cfg.out_dir + "/runs/log/seed0/trainlog.csv"));
}

TEST_CASE("ablate writes the 2x2 grid") {
  const Scratch scratch;
  RunConfig cfg = tiny_run();
  cfg.seeds = {0};
  cfg.out_dir = scratch.dir("ablate");
  REQUIRE(cmd_ablate(cfg) == 0);

  const auto raw = csv_lines(cfg.out_dir + "/ablation_raw.csv");
  CHECK(raw.size() == 1 + 4);
  const auto summary = csv_lines(cfg.out_dir + "/ablation_summary.csv");
  CHECK(summary.size() == 1 + 4);
  CHECK(summary[1].rfind("both,", 0) == 0);
  CHECK(summary[4].rfind("baseline,", 0) == 0);
}

TEST_CASE("gradcheck command passes on the default generator") {
  RunConfig cfg = tiny_run();
  CHECK(cmd_gradcheck(cfg, 3, 0.5) == 0);
}
