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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cmil/commands.hpp"
#include "cmil/errors.hpp"

namespace {

// Options land in the config only when actually passed, so the precedence is
// defaults < config file < command line.
struct FlagBinder {
  CLI::App* cmd;
  std::vector<std::function<void()>> appliers;

  template <typename T>
  CLI::Option* bind(const std::string& name, T* target, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = cmd->add_option(name, *value, help);
    appliers.push_back([opt, value, target]() {
      if (opt->count() > 0) {
        *target = *value;
      }
    });
    return opt;
  }

  CLI::Option* bind_flag(const std::string& name, bool* target, const std::string& help) {
    auto value = std::make_shared<bool>();
    CLI::Option* opt = cmd->add_flag(name, *value, help);
    appliers.push_back([opt, value, target]() {
      if (opt->count() > 0) {
        *target = *value;
      }
    });
    return opt;
  }

  void apply() const {
    for (const auto& fn : appliers) {
      fn();
    }
  }
};

void add_data_flags(FlagBinder& b, cmil::RunConfig& cfg) {
  b.bind("--num-bags", &cfg.synth.num_bags, "training bags to synthesize");
  b.bind("--test-bags", &cfg.test_bags, "test bags to synthesize");
  b.bind("--proposals", &cfg.synth.proposals_per_bag, "proposals per bag");
  b.bind("--classes", &cfg.synth.num_classes, "number of classes");
  b.bind("--feature-dim", &cfg.synth.feature_dim, "feature dimension");
  b.bind("--part-strength", &cfg.synth.part_strength, "part direction coefficient");
  b.bind("--extent-strength", &cfg.synth.extent_strength, "extent direction coefficient");
  b.bind("--class-strength", &cfg.synth.class_strength, "class direction coefficient");
  b.bind("--noise-sigma", &cfg.synth.noise_sigma, "feature noise sigma");
  b.bind("--positive-fraction", &cfg.synth.positive_fraction, "fraction of positive bags");
  b.bind("--min-side", &cfg.synth.min_proposal_side, "minimum proposal side length");
  b.bind("--dataset", &cfg.train_dataset, "dataset file (overrides synthesis)");
  b.bind("--test-dataset", &cfg.test_dataset, "test dataset file (overrides synthesis)");
}

void add_train_flags(FlagBinder& b, cmil::RunConfig& cfg) {
  b.bind("--epochs", &cfg.epochs, "training epochs");
  b.bind("--lr1", &cfg.lr_first_half, "learning rate, first half");
  b.bind("--lr2", &cfg.lr_second_half, "learning rate, second half");
  b.bind("--momentum", &cfg.momentum, "SGD momentum");
  b.bind("--weight-decay", &cfg.weight_decay, "weight decay");
  b.bind("--schedule", &cfg.schedule, "continuation schedule: linear|pwlinear|sigmoid|exp|log");
  b.bind("--schedule-k", &cfg.schedule_k, "schedule shape parameter (negative = default)");
  b.bind("--continuation-selector", &cfg.continuation_selector,
          "continuation for the instance selector (0/1)");
  b.bind("--continuation-detector", &cfg.continuation_detector,
          "continuation for the detector labels (0/1)");
  b.bind("--detector-loss-reduction", &cfg.detector_loss_reduction,
          "detector loss reduction: mean|sum");
  b.bind_flag("--lambda-per-iteration", &cfg.lambda_per_iteration,
              "advance lambda every bag instead of every epoch");
  b.bind("--hidden-dim", &cfg.hidden_dim, "optional hidden layer width (0 = linear)");
  b.bind("--init-scale", &cfg.init_scale, "gaussian init scale (0 = zero init)");
  b.bind("--checkpoint-every", &cfg.checkpoint_every, "write a checkpoint every k epochs");
}

void add_eval_flags(FlagBinder& b, cmil::RunConfig& cfg) {
  b.bind("--nms-threshold", &cfg.nms_threshold, "NMS IoU threshold");
  b.bind("--iou-threshold", &cfg.iou_threshold, "matching IoU threshold for AP");
  b.bind("--ap-mode", &cfg.ap_mode, "AP integration: all-points|11-point");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuation multiple instance learning on synthetic bag datasets"};
  app.require_subcommand(1);

  cmil::RunConfig cfg;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->expected(1);

  int gradcheck_bags = 5;
  double gradcheck_lambda = 0.5;

  struct SubCommand {
    CLI::App* cmd;
    FlagBinder binder;
  };
  std::vector<SubCommand> subs;
  subs.reserve(8);  // binder references below must stay valid

  auto make_sub = [&](const char* name, const char* help) -> FlagBinder& {
    CLI::App* cmd = app.add_subcommand(name, help);
    subs.push_back(SubCommand{cmd, FlagBinder{cmd, {}}});
    FlagBinder& b = subs.back().binder;
    b.bind("--out-dir", &cfg.out_dir, "output directory");
    b.bind("--seed", &cfg.seed, "run seed");
    return b;
  };

  FlagBinder& gen = make_sub("generate", "synthesize train/test dataset files");
  add_data_flags(gen, cfg);
  gen.bind("--format", &cfg.dataset_format, "output format: jsonl|bin");

  FlagBinder& trn = make_sub("train", "train a model and write checkpoint + log");
  add_data_flags(trn, cfg);
  add_train_flags(trn, cfg);

  FlagBinder& evl = make_sub("eval", "evaluate a checkpoint against a dataset");
  evl.bind("--checkpoint", &cfg.checkpoint, "model checkpoint")->required();
  evl.bind("--dataset", &cfg.train_dataset, "dataset to evaluate")->required();
  evl.bind("--export-detections", &cfg.export_detections, "write detections (JSONL)");
  add_eval_flags(evl, cfg);

  FlagBinder& swp = make_sub("sweep", "compare the five continuation schedules");
  add_data_flags(swp, cfg);
  add_train_flags(swp, cfg);
  add_eval_flags(swp, cfg);
  swp.bind("--seeds", &cfg.seeds, "seeds to aggregate over");
  swp.bind_flag("--check", &cfg.check_thresholds, "exit 3 unless log beats the baseline");

  FlagBinder& abl = make_sub("ablate", "2x2 grid over the continuation switches");
  add_data_flags(abl, cfg);
  add_train_flags(abl, cfg);
  add_eval_flags(abl, cfg);
  abl.bind("--seeds", &cfg.seeds, "seeds to aggregate over");
  abl.bind_flag("--check", &cfg.check_thresholds, "exit 3 unless the mAP ordering holds");

  FlagBinder& grd = make_sub("gradcheck", "finite-difference check of the analytic gradients");
  add_data_flags(grd, cfg);
  grd.bind("--bags", &gradcheck_bags, "bags to sample");
  grd.bind("--lambda", &gradcheck_lambda, "continuation parameter to check at");
  grd.bind("--hidden-dim", &cfg.hidden_dim, "optional hidden layer width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (!config_path.empty()) {
      cfg = cmil::load_run_config(config_path);
    }
    for (const SubCommand& sub : subs) {
      if (sub.cmd->parsed()) {
        sub.binder.apply();
        const std::string name = sub.cmd->get_name();
        if (name == "generate") {
          return cmil::cmd_generate(cfg);
        }
        if (name == "train") {
          return cmil::cmd_train(cfg);
        }
        if (name == "eval") {
          return cmil::cmd_eval(cfg);
        }
        if (name == "sweep") {
          return cmil::cmd_sweep(cfg);
        }
        if (name == "ablate") {
          return cmil::cmd_ablate(cfg);
        }
        if (name == "gradcheck") {
          return cmil::cmd_gradcheck(cfg, gradcheck_bags, gradcheck_lambda);
        }
      }
    }
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const cmil::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
