//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

// Command-line entry point. Every subcommand reads one JSON run config;
// flags override the matching config keys.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "molrl/ablation.h"
#include "molrl/commands.h"
#include "molrl/error.h"

namespace {

using namespace molrl;

int report_error(std::string_view kind, const std::string &message) {
  nlohmann::ordered_json j = { { "error", kind }, { "message", message } };
  std::cerr << j.dump() << "\n";
  return kind == "usage" ? 2 : 1;
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::optional<int> n;
  std::string plan;
  std::string input;
};

RunConfig resolve(const Options &o) {
  RunConfig cfg = o.config.empty() ? RunConfig {} : RunConfig::load(o.config);
  if (o.seed)
    cfg.seed = *o.seed;
  if (!o.out.empty())
    cfg.output_dir = o.out;
  if (o.n)
    cfg.sample_n = *o.n;
  cfg.check();
  return cfg;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app { "molrl: equivariant diffusion with uncertainty-aware RL fine-tuning" };
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", o.config, "run config (JSON)");
    sub->add_option("--seed", o.seed, "root seed; overrides the config");
    sub->add_option("--out", o.out, "output directory; overrides the config");
  };
  auto *make_toy = app.add_subcommand("make-toy", "write a random toy XYZ dataset");
  auto *prepare = app.add_subcommand("prepare", "split the dataset and annotate properties");
  auto *pretrain = app.add_subcommand("pretrain", "train the denoiser on the training split");
  auto *finetune = app.add_subcommand("finetune", "RL fine-tuning from a checkpoint");
  auto *sample = app.add_subcommand("sample", "generate molecules from a checkpoint");
  auto *evaluate = app.add_subcommand("evaluate", "generation metrics for a directory of XYZ files");
  auto *calibrate = app.add_subcommand("calibrate", "R^2, AUCE and calibration curves for a property table");
  auto *ablate = app.add_subcommand("ablate", "finetune under each ablation toggle and aggregate");
  for (auto *s: { make_toy, prepare, pretrain, finetune, sample, evaluate, calibrate, ablate })
    common(s);
  for (auto *s: { finetune, sample, ablate })
    s->add_option("--checkpoint", o.checkpoint, "denoiser checkpoint");
  sample->add_option("--n", o.n, "number of molecules; overrides sample.n");
  ablate->add_option("--plan", o.plan, "ablation plan (JSON)");
  evaluate->add_option("samples", o.input, "directory of generated XYZ files")->required();
  calibrate->add_option("table", o.input, "CSV: molecule_id, props, mean_<p>, sigma_<p>")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return report_error("usage", e.what());
  }

  try {
    const RunConfig cfg = resolve(o);
    const std::filesystem::path out = cfg.output_dir;
    nlohmann::ordered_json result;
    if (make_toy->parsed()) {
      result = cmd_make_toy(cfg, out);
    } else if (prepare->parsed()) {
      result = cmd_prepare(cfg, out);
    } else if (pretrain->parsed()) {
      result = cmd_pretrain(cfg, out);
    } else if (finetune->parsed()) {
      if (o.checkpoint.empty())
        fail(ErrorKind::kUsage, "finetune needs --checkpoint");
      result = cmd_finetune(cfg, out, o.checkpoint);
    } else if (sample->parsed()) {
      if (o.checkpoint.empty())
        fail(ErrorKind::kUsage, "sample needs --checkpoint");
      result = cmd_sample(cfg, out, o.checkpoint, cfg.sample_n);
    } else if (evaluate->parsed()) {
      result = cmd_evaluate(cfg, out, o.input);
      std::cout << result.at("row").get<std::string>() << "\n";
    } else if (calibrate->parsed()) {
      result = cmd_calibrate(cfg, out, o.input);
    } else if (ablate->parsed()) {
      const AblationPlan plan = o.plan.empty() ? AblationPlan::standard() : AblationPlan::load(o.plan);
      result = run_plan(plan, cfg, o.checkpoint, out);
    }
    std::cout << result.dump() << "\n";
    return 0;
  } catch (const Error &e) {
    return report_error(error_kind_name(e.kind()), e.what());
  } catch (const std::exception &e) {
    return report_error("internal", e.what());
  }
}
