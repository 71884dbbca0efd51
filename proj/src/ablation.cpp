//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/ablation.h"

#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "molrl/checkpoint.h"
#include "molrl/commands.h"
#include "molrl/error.h"

namespace molrl {

namespace {

const char *kRunColumns = "label,seed,validity,uniqueness,novelty,vun,atom_stability,"
                          "mol_stability,top_molecules,final_mean_reward\n";

void append(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out)
    fail(ErrorKind::kIo, "cannot append to " + path.string());
  out << text;
}

double last_mean_reward(const std::filesystem::path &episodes_csv) {
  std::ifstream in(episodes_csv);
  std::string line, last;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty())
      last = line;
  if (last.empty())
    return 0.0;
  const auto a = last.find(',');
  const auto b = last.find(',', a + 1);
  return std::stod(last.substr(a + 1, b - a - 1));
}

}  // namespace

AblationPlan AblationPlan::standard() {
  AblationPlan p;
  p.runs.push_back({ "full", {}, {}, {} });
  p.runs.push_back({ "no-bonus", false, {}, {} });
  p.runs.push_back({ "no-diversity", {}, false, {} });
  p.runs.push_back({ "static-cutoff", {}, {}, CutoffMode::kStatic });
  return p;
}

AblationPlan AblationPlan::from_json(const nlohmann::json &j) {
  if (!j.is_object())
    fail(ErrorKind::kConfig, "ablation plan must be an object");
  AblationPlan p = standard();
  for (const auto &item: j.items())
    if (item.key() != "seeds" && item.key() != "runs")
      fail(ErrorKind::kConfig, "unknown ablation plan key '" + item.key() + "'");
  try {
    if (j.contains("seeds"))
      p.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("runs")) {
      p.runs.clear();
      for (const auto &r: j.at("runs")) {
        for (const auto &item: r.items())
          if (item.key() != "label" && item.key() != "reward")
            fail(ErrorKind::kConfig, "unknown ablation run key '" + item.key() + "'");
        AblationRun run;
        run.label = r.at("label").get<std::string>();
        if (r.contains("reward")) {
          // Only the reward toggles may be overridden.
          for (const auto &item: r.at("reward").items()) {
            if (item.key() == "bonus_enabled")
              run.bonus_enabled = item.value().get<bool>();
            else if (item.key() == "diversity_enabled")
              run.diversity_enabled = item.value().get<bool>();
            else if (item.key() == "cutoff_mode")
              run.cutoff_mode = cutoff_mode_from_name(item.value().get<std::string>());
            else
              fail(ErrorKind::kConfig, "ablation runs may only override bonus_enabled, "
                                       "diversity_enabled and cutoff_mode, not '"
                                           + item.key() + "'");
          }
        }
        p.runs.push_back(run);
      }
    }
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kConfig, std::string("bad ablation plan: ") + e.what());
  }
  p.check();
  return p;
}

AblationPlan AblationPlan::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::kIo, "cannot open plan " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error &e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

void AblationPlan::check() const {
  if (runs.empty() || seeds.empty())
    fail(ErrorKind::kConfig, "ablation plan needs at least one run and one seed");
  std::set<std::string> labels;
  for (const auto &r: runs) {
    if (r.label.empty() || r.label.find_first_of("/\\,") != std::string::npos)
      fail(ErrorKind::kConfig, "ablation labels must be non-empty names without / \\ ,");
    if (!labels.insert(r.label).second)
      fail(ErrorKind::kConfig, "duplicate ablation label '" + r.label + "'");
  }
}

RunConfig apply_run(const RunConfig &base, const AblationRun &run, std::uint64_t seed) {
  RunConfig c = base;
  c.seed = seed;
  if (run.bonus_enabled)
    c.reward.bonus_enabled = *run.bonus_enabled;
  if (run.diversity_enabled)
    c.reward.diversity_enabled = *run.diversity_enabled;
  if (run.cutoff_mode)
    c.reward.cutoff_mode = *run.cutoff_mode;
  return c;
}

nlohmann::ordered_json run_plan(const AblationPlan &plan, const RunConfig &base,
                                const std::filesystem::path &checkpoint,
                                const std::filesystem::path &out) {
  plan.check();
  std::filesystem::create_directories(out);
  write_resolved_config(base, out);
  std::filesystem::path ck = checkpoint;
  if (ck.empty()) {
    cmd_pretrain(base, out / "pretrain");
    ck = out / "pretrain" / "pretrain.ckpt";
  }

  const auto runs_csv = out / "runs.csv";
  {
    std::ofstream reset(runs_csv, std::ios::binary | std::ios::trunc);
    reset << kRunColumns;
  }
  struct Sum {
    int n = 0;
    double v[8] = {};
  };
  std::map<std::string, Sum> sums;
  for (const auto &run: plan.runs) {
    for (std::uint64_t seed: plan.seeds) {
      const RunConfig cfg = apply_run(base, run, seed);
      const auto dir = out / run.label / fmt::format("seed_{}", seed);
      cmd_finetune(cfg, dir, ck);
      const PreparedData data = load_prepared(cfg);
      const Checkpoint tuned = load_checkpoint(dir / "finetuned.ckpt");
      const auto mols = draw_samples(tuned.params, data, cfg, cfg.sample_n, cfg.seed);
      const auto r = evaluate(mols, data.vocab, data.train_hashes, *data.oracle, cfg.objectives);
      const double reward = last_mean_reward(dir / "episodes.csv");
      const double vals[8] = { r.validity, r.uniqueness, r.novelty, r.vun,
                               r.atom_stability, r.mol_stability, r.top_molecules, reward };
      std::string row = fmt::format("{},{}", run.label, seed);
      for (double x: vals)
        row += fmt::format(",{}", x);
      append(runs_csv, row + "\n");
      auto &s = sums[run.label];
      ++s.n;
      for (int k = 0; k < 8; ++k)
        s.v[k] += vals[k];
    }
  }

  std::string table = "label,runs,validity,uniqueness,novelty,vun,atom_stability,"
                      "mol_stability,top_molecules,final_mean_reward\n";
  nlohmann::ordered_json summary = { { "command", "ablate" }, { "labels", nlohmann::ordered_json::array() } };
  for (const auto &run: plan.runs) {
    const auto &s = sums[run.label];
    table += fmt::format("{},{}", run.label, s.n);
    for (double x: s.v)
      table += fmt::format(",{}", x / s.n);
    table += "\n";
    summary["labels"].push_back(run.label);
  }
  std::ofstream(out / "ablation.csv", std::ios::binary | std::ios::trunc) << table;
  summary["table"] = (out / "ablation.csv").string();
  return summary;
}

}  // namespace molrl
