//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_ABLATION_H_
#define MOLRL_ABLATION_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "molrl/config.h"

namespace molrl {

// One labelled variant; unset fields keep the base config's value.
struct AblationRun {
  std::string label;
  std::optional<bool> bonus_enabled;
  std::optional<bool> diversity_enabled;
  std::optional<CutoffMode> cutoff_mode;
};

struct AblationPlan {
  std::vector<AblationRun> runs;
  std::vector<std::uint64_t> seeds { 1, 2, 3 };

  // full, no-bonus, no-diversity, static-cutoff.
  static AblationPlan standard();
  // {"seeds": [...], "runs": [{"label": ..., "reward": {toggles}}]}; both
  // keys optional, "runs" defaulting to the standard four.
  static AblationPlan from_json(const nlohmann::json &j);
  static AblationPlan load(const std::filesystem::path &path);

  // Labels non-empty and unique, at least one run and one seed.
  void check() const;
};

// Base config with the run's toggles and the seed applied.
RunConfig apply_run(const RunConfig &base, const AblationRun &run, std::uint64_t seed);

// One finetune and one evaluation of sample.n fresh molecules per (label,
// seed) under out/<label>/seed_<s>/. Rows are appended to out/runs.csv as
// they finish; out/ablation.csv holds the per-label means. An empty
// `checkpoint` pretrains once into out/pretrain with the base config.
nlohmann::ordered_json run_plan(const AblationPlan &plan, const RunConfig &base,
                                const std::filesystem::path &checkpoint,
                                const std::filesystem::path &out);

}  // namespace molrl

#endif  // MOLRL_ABLATION_H_
