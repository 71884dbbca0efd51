//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_COMMANDS_H_
#define MOLRL_COMMANDS_H_

#include <filesystem>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "molrl/config.h"
#include "molrl/dataset.h"
#include "molrl/metrics.h"
#include "molrl/ppo.h"

namespace molrl {

namespace fs = std::filesystem;

std::unique_ptr<PropertyOracle> make_oracle(const RunConfig &cfg,
                                            const AtomVocabulary &vocab);

// Dataset, species split, and everything derived from the training split.
// Deterministic in the config.
struct PreparedData {
  AtomVocabulary vocab;
  Dataset dataset;
  DatasetSplit split;
  std::vector<MolecularConfig> train;  // with conditions attached
  HashSet train_hashes;
  int condition_dim = 0;
  std::unique_ptr<PropertyOracle> oracle;

  ConditionSizeDistribution condition_distribution(int bins) const;
  // Mean oracle estimate per property over the training split.
  std::vector<double> train_property_means() const;
};

PreparedData load_prepared(const RunConfig &cfg);

// Writes `cfg` as resolved_config.json in `dir`.
void write_resolved_config(const RunConfig &cfg, const fs::path &dir);

// Each command writes into `out` and returns a JSON summary.
nlohmann::ordered_json cmd_make_toy(const RunConfig &cfg, const fs::path &out);
nlohmann::ordered_json cmd_prepare(const RunConfig &cfg, const fs::path &out);
nlohmann::ordered_json cmd_pretrain(const RunConfig &cfg, const fs::path &out);
// Resumes from out/rng_state.json when present.
nlohmann::ordered_json cmd_finetune(const RunConfig &cfg, const fs::path &out,
                                    const fs::path &checkpoint);
nlohmann::ordered_json cmd_sample(const RunConfig &cfg, const fs::path &out,
                                  const fs::path &checkpoint, int n);
nlohmann::ordered_json cmd_evaluate(const RunConfig &cfg, const fs::path &out,
                                    const fs::path &samples);
nlohmann::ordered_json cmd_calibrate(const RunConfig &cfg, const fs::path &out,
                                     const fs::path &table);

// Samples `n` molecules from `params` with the run's sample stream.
std::vector<MolecularConfig> draw_samples(const DenoiserParams &params,
                                          const PreparedData &data,
                                          const RunConfig &cfg, int n,
                                          std::uint64_t seed);

// One summary line: n, validity, uniqueness, novelty, VUN, stabilities, top.
std::string format_report_row(const GenerationReport &report);

}  // namespace molrl

#endif  // MOLRL_COMMANDS_H_
