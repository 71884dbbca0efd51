//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_CONFIG_H_
#define MOLRL_CONFIG_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "molrl/denoiser.h"
#include "molrl/ppo.h"
#include "molrl/pretrain.h"
#include "molrl/reward.h"
#include "molrl/toy_data.h"
#include "molrl/uncertainty.h"

namespace molrl {

inline constexpr int kConfigSchemaVersion = 1;

// Where the per-molecule condition vector comes from.
enum class ConditionSource {
  kOracle,   // the oracle's property means
  kDataset,  // "props:" values in the XYZ comments
  kNone,     // no conditioning
};

// How the moving-average cutoffs start before any episode.
enum class CutoffInit {
  kTrainMean,  // oracle means over the training split
  kFloor,      // the configured cutoffs
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 7;
  std::string output_dir = "run";

  struct Data {
    std::string dir;
    std::vector<std::string> vocabulary { "C", "N", "O", "F" };
    std::array<double, 3> split { 0.8, 0.1, 0.1 };
    ConditionSource condition = ConditionSource::kOracle;
    int condition_bins = 10;
  } data;

  ToyDataConfig toy;

  struct Schedule {
    int T = 50;
    double s = 1e-5;
  } schedule;

  struct Model {
    int layers = 3;
    int hidden = 64;
    OutputMode output = OutputMode::kVelocity;
    double feature_scale = 0.25;
    double coord_range = 15.0;
  } model;

  PretrainConfig pretrain;
  PpoConfig ppo;
  RewardConfig reward;
  CutoffInit cutoff_init = CutoffInit::kTrainMean;

  std::vector<ObjectiveSpec> objectives {
    { "pseudo_qed", 1, 0.4 },
    { "pseudo_sas", -1, 8.0 },
    { "pseudo_affinity", -1, -1.0 },
  };

  struct Oracle {
    std::string kind = "synthetic";  // synthetic | table
    std::string table;
    SyntheticOracleConfig synthetic;
  } oracle;

  int sample_n = 100;

  AtomVocabulary vocabulary() const { return AtomVocabulary(data.vocabulary); }
  // Denoiser settings implied by the config for `condition_dim` inputs.
  DenoiserConfig denoiser(int condition_dim) const;

  nlohmann::ordered_json to_json() const;
  // Missing keys keep their defaults; unknown keys and bad values throw
  // kConfig naming the key path.
  static RunConfig from_json(const nlohmann::json &j);
  static RunConfig load(const std::filesystem::path &path);

  // Cross-field checks (ratios, positive sizes, objective directions, ...).
  void check() const;
};

}  // namespace molrl

#endif  // MOLRL_CONFIG_H_
