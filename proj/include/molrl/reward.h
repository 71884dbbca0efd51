//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_REWARD_H_
#define MOLRL_REWARD_H_

#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "molrl/molgraph.h"
#include "molrl/uncertainty.h"

namespace molrl {

enum class CutoffMode { kDynamic, kStatic };

std::string_view cutoff_mode_name(CutoffMode mode);
CutoffMode cutoff_mode_from_name(std::string_view name);

struct RewardConfig {
  double b_valid = 0.2;
  double b_unique = 0.35;
  double b_novel = 0.05;
  double lambda0 = 0.1;
  double decay_rate = 0.05;  // per episode
  CutoffMode cutoff_mode = CutoffMode::kDynamic;
  double ema_momentum = 0.9;
  bool bonus_enabled = true;
  bool diversity_enabled = true;

  // Throws kConfig on negative weights or momentum outside [0, 1).
  void check() const;
};

struct RewardBreakdown {
  double u_multi = 0;
  double bonus = 0;
  double diversity = 0;
  double lambda = 0;
  double total = 0;
};

// b_v v + b_u u + b_n n; the constant multiplier 1 when the bonus is off.
double bonus(bool valid, bool unique, bool novel, const RewardConfig &cfg);

// Mean Tanimoto similarity of each fingerprint to the rest of the batch;
// 0 for a batch of one.
std::vector<double> batch_diversity(std::span<const Fingerprint> fingerprints);

// lambda0 exp(-decay_rate episode); 0 when the diversity penalty is off.
double lambda_at(int episode, const RewardConfig &cfg);

RewardBreakdown total_reward(double u_multi, double bonus, double diversity,
                             double lambda);

// Moving-average property cutoffs. Each objective's configured cutoff is a
// floor: the effective cutoff is max(ema, floor) for higher-is-better
// objectives and min(ema, floor) for lower-is-better ones.
class DynamicCutoffState {
public:
  DynamicCutoffState() = default;
  // `initial_ema` empty starts every average at its floor.
  DynamicCutoffState(std::vector<ObjectiveSpec> floors,
                     std::vector<double> initial_ema = {});

  const std::vector<ObjectiveSpec> &floors() const { return floors_; }
  const std::vector<double> &ema() const { return ema_; }

  // Objectives with the effective cutoffs filled in.
  std::vector<ObjectiveSpec> effective() const;

  // ema <- m ema + (1 - m) mean per property; a no-op in static mode.
  void update(std::span<const double> batch_means, const RewardConfig &cfg);

  nlohmann::ordered_json to_json() const;
  static DynamicCutoffState from_json(const nlohmann::ordered_json &j);

private:
  std::vector<ObjectiveSpec> floors_;
  std::vector<double> ema_;
};

struct MoleculeFlags {
  bool valid = false;
  bool unique = false;  // valid and the first occurrence of its graph
  bool novel = false;   // valid and absent from the reference set
};

using HashSet = std::unordered_set<CanonicalHash>;

// Flags for a batch in order; uniqueness is decided by first occurrence.
std::vector<MoleculeFlags> classify_batch(std::span<const MolecularConfig> batch,
                                          const AtomVocabulary &vocab,
                                          const HashSet &reference);

struct ScoredMolecule {
  MoleculeFlags flags;
  std::vector<PropertyEstimate> estimates;
  RewardBreakdown reward;
};

// Full reward for one generated batch at `episode`, against `objectives`
// (effective cutoffs). Oracle calls run in parallel.
std::vector<ScoredMolecule> score_batch(std::span<const MolecularConfig> batch,
                                        const AtomVocabulary &vocab,
                                        const PropertyOracle &oracle,
                                        const HashSet &reference,
                                        std::span<const ObjectiveSpec> objectives,
                                        const RewardConfig &cfg, int episode);

}  // namespace molrl

#endif  // MOLRL_REWARD_H_
