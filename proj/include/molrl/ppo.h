//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_PPO_H_
#define MOLRL_PPO_H_

#include <functional>
#include <span>
#include <vector>

#include "molrl/denoiser.h"
#include "molrl/diffusion.h"
#include "molrl/metrics.h"
#include "molrl/reward.h"
#include "molrl/schedule.h"
#include "molrl/uncertainty.h"

namespace molrl {

struct PpoConfig {
  double clip_eps = 3e-4;
  double learning_rate = 1e-5;
  int reuse = 3;
  int n_samples = 128;
  int k_timesteps = 8;
  int episodes = 30;
  // Trajectories of one update are split into this many fixed mini-batches
  // whose gradients are summed.
  int grad_accum_batches = 1;
  // The learning rate falls linearly to this fraction by the last update.
  double final_lr_fraction = 0.1;

  void check() const;
};

// Everything an episode reads but never writes.
struct PpoContext {
  const NoiseSchedule *schedule = nullptr;
  const AtomVocabulary *vocab = nullptr;
  const ConditionSizeDistribution *conditions = nullptr;
  const PropertyOracle *oracle = nullptr;
  const HashSet *train_hashes = nullptr;
  RewardConfig reward;
};

struct EpisodeBatch {
  int episode = 0;
  std::vector<Trajectory> trajectories;
  std::vector<MolecularConfig> molecules;
  std::vector<ScoredMolecule> scored;
  // old_logp[i][t - 1]: log density of the t -> t - 1 transition of
  // trajectory i under the policy that sampled it.
  std::vector<std::vector<double>> old_logp;

  std::size_t size() const { return trajectories.size(); }
  double reward(std::size_t i) const { return scored.at(i).reward.total; }
};

// Samples `n` molecules (condition and size from the fitted distribution,
// then the sampler noise, in order per molecule) and scores them with the
// effective `objectives` at `episode`.
EpisodeBatch collect_episode(const DenoiserParams &params, const PpoContext &ctx,
                             std::span<const ObjectiveSpec> objectives,
                             int episode, int n, Rng &rng);

// min(r R, clip(r, 1 - eps, 1 + eps) R).
double clipped_term(double ratio, double reward, double eps);

// Differentiable -mean over (trajectory, timestep) of clipped_term with
// r = exp(logp_new - logp_old). `members` picks the trajectories (all when
// empty); `denominator` is the pair count the mean divides by, so the losses
// of disjoint mini-batches add up to the full-batch loss (0 means
// members * timesteps). `ratios`, when given, receives every r, timestep
// by timestep (index k * |members| + i).
ad::Var clipped_loss(ad::Tape &tape, const BoundParams &params,
                     const EpisodeBatch &batch, std::span<const int> timesteps,
                     double clip_eps, const NoiseSchedule &schedule,
                     std::span<const int> members = {}, int denominator = 0,
                     std::vector<double> *ratios = nullptr);

// Learning rate of inner update u out of `total`.
double ppo_learning_rate(const PpoConfig &cfg, long long u, long long total);

// Mutable training state; everything needed to resume after an episode.
struct PpoState {
  DenoiserParams params;
  AdamState adam;
  DynamicCutoffState cutoffs;
  int next_episode = 0;
  long long updates = 0;
};

struct EpisodeLogRow {
  int episode = 0;
  double mean_reward = 0;
  double mean_u_multi = 0;
  double lambda = 0;
  GenerationReport report;  // validity, uniqueness, ...; no detail rows
  double first_epoch_loss = 0;
  // max |r - 1| over the first inner epoch, where old and new policies agree.
  double first_epoch_ratio_dev = 0;
  double last_lr = 0;
};

using EpisodeCallback = std::function<void(const PpoState &, const EpisodeLogRow &,
                                           const EpisodeBatch &)>;

// Runs episodes state.next_episode .. cfg.episodes - 1. The episode-e random
// stream is make_rng(seed, "ppo", e), so resuming from a saved state
// continues the same run. `on_episode` fires after every episode with the
// updated state.
std::vector<EpisodeLogRow> ppo_train(PpoState &state, const PpoConfig &cfg,
                                     const PpoContext &ctx, std::uint64_t seed,
                                     const EpisodeCallback &on_episode = {});

}  // namespace molrl

#endif  // MOLRL_PPO_H_
