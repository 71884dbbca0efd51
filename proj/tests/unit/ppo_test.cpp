//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "molrl/error.h"
#include "molrl/ppo.h"
#include "molrl/toy_data.h"
#include "test_util.h"

namespace molrl {
namespace {

using namespace molrl::testing;

// A tiny end-to-end setting: toy molecules, synthetic oracle conditions, a
// 2-layer network and a short schedule.
struct Fixture {
  AtomVocabulary vocab = AtomVocabulary::qm9();
  NoiseSchedule schedule { 10 };
  SyntheticOracle oracle { vocab };
  ConditionSizeDistribution conditions;
  HashSet train_hashes;
  DenoiserParams params;
  std::vector<ObjectiveSpec> objectives { { "pseudo_qed", 1, 0.4 },
                                          { "pseudo_sas", -1, 8.0 },
                                          { "pseudo_affinity", -1, -1.0 } };
  PpoContext ctx;

  Fixture() {
    ToyDataConfig toy;
    toy.count = 40;
    toy.max_atoms = 6;
    std::vector<Eigen::VectorXd> conds;
    std::vector<int> sizes;
    for (const auto &m: generate_toy_molecules(toy, 3)) {
      Eigen::VectorXd c(3);
      const auto est = oracle.predict(m);
      for (int k = 0; k < 3; ++k)
        c(k) = est[k].mean;
      conds.push_back(c);
      sizes.push_back(m.size());
      train_hashes.insert(canonical_hash(infer_bonds(m, vocab)));
    }
    conditions = ConditionSizeDistribution::fit(conds, sizes, 4);
    params = random_params(small_config(4, 3, 2, 8, 10), 17, 0.1);
    ctx = { &schedule, &vocab, &conditions, &oracle, &train_hashes, RewardConfig {} };
  }

  EpisodeBatch collect(int n, std::uint64_t seed, int episode = 0) const {
    Rng rng(seed);
    return collect_episode(params, ctx, objectives, episode, n, rng);
  }
};

double loss_value(const DenoiserParams &p, const EpisodeBatch &b, std::span<const int> ts,
                  double eps, const NoiseSchedule &sch, std::vector<double> *ratios = nullptr) {
  return grad(p, [&](ad::Tape &tape, const BoundParams &bp) {
           return clipped_loss(tape, bp, b, ts, eps, sch, {}, 0, ratios);
         }).loss;
}

TEST(Ppo, IdentityRatioAndLoss) {
  Fixture f;
  const auto batch = f.collect(8, 1);
  ASSERT_EQ(batch.size(), 8u);
  std::vector<int> ts;
  for (int t = 1; t <= f.schedule.T(); ++t)
    ts.push_back(t);
  std::vector<double> ratios;
  const double loss = loss_value(f.params, batch, ts, 3e-4, f.schedule, &ratios);
  ASSERT_EQ(ratios.size(), 8u * ts.size());
  for (double r: ratios)
    EXPECT_NEAR(r, 1.0, 1e-9);
  double mean_r = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    mean_r += batch.reward(i);
  mean_r /= batch.size();
  EXPECT_NEAR(loss, -mean_r, 1e-9);
}

double brute_force_term(double r, double R, double eps) {
  // Enumerate the two candidate objectives and take the smaller.
  double c = r;
  if (c < 1 - eps)
    c = 1 - eps;
  if (c > 1 + eps)
    c = 1 + eps;
  const double a = r * R, b = c * R;
  return a < b ? a : b;
}

TEST(Ppo, ClipBranchesMatchBruteForce) {
  Rng rng(5);
  for (int k = 0; k < 10000; ++k) {
    const double eps = 0.5 * uniform01(rng);
    const double r = 2 * uniform01(rng);
    const double R = 2 * uniform01(rng) - 1;
    ASSERT_EQ(clipped_term(r, R, eps), brute_force_term(r, R, eps)) << r << " " << R << " " << eps;
  }
  const double eps = 0.1;
  // Positive reward above the window: the clipped term is smaller.
  EXPECT_NEAR(clipped_term(1 + 2 * eps, 0.7, eps), (1 + eps) * 0.7, 1e-15);
  // Negative reward below the window: (1 - eps) R < r R, so the clipped term
  // is again the minimum and the gradient vanishes.
  EXPECT_NEAR(clipped_term(1 - 2 * eps, -0.7, eps), (1 - eps) * -0.7, 1e-15);
  // Negative reward above the window keeps the unclipped, more negative term.
  EXPECT_NEAR(clipped_term(1 + 2 * eps, -0.7, eps), (1 + 2 * eps) * -0.7, 1e-15);
}

TEST(Ppo, HugeClipIsUnclipped) {
  Fixture f;
  const auto batch = f.collect(6, 2);
  DenoiserParams moved = f.params;
  Rng rng(3);
  for (auto &t: moved.tensors)
    t += 0.01 * standard_normal(rng, t.rows(), t.cols());
  const std::vector<int> ts { 2, 5, 9 };
  std::vector<double> ratios;
  const double loss = loss_value(moved, batch, ts, 1e9, f.schedule, &ratios);
  double expect = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t k = 0; k < ts.size(); ++k)
      expect += ratios[k * batch.size() + i] * batch.reward(i);
  EXPECT_NEAR(loss, -expect / ratios.size(), 1e-12);
}

TEST(Ppo, ClippedLossGradientMatchesFiniteDifferences) {
  Fixture f;
  const auto batch = f.collect(6, 4);
  // Move off the identity so ratios spread across both sides of the clip
  // window.
  DenoiserParams p = f.params;
  Rng rng(8);
  for (auto &t: p.tensors)
    t += 0.02 * standard_normal(rng, t.rows(), t.cols());
  const std::vector<int> ts { 1, 4, 7, 10 };
  const double eps = 0.2;
  const auto lg = grad(p, [&](ad::Tape &tape, const BoundParams &bp) {
    return clipped_loss(tape, bp, batch, ts, eps, f.schedule);
  });
  std::vector<std::pair<int, int>> slots;
  for (int t = 0; t < static_cast<int>(p.tensors.size()); ++t)
    for (int i = 0; i < p.tensors[t].size(); ++i)
      slots.push_back({ t, i });
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(220);
  const double h = 1e-5;
  for (auto [t, i]: slots) {
    DenoiserParams q = p;
    const double x = p.tensors[t].data()[i];
    q.tensors[t].data()[i] = x + h;
    const double up = loss_value(q, batch, ts, eps, f.schedule);
    q.tensors[t].data()[i] = x - h;
    const double down = loss_value(q, batch, ts, eps, f.schedule);
    const double fd = (up - down) / (2 * h);
    const double an = lg.grad.tensors[t].data()[i];
    const double scale = std::max({ std::abs(fd), std::abs(an), 1e-6 });
    EXPECT_LT(std::abs(fd - an) / scale, 1e-3) << p.names[t] << "[" << i << "] fd=" << fd << " an=" << an;
  }
}

TEST(Ppo, LearningRateDecaysMonotonically) {
  PpoConfig cfg;
  const long long total = 90;
  EXPECT_EQ(ppo_learning_rate(cfg, 0, total), cfg.learning_rate);
  EXPECT_NEAR(ppo_learning_rate(cfg, total - 1, total), 0.1 * cfg.learning_rate, 1e-20);
  for (long long u = 1; u < total; ++u)
    EXPECT_LT(ppo_learning_rate(cfg, u, total), ppo_learning_rate(cfg, u - 1, total));
}

TEST(Ppo, ZeroEpisodesChangesNothing) {
  Fixture f;
  PpoState st { f.params, AdamState::zeros_like(f.params), DynamicCutoffState(f.objectives), 0, 0 };
  PpoConfig cfg;
  cfg.episodes = 0;
  const auto rows = ppo_train(st, cfg, f.ctx, 1);
  EXPECT_TRUE(rows.empty());
  for (std::size_t k = 0; k < st.params.tensors.size(); ++k)
    EXPECT_EQ(st.params.tensors[k], f.params.tensors[k]);
}

TEST(Ppo, SingleSampleHasNoDiversityPenalty) {
  Fixture f;
  const auto batch = f.collect(1, 6);
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch.scored[0].reward.diversity, 0.0);
}

TEST(Ppo, CollectIsDeterministic) {
  Fixture f;
  const auto a = f.collect(5, 9, 3);
  const auto b = f.collect(5, 9, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.molecules[i].coords, b.molecules[i].coords);
    EXPECT_EQ(a.old_logp[i], b.old_logp[i]);
    EXPECT_EQ(a.reward(i), b.reward(i));
  }
}

TEST(Ppo, TrainingRunIsReproducibleAndLogsEveryEpisode) {
  Fixture f;
  PpoConfig cfg;
  cfg.episodes = 2;
  cfg.n_samples = 6;
  cfg.k_timesteps = 3;
  cfg.reuse = 2;
  auto run = [&] {
    PpoState st { f.params, AdamState::zeros_like(f.params), DynamicCutoffState(f.objectives), 0, 0 };
    auto rows = ppo_train(st, cfg, f.ctx, 21);
    return std::pair { st, rows };
  };
  const auto [s1, r1] = run();
  const auto [s2, r2] = run();
  ASSERT_EQ(r1.size(), 2u);
  EXPECT_EQ(s1.updates, 4);
  EXPECT_EQ(s1.next_episode, 2);
  for (std::size_t k = 0; k < s1.params.tensors.size(); ++k)
    EXPECT_EQ(s1.params.tensors[k], s2.params.tensors[k]);
  for (std::size_t e = 0; e < r1.size(); ++e) {
    EXPECT_EQ(r1[e].mean_reward, r2[e].mean_reward);
    EXPECT_LT(r1[e].first_epoch_ratio_dev, 1e-9);
  }
  EXPECT_NE(s1.params.tensors[0], f.params.tensors[0]);
}

// Stopping after one episode and continuing from the saved state matches an
// uninterrupted two-episode run.
TEST(Ppo, ResumeMatchesUninterruptedRun) {
  Fixture f;
  PpoConfig cfg;
  cfg.episodes = 2;
  cfg.n_samples = 5;
  cfg.k_timesteps = 2;
  cfg.reuse = 1;
  PpoState full { f.params, AdamState::zeros_like(f.params), DynamicCutoffState(f.objectives), 0, 0 };
  ppo_train(full, cfg, f.ctx, 5);

  PpoState part { f.params, AdamState::zeros_like(f.params), DynamicCutoffState(f.objectives), 0, 0 };
  // The learning-rate schedule depends on the planned total, so the first
  // leg must plan for two episodes; stop it through the callback instead.
  PpoState snapshot;
  ppo_train(part, cfg, f.ctx, 5, [&](const PpoState &s, const EpisodeLogRow &row, const EpisodeBatch &) {
    if (row.episode == 0)
      snapshot = s;
  });
  ppo_train(snapshot, cfg, f.ctx, 5);
  EXPECT_EQ(snapshot.next_episode, 2);
  for (std::size_t k = 0; k < full.params.tensors.size(); ++k)
    EXPECT_EQ(snapshot.params.tensors[k], full.params.tensors[k]);
  EXPECT_EQ(snapshot.cutoffs.ema(), full.cutoffs.ema());
}

TEST(PpoConfig, Validation) {
  PpoConfig cfg;
  cfg.clip_eps = 0;
  EXPECT_THROW(cfg.check(), Error);
  cfg = {};
  cfg.k_timesteps = 0;
  EXPECT_THROW(cfg.check(), Error);
  cfg = {};
  EXPECT_NO_THROW(cfg.check());
}

}  // namespace
}  // namespace molrl
