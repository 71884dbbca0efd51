//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "molrl/error.h"
#include "molrl/reward.h"
#include "molrl/toy_data.h"
#include "test_util.h"

namespace molrl {
namespace {

TEST(Bonus, Examples) {
  RewardConfig cfg;
  EXPECT_NEAR(bonus(true, true, true, cfg), 0.6, 1e-15);
  EXPECT_EQ(bonus(false, false, false, cfg), 0.0);
  EXPECT_EQ(bonus(true, false, false, cfg), 0.2);
  cfg.bonus_enabled = false;
  for (int mask = 0; mask < 8; ++mask)
    EXPECT_EQ(bonus(mask & 1, mask & 2, mask & 4, cfg), 1.0);
}

Fingerprint bits(std::initializer_list<int> on) {
  Fingerprint f(64);
  for (int b: on)
    f.set(b);
  return f;
}

TEST(Diversity, Examples) {
  const std::vector<Fingerprint> same(4, bits({ 1, 2, 3 }));
  for (double d: batch_diversity(same))
    EXPECT_EQ(d, 1.0);
  const std::vector<Fingerprint> disjoint { bits({ 1 }), bits({ 2 }), bits({ 3, 4 }) };
  for (double d: batch_diversity(disjoint))
    EXPECT_EQ(d, 0.0);
  EXPECT_EQ(batch_diversity(std::vector<Fingerprint> { bits({ 5 }) }), std::vector<double> { 0.0 });
}

TEST(Diversity, MeanOfPairwiseTanimotoAndPermutationEquivariant) {
  ToyDataConfig toy;
  toy.count = 12;
  const auto vocab = AtomVocabulary::qm9();
  std::vector<Fingerprint> fps;
  for (const auto &m: generate_toy_molecules(toy, 6))
    fps.push_back(fingerprint(infer_bonds(m, vocab)));
  const auto d = batch_diversity(fps);
  for (std::size_t i = 0; i < fps.size(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < fps.size(); ++j)
      if (j != i)
        s += tanimoto(fps[i], fps[j]);
    EXPECT_NEAR(d[i], s / (fps.size() - 1), 1e-15);
    EXPECT_GE(d[i], 0.0);
    EXPECT_LE(d[i], 1.0);
  }
  std::vector<std::size_t> perm(fps.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Fingerprint> shuffled;
  for (auto p: perm)
    shuffled.push_back(fps[p]);
  const auto ds = batch_diversity(shuffled);
  for (std::size_t i = 0; i < perm.size(); ++i)
    EXPECT_NEAR(ds[i], d[perm[i]], 1e-15);
}

TEST(Lambda, DecayExamples) {
  RewardConfig cfg;
  EXPECT_EQ(lambda_at(0, cfg), 0.1);
  EXPECT_NEAR(lambda_at(20, cfg), 0.1 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(lambda_at(20, cfg), 0.036788, 1e-6);
  for (int e = 1; e < 200; ++e)
    EXPECT_LE(lambda_at(e, cfg), lambda_at(e - 1, cfg));
  EXPECT_LT(lambda_at(1000, cfg), 1e-20);
  cfg.decay_rate = 0;
  EXPECT_EQ(lambda_at(57, cfg), 0.1);
  cfg.diversity_enabled = false;
  EXPECT_EQ(lambda_at(0, cfg), 0.0);
  EXPECT_THROW(lambda_at(-1, cfg), Error);
}

TEST(TotalReward, Examples) {
  EXPECT_NEAR(total_reward(0.5, 0.6, 0.5, 0.1).total, 0.25, 1e-15);
  EXPECT_EQ(total_reward(0.3, 0.6, 0.9, 0.0).total, 0.3 * 0.6);
  EXPECT_NEAR(total_reward(0.0, 0.6, 1.0, 0.1).total, -0.1, 1e-15);
  const auto b = total_reward(0.5, 0.6, 0.5, 0.1);
  EXPECT_EQ(b.u_multi, 0.5);
  EXPECT_EQ(b.bonus, 0.6);
  EXPECT_EQ(b.diversity, 0.5);
  EXPECT_EQ(b.lambda, 0.1);
}

TEST(TotalReward, Monotone) {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double u = uniform01(rng), b = uniform01(rng), d = uniform01(rng), l = uniform01(rng);
    const double base = total_reward(u, b, d, l).total;
    EXPECT_GE(total_reward(std::min(1.0, u + 0.1), b, d, l).total, base);
    EXPECT_GE(total_reward(u, b + 0.1, d, l).total, base);
    EXPECT_LE(total_reward(u, b, std::min(1.0, d + 0.1), l).total, base);
  }
}

TEST(TotalReward, BothTogglesOffIsPureUncertainty) {
  RewardConfig cfg;
  cfg.bonus_enabled = false;
  cfg.diversity_enabled = false;
  for (double u: { 0.0, 0.3, 1.0 })
    EXPECT_EQ(total_reward(u, bonus(true, false, true, cfg), 0.8, lambda_at(3, cfg)).total, u);
}

TEST(DynamicCutoff, EmaUpdate) {
  RewardConfig cfg;
  DynamicCutoffState st({ { "p", 1, 0.1 } }, { 0.5 });
  const std::vector<double> m { 0.7 };
  st.update(m, cfg);
  EXPECT_NEAR(st.ema()[0], 0.52, 1e-15);
  const std::vector<double> same { st.ema()[0] };
  st.update(same, cfg);
  EXPECT_NEAR(st.ema()[0], 0.52, 1e-15);
  cfg.cutoff_mode = CutoffMode::kStatic;
  const auto before = st.effective();
  st.update(std::vector<double> { 100.0 }, cfg);
  EXPECT_EQ(st.effective()[0].cutoff, before[0].cutoff);
}

TEST(DynamicCutoff, EffectiveRespectsFloorsAndSerializes) {
  DynamicCutoffState st({ { "up", 1, 0.4 }, { "down", -1, 8.0 } }, { 0.3, 2.0 });
  const auto eff = st.effective();
  // The floor is the least demanding cutoff in each direction.
  EXPECT_EQ(eff[0].cutoff, 0.4);
  EXPECT_EQ(eff[1].cutoff, 2.0);
  const auto back = DynamicCutoffState::from_json(st.to_json());
  EXPECT_EQ(back.ema(), st.ema());
  EXPECT_EQ(back.floors()[1].direction, -1);
  DynamicCutoffState defaulted({ { "up", 1, 0.4 } });
  EXPECT_EQ(defaulted.ema(), std::vector<double> { 0.4 });
}

TEST(Classify, FlagsFollowHashes) {
  using E = Element;
  using P = Eigen::RowVector3d;
  const auto vocab = AtomVocabulary::qm9();
  const auto cc = testing::make_molecule({ { E::kC, P(0, 0, 0) }, { E::kC, P(1.5, 0, 0) } });
  const auto co = testing::make_molecule({ { E::kC, P(0, 0, 0) }, { E::kO, P(1.4, 0, 0) } });
  const auto bad = testing::make_molecule({ { E::kC, P(0, 0, 0) }, { E::kO, P(5, 0, 0) } });
  HashSet ref { canonical_hash(infer_bonds(co, vocab)) };
  const std::vector<MolecularConfig> batch { cc, co, cc, bad };
  const auto f = classify_batch(batch, vocab, ref);
  EXPECT_TRUE(f[0].valid && f[0].unique && f[0].novel);
  EXPECT_TRUE(f[1].valid && f[1].unique && !f[1].novel);
  EXPECT_TRUE(f[2].valid && !f[2].unique && f[2].novel);
  EXPECT_FALSE(f[3].valid || f[3].unique || f[3].novel);
}

TEST(ScoreBatch, ObjectiveNamesMustMatchOracle) {
  const auto vocab = AtomVocabulary::qm9();
  SyntheticOracle oracle(vocab);
  ToyDataConfig toy;
  toy.count = 3;
  const auto mols = generate_toy_molecules(toy, 1);
  std::vector<ObjectiveSpec> wrong { { "a", 1, 0 }, { "b", 1, 0 }, { "c", 1, 0 } };
  try {
    score_batch(mols, vocab, oracle, {}, wrong, RewardConfig {}, 0);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  std::vector<ObjectiveSpec> ok { { "pseudo_qed", 1, 0.4 }, { "pseudo_sas", -1, 8 }, { "pseudo_affinity", -1, -1 } };
  const auto s = score_batch(mols, vocab, oracle, {}, ok, RewardConfig {}, 4);
  for (const auto &m: s) {
    const double u = multi_objective_prob(m.estimates, ok);
    EXPECT_EQ(m.reward.u_multi, u);
    EXPECT_EQ(m.reward.lambda, lambda_at(4, RewardConfig {}));
    EXPECT_NEAR(m.reward.total, u * m.reward.bonus - m.reward.lambda * m.reward.diversity, 1e-15);
  }
}

TEST(RewardConfig, Validation) {
  RewardConfig cfg;
  cfg.b_valid = -1;
  EXPECT_THROW(cfg.check(), Error);
  cfg = {};
  cfg.ema_momentum = 1.0;
  EXPECT_THROW(cfg.check(), Error);
  EXPECT_EQ(cutoff_mode_from_name("static"), CutoffMode::kStatic);
  EXPECT_THROW(cutoff_mode_from_name("sometimes"), Error);
}

}  // namespace
}  // namespace molrl
