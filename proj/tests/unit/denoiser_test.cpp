//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "molrl/denoiser.h"
#include "molrl/error.h"
#include "molrl/pretrain.h"
#include "molrl/toy_data.h"
#include "test_util.h"

namespace molrl {
namespace {

using namespace molrl::testing;

TEST(Denoiser, EquivariantUnderOrthogonalMaps) {
  const auto cfg = small_config(4, 2, 3, 16, 50);
  const auto params = random_params(cfg, 1);
  const auto s = random_state(9, cfg, 17, 2);
  const auto base = predict_noise(params, s);
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Matrix3d q = random_orthogonal(rng, k % 2 == 1);
    LatentState r = s;
    r.z_x = s.z_x * q.transpose();
    const auto out = predict_noise(params, r);
    EXPECT_LE((out.eps_x - base.eps_x * q.transpose()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE((out.eps_h - base.eps_h).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Denoiser, PermutationEquivariant) {
  const auto cfg = small_config(4, 1, 2, 16, 50);
  const auto params = random_params(cfg, 4);
  const auto s = random_state(9, cfg, 30, 5);
  const auto base = predict_noise(params, s);
  Rng rng(6);
  for (int k = 0; k < 100; ++k) {
    std::vector<int> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    LatentState p = s;
    for (int i = 0; i < 9; ++i) {
      p.z_x.row(i) = s.z_x.row(perm[i]);
      p.z_h.row(i) = s.z_h.row(perm[i]);
    }
    const auto out = predict_noise(params, p);
    for (int i = 0; i < 9; ++i) {
      EXPECT_LE((out.eps_x.row(i) - base.eps_x.row(perm[i])).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LE((out.eps_h.row(i) - base.eps_h.row(perm[i])).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Denoiser, TranslationInvariantAndZeroCogOutput) {
  const auto cfg = small_config();
  const auto params = random_params(cfg, 7);
  const auto s = random_state(6, cfg, 5, 8);
  LatentState moved = s;
  moved.z_x.rowwise() += Eigen::RowVector3d(3, -2, 10);
  const auto a = predict_noise(params, s);
  const auto b = predict_noise(params, moved);
  EXPECT_LE((a.eps_x - b.eps_x).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((a.eps_h - b.eps_h).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(a.eps_x.colwise().sum().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Denoiser, BatchMatchesSingle) {
  const auto cfg = small_config();
  const auto params = random_params(cfg, 9);
  std::vector<LatentState> states;
  for (int k = 0; k < 5; ++k)
    states.push_back(random_state(2 + k, cfg, 1 + 3 * k, 100 + k));
  const auto batch = predict_noise_batch(params, states);
  for (int k = 0; k < 5; ++k) {
    const auto one = predict_noise(params, states[k]);
    EXPECT_LE((batch[k].eps_x - one.eps_x).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((batch[k].eps_h - one.eps_h).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Denoiser, ShapeMismatchIsModelError) {
  const auto cfg = small_config();
  auto params = random_params(cfg, 1);
  params.tensors[0].resize(1, 1);
  try {
    check_denoiser_shapes(params);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kModel);
  }
}

TEST(Denoiser, InitLeavesCoordinateHeadAtZero) {
  for (OutputMode mode: { OutputMode::kNoise, OutputMode::kVelocity }) {
    auto cfg = small_config();
    cfg.output = mode;
    Rng rng(1);
    const auto params = init_denoiser(cfg, rng);
    const auto s = random_state(5, cfg, 10, 2);
    const auto out = predict_noise(params, s);
    ASSERT_TRUE(out.eps_x.allFinite());
    if (mode == OutputMode::kNoise) {
      EXPECT_LE(out.eps_x.cwiseAbs().maxCoeff(), 1e-12);
    } else {
      // eps = sigma_t z_t + alpha_t * 0
      NoiseSchedule sch(cfg.time_steps, cfg.schedule_s);
      EXPECT_LE((out.eps_x - sch.sigma(10) * s.z_x).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

// Analytic gradients of the training loss against central differences on a
// random sample of at least 200 scalars of a 2-layer network.
TEST(Denoiser, GradientMatchesFiniteDifferences) {
  const auto cfg = small_config(4, 1, 2, 8, 20);
  // Weights of scale 0.1 keep the loss O(1) so central differences at
  // h = 1e-5 are not dominated by cancellation.
  const auto params = random_params(cfg, 21, 0.1);
  const AtomVocabulary vocab = AtomVocabulary::qm9();
  NoiseSchedule sch(cfg.time_steps, cfg.schedule_s);
  ToyDataConfig toy;
  toy.count = 4;
  auto mols = generate_toy_molecules(toy, 5);
  for (auto &m: mols)
    m.condition = Eigen::VectorXd::Constant(1, 0.3);
  Rng rng(2);
  const auto noise = draw_training_noise(mols, sch, vocab.size(), rng);
  auto closure = [&](ad::Tape &tape, const BoundParams &b) {
    return pretrain_loss_var(tape, b, mols, noise, sch, vocab);
  };
  const LossAndGrad lg = grad(params, closure);
  auto loss_at = [&](const DenoiserParams &p) {
    return pretrain_loss_with(mols, noise, sch, vocab, cfg.feature_scale,
                              [&](std::span<const LatentState> s) { return predict_noise_batch(p, s); });
  };
  EXPECT_NEAR(loss_at(params), lg.loss, 1e-12);

  std::vector<std::pair<int, int>> slots;  // (tensor, flat index)
  for (int t = 0; t < static_cast<int>(params.tensors.size()); ++t)
    for (int i = 0; i < params.tensors[t].size(); ++i)
      slots.push_back({ t, i });
  ASSERT_GE(slots.size(), 200u);
  Rng pick(3);
  std::shuffle(slots.begin(), slots.end(), pick);
  slots.resize(std::min<std::size_t>(slots.size(), 250));

  const double h = 1e-5;
  int checked = 0;
  for (auto [t, i]: slots) {
    DenoiserParams p = params;
    const double x = params.tensors[t].data()[i];
    p.tensors[t].data()[i] = x + h;
    const double up = loss_at(p);
    p.tensors[t].data()[i] = x - h;
    const double down = loss_at(p);
    const double fd = (up - down) / (2 * h);
    const double an = lg.grad.tensors[t].data()[i];
    const double scale = std::max({ std::abs(fd), std::abs(an), 1e-6 });
    EXPECT_LT(std::abs(fd - an) / scale, 1e-4) << params.names[t] << "[" << i << "] fd=" << fd << " an=" << an;
    ++checked;
  }
  EXPECT_GE(checked, 200);
}

TEST(Denoiser, LossExamplesWithOraclePredictors) {
  const AtomVocabulary vocab = AtomVocabulary::qm9();
  NoiseSchedule sch(20);
  ToyDataConfig toy;
  toy.count = 6;
  const auto mols = generate_toy_molecules(toy, 8);
  Rng rng(1);
  const auto noise = draw_training_noise(mols, sch, vocab.size(), rng);
  const double perfect = pretrain_loss_with(mols, noise, sch, vocab, 0.25, [&](std::span<const LatentState> s) {
    std::vector<NoisePrediction> out;
    for (std::size_t k = 0; k < s.size(); ++k)
      out.push_back({ noise[k].eps_x, noise[k].eps_h });
    return out;
  });
  EXPECT_EQ(perfect, 0.0);
  const double zero = pretrain_loss_with(mols, noise, sch, vocab, 0.25, [&](std::span<const LatentState> s) {
    std::vector<NoisePrediction> out;
    for (const auto &st: s)
      out.push_back({ Eigen::MatrixXd::Zero(st.z_x.rows(), 3), Eigen::MatrixXd::Zero(st.z_h.rows(), st.z_h.cols()) });
    return out;
  });
  double expect = 0;
  for (std::size_t k = 0; k < mols.size(); ++k)
    expect += (noise[k].eps_x.squaredNorm() + noise[k].eps_h.squaredNorm())
              / (mols[k].size() * (3.0 + vocab.size()));
  EXPECT_NEAR(zero, expect / mols.size(), 1e-12);
}

TEST(Grad, QuadraticAndConstantClosures) {
  const auto cfg = small_config();
  const auto params = random_params(cfg, 2);
  const auto half_norm = grad(params, [](ad::Tape &, const BoundParams &b) {
    ad::Var total = ad::sum(ad::square(b.vars[0]));
    for (std::size_t k = 1; k < b.vars.size(); ++k)
      total = total + ad::sum(ad::square(b.vars[k]));
    return 0.5 * total;
  });
  for (std::size_t k = 0; k < params.tensors.size(); ++k)
    EXPECT_LE((half_norm.grad.tensors[k] - params.tensors[k]).cwiseAbs().maxCoeff(), 1e-15);
  const auto constant = grad(params, [](ad::Tape &tape, const BoundParams &) {
    return tape.constant(Eigen::MatrixXd::Constant(1, 1, 3.0));
  });
  EXPECT_EQ(constant.loss, 3.0);
  for (const auto &g: constant.grad.tensors)
    EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  const auto cfg = small_config();
  auto params = random_params(cfg, 3);
  const auto before = params;
  auto state = AdamState::zeros_like(params);
  adam_step(params, GradientBundle::zeros_like(params), state, 1e-2);
  for (std::size_t k = 0; k < params.tensors.size(); ++k)
    EXPECT_EQ(params.tensors[k], before.tensors[k]);
}

TEST(Adam, FirstStepAndTwoStepReference) {
  const auto cfg = small_config();
  auto params = random_params(cfg, 4);
  const auto p0 = params;
  Rng rng(5);
  auto g1 = GradientBundle::zeros_like(params);
  auto g2 = GradientBundle::zeros_like(params);
  for (std::size_t k = 0; k < g1.tensors.size(); ++k) {
    g1.tensors[k] = standard_normal(rng, g1.tensors[k].rows(), g1.tensors[k].cols());
    g2.tensors[k] = standard_normal(rng, g2.tensors[k].rows(), g2.tensors[k].cols());
  }
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  auto state = AdamState::zeros_like(params);
  adam_step(params, g1, state, lr);
  for (std::size_t k = 0; k < params.tensors.size(); ++k)
    for (int i = 0; i < params.tensors[k].size(); ++i) {
      const double g = g1.tensors[k].data()[i];
      const double d = params.tensors[k].data()[i] - p0.tensors[k].data()[i];
      EXPECT_NEAR(d, -lr * g / (std::abs(g) + eps), 1e-15);
    }
  adam_step(params, g2, state, lr);
  EXPECT_EQ(state.step, 2);
  // Scalar reference implementation.
  for (std::size_t k = 0; k < params.tensors.size(); ++k)
    for (int i = 0; i < params.tensors[k].size(); ++i) {
      double x = p0.tensors[k].data()[i], m = 0, v = 0;
      for (int step = 1; step <= 2; ++step) {
        const double g = (step == 1 ? g1 : g2).tensors[k].data()[i];
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, step)), vh = v / (1 - std::pow(b2, step));
        x -= lr * mh / (std::sqrt(vh) + eps);
      }
      EXPECT_NEAR(params.tensors[k].data()[i], x, 1e-15);
    }
}

TEST(Adam, ShapeMismatch) {
  const auto cfg = small_config();
  auto params = random_params(cfg, 4);
  auto state = AdamState::zeros_like(params);
  auto g = GradientBundle::zeros_like(params);
  g.tensors.pop_back();
  try {
    adam_step(params, g, state, 1e-3);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(Pretrain, LossDropsOnSmallSet) {
  const AtomVocabulary vocab = AtomVocabulary::qm9();
  ToyDataConfig toy;
  toy.count = 50;
  auto mols = generate_toy_molecules(toy, 12);
  for (auto &m: mols)
    m.condition = Eigen::VectorXd::Zero(1);
  auto cfg = small_config(4, 1, 2, 32, 50);
  Rng init(1);
  auto params = init_denoiser(cfg, init);
  auto adam = AdamState::zeros_like(params);
  NoiseSchedule sch(cfg.time_steps, cfg.schedule_s);
  auto probe = [&](const DenoiserParams &p) {
    Rng r(99);  // same noise before and after
    double total = 0;
    for (int rep = 0; rep < 4; ++rep)
      total += pretrain_loss(p, mols, sch, vocab, r);
    return total / 4;
  };
  const double before = probe(params);
  PretrainConfig pc;
  pc.steps = 200;
  pc.batch_size = 16;
  pc.learning_rate = 3e-3;
  Rng rng(2);
  pretrain(params, adam, mols, pc, sch, vocab, rng);
  const double after = probe(params);
  EXPECT_LT(after, 0.7 * before) << "before " << before << " after " << after;
}

}  // namespace
}  // namespace molrl
