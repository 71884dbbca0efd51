//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/ppo.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "molrl/error.h"
#include "molrl/parallel.h"

namespace molrl {

void PpoConfig::check() const {
  if (!(clip_eps > 0) || !(learning_rate > 0) || !std::isfinite(learning_rate))
    fail(ErrorKind::kConfig, "ppo clip_eps and learning_rate must be positive");
  if (reuse < 1 || n_samples < 1 || k_timesteps < 1 || episodes < 0
      || grad_accum_batches < 1)
    fail(ErrorKind::kConfig, "ppo reuse, n_samples, k_timesteps and "
                             "grad_accum_batches must be >= 1, episodes >= 0");
  if (!(final_lr_fraction > 0 && final_lr_fraction <= 1))
    fail(ErrorKind::kConfig, "ppo final_lr_fraction must lie in (0, 1]");
}

EpisodeBatch collect_episode(const DenoiserParams &params, const PpoContext &ctx,
                             std::span<const ObjectiveSpec> objectives,
                             int episode, int n, Rng &rng) {
  if (n < 1)
    fail(ErrorKind::kConfig, "an episode needs at least one sample");
  const NoiseSchedule &schedule = *ctx.schedule;
  const int types = ctx.vocab->size();

  std::vector<VectorXd> conds;
  std::vector<int> sizes;
  std::vector<SamplerNoise> noise;
  for (int i = 0; i < n; ++i) {
    auto d = ctx.conditions->draw(rng);
    conds.push_back(d.condition);
    sizes.push_back(d.num_atoms);
    noise.push_back(draw_sampler_noise(d.num_atoms, types, schedule.T(), rng));
  }
  auto results = sample_batch(params, conds, sizes, schedule, *ctx.vocab, noise, true);

  EpisodeBatch batch;
  batch.episode = episode;
  for (auto &r: results) {
    batch.molecules.push_back(std::move(r.molecule));
    batch.trajectories.push_back(std::move(*r.trajectory));
  }
  // The sampling policy's densities follow from the recorded means; no second
  // network pass is needed.
  batch.old_logp.resize(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    const Trajectory &tr = batch.trajectories[i];
    auto &lp = batch.old_logp[i];
    lp.assign(static_cast<std::size_t>(tr.T()), 0.0);
    for (int t = 1; t <= tr.T(); ++t) {
      const std::size_t k = static_cast<std::size_t>(tr.T() - t);
      const LatentState &z_s = tr.at(t - 1);
      lp[t - 1] = transition_log_density(z_s.z_x, z_s.z_h, tr.means_x[k],
                                         tr.means_h[k], tr.variances[k]);
    }
  });
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch.old_logp[i].size(); ++t)
      if (!std::isfinite(batch.old_logp[i][t]))
        fail(ErrorKind::kNumeric, fmt::format("non-finite log density for trajectory {} "
                                              "at timestep {}", i, t + 1));
  batch.scored = score_batch(batch.molecules, *ctx.vocab, *ctx.oracle,
                             *ctx.train_hashes, objectives, ctx.reward, episode);
  return batch;
}

double clipped_term(double ratio, double reward, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * reward, clipped * reward);
}

ad::Var clipped_loss(ad::Tape &tape, const BoundParams &params,
                     const EpisodeBatch &batch, std::span<const int> timesteps,
                     double clip_eps, const NoiseSchedule &schedule,
                     std::span<const int> members, int denominator,
                     std::vector<double> *ratios) {
  if (batch.size() == 0 || timesteps.empty())
    fail(ErrorKind::kShape, "clipped loss needs trajectories and timesteps");
  std::vector<int> all;
  if (members.empty()) {
    all.resize(batch.size());
    std::iota(all.begin(), all.end(), 0);
    members = all;
  }
  std::vector<const Trajectory *> trs;
  MatrixXd rewards(static_cast<Eigen::Index>(members.size()), 1);
  for (std::size_t k = 0; k < members.size(); ++k) {
    trs.push_back(&batch.trajectories.at(static_cast<std::size_t>(members[k])));
    rewards(static_cast<Eigen::Index>(k), 0) = batch.reward(static_cast<std::size_t>(members[k]));
  }
  if (denominator <= 0)
    denominator = static_cast<int>(members.size() * timesteps.size());

  ad::Var total;
  bool first = true;
  const ad::Var reward = tape.constant(rewards);
  for (int t: timesteps) {
    if (t < 1 || t > schedule.T())
      fail(ErrorKind::kOrdering, fmt::format("timestep {} outside 1..{}", t, schedule.T()));
    MatrixXd old(static_cast<Eigen::Index>(members.size()), 1);
    for (std::size_t k = 0; k < members.size(); ++k)
      old(static_cast<Eigen::Index>(k), 0) =
          batch.old_logp.at(static_cast<std::size_t>(members[k])).at(static_cast<std::size_t>(t - 1));
    ad::Var logp = batch_transition_log_density(tape, params, trs, t, schedule);
    for (std::size_t k = 0; k < members.size(); ++k)
      if (!std::isfinite(logp.value()(static_cast<Eigen::Index>(k), 0)))
        fail(ErrorKind::kNumeric, fmt::format("non-finite log density for trajectory {} "
                                              "at timestep {}", members[k], t));
    tape.set_scope(fmt::format("clipped ratio t={}", t));
    ad::Var ratio = ad::exp(logp - tape.constant(old));
    if (ratios)
      ratios->insert(ratios->end(), ratio.value().data(),
                     ratio.value().data() + ratio.value().size());
    ad::Var term = ad::minimum(ratio * reward,
                               ad::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * reward);
    ad::Var s = ad::sum(term);
    total = first ? s : total + s;
    first = false;
  }
  return total * (-1.0 / denominator);
}

double ppo_learning_rate(const PpoConfig &cfg, long long u, long long total) {
  if (total <= 1)
    return cfg.learning_rate;
  const double frac = static_cast<double>(std::min(u, total - 1)) / static_cast<double>(total - 1);
  return cfg.learning_rate * (1.0 - (1.0 - cfg.final_lr_fraction) * frac);
}

namespace {

// K distinct timesteps from 1..T, shared by every trajectory of the update.
std::vector<int> sample_timesteps(int T, int k, Rng &rng) {
  std::vector<int> all(static_cast<std::size_t>(T));
  std::iota(all.begin(), all.end(), 1);
  k = std::min(k, T);
  // Partial Fisher-Yates.
  for (int i = 0; i < k; ++i) {
    const int j = uniform_int(rng, i, T - 1);
    std::swap(all[i], all[j]);
  }
  all.resize(static_cast<std::size_t>(k));
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

std::vector<EpisodeLogRow> ppo_train(PpoState &state, const PpoConfig &cfg,
                                     const PpoContext &ctx, std::uint64_t seed,
                                     const EpisodeCallback &on_episode) {
  cfg.check();
  ctx.reward.check();
  const long long total_updates = static_cast<long long>(cfg.episodes) * cfg.reuse;
  std::vector<EpisodeLogRow> log;

  for (int e = state.next_episode; e < cfg.episodes; ++e) {
    Rng rng = make_rng(seed, "ppo", static_cast<std::uint64_t>(e));
    const auto objectives = state.cutoffs.effective();
    EpisodeBatch batch = collect_episode(state.params, ctx, objectives, e, cfg.n_samples, rng);

    EpisodeLogRow row;
    row.episode = e;
    for (const auto &s: batch.scored) {
      row.mean_reward += s.reward.total;
      row.mean_u_multi += s.reward.u_multi;
    }
    row.mean_reward /= static_cast<double>(batch.size());
    row.mean_u_multi /= static_cast<double>(batch.size());
    row.lambda = lambda_at(e, ctx.reward);
    row.report = evaluate(batch.molecules, *ctx.vocab, *ctx.train_hashes, *ctx.oracle,
                          state.cutoffs.floors());
    row.report.details.clear();

    // Fixed contiguous mini-batches.
    const int n = static_cast<int>(batch.size());
    const int chunks = std::min(cfg.grad_accum_batches, n);
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(chunks));
    for (int i = 0; i < n; ++i)
      groups[static_cast<std::size_t>(static_cast<long long>(i) * chunks / n)].push_back(i);

    for (int epoch = 0; epoch < cfg.reuse; ++epoch) {
      const auto steps = sample_timesteps(ctx.schedule->T(), cfg.k_timesteps, rng);
      const int denom = n * static_cast<int>(steps.size());
      std::vector<LossAndGrad> parts(groups.size());
      std::vector<std::vector<double>> ratios(groups.size());
      parallel_for(groups.size(), [&](std::size_t g) {
        parts[g] = grad(state.params, [&](ad::Tape &tape, const BoundParams &bp) {
          return clipped_loss(tape, bp, batch, steps, cfg.clip_eps, *ctx.schedule,
                              groups[g], denom, &ratios[g]);
        });
      });
      LossAndGrad sum { 0.0, GradientBundle::zeros_like(state.params) };
      for (std::size_t g = 0; g < parts.size(); ++g) {
        sum.loss += parts[g].loss;
        sum.grad.add(parts[g].grad);
      }
      if (!sum.grad.all_finite())
        fail(ErrorKind::kNumeric, fmt::format("non-finite policy gradient in episode {}", e));
      if (epoch == 0) {
        row.first_epoch_loss = sum.loss;
        for (const auto &rs: ratios)
          for (double r: rs)
            row.first_epoch_ratio_dev = std::max(row.first_epoch_ratio_dev, std::abs(r - 1.0));
      }
      const double lr = ppo_learning_rate(cfg, state.updates, total_updates);
      adam_step(state.params, sum.grad, state.adam, lr);
      ++state.updates;
      row.last_lr = lr;
    }

    // One cutoff update per episode, from the batch means of the oracle means.
    std::vector<double> means(state.cutoffs.floors().size(), 0.0);
    for (const auto &s: batch.scored)
      for (std::size_t k = 0; k < means.size(); ++k)
        means[k] += s.estimates.at(k).mean;
    for (double &m: means)
      m /= static_cast<double>(batch.size());
    state.cutoffs.update(means, ctx.reward);
    state.next_episode = e + 1;

    log.push_back(row);
    if (on_episode)
      on_episode(state, row, batch);
  }
  return log;
}

}  // namespace molrl
