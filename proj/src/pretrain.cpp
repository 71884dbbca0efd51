//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/pretrain.h"

#include <numeric>

#include <fmt/format.h>

#include "molrl/error.h"
#include "molrl/parallel.h"

namespace molrl {

namespace {

void check_batch(std::span<const MolecularConfig> batch,
                 std::span<const TrainingNoise> noise) {
  if (batch.empty())
    fail(ErrorKind::kConfig, "pretraining batch is empty");
  if (batch.size() != noise.size())
    fail(ErrorKind::kShape, "pretraining noise does not match the batch");
}

double entries(const MolecularConfig &m, int types) {
  return static_cast<double>(m.size()) * (3 + types);
}

}  // namespace

std::vector<TrainingNoise> draw_training_noise(
    std::span<const MolecularConfig> batch, const NoiseSchedule &schedule,
    int num_types, Rng &rng) {
  std::vector<TrainingNoise> out;
  out.reserve(batch.size());
  for (const auto &m: batch) {
    TrainingNoise n;
    n.t = uniform_int(rng, 1, schedule.T());
    n.eps_x = project_to_zero_cog(standard_normal(rng, m.size(), 3));
    n.eps_h = standard_normal(rng, m.size(), num_types);
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<LatentState> noised_batch(std::span<const MolecularConfig> batch,
                                      std::span<const TrainingNoise> noise,
                                      const NoiseSchedule &schedule,
                                      const AtomVocabulary &vocab,
                                      double feature_scale) {
  check_batch(batch, noise);
  std::vector<LatentState> out;
  out.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k)
    out.push_back(noise_data(encode(batch[k], vocab, feature_scale), noise[k].t,
                             schedule, noise[k].eps_x, noise[k].eps_h,
                             batch[k].condition));
  return out;
}

double pretrain_loss_with(std::span<const MolecularConfig> batch,
                          std::span<const TrainingNoise> noise,
                          const NoiseSchedule &schedule,
                          const AtomVocabulary &vocab, double feature_scale,
                          const NoisePredictor &predictor) {
  auto states = noised_batch(batch, noise, schedule, vocab, feature_scale);
  auto pred = predictor(states);
  if (pred.size() != batch.size())
    fail(ErrorKind::kShape, "predictor returned the wrong number of outputs");
  double total = 0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double sq = (noise[k].eps_x - pred[k].eps_x).squaredNorm()
                      + (noise[k].eps_h - pred[k].eps_h).squaredNorm();
    total += sq / entries(batch[k], vocab.size());
  }
  return total / static_cast<double>(batch.size());
}

double pretrain_loss(const DenoiserParams &params,
                     std::span<const MolecularConfig> batch,
                     const NoiseSchedule &schedule, const AtomVocabulary &vocab,
                     Rng &rng) {
  if (batch.empty())
    fail(ErrorKind::kConfig, "pretraining batch is empty");
  auto noise = draw_training_noise(batch, schedule, vocab.size(), rng);
  return pretrain_loss_with(
      batch, noise, schedule, vocab, params.config.feature_scale,
      [&](std::span<const LatentState> s) { return predict_noise_batch(params, s); });
}

ad::Var pretrain_loss_var(ad::Tape &tape, const BoundParams &params,
                          std::span<const MolecularConfig> batch,
                          std::span<const TrainingNoise> noise,
                          const NoiseSchedule &schedule,
                          const AtomVocabulary &vocab) {
  auto states = noised_batch(batch, noise, schedule, vocab,
                             params.config->feature_scale);
  BatchPrediction pred = denoiser_forward(tape, params, states);
  const int n = pred.offsets.back();
  MatrixXd target_x(n, 3), target_h(n, vocab.size()), weight(n, 1);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const int b = pred.offsets[k], m = batch[k].size();
    target_x.middleRows(b, m) = noise[k].eps_x;
    target_h.middleRows(b, m) = noise[k].eps_h;
    weight.middleRows(b, m).setConstant(
        1.0 / (entries(batch[k], vocab.size()) * static_cast<double>(batch.size())));
  }
  tape.set_scope("pretraining loss");
  ad::Var rx = ad::row_sum(ad::square(pred.eps_x - tape.constant(target_x)));
  ad::Var rh = ad::row_sum(ad::square(pred.eps_h - tape.constant(target_h)));
  return ad::sum(ad::scale_rows(rx + rh, tape.constant(weight)));
}

LossAndGrad pretrain_loss_and_grad(const DenoiserParams &params,
                                   std::span<const MolecularConfig> batch,
                                   std::span<const TrainingNoise> noise,
                                   const NoiseSchedule &schedule,
                                   const AtomVocabulary &vocab, int chunks) {
  check_batch(batch, noise);
  chunks = std::clamp(chunks, 1, static_cast<int>(batch.size()));
  const double total = static_cast<double>(batch.size());
  std::vector<LossAndGrad> parts(static_cast<std::size_t>(chunks));
  parallel_for(parts.size(), [&](std::size_t c) {
    const std::size_t lo = batch.size() * c / parts.size();
    const std::size_t hi = batch.size() * (c + 1) / parts.size();
    auto sub_batch = batch.subspan(lo, hi - lo);
    auto sub_noise = noise.subspan(lo, hi - lo);
    // Each chunk is a mean over its own molecules; reweight to the batch.
    const double w = static_cast<double>(hi - lo) / total;
    parts[c] = grad(params, [&](ad::Tape &tape, const BoundParams &bound) {
      return pretrain_loss_var(tape, bound, sub_batch, sub_noise, schedule,
                               vocab)
             * w;
    });
  });
  LossAndGrad out = std::move(parts[0]);
  for (std::size_t c = 1; c < parts.size(); ++c) {
    out.loss += parts[c].loss;
    out.grad.add(parts[c].grad);
  }
  return out;
}

std::vector<PretrainLogRow>
pretrain(DenoiserParams &params, AdamState &adam,
         std::span<const MolecularConfig> molecules, const PretrainConfig &cfg,
         const NoiseSchedule &schedule, const AtomVocabulary &vocab, Rng &rng,
         const std::function<void(const PretrainLogRow &)> &on_step) {
  if (molecules.empty())
    fail(ErrorKind::kConfig, "pretraining set is empty");
  if (cfg.steps < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0))
    fail(ErrorKind::kConfig,
         fmt::format("invalid pretraining settings: steps {}, batch {}, lr {}",
                     cfg.steps, cfg.batch_size, cfg.learning_rate));
  if (adam.m.empty())
    adam = AdamState::zeros_like(params);

  std::vector<std::size_t> order(molecules.size());
  std::size_t cursor = order.size();
  std::vector<PretrainLogRow> log;
  std::vector<MolecularConfig> batch;
  for (int step = 0; step < cfg.steps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < cfg.batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1],
                    order[uniform_int(rng, 0, static_cast<int>(i - 1))]);
        cursor = 0;
      }
      batch.push_back(molecules[order[cursor++]]);
    }
    auto noise = draw_training_noise(batch, schedule, vocab.size(), rng);
    LossAndGrad lg =
        pretrain_loss_and_grad(params, batch, noise, schedule, vocab, cfg.chunks);
    adam_step(params, lg.grad, adam, cfg.learning_rate);
    PretrainLogRow row { step, lg.loss };
    log.push_back(row);
    if (on_step)
      on_step(row);
  }
  return log;
}

}  // namespace molrl
