//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_PRETRAIN_H_
#define MOLRL_PRETRAIN_H_

#include <functional>
#include <span>
#include <vector>

#include "molrl/denoiser.h"
#include "molrl/diffusion.h"
#include "molrl/molgraph.h"
#include "molrl/schedule.h"

namespace molrl {

// Timestep and Gaussian noise for one training molecule.
struct TrainingNoise {
  int t = 0;
  MatrixXd eps_x;  // zero-CoG
  MatrixXd eps_h;
};

// Per molecule in order: t ~ U{1..T}, coordinate noise (projected), feature
// noise.
std::vector<TrainingNoise> draw_training_noise(
    std::span<const MolecularConfig> batch, const NoiseSchedule &schedule,
    int num_types, Rng &rng);

std::vector<LatentState> noised_batch(std::span<const MolecularConfig> batch,
                                      std::span<const TrainingNoise> noise,
                                      const NoiseSchedule &schedule,
                                      const AtomVocabulary &vocab,
                                      double feature_scale);

using NoisePredictor =
    std::function<std::vector<NoisePrediction>(std::span<const LatentState>)>;

// Mean over molecules of the per-entry squared error between the drawn noise
// and the prediction; each molecule contributes
// (|eps_x - eps_x_hat|^2 + |eps_h - eps_h_hat|^2) / (M * (3 + d_h)).
double pretrain_loss_with(std::span<const MolecularConfig> batch,
                          std::span<const TrainingNoise> noise,
                          const NoiseSchedule &schedule,
                          const AtomVocabulary &vocab, double feature_scale,
                          const NoisePredictor &predictor);

// Draws noise from `rng` and scores the denoiser. Throws kConfig on an empty
// batch.
double pretrain_loss(const DenoiserParams &params,
                     std::span<const MolecularConfig> batch,
                     const NoiseSchedule &schedule, const AtomVocabulary &vocab,
                     Rng &rng);

// Differentiable form of pretrain_loss_with for the denoiser, on `tape`.
ad::Var pretrain_loss_var(ad::Tape &tape, const BoundParams &params,
                          std::span<const MolecularConfig> batch,
                          std::span<const TrainingNoise> noise,
                          const NoiseSchedule &schedule,
                          const AtomVocabulary &vocab);

// Loss and gradient over the batch. The batch is cut into `chunks` fixed
// contiguous pieces evaluated in parallel and summed in order, so the result
// does not depend on the thread count.
LossAndGrad pretrain_loss_and_grad(const DenoiserParams &params,
                                   std::span<const MolecularConfig> batch,
                                   std::span<const TrainingNoise> noise,
                                   const NoiseSchedule &schedule,
                                   const AtomVocabulary &vocab, int chunks = 1);

struct PretrainConfig {
  int steps = 2000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int chunks = 1;
};

struct PretrainLogRow {
  int step = 0;
  double loss = 0;
};

// Adam on the noise-prediction loss. Batches walk seeded permutations of
// `molecules`, reshuffled each pass. `on_step` (optional) sees every row.
std::vector<PretrainLogRow>
pretrain(DenoiserParams &params, AdamState &adam,
         std::span<const MolecularConfig> molecules, const PretrainConfig &cfg,
         const NoiseSchedule &schedule, const AtomVocabulary &vocab, Rng &rng,
         const std::function<void(const PretrainLogRow &)> &on_step = {});

}  // namespace molrl

#endif  // MOLRL_PRETRAIN_H_
