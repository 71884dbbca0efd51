//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_DIFFUSION_H_
#define MOLRL_DIFFUSION_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "molrl/autodiff.h"
#include "molrl/denoiser.h"
#include "molrl/molgraph.h"
#include "molrl/random.h"
#include "molrl/schedule.h"

namespace molrl {

// Clean data point [x, h]: zero-CoG coordinates and scaled one-hot types.
struct DataPoint {
  MatrixXd x;
  MatrixXd h;
};

DataPoint encode(const MolecularConfig &config, const AtomVocabulary &vocab,
                 double feature_scale);

// z_t = alpha_t [x, h] + sigma_t [eps_x, eps_h]; eps_x must be zero-CoG.
LatentState noise_data(const DataPoint &data, int t, const NoiseSchedule &schedule,
                       const MatrixXd &eps_x, const MatrixXd &eps_h,
                       const VectorXd &condition);

struct ForwardSample {
  LatentState state;
  MatrixXd eps_x;
  MatrixXd eps_h;
};

// Draws eps (coordinates CoG-projected, then features) and noises the
// encoded molecule at 1 <= t <= T.
ForwardSample forward_noise(const MolecularConfig &config, int t,
                            const NoiseSchedule &schedule,
                            const AtomVocabulary &vocab, double feature_scale,
                            Rng &rng);

// [x, h] = z_t / alpha_t - (sigma_t / alpha_t) eps.
DataPoint data_estimate(const LatentState &state, const MatrixXd &eps_x,
                        const MatrixXd &eps_h, const NoiseSchedule &schedule);

struct ReverseMean {
  MatrixXd mu_x;
  MatrixXd mu_h;
  double variance = 0;  // sigma_{t->s}^2
};

// Deterministic part of the t -> s transition given predicted noise:
// mu = z_t / alpha_{t|s} - sigma_{t|s}^2 / (alpha_{t|s} sigma_t) eps_hat.
ReverseMean reverse_mean(const LatentState &state, const NoisePrediction &eps,
                         int s_idx, const NoiseSchedule &schedule);

struct ReverseStep {
  LatentState z_s;
  ReverseMean mean;
};

// One ancestral step t -> s = t - 1 with fresh Gaussian noise from `rng`.
ReverseStep reverse_step(const DenoiserParams &params, const LatentState &state,
                         int s_idx, const NoiseSchedule &schedule, Rng &rng);

// Recorded reverse chain. states[k] is z at timestep T - k, so states.front()
// is z_T and states.back() is z_0; means[k] and variances[k] describe the
// transition states[k] -> states[k + 1].
struct Trajectory {
  std::vector<LatentState> states;
  std::vector<MatrixXd> means_x;
  std::vector<MatrixXd> means_h;
  std::vector<double> variances;
  VectorXd condition;
  int num_atoms = 0;

  int T() const { return static_cast<int>(variances.size()); }
  // State at timestep t.
  const LatentState &at(int t) const { return states.at(states.size() - 1 - t); }
};

// Gaussian draws consumed by one sampling run: z_T, then one pair per step
// from t = T down to 1. Coordinate parts are projected to zero CoG on use.
struct SamplerNoise {
  std::vector<MatrixXd> x;
  std::vector<MatrixXd> h;
};

SamplerNoise draw_sampler_noise(int num_atoms, int num_types, int T, Rng &rng);

struct SampleResult {
  MolecularConfig molecule;
  std::optional<Trajectory> trajectory;
};

// Runs t = T..1 and decodes z_0: atom types by arg-max over the feature
// block, coordinates as z_0^x / alpha_0.
SampleResult sample_molecule(const DenoiserParams &params,
                             const VectorXd &condition, int num_atoms,
                             const NoiseSchedule &schedule,
                             const AtomVocabulary &vocab, Rng &rng,
                             bool record);

SampleResult sample_with_noise(const DenoiserParams &params,
                               const VectorXd &condition, int num_atoms,
                               const NoiseSchedule &schedule,
                               const AtomVocabulary &vocab,
                               const SamplerNoise &noise, bool record);

// Samples many molecules at once, one network call per timestep for the
// whole batch. Molecule k consumes only noise[k], so its result matches
// sample_with_noise on the same draws up to summation order.
std::vector<SampleResult>
sample_batch(const DenoiserParams &params, std::span<const VectorXd> conditions,
             std::span<const int> sizes, const NoiseSchedule &schedule,
             const AtomVocabulary &vocab, std::span<const SamplerNoise> noise,
             bool record);

MolecularConfig decode(const LatentState &z0, const NoiseSchedule &schedule,
                       const AtomVocabulary &vocab);

// Effective dimension (M - 1) * 3 + M * d_h of one transition.
int transition_dimension(int num_atoms, int num_types);

// -(d/2) log(2 pi variance) - sq_dist / (2 variance). Throws kNumeric for a
// non-positive or non-finite variance.
double gaussian_log_density(double sq_dist, double variance, int dimension);

double transition_log_density(const MatrixXd &z_x, const MatrixXd &z_h,
                              const MatrixXd &mu_x, const MatrixXd &mu_h,
                              double variance);

// Log density of every transition of `trajectory` under `params`.
std::vector<double> trajectory_log_densities(const DenoiserParams &params,
                                             const Trajectory &trajectory,
                                             const NoiseSchedule &schedule);

// Differentiable log densities of the transitions t -> t - 1 for a batch of
// trajectories, all at the same t. Returns a B x 1 node.
ad::Var batch_transition_log_density(ad::Tape &tape, const BoundParams &params,
                                     std::span<const Trajectory *const> batch,
                                     int t, const NoiseSchedule &schedule);

// Joint empirical distribution over (binned condition, atom count).
class ConditionSizeDistribution {
public:
  struct Cell {
    std::vector<int> bins;
    int num_atoms = 0;
    long long count = 0;
    VectorXd condition;  // mean condition of the members
  };

  // Each condition coordinate is split into `bins` uniform bins spanning the
  // observed range. Throws kConfig on an empty input.
  static ConditionSizeDistribution fit(std::span<const VectorXd> conditions,
                                       std::span<const int> sizes, int bins = 10);

  struct Draw {
    VectorXd condition;
    int num_atoms;
  };
  Draw draw(Rng &rng) const;

  const std::vector<Cell> &cells() const { return cells_; }
  double probability(std::size_t cell) const;
  long long total() const { return total_; }

private:
  std::vector<Cell> cells_;
  long long total_ = 0;
};

// Debug dump of a trajectory in the checkpoint container format.
void write_trajectory(const std::filesystem::path &path,
                      const Trajectory &trajectory);
Trajectory read_trajectory(const std::filesystem::path &path);

}  // namespace molrl

#endif  // MOLRL_DIFFUSION_H_
