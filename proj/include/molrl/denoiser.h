//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_DENOISER_H_
#define MOLRL_DENOISER_H_

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "molrl/autodiff.h"
#include "molrl/random.h"

namespace molrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Noisy latent for one molecule: coordinates (zero-CoG) and the feature block
// (one column per vocabulary entry) at timestep t, plus the property
// condition the network sees.
struct LatentState {
  MatrixXd z_x;
  MatrixXd z_h;
  int t = 0;
  VectorXd condition;

  int size() const { return static_cast<int>(z_x.rows()); }
};

// How the network head maps to predicted noise. kNoise reads eps directly
// off the head. kVelocity reads u and returns eps = sigma_t z_t + alpha_t u,
// which keeps the implied data estimate bounded where alpha_t is tiny.
enum class OutputMode { kNoise, kVelocity };

std::string_view output_mode_name(OutputMode mode);
OutputMode output_mode_from_name(std::string_view name);

struct DenoiserConfig {
  int num_atom_types = 0;
  int condition_dim = 0;
  int layers = 3;
  int hidden = 64;
  // Schedule the model is trained against; t/T is the time input.
  int time_steps = 0;
  double schedule_s = 1e-5;
  OutputMode output = OutputMode::kVelocity;
  // One-hot features enter the latent scaled by this factor.
  double feature_scale = 0.25;
  // Bound on the total coordinate displacement summed over layers; each
  // layer's coordinate weight is range / layers * tanh(.).
  double coord_range = 15.0;

  int input_width() const { return num_atom_types + 1 + condition_dim; }
  bool operator==(const DenoiserConfig &) const = default;
};

// Named weight matrices in a fixed order. Biases are 1 x n rows.
struct DenoiserParams {
  DenoiserConfig config;
  std::vector<std::string> names;
  std::vector<MatrixXd> tensors;

  std::size_t num_scalars() const;
  int index_of(const std::string &name) const;
  bool all_finite() const;
};

// d(loss)/d(params), shaped like the tensors of a DenoiserParams.
struct GradientBundle {
  std::vector<MatrixXd> tensors;

  static GradientBundle zeros_like(const DenoiserParams &params);
  void add(const GradientBundle &other);
  void scale(double c);
  bool matches(const DenoiserParams &params) const;
  bool all_finite() const;
};

// Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the last
// layer of every coordinate network starts at zero, so the untrained head
// adds no coordinate term.
DenoiserParams init_denoiser(const DenoiserConfig &config, Rng &rng);

// Throws kModel unless every tensor has the shape `config` implies.
void check_denoiser_shapes(const DenoiserParams &params);

struct NoisePrediction {
  MatrixXd eps_x;
  MatrixXd eps_h;
};

// Single-molecule prediction. Coordinates are projected to zero CoG before
// use, so translating the input leaves the output unchanged.
NoisePrediction predict_noise(const DenoiserParams &params,
                              const LatentState &state);

// Batched forward pass; element k equals predict_noise(params, states[k]) up
// to floating-point summation order.
std::vector<NoisePrediction>
predict_noise_batch(const DenoiserParams &params,
                    std::span<const LatentState> states);

// -- differentiable path -----------------------------------------------------

// Parameters registered on a tape, in DenoiserParams order.
struct BoundParams {
  const DenoiserConfig *config = nullptr;
  std::vector<ad::Var> vars;
};

BoundParams bind_params(ad::Tape &tape, const DenoiserParams &params);

// Output for a batch of molecules stacked row-wise; segment g covers rows
// [offsets[g], offsets[g+1]).
struct BatchPrediction {
  ad::Var eps_x;
  ad::Var eps_h;
  std::vector<int> offsets;
};

BatchPrediction denoiser_forward(ad::Tape &tape, const BoundParams &params,
                                 std::span<const LatentState> states);

struct LossAndGrad {
  double loss = 0;
  GradientBundle grad;
};

using LossClosure = std::function<ad::Var(ad::Tape &, const BoundParams &)>;

// Runs `closure` on a recording tape and returns its scalar value together
// with reverse-mode derivatives for every parameter.
LossAndGrad grad(const DenoiserParams &params, const LossClosure &closure);

// -- optimizer ---------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long long step = 0;
  std::vector<MatrixXd> m;
  std::vector<MatrixXd> v;

  static AdamState zeros_like(const DenoiserParams &params);
};

// One bias-corrected Adam update. Shape mismatches throw kShape.
void adam_step(DenoiserParams &params, const GradientBundle &grads,
               AdamState &state, double lr, const AdamConfig &config = {});

}  // namespace molrl

#endif  // MOLRL_DENOISER_H_
