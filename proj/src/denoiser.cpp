//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/denoiser.h"

#include <cmath>

#include <fmt/format.h>

#include "molrl/error.h"
#include "molrl/schedule.h"

namespace molrl {

namespace {

// Tensors per message-passing layer and their storage offset.
constexpr int kPerLayer = 12;
constexpr int kEmbed = 0;  // embed.w, embed.b come first
constexpr int kFirstLayer = 2;

// Keeps d/d(d2) of sqrt finite when two atoms coincide.
constexpr double kDistanceEps = 1e-12;

struct Shape {
  std::string name;
  Eigen::Index rows, cols;
};

std::vector<Shape> expected_shapes(const DenoiserConfig &c) {
  const Eigen::Index H = c.hidden;
  std::vector<Shape> out;
  out.push_back({ "embed.w", c.input_width(), H });
  out.push_back({ "embed.b", 1, H });
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = fmt::format("layer{}.", l);
    out.push_back({ p + "edge1.w", 2 * H + 1, H });
    out.push_back({ p + "edge1.b", 1, H });
    out.push_back({ p + "edge2.w", H, H });
    out.push_back({ p + "edge2.b", 1, H });
    out.push_back({ p + "coord1.w", H, H });
    out.push_back({ p + "coord1.b", 1, H });
    out.push_back({ p + "coord2.w", H, 1 });
    out.push_back({ p + "coord2.b", 1, 1 });
    out.push_back({ p + "node1.w", 2 * H, H });
    out.push_back({ p + "node1.b", 1, H });
    out.push_back({ p + "node2.w", H, H });
    out.push_back({ p + "node2.b", 1, H });
  }
  out.push_back({ "out.w", H, c.num_atom_types });
  out.push_back({ "out.b", 1, c.num_atom_types });
  return out;
}

void check_config(const DenoiserConfig &c) {
  if (c.num_atom_types < 1 || c.condition_dim < 0 || c.layers < 1
      || c.hidden < 1 || c.time_steps < 1 || !(c.feature_scale > 0)
      || !(c.coord_range > 0) || !(c.schedule_s > 0 && c.schedule_s < 0.5))
    fail(ErrorKind::kConfig,
         fmt::format("invalid denoiser config: atom types {}, condition {}, "
                     "layers {}, hidden {}, time steps {}, feature scale {}, "
                     "coordinate range {}",
                     c.num_atom_types, c.condition_dim, c.layers, c.hidden,
                     c.time_steps, c.feature_scale, c.coord_range));
}

void check_state(const DenoiserConfig &c, const LatentState &s) {
  if (s.z_x.rows() < 1 || s.z_x.cols() != 3)
    fail(ErrorKind::kModel,
         fmt::format("latent coordinates must be M x 3 with M >= 1, got {}x{}",
                     s.z_x.rows(), s.z_x.cols()));
  if (s.z_h.rows() != s.z_x.rows() || s.z_h.cols() != c.num_atom_types)
    fail(ErrorKind::kModel,
         fmt::format("latent features must be {}x{}, got {}x{}", s.z_x.rows(),
                     c.num_atom_types, s.z_h.rows(), s.z_h.cols()));
  if (s.condition.size() != c.condition_dim)
    fail(ErrorKind::kModel,
         fmt::format("condition width {} does not match the model's {}",
                     s.condition.size(), c.condition_dim));
  if (s.t < 0 || s.t > c.time_steps)
    fail(ErrorKind::kModel, fmt::format("timestep {} outside 0..{}", s.t,
                                        c.time_steps));
  if (!s.z_x.allFinite() || !s.z_h.allFinite() || !s.condition.allFinite())
    fail(ErrorKind::kModel, "latent state has non-finite entries");
}

ad::Var linear(const ad::Var &x, const ad::Var &w, const ad::Var &b) {
  return ad::add_row(ad::matmul(x, w), b);
}

}  // namespace

std::string_view output_mode_name(OutputMode mode) {
  return mode == OutputMode::kNoise ? "noise" : "velocity";
}

OutputMode output_mode_from_name(std::string_view name) {
  if (name == "noise")
    return OutputMode::kNoise;
  if (name == "velocity")
    return OutputMode::kVelocity;
  fail(ErrorKind::kConfig, "unknown denoiser output mode '" + std::string(name)
                               + "' (expected noise or velocity)");
}

std::size_t DenoiserParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto &t: tensors)
    n += static_cast<std::size_t>(t.size());
  return n;
}

int DenoiserParams::index_of(const std::string &name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name)
      return static_cast<int>(k);
  fail(ErrorKind::kModel, "no parameter tensor named " + name);
}

bool DenoiserParams::all_finite() const {
  for (const auto &t: tensors)
    if (!t.allFinite())
      return false;
  return true;
}

GradientBundle GradientBundle::zeros_like(const DenoiserParams &params) {
  GradientBundle g;
  for (const auto &t: params.tensors)
    g.tensors.push_back(MatrixXd::Zero(t.rows(), t.cols()));
  return g;
}

void GradientBundle::add(const GradientBundle &other) {
  if (other.tensors.size() != tensors.size())
    fail(ErrorKind::kShape, "gradient bundles differ in tensor count");
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    if (tensors[k].rows() != other.tensors[k].rows()
        || tensors[k].cols() != other.tensors[k].cols())
      fail(ErrorKind::kShape, "gradient bundles differ in tensor shape");
    tensors[k] += other.tensors[k];
  }
}

void GradientBundle::scale(double c) {
  for (auto &t: tensors)
    t *= c;
}

bool GradientBundle::matches(const DenoiserParams &params) const {
  if (tensors.size() != params.tensors.size())
    return false;
  for (std::size_t k = 0; k < tensors.size(); ++k)
    if (tensors[k].rows() != params.tensors[k].rows()
        || tensors[k].cols() != params.tensors[k].cols())
      return false;
  return true;
}

bool GradientBundle::all_finite() const {
  for (const auto &t: tensors)
    if (!t.allFinite())
      return false;
  return true;
}

DenoiserParams init_denoiser(const DenoiserConfig &config, Rng &rng) {
  check_config(config);
  DenoiserParams p;
  p.config = config;
  // A bias shares the bound of the weight matrix that precedes it.
  double bound = 0;
  for (const Shape &s: expected_shapes(config)) {
    const bool is_bias = s.name.ends_with(".b");
    if (!is_bias)
      bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
    MatrixXd m(s.rows, s.cols);
    if (s.name.find("coord2.") != std::string::npos) {
      m.setZero();
    } else {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
          m(i, j) = (2.0 * uniform01(rng) - 1.0) * bound;
    }
    p.names.push_back(s.name);
    p.tensors.push_back(std::move(m));
  }
  return p;
}

void check_denoiser_shapes(const DenoiserParams &params) {
  check_config(params.config);
  auto shapes = expected_shapes(params.config);
  if (shapes.size() != params.tensors.size()
      || shapes.size() != params.names.size())
    fail(ErrorKind::kModel,
         fmt::format("expected {} parameter tensors, found {}", shapes.size(),
                     params.tensors.size()));
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto &t = params.tensors[k];
    if (params.names[k] != shapes[k].name || t.rows() != shapes[k].rows
        || t.cols() != shapes[k].cols)
      fail(ErrorKind::kModel,
           fmt::format("parameter {} is {} {}x{}, expected {} {}x{}", k,
                       params.names[k], t.rows(), t.cols(), shapes[k].name,
                       shapes[k].rows, shapes[k].cols));
  }
}

BoundParams bind_params(ad::Tape &tape, const DenoiserParams &params) {
  BoundParams b;
  b.config = &params.config;
  b.vars.reserve(params.tensors.size());
  for (const auto &t: params.tensors)
    b.vars.push_back(tape.variable(t));
  return b;
}

BatchPrediction denoiser_forward(ad::Tape &tape, const BoundParams &params,
                                 std::span<const LatentState> states) {
  const DenoiserConfig &c = *params.config;
  if (states.empty())
    fail(ErrorKind::kModel, "denoiser called on an empty batch");
  if (params.vars.size() != static_cast<std::size_t>(4 + kPerLayer * c.layers))
    fail(ErrorKind::kModel, "bound parameters do not match the config");

  BatchPrediction out;
  out.offsets.push_back(0);
  for (const auto &s: states) {
    check_state(c, s);
    out.offsets.push_back(out.offsets.back() + s.size());
  }
  const int n = out.offsets.back();

  MatrixXd x0(n, 3), hin(n, c.input_width());
  std::vector<int> src, dst;
  for (std::size_t g = 0; g < states.size(); ++g) {
    const LatentState &s = states[g];
    const int b = out.offsets[g], m = s.size();
    x0.middleRows(b, m) = s.z_x.rowwise() - s.z_x.colwise().mean();
    hin.block(b, 0, m, c.num_atom_types) = s.z_h;
    hin.block(b, c.num_atom_types, m, 1).setConstant(
        static_cast<double>(s.t) / c.time_steps);
    for (int k = 0; k < c.condition_dim; ++k)
      hin.block(b, c.num_atom_types + 1 + k, m, 1).setConstant(s.condition[k]);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (i != j) {
          src.push_back(b + i);
          dst.push_back(b + j);
        }
  }

  const auto &P = params.vars;
  tape.set_scope("denoiser embedding");
  ad::Var x_init = tape.constant(x0);
  ad::Var x = x_init;
  ad::Var h = linear(tape.constant(hin), P[kEmbed], P[kEmbed + 1]);

  for (int l = 0; l < c.layers; ++l) {
    const ad::Var *W = &P[kFirstLayer + kPerLayer * l];
    tape.set_scope(fmt::format("denoiser layer {} edge network", l));
    ad::Var diff = ad::gather_rows(x, src) - ad::gather_rows(x, dst);
    ad::Var d2 = ad::row_sum(ad::square(diff));
    ad::Var e_parts[] = { ad::gather_rows(h, src), ad::gather_rows(h, dst), d2 };
    ad::Var m = ad::silu(linear(ad::hcat(e_parts), W[0], W[1]));
    m = ad::silu(linear(m, W[2], W[3]));

    tape.set_scope(fmt::format("denoiser layer {} coordinate network", l));
    ad::Var phi = ad::tanh(linear(ad::silu(linear(m, W[4], W[5])), W[6], W[7]))
                  * (c.coord_range / c.layers);
    ad::Var inv = ad::reciprocal(ad::sqrt(d2 + kDistanceEps) + 1.0);
    ad::Var shift = ad::scale_rows(diff, phi * inv);
    x = x + ad::scatter_add_rows(shift, src, n);

    tape.set_scope(fmt::format("denoiser layer {} node network", l));
    ad::Var n_parts[] = { h, ad::scatter_add_rows(m, src, n) };
    ad::Var dh = linear(ad::silu(linear(ad::hcat(n_parts), W[8], W[9])), W[10],
                        W[11]);
    h = h + dh;
  }

  tape.set_scope("denoiser output");
  const std::size_t last = P.size() - 2;
  ad::Var head_x = ad::center_segments(x - x_init, out.offsets);
  ad::Var head_h = linear(h, P[last], P[last + 1]);
  if (c.output == OutputMode::kNoise) {
    out.eps_x = head_x;
    out.eps_h = head_h;
    return out;
  }

  MatrixXd alpha(n, 1), sigma_zx(n, 3), sigma_zh(n, c.num_atom_types);
  for (std::size_t g = 0; g < states.size(); ++g) {
    const LatentState &s = states[g];
    const int b = out.offsets[g], m = s.size();
    const double a = schedule_alpha(s.t, c.time_steps, c.schedule_s);
    const double sg = std::sqrt(1.0 - a * a);
    alpha.middleRows(b, m).setConstant(a);
    sigma_zx.middleRows(b, m) = sg * x0.middleRows(b, m);
    sigma_zh.middleRows(b, m) = sg * s.z_h;
  }
  ad::Var alpha_v = tape.constant(alpha);
  out.eps_x = tape.constant(sigma_zx) + ad::scale_rows(head_x, alpha_v);
  out.eps_h = tape.constant(sigma_zh) + ad::scale_rows(head_h, alpha_v);
  return out;
}

std::vector<NoisePrediction>
predict_noise_batch(const DenoiserParams &params,
                    std::span<const LatentState> states) {
  ad::Tape tape(false);
  BoundParams bound;
  bound.config = &params.config;
  for (const auto &t: params.tensors)
    bound.vars.push_back(tape.constant(t));
  BatchPrediction pred = denoiser_forward(tape, bound, states);
  std::vector<NoisePrediction> out;
  out.reserve(states.size());
  for (std::size_t g = 0; g < states.size(); ++g) {
    const int b = pred.offsets[g], m = pred.offsets[g + 1] - b;
    out.push_back({ pred.eps_x.value().middleRows(b, m),
                    pred.eps_h.value().middleRows(b, m) });
  }
  return out;
}

NoisePrediction predict_noise(const DenoiserParams &params,
                              const LatentState &state) {
  return predict_noise_batch(params, std::span<const LatentState>(&state, 1))
      .front();
}

LossAndGrad grad(const DenoiserParams &params, const LossClosure &closure) {
  ad::Tape tape;
  BoundParams bound = bind_params(tape, params);
  ad::Var loss = closure(tape, bound);
  if (loss.rows() != 1 || loss.cols() != 1)
    fail(ErrorKind::kShape, "loss closure must return a 1x1 value");
  tape.backward(loss);
  LossAndGrad out;
  out.loss = loss.scalar();
  for (const auto &v: bound.vars)
    out.grad.tensors.push_back(tape.grad(v));
  return out;
}

AdamState AdamState::zeros_like(const DenoiserParams &params) {
  AdamState s;
  for (const auto &t: params.tensors) {
    s.m.push_back(MatrixXd::Zero(t.rows(), t.cols()));
    s.v.push_back(MatrixXd::Zero(t.rows(), t.cols()));
  }
  return s;
}

void adam_step(DenoiserParams &params, const GradientBundle &grads,
               AdamState &state, double lr, const AdamConfig &config) {
  if (!grads.matches(params))
    fail(ErrorKind::kShape, "gradient shapes do not match the parameters");
  if (state.m.empty() && state.step == 0)
    state = AdamState::zeros_like(params);
  if (state.m.size() != params.tensors.size()
      || state.v.size() != params.tensors.size())
    fail(ErrorKind::kShape, "optimizer state does not match the parameters");
  if (!grads.all_finite())
    fail(ErrorKind::kNumeric, "non-finite gradient passed to the optimizer");

  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    const MatrixXd &g = grads.tensors[k];
    state.m[k] = config.beta1 * state.m[k] + (1.0 - config.beta1) * g;
    state.v[k] = config.beta2 * state.v[k]
                 + (1.0 - config.beta2) * g.cwiseProduct(g);
    params.tensors[k].array() -=
        lr * (state.m[k].array() / c1)
        / ((state.v[k].array() / c2).sqrt() + config.eps);
  }
}

}  // namespace molrl
