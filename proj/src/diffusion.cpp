//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/diffusion.h"

#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "molrl/checkpoint.h"
#include "molrl/error.h"

namespace molrl {

namespace {

MatrixXd centered(const MatrixXd &x) {
  if (x.rows() == 0)
    return x;
  return x.rowwise() - x.colwise().mean();
}

void check_timestep(int t, const NoiseSchedule &schedule) {
  if (t < 1 || t > schedule.T())
    fail(ErrorKind::kOrdering,
         fmt::format("timestep {} outside 1..{}", t, schedule.T()));
}

}  // namespace

DataPoint encode(const MolecularConfig &config, const AtomVocabulary &vocab,
                 double feature_scale) {
  validate(config, vocab);
  DataPoint d;
  d.x = project_to_zero_cog(config.coords);
  d.h = MatrixXd::Zero(config.size(), vocab.size());
  for (int i = 0; i < config.size(); ++i)
    d.h(i, vocab.index_of(config.atoms[i])) = feature_scale;
  return d;
}

LatentState noise_data(const DataPoint &data, int t, const NoiseSchedule &schedule,
                       const MatrixXd &eps_x, const MatrixXd &eps_h,
                       const VectorXd &condition) {
  if (eps_x.rows() != data.x.rows() || eps_x.cols() != 3
      || eps_h.rows() != data.h.rows() || eps_h.cols() != data.h.cols())
    fail(ErrorKind::kShape, "noise shape does not match the data point");
  const double a = schedule.alpha(t), s = schedule.sigma(t);
  LatentState z;
  z.z_x = a * data.x + s * eps_x;
  z.z_h = a * data.h + s * eps_h;
  z.t = t;
  z.condition = condition;
  return z;
}

ForwardSample forward_noise(const MolecularConfig &config, int t,
                            const NoiseSchedule &schedule,
                            const AtomVocabulary &vocab, double feature_scale,
                            Rng &rng) {
  check_timestep(t, schedule);
  DataPoint d = encode(config, vocab, feature_scale);
  ForwardSample out;
  out.eps_x = centered(standard_normal(rng, config.size(), 3));
  out.eps_h = standard_normal(rng, config.size(), vocab.size());
  out.state = noise_data(d, t, schedule, out.eps_x, out.eps_h, config.condition);
  return out;
}

DataPoint data_estimate(const LatentState &state, const MatrixXd &eps_x,
                        const MatrixXd &eps_h, const NoiseSchedule &schedule) {
  const double a = std::max(schedule.alpha(state.t), kScheduleFloor);
  const double s = schedule.sigma(state.t);
  return { state.z_x / a - (s / a) * eps_x, state.z_h / a - (s / a) * eps_h };
}

ReverseMean reverse_mean(const LatentState &state, const NoisePrediction &eps,
                         int s_idx, const NoiseSchedule &schedule) {
  if (s_idx != state.t - 1)
    fail(ErrorKind::kOrdering,
         fmt::format("reverse step must go from t to t - 1, got t={} s={}",
                     state.t, s_idx));
  const StepRatios r = schedule.step_ratios(state.t, s_idx);
  const double sig_t = std::max(schedule.sigma(state.t), kScheduleFloor);
  const double c = r.sigma2_ts / (r.alpha_ts * sig_t);
  ReverseMean m;
  m.mu_x = state.z_x / r.alpha_ts - c * eps.eps_x;
  m.mu_h = state.z_h / r.alpha_ts - c * eps.eps_h;
  m.variance = r.sigma_t_to_s * r.sigma_t_to_s;
  return m;
}

namespace {

LatentState step_from_mean(const ReverseMean &m, const MatrixXd &noise_x,
                           const MatrixXd &noise_h, int s_idx,
                           const VectorXd &condition) {
  const double sd = std::sqrt(m.variance);
  LatentState z;
  z.z_x = centered(m.mu_x + sd * centered(noise_x));
  z.z_h = m.mu_h + sd * noise_h;
  z.t = s_idx;
  z.condition = condition;
  return z;
}

}  // namespace

ReverseStep reverse_step(const DenoiserParams &params, const LatentState &state,
                         int s_idx, const NoiseSchedule &schedule, Rng &rng) {
  if (s_idx != state.t - 1 || state.t < 1 || state.t > schedule.T())
    fail(ErrorKind::kOrdering,
         fmt::format("reverse step must go from t to t - 1 within 1..{}, got "
                     "t={} s={}",
                     schedule.T(), state.t, s_idx));
  NoisePrediction eps = predict_noise(params, state);
  ReverseStep out;
  out.mean = reverse_mean(state, eps, s_idx, schedule);
  MatrixXd nx = standard_normal(rng, state.size(), 3);
  MatrixXd nh = standard_normal(rng, state.size(), state.z_h.cols());
  out.z_s = step_from_mean(out.mean, nx, nh, s_idx, state.condition);
  return out;
}

SamplerNoise draw_sampler_noise(int num_atoms, int num_types, int T, Rng &rng) {
  SamplerNoise n;
  for (int k = 0; k <= T; ++k) {
    n.x.push_back(standard_normal(rng, num_atoms, 3));
    n.h.push_back(standard_normal(rng, num_atoms, num_types));
  }
  return n;
}

MolecularConfig decode(const LatentState &z0, const NoiseSchedule &schedule,
                       const AtomVocabulary &vocab) {
  MolecularConfig m;
  m.coords = centered(z0.z_x) / schedule.alpha(0);
  m.condition = z0.condition;
  for (Eigen::Index i = 0; i < z0.z_h.rows(); ++i) {
    Eigen::Index best = 0;
    z0.z_h.row(i).maxCoeff(&best);
    m.atoms.push_back(vocab.element(static_cast<int>(best)));
  }
  return m;
}

std::vector<SampleResult>
sample_batch(const DenoiserParams &params, std::span<const VectorXd> conditions,
             std::span<const int> sizes, const NoiseSchedule &schedule,
             const AtomVocabulary &vocab, std::span<const SamplerNoise> noise,
             bool record) {
  const std::size_t B = sizes.size();
  const int T = schedule.T();
  if (conditions.size() != B || noise.size() != B)
    fail(ErrorKind::kShape, "sample_batch inputs differ in length");
  if (params.config.time_steps != T || params.config.schedule_s != schedule.s())
    fail(ErrorKind::kModel,
         fmt::format("model was built for T={} s={}, schedule has T={} s={}",
                     params.config.time_steps, params.config.schedule_s, T,
                     schedule.s()));
  if (params.config.num_atom_types != vocab.size())
    fail(ErrorKind::kModel, "vocabulary size differs from the model");

  std::vector<LatentState> states(B);
  std::vector<SampleResult> out(B);
  for (std::size_t k = 0; k < B; ++k) {
    if (sizes[k] < 1)
      fail(ErrorKind::kConfig, "molecules need at least one atom");
    if (noise[k].x.size() != static_cast<std::size_t>(T + 1)
        || noise[k].h.size() != static_cast<std::size_t>(T + 1))
      fail(ErrorKind::kShape, "sampler noise has the wrong number of draws");
    states[k].z_x = centered(noise[k].x[0]);
    states[k].z_h = noise[k].h[0];
    states[k].t = T;
    states[k].condition = conditions[k];
    if (record) {
      Trajectory tr;
      tr.condition = conditions[k];
      tr.num_atoms = sizes[k];
      tr.states.reserve(T + 1);
      tr.states.push_back(states[k]);
      out[k].trajectory = std::move(tr);
    }
  }
  if (B == 0)
    return out;

  for (int t = T; t >= 1; --t) {
    std::vector<NoisePrediction> eps = predict_noise_batch(params, states);
    const std::size_t draw = static_cast<std::size_t>(T - t + 1);
    for (std::size_t k = 0; k < B; ++k) {
      ReverseMean m = reverse_mean(states[k], eps[k], t - 1, schedule);
      states[k] = step_from_mean(m, noise[k].x[draw], noise[k].h[draw], t - 1,
                                 conditions[k]);
      if (record) {
        Trajectory &tr = *out[k].trajectory;
        tr.states.push_back(states[k]);
        tr.means_x.push_back(std::move(m.mu_x));
        tr.means_h.push_back(std::move(m.mu_h));
        tr.variances.push_back(m.variance);
      }
    }
  }
  for (std::size_t k = 0; k < B; ++k)
    out[k].molecule = decode(states[k], schedule, vocab);
  return out;
}

SampleResult sample_with_noise(const DenoiserParams &params,
                               const VectorXd &condition, int num_atoms,
                               const NoiseSchedule &schedule,
                               const AtomVocabulary &vocab,
                               const SamplerNoise &noise, bool record) {
  return sample_batch(params, std::span<const VectorXd>(&condition, 1),
                      std::span<const int>(&num_atoms, 1), schedule, vocab,
                      std::span<const SamplerNoise>(&noise, 1), record)
      .front();
}

SampleResult sample_molecule(const DenoiserParams &params,
                             const VectorXd &condition, int num_atoms,
                             const NoiseSchedule &schedule,
                             const AtomVocabulary &vocab, Rng &rng,
                             bool record) {
  if (num_atoms < 1)
    fail(ErrorKind::kConfig, "molecules need at least one atom");
  SamplerNoise noise =
      draw_sampler_noise(num_atoms, vocab.size(), schedule.T(), rng);
  return sample_with_noise(params, condition, num_atoms, schedule, vocab, noise,
                           record);
}

int transition_dimension(int num_atoms, int num_types) {
  return (num_atoms - 1) * 3 + num_atoms * num_types;
}

double gaussian_log_density(double sq_dist, double variance, int dimension) {
  if (!(variance > 0) || !std::isfinite(variance))
    fail(ErrorKind::kNumeric,
         fmt::format("transition variance must be positive, got {}", variance));
  return -0.5 * dimension * std::log(2.0 * std::numbers::pi * variance)
         - sq_dist / (2.0 * variance);
}

double transition_log_density(const MatrixXd &z_x, const MatrixXd &z_h,
                              const MatrixXd &mu_x, const MatrixXd &mu_h,
                              double variance) {
  if (z_x.rows() != mu_x.rows() || z_x.cols() != mu_x.cols()
      || z_h.rows() != mu_h.rows() || z_h.cols() != mu_h.cols()
      || z_x.rows() != z_h.rows())
    fail(ErrorKind::kShape, "transition density operands differ in shape");
  const double sq = (z_x - mu_x).squaredNorm() + (z_h - mu_h).squaredNorm();
  return gaussian_log_density(
      sq, variance,
      transition_dimension(static_cast<int>(z_x.rows()),
                           static_cast<int>(z_h.cols())));
}

std::vector<double> trajectory_log_densities(const DenoiserParams &params,
                                             const Trajectory &trajectory,
                                             const NoiseSchedule &schedule) {
  std::vector<double> out;
  const int T = trajectory.T();
  if (T != schedule.T())
    fail(ErrorKind::kShape, "trajectory length differs from the schedule");
  for (int t = T; t >= 1; --t) {
    const LatentState &z_t = trajectory.at(t);
    const LatentState &z_s = trajectory.at(t - 1);
    ReverseMean m = reverse_mean(z_t, predict_noise(params, z_t), t - 1, schedule);
    out.push_back(transition_log_density(z_s.z_x, z_s.z_h, m.mu_x, m.mu_h,
                                         m.variance));
  }
  return out;
}

ad::Var batch_transition_log_density(ad::Tape &tape, const BoundParams &params,
                                     std::span<const Trajectory *const> batch,
                                     int t, const NoiseSchedule &schedule) {
  check_timestep(t, schedule);
  if (batch.empty())
    fail(ErrorKind::kShape, "empty trajectory batch");
  const StepRatios r = schedule.step_ratios(t, t - 1);
  const double variance = r.sigma_t_to_s * r.sigma_t_to_s;
  if (!(variance > 0))
    fail(ErrorKind::kNumeric,
         fmt::format("transition variance at t={} is not positive", t));
  const double c =
      r.sigma2_ts / (r.alpha_ts * std::max(schedule.sigma(t), kScheduleFloor));

  std::vector<LatentState> inputs;
  inputs.reserve(batch.size());
  for (const Trajectory *tr: batch) {
    if (tr->T() != schedule.T())
      fail(ErrorKind::kShape, "trajectory length differs from the schedule");
    inputs.push_back(tr->at(t));
  }
  tape.set_scope(fmt::format("log density t={}", t));
  BatchPrediction pred = denoiser_forward(tape, params, inputs);

  const int n = pred.offsets.back();
  const int types = params.config->num_atom_types;
  // z_s - mu = (z_s - z_t / alpha_ts) + c * eps_hat.
  MatrixXd base_x(n, 3), base_h(n, types);
  std::vector<int> owner(n);
  MatrixXd log_norm(static_cast<Eigen::Index>(batch.size()), 1);
  for (std::size_t g = 0; g < batch.size(); ++g) {
    const LatentState &z_t = batch[g]->at(t);
    const LatentState &z_s = batch[g]->at(t - 1);
    const int b = pred.offsets[g], m = z_t.size();
    base_x.middleRows(b, m) = z_s.z_x - z_t.z_x / r.alpha_ts;
    base_h.middleRows(b, m) = z_s.z_h - z_t.z_h / r.alpha_ts;
    for (int i = 0; i < m; ++i)
      owner[b + i] = static_cast<int>(g);
    log_norm(static_cast<Eigen::Index>(g), 0) =
        -0.5 * transition_dimension(m, types)
        * std::log(2.0 * std::numbers::pi * variance);
  }
  ad::Var dx = tape.constant(base_x) + pred.eps_x * c;
  ad::Var dh = tape.constant(base_h) + pred.eps_h * c;
  ad::Var sq = ad::row_sum(ad::square(dx)) + ad::row_sum(ad::square(dh));
  ad::Var per_mol = ad::scatter_add_rows(
      sq, owner, static_cast<Eigen::Index>(batch.size()));
  return tape.constant(log_norm) + per_mol * (-0.5 / variance);
}

ConditionSizeDistribution
ConditionSizeDistribution::fit(std::span<const VectorXd> conditions,
                               std::span<const int> sizes, int bins) {
  if (conditions.empty() || conditions.size() != sizes.size())
    fail(ErrorKind::kConfig,
         "condition/size distribution needs a nonempty, aligned training split");
  if (bins < 1)
    fail(ErrorKind::kConfig, "condition bins must be >= 1");
  const Eigen::Index k = conditions.front().size();
  VectorXd lo = conditions.front(), hi = conditions.front();
  for (const auto &c: conditions) {
    if (c.size() != k)
      fail(ErrorKind::kConfig, "conditions differ in width");
    if (!c.allFinite())
      fail(ErrorKind::kConfig, "non-finite condition value");
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }

  std::map<std::pair<std::vector<int>, int>, Cell> cells;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    std::vector<int> key(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
      const double span = hi[j] - lo[j];
      int b = span > 0 ? static_cast<int>(std::floor((conditions[i][j] - lo[j])
                                                     / span * bins))
                       : 0;
      key[j] = std::clamp(b, 0, bins - 1);
    }
    Cell &cell = cells[{ key, sizes[i] }];
    if (cell.count == 0) {
      cell.bins = key;
      cell.num_atoms = sizes[i];
      cell.condition = VectorXd::Zero(k);
    }
    ++cell.count;
    cell.condition += conditions[i];
  }

  ConditionSizeDistribution d;
  for (auto &[key, cell]: cells) {
    cell.condition /= static_cast<double>(cell.count);
    d.total_ += cell.count;
    d.cells_.push_back(std::move(cell));
  }
  return d;
}

double ConditionSizeDistribution::probability(std::size_t cell) const {
  return static_cast<double>(cells_.at(cell).count) / static_cast<double>(total_);
}

ConditionSizeDistribution::Draw ConditionSizeDistribution::draw(Rng &rng) const {
  if (cells_.empty())
    fail(ErrorKind::kConfig, "draw from an empty condition/size distribution");
  const double u = uniform01(rng) * static_cast<double>(total_);
  double acc = 0;
  for (const Cell &c: cells_) {
    acc += static_cast<double>(c.count);
    if (u < acc)
      return { c.condition, c.num_atoms };
  }
  return { cells_.back().condition, cells_.back().num_atoms };
}

void write_trajectory(const std::filesystem::path &path,
                      const Trajectory &trajectory) {
  Container c;
  c.header["kind"] = "trajectory";
  c.header["num_atoms"] = trajectory.num_atoms;
  c.header["T"] = trajectory.T();
  c.header["variances"] = trajectory.variances;
  c.tensors.push_back({ "condition", trajectory.condition });
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    const LatentState &s = trajectory.states[k];
    c.tensors.push_back({ fmt::format("z_x.{}", s.t), s.z_x });
    c.tensors.push_back({ fmt::format("z_h.{}", s.t), s.z_h });
  }
  for (std::size_t k = 0; k < trajectory.means_x.size(); ++k) {
    c.tensors.push_back({ fmt::format("mu_x.{}", k), trajectory.means_x[k] });
    c.tensors.push_back({ fmt::format("mu_h.{}", k), trajectory.means_h[k] });
  }
  write_container(path, c);
}

Trajectory read_trajectory(const std::filesystem::path &path) {
  Container c = read_container(path);
  Trajectory tr;
  const std::string source = path.string();
  int T = 0;
  try {
    if (c.header.at("kind").get<std::string>() != "trajectory")
      fail(ErrorKind::kParse, source + ": not a trajectory dump");
    tr.num_atoms = c.header.at("num_atoms").get<int>();
    T = c.header.at("T").get<int>();
    tr.variances = c.header.at("variances").get<std::vector<double>>();
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kParse, source + ": bad trajectory header: " + e.what());
  }
  const std::size_t expected = 1 + 2 * static_cast<std::size_t>(T + 1)
                               + 2 * static_cast<std::size_t>(T);
  if (c.tensors.size() != expected
      || tr.variances.size() != static_cast<std::size_t>(T))
    fail(ErrorKind::kParse, source + ": trajectory payload size mismatch");
  tr.condition = c.tensors[0].value;
  std::size_t at = 1;
  for (int k = 0; k <= T; ++k) {
    LatentState s;
    s.z_x = c.tensors[at++].value;
    s.z_h = c.tensors[at++].value;
    s.t = T - k;
    s.condition = tr.condition;
    tr.states.push_back(std::move(s));
  }
  for (int k = 0; k < T; ++k) {
    tr.means_x.push_back(c.tensors[at++].value);
    tr.means_h.push_back(c.tensors[at++].value);
  }
  return tr;
}

}  // namespace molrl
