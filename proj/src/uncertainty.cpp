//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/uncertainty.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>
#include <fmt/format.h>

#include "molrl/error.h"

namespace molrl {

double PropertyEstimate::sigma() const {
  const double var = total_variance();
  if (!(var >= 0) || !std::isfinite(var) || !std::isfinite(mean))
    fail(ErrorKind::kNumeric, "property estimate is not finite or has negative variance");
  return std::max(std::sqrt(var), kSigmaFloor);
}

PropertyEstimate nig_to_estimate(const NigParams &nig) {
  if (!(nig.alpha > 1))
    fail(ErrorKind::kDomain,
         fmt::format("NIG alpha must exceed 1, got {}", nig.alpha));
  if (!(nig.nu > 0) || !(nig.beta > 0))
    fail(ErrorKind::kDomain, "NIG nu and beta must be positive");
  PropertyEstimate e;
  e.mean = nig.gamma_mean;
  e.var_aleatoric = nig.beta / (nig.alpha - 1);
  e.var_epistemic = nig.beta / (nig.nu * (nig.alpha - 1));
  return e;
}

double normal_upper_tail(double z) {
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

double single_objective_prob(const PropertyEstimate &est,
                             const ObjectiveSpec &spec) {
  if (spec.direction != 1 && spec.direction != -1)
    fail(ErrorKind::kConfig,
         fmt::format("objective '{}' direction must be +1 or -1", spec.name));
  const double sigma = est.sigma();
  // Written so that mean == cutoff hits erfc(0) exactly.
  const double z = spec.direction > 0 ? (spec.cutoff - est.mean) / sigma
                                      : (est.mean - spec.cutoff) / sigma;
  return normal_upper_tail(z);
}

double multi_objective_prob(std::span<const PropertyEstimate> ests,
                            std::span<const ObjectiveSpec> specs) {
  if (ests.size() != specs.size() || ests.empty())
    fail(ErrorKind::kShape,
         fmt::format("{} estimates for {} objectives", ests.size(), specs.size()));
  double p = 1;
  for (std::size_t k = 0; k < ests.size(); ++k)
    p *= single_objective_prob(ests[k], specs[k]);
  return p;
}

// -- synthetic oracle ----------------------------------------------------------

SyntheticOracle::SyntheticOracle(AtomVocabulary vocab, SyntheticOracleConfig config)
    : vocab_(std::move(vocab)), config_(std::move(config)) {
  if (config_.aleatoric_variance.size() != 3 || config_.epistemic_scale.size() != 3)
    fail(ErrorKind::kConfig, "synthetic oracle needs three noise entries per list");
  for (std::size_t k = 0; k < 3; ++k)
    if (!(config_.aleatoric_variance[k] >= 0) || !(config_.epistemic_scale[k] >= 0))
      fail(ErrorKind::kConfig, "synthetic oracle variances must be non-negative");
}

std::vector<std::string> SyntheticOracle::property_names() const {
  return { "pseudo_qed", "pseudo_sas", "pseudo_affinity" };
}

std::vector<double> SyntheticOracle::raw_values(const MolecularConfig &molecule,
                                                const AtomVocabulary &vocab) {
  validate(molecule, vocab);
  const MolecularGraph g = infer_bonds(molecule, vocab);
  const int m = molecule.size();

  int hetero = 0;
  int degree_sum = 0;
  for (int i = 0; i < m; ++i) {
    hetero += molecule.atoms[i] != Element::kC;
    degree_sum += g.degree(i);
  }
  const double frac = static_cast<double>(hetero) / m;
  const double qed = 1.0 / (1.0 + std::exp(-(2.0 * frac - 0.5)));
  const double sas = 1.0 + g.ring_count() + 0.5 * static_cast<double>(degree_sum) / m;

  const Eigen::MatrixXd c = project_to_zero_cog(molecule.coords);
  const double rg = std::sqrt(c.rowwise().squaredNorm().mean());
  return { qed, sas, -rg };
}

std::vector<PropertyEstimate>
SyntheticOracle::predict(const MolecularConfig &molecule) const {
  const auto raw = raw_values(molecule, vocab_);
  std::vector<PropertyEstimate> out(3);
  for (std::size_t k = 0; k < 3; ++k) {
    out[k].mean = raw[k];
    out[k].var_aleatoric = config_.aleatoric_variance[k];
    out[k].var_epistemic = config_.epistemic_scale[k] / (1.0 + molecule.size());
  }
  return out;
}

// -- table oracle --------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',')
    cells.emplace_back();
  return cells;
}

double parse_double(const std::string &text, const std::string &where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size())
      throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception &) {
    fail(ErrorKind::kParse, fmt::format("{}: '{}' is not a number", where, text));
  }
}

}  // namespace

std::string hash_hex(std::uint64_t hash) { return fmt::format("{:016x}", hash); }

TableOracle::TableOracle(const std::filesystem::path &csv, AtomVocabulary vocab)
    : vocab_(std::move(vocab)) {
  std::ifstream in(csv);
  if (!in)
    fail(ErrorKind::kIo, "cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorKind::kParse, csv.string() + ": empty table");
  const auto header = split_csv(line);
  if (header.size() < 4 || (header.size() - 1) % 3 != 0 || header[0] != "hash")
    fail(ErrorKind::kParse, csv.string() + ": header must be hash followed by "
                                           "<p>_mean,<p>_var_aleatoric,<p>_var_epistemic");
  for (std::size_t c = 1; c < header.size(); c += 3) {
    const std::string &h = header[c];
    if (!h.ends_with("_mean"))
      fail(ErrorKind::kParse, csv.string() + ": expected a _mean column, got " + h);
    const std::string name = h.substr(0, h.size() - 5);
    if (header[c + 1] != name + "_var_aleatoric" || header[c + 2] != name + "_var_epistemic")
      fail(ErrorKind::kParse, csv.string() + ": variance columns for " + name);
    names_.push_back(name);
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const auto cells = split_csv(line);
    const std::string where = fmt::format("{}:{}", csv.string(), lineno);
    if (cells.size() != header.size())
      fail(ErrorKind::kParse, where + ": wrong number of columns");
    std::uint64_t hash = 0;
    try {
      std::size_t used = 0;
      hash = std::stoull(cells[0], &used, 16);
      if (used != cells[0].size())
        throw std::invalid_argument("trailing");
    } catch (const std::exception &) {
      fail(ErrorKind::kParse, where + ": bad hash '" + cells[0] + "'");
    }
    std::vector<PropertyEstimate> est(names_.size());
    for (std::size_t p = 0; p < names_.size(); ++p) {
      est[p].mean = parse_double(cells[1 + 3 * p], where);
      est[p].var_aleatoric = parse_double(cells[2 + 3 * p], where);
      est[p].var_epistemic = parse_double(cells[3 + 3 * p], where);
      if (est[p].var_aleatoric < 0 || est[p].var_epistemic < 0)
        fail(ErrorKind::kParse, where + ": negative variance");
    }
    if (!rows_.emplace(hash, std::move(est)).second)
      fail(ErrorKind::kParse, where + ": duplicate hash");
  }
}

std::vector<std::string> TableOracle::property_names() const { return names_; }

std::vector<PropertyEstimate>
TableOracle::predict(const MolecularConfig &molecule) const {
  validate(molecule, vocab_);
  const auto hash = canonical_hash(infer_bonds(molecule, vocab_));
  const auto it = rows_.find(hash);
  if (it == rows_.end())
    fail(ErrorKind::kDomain, "molecule " + hash_hex(hash) + " is not in the property table");
  return it->second;
}

// -- calibration statistics ----------------------------------------------------

double r_squared(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.size() < 2)
    fail(ErrorKind::kShape, "r_squared needs two equal-length series of length >= 2");
  double mean = 0;
  for (double y: truth)
    mean += y;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  if (ss_tot == 0)
    fail(ErrorKind::kDegenerate, "r_squared is undefined for constant truth");
  return 1.0 - ss_res / ss_tot;
}

std::vector<std::pair<double, double>>
calibration_curve(std::span<const double> truth, std::span<const double> means,
                  std::span<const double> sigmas, int levels) {
  if (truth.size() != means.size() || truth.size() != sigmas.size() || truth.empty())
    fail(ErrorKind::kShape, "calibration needs equal-length, non-empty series");
  if (levels < 2)
    fail(ErrorKind::kConfig, "calibration needs at least two levels");
  for (double s: sigmas)
    if (!(s > 0) || !std::isfinite(s))
      fail(ErrorKind::kDomain, "calibration sigmas must be positive and finite");

  const double n = static_cast<double>(truth.size());
  std::vector<std::pair<double, double>> curve;
  curve.reserve(static_cast<std::size_t>(levels));
  for (int k = 0; k < levels; ++k) {
    const double c = static_cast<double>(k) / (levels - 1);
    if (k == levels - 1) {
      curve.emplace_back(c, 1.0);
      continue;
    }
    const double z = std::numbers::sqrt2 * boost::math::erf_inv(c);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      inside += std::abs(truth[i] - means[i]) <= z * sigmas[i];
    curve.emplace_back(c, static_cast<double>(inside) / n);
  }
  return curve;
}

double auce(std::span<const double> truth, std::span<const double> means,
            std::span<const double> sigmas, int levels) {
  const auto curve = calibration_curve(truth, means, sigmas, levels);
  double area = 0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const double a = std::abs(curve[k - 1].second - curve[k - 1].first);
    const double b = std::abs(curve[k].second - curve[k].first);
    area += 0.5 * (a + b) * (curve[k].first - curve[k - 1].first);
  }
  return area;
}

Eigen::MatrixXd pearson_matrix(const Eigen::MatrixXd &table) {
  if (table.rows() < 2)
    fail(ErrorKind::kShape, "correlation needs at least two rows");
  if (!table.allFinite())
    fail(ErrorKind::kNumeric, "correlation input is not finite");
  Eigen::MatrixXd c = table.rowwise() - table.colwise().mean();
  Eigen::VectorXd norms = c.colwise().norm();
  for (Eigen::Index j = 0; j < norms.size(); ++j)
    if (norms(j) == 0)
      fail(ErrorKind::kDegenerate,
           fmt::format("correlation column {} is constant", j));
  Eigen::MatrixXd r = c.transpose() * c;
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      r(i, j) = i == j ? 1.0 : std::clamp(r(i, j) / (norms(i) * norms(j)), -1.0, 1.0);
  return r;
}

}  // namespace molrl
