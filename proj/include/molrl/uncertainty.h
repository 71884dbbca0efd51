//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_UNCERTAINTY_H_
#define MOLRL_UNCERTAINTY_H_

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "molrl/molgraph.h"

namespace molrl {

// Standard deviations below this are raised to it before any tail integral.
inline constexpr double kSigmaFloor = 1e-6;

struct PropertyEstimate {
  double mean = 0;
  double var_aleatoric = 0;
  double var_epistemic = 0;

  double total_variance() const { return var_aleatoric + var_epistemic; }
  // sqrt of the total variance, floored.
  double sigma() const;
};

// Normal-Inverse-Gamma evidential output.
struct NigParams {
  double gamma_mean = 0;
  double nu = 1;
  double alpha = 2;
  double beta = 1;
};

// var_aleatoric = beta / (alpha - 1), var_epistemic = beta / (nu (alpha - 1)).
// Throws kDomain unless alpha > 1, nu > 0 and beta > 0.
PropertyEstimate nig_to_estimate(const NigParams &nig);

struct ObjectiveSpec {
  std::string name;
  int direction = 1;  // +1: higher is better, -1: lower is better
  double cutoff = 0;
};

// Upper tail P(Z >= z) of the standard normal, 0.5 erfc(z / sqrt 2).
double normal_upper_tail(double z);

// direction +1: P(X >= cutoff); direction -1: P(X <= cutoff), with
// X ~ N(mean, sigma^2) and sigma the floored total standard deviation.
double single_objective_prob(const PropertyEstimate &est,
                             const ObjectiveSpec &spec);

// Product of the per-property probabilities. Lengths must match and be >= 1.
double multi_objective_prob(std::span<const PropertyEstimate> ests,
                            std::span<const ObjectiveSpec> specs);

// Deterministic, thread-safe property predictor.
class PropertyOracle {
public:
  virtual ~PropertyOracle() = default;
  virtual std::vector<std::string> property_names() const = 0;
  virtual std::vector<PropertyEstimate>
  predict(const MolecularConfig &molecule) const = 0;
};

// Noise settings of the built-in oracle, one entry per property in the order
// pseudo_qed, pseudo_sas, pseudo_affinity.
struct SyntheticOracleConfig {
  std::vector<double> aleatoric_variance { 0.0025, 0.04, 0.01 };
  // Epistemic variance is scale / (1 + M).
  std::vector<double> epistemic_scale { 0.01, 0.2, 0.05 };
};

// Stand-ins computed from the perceived bond graph and geometry:
//   pseudo_qed      = logistic(2 * heteroatom fraction - 0.5)   (higher better)
//   pseudo_sas      = 1 + ring count + 0.5 * mean degree        (lower better)
//   pseudo_affinity = -radius of gyration in angstrom           (lower better)
class SyntheticOracle final : public PropertyOracle {
public:
  explicit SyntheticOracle(AtomVocabulary vocab,
                           SyntheticOracleConfig config = {});

  std::vector<std::string> property_names() const override;
  std::vector<PropertyEstimate>
  predict(const MolecularConfig &molecule) const override;

  // The three raw values, without noise terms.
  static std::vector<double> raw_values(const MolecularConfig &molecule,
                                        const AtomVocabulary &vocab);

private:
  AtomVocabulary vocab_;
  SyntheticOracleConfig config_;
};

// Estimates looked up by canonical graph hash from a CSV with header
// "hash,<p>_mean,<p>_var_aleatoric,<p>_var_epistemic,..." where hash is the
// 16-digit hex digest. Unknown molecules throw kDomain.
class TableOracle final : public PropertyOracle {
public:
  TableOracle(const std::filesystem::path &csv, AtomVocabulary vocab);

  std::vector<std::string> property_names() const override;
  std::vector<PropertyEstimate>
  predict(const MolecularConfig &molecule) const override;

private:
  AtomVocabulary vocab_;
  std::vector<std::string> names_;
  std::map<std::uint64_t, std::vector<PropertyEstimate>> rows_;
};

std::string hash_hex(std::uint64_t hash);

// 1 - SS_res / SS_tot. Throws kShape for mismatched or < 2 entries and
// kDegenerate for constant truth.
double r_squared(std::span<const double> truth, std::span<const double> pred);

// (c, empirical coverage) over c_k = k / (levels - 1); the c-level interval
// is the closed central interval mean +- z sigma with z = sqrt(2) erfinv(c).
std::vector<std::pair<double, double>>
calibration_curve(std::span<const double> truth, std::span<const double> means,
                  std::span<const double> sigmas, int levels = 100);

// Trapezoidal integral of |coverage(c) - c| over the curve above.
double auce(std::span<const double> truth, std::span<const double> means,
            std::span<const double> sigmas, int levels = 100);

// k x k correlation matrix of an n x k table. Throws kDegenerate for a
// constant column and kShape for n < 2.
Eigen::MatrixXd pearson_matrix(const Eigen::MatrixXd &table);

}  // namespace molrl

#endif  // MOLRL_UNCERTAINTY_H_
