//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_SCHEDULE_H_
#define MOLRL_SCHEDULE_H_

#include <filesystem>
#include <string>
#include <vector>

namespace molrl {

// Lower bound applied to alpha and sigma before they appear in a divisor.
inline constexpr double kScheduleFloor = 1e-6;

struct StepRatios {
  double alpha_ts;     // alpha_{t|s} = alpha_t / alpha_s
  double sigma2_ts;    // sigma_{t|s}^2 = sigma_t^2 - alpha_{t|s}^2 sigma_s^2
  double sigma_t_to_s; // sigma_{t->s} = sigma_{t|s} sigma_s / sigma_t
};

/// Variance-preserving polynomial noise schedule tabulated over t = 0..T:
///
///   alpha_t = (1 - 2s)(1 - (t/T)^2) + s,  sigma_t = sqrt(1 - alpha_t^2),
///   gamma_t = -log(alpha_t^2 / sigma_t^2).
///
/// Tables are computed once in double precision; the object is immutable and
/// safe to share across threads.
class NoiseSchedule {
public:
  // Throws kConfig unless T >= 1 and 0 < s < 0.5.
  NoiseSchedule(int T, double s = 1e-5);

  int T() const { return T_; }
  double s() const { return s_; }

  double alpha(int t) const { return alpha_.at(t); }
  double sigma(int t) const { return sigma_.at(t); }
  double gamma(int t) const { return gamma_.at(t); }
  double snr(int t) const;

  const std::vector<double> &alphas() const { return alpha_; }
  const std::vector<double> &sigmas() const { return sigma_; }
  const std::vector<double> &gammas() const { return gamma_; }

  // Requires 0 <= s_idx < t <= T, otherwise throws kOrdering.
  StepRatios step_ratios(int t, int s_idx) const;

  // "t,alpha,sigma,gamma" rows.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path &path) const;

private:
  int T_;
  double s_;
  std::vector<double> alpha_;
  std::vector<double> sigma_;
  std::vector<double> gamma_;
};

// alpha_t for the schedule above; the tables are filled from this.
double schedule_alpha(int t, int T, double s);

double snr_from(double alpha2, double sigma2);
double gamma_from(double alpha2, double sigma2);

// Step ratios computed from raw (alpha, sigma) pairs; the schedule method is
// a table lookup around this.
StepRatios step_ratios_from(double alpha_t, double sigma_t, double alpha_s,
                            double sigma_s);

}  // namespace molrl

#endif  // MOLRL_SCHEDULE_H_
