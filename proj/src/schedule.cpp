//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/schedule.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "molrl/error.h"

namespace molrl {

NoiseSchedule::NoiseSchedule(int T, double s): T_(T), s_(s) {
  if (T < 1)
    fail(ErrorKind::kConfig, fmt::format("schedule T must be >= 1, got {}", T));
  if (!(s > 0.0 && s < 0.5))
    fail(ErrorKind::kConfig,
         fmt::format("schedule s must lie in (0, 0.5), got {}", s));

  alpha_.resize(T + 1);
  sigma_.resize(T + 1);
  gamma_.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    const double a = schedule_alpha(t, T, s);
    alpha_[t] = a;
    sigma_[t] = std::sqrt(1.0 - a * a);
    gamma_[t] = gamma_from(a * a, sigma_[t] * sigma_[t]);
  }
}

double schedule_alpha(int t, int T, double s) {
  // (1 - 2s) + s rounds away from 1 - s, so the t = 0 endpoint is taken in
  // closed form.
  if (t == 0)
    return 1.0 - s;
  const double frac = static_cast<double>(t) / T;
  return (1.0 - 2.0 * s) * (1.0 - frac * frac) + s;
}

double NoiseSchedule::snr(int t) const {
  return snr_from(alpha(t) * alpha(t), sigma(t) * sigma(t));
}

double snr_from(double alpha2, double sigma2) {
  const double floor2 = kScheduleFloor * kScheduleFloor;
  return alpha2 / std::max(sigma2, floor2);
}

double gamma_from(double alpha2, double sigma2) {
  const double floor2 = kScheduleFloor * kScheduleFloor;
  return std::log(std::max(sigma2, floor2)) - std::log(std::max(alpha2, floor2));
}

StepRatios step_ratios_from(double alpha_t, double sigma_t, double alpha_s,
                            double sigma_s) {
  StepRatios r;
  r.alpha_ts = alpha_t / std::max(alpha_s, kScheduleFloor);
  r.sigma2_ts =
      std::max(0.0, sigma_t * sigma_t - r.alpha_ts * r.alpha_ts * sigma_s * sigma_s);
  r.sigma_t_to_s =
      std::sqrt(r.sigma2_ts) * sigma_s / std::max(sigma_t, kScheduleFloor);
  return r;
}

StepRatios NoiseSchedule::step_ratios(int t, int s_idx) const {
  if (!(0 <= s_idx && s_idx < t && t <= T_))
    fail(ErrorKind::kOrdering,
         fmt::format("step ratios need 0 <= s < t <= T, got s={} t={} T={}",
                     s_idx, t, T_));
  return step_ratios_from(alpha_[t], sigma_[t], alpha_[s_idx], sigma_[s_idx]);
}

std::string NoiseSchedule::to_csv() const {
  std::string out = "t,alpha,sigma,gamma\n";
  for (int t = 0; t <= T_; ++t)
    out += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", t, alpha_[t], sigma_[t],
                       gamma_[t]);
  return out;
}

void NoiseSchedule::write_csv(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    fail(ErrorKind::kIo, "cannot write " + path.string());
  out << to_csv();
}

}  // namespace molrl
