//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_RANDOM_H_
#define MOLRL_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace molrl {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

// Derives a named stream ("pretrain", "sample", "ppo", "split", ...) from the
// root seed, optionally further indexed (episode, molecule, ...).
std::uint64_t stream_seed(std::uint64_t root, std::string_view name,
                          std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view name,
                    std::uint64_t index = 0) {
  return Rng(stream_seed(root, name, index));
}

double standard_normal(Rng &rng);

Eigen::MatrixXd standard_normal(Rng &rng, Eigen::Index rows,
                                Eigen::Index cols);

double uniform01(Rng &rng);

// Uniform integer in [lo, hi].
int uniform_int(Rng &rng, int lo, int hi);

}  // namespace molrl

#endif  // MOLRL_RANDOM_H_
