//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/random.h"

#include <string_view>

namespace molrl {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t root, std::string_view name,
                          std::uint64_t index) {
  // FNV-1a over the stream name keeps the derivation platform independent.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c: name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix_seed(mix_seed(root ^ h) + index);
}

double standard_normal(Rng &rng) {
  std::normal_distribution<double> dist;
  return dist(rng);
}

Eigen::MatrixXd standard_normal(Rng &rng, Eigen::Index rows,
                                Eigen::Index cols) {
  std::normal_distribution<double> dist;
  Eigen::MatrixXd out(rows, cols);
  // Row-major fill order so that draws map to atoms one at a time.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = dist(rng);
  return out;
}

double uniform01(Rng &rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

int uniform_int(Rng &rng, int lo, int hi) {
  std::uniform_int_distribution<int> dist(lo, hi);
  return dist(rng);
}

}  // namespace molrl
