//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/toy_data.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include <fmt/format.h>

#include "molrl/error.h"
#include "molrl/random.h"

namespace molrl {

namespace {

// Non-bonded pairs keep this much room beyond the bonding cutoff.
constexpr double kClearance = 0.15;
// Double bonds sit midway inside the double-bond distance window.
constexpr double kDoubleShortening = 0.5 * (kDoubleBondShift + kTripleBondShift);
// Smallest angle between two bonds at the same atom, in degrees.
constexpr double kMinBondAngle = 100.0;
constexpr int kPlacementTries = 60;
constexpr int kMoleculeTries = 200;

Eigen::RowVector3d random_direction(Rng &rng) {
  for (;;) {
    Eigen::RowVector3d v(standard_normal(rng), standard_normal(rng),
                         standard_normal(rng));
    const double n = v.norm();
    if (n > 1e-8)
      return v / n;
  }
}

int pick_weighted(const std::vector<double> &w, Rng &rng) {
  double total = 0;
  for (double x: w)
    total += x;
  double u = uniform01(rng) * total;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (u < w[k])
      return static_cast<int>(k);
    u -= w[k];
  }
  return static_cast<int>(w.size()) - 1;
}

// One growth attempt; empty on failure.
std::optional<MolecularConfig> grow(const ToyDataConfig &cfg,
                                    const AtomVocabulary &vocab, int n,
                                    Rng &rng) {
  std::vector<Element> atoms;
  std::vector<Eigen::RowVector3d> pos;
  std::vector<int> used;  // bond-order sum per atom
  std::vector<std::vector<int>> nbrs;

  // Start from a multivalent atom so the molecule can grow.
  std::vector<double> first_w = cfg.weights;
  for (std::size_t k = 0; k < first_w.size(); ++k)
    if (vocab.max_valence(vocab.element(static_cast<int>(k))) < 2)
      first_w[k] = 0;
  atoms.push_back(vocab.element(pick_weighted(first_w, rng)));
  pos.push_back(Eigen::RowVector3d::Zero());
  used.push_back(0);
  nbrs.emplace_back();

  while (static_cast<int>(atoms.size()) < n) {
    std::vector<int> open;
    for (int i = 0; i < static_cast<int>(atoms.size()); ++i)
      if (used[i] < vocab.max_valence(atoms[i]))
        open.push_back(i);
    if (open.empty())
      return std::nullopt;
    const int parent = open[uniform_int(rng, 0, static_cast<int>(open.size()) - 1)];
    const Element e = vocab.element(pick_weighted(cfg.weights, rng));
    const int room = vocab.max_valence(atoms[parent]) - used[parent];
    const int order = (room >= 2 && vocab.max_valence(e) >= 2
                       && uniform01(rng) < cfg.double_bond_prob)
                          ? 2
                          : 1;
    const double ref = vocab.covalent_radius(atoms[parent]) + vocab.covalent_radius(e);
    const double length = order == 2 ? ref - kDoubleShortening : ref;

    bool placed = false;
    for (int tries = 0; tries < kPlacementTries && !placed; ++tries) {
      Eigen::RowVector3d dir = random_direction(rng);
      bool ok = true;
      for (int nb: nbrs[parent]) {
        Eigen::RowVector3d other = (pos[nb] - pos[parent]).normalized();
        const double angle = std::acos(std::clamp(dir.dot(other), -1.0, 1.0));
        if (angle * 180.0 / std::numbers::pi < kMinBondAngle) {
          ok = false;
          break;
        }
      }
      if (!ok)
        continue;
      Eigen::RowVector3d p = pos[parent] + length * dir;
      for (int j = 0; j < static_cast<int>(atoms.size()) && ok; ++j) {
        if (j == parent)
          continue;
        const double cut = vocab.covalent_radius(atoms[j]) + vocab.covalent_radius(e)
                           + kBondMargin + kClearance;
        ok = (p - pos[j]).norm() > cut;
      }
      if (!ok)
        continue;
      atoms.push_back(e);
      pos.push_back(p);
      used.push_back(order);
      used[parent] += order;
      nbrs.emplace_back(1, parent);
      nbrs[parent].push_back(static_cast<int>(atoms.size()) - 1);
      placed = true;
    }
    if (!placed)
      return std::nullopt;
  }

  MolecularConfig m;
  m.atoms = atoms;
  m.coords.resize(n, 3);
  for (int i = 0; i < n; ++i)
    m.coords.row(i) = pos[i];
  m.coords = project_to_zero_cog(m.coords);
  return m;
}

}  // namespace

std::vector<MolecularConfig> generate_toy_molecules(const ToyDataConfig &cfg,
                                                    std::uint64_t seed) {
  if (cfg.count < 0 || cfg.min_atoms < 1 || cfg.max_atoms < cfg.min_atoms
      || cfg.symbols.size() != cfg.weights.size() || cfg.symbols.empty())
    fail(ErrorKind::kConfig, "invalid toy dataset settings");
  AtomVocabulary vocab(cfg.symbols);
  bool any_multivalent = false;
  for (int k = 0; k < vocab.size(); ++k)
    any_multivalent |= cfg.weights[k] > 0 && vocab.max_valence(vocab.element(k)) >= 2;
  if (!any_multivalent && cfg.max_atoms > 1)
    fail(ErrorKind::kConfig, "toy dataset needs a multivalent element");

  std::vector<MolecularConfig> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  for (int k = 0; k < cfg.count; ++k) {
    Rng rng = make_rng(seed, "toy-molecule", static_cast<std::uint64_t>(k));
    const int n = uniform_int(rng, cfg.min_atoms, cfg.max_atoms);
    std::optional<MolecularConfig> m;
    for (int tries = 0; tries < kMoleculeTries && !m; ++tries) {
      m = grow(cfg, vocab, n, rng);
      if (m && !is_valid(*m, vocab))
        m.reset();
    }
    if (!m)
      fail(ErrorKind::kConfig,
           fmt::format("could not place a valid {}-atom toy molecule", n));
    out.push_back(std::move(*m));
  }
  return out;
}

void write_toy_dataset(const std::filesystem::path &dir,
                       const ToyDataConfig &cfg, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  auto molecules = generate_toy_molecules(cfg, seed);
  for (std::size_t k = 0; k < molecules.size(); ++k)
    write_xyz(dir / fmt::format("mol_{:04d}.xyz", k), molecules[k],
              fmt::format("toy molecule {}", k));
  write_manifest(dir / "manifest.json", { cfg.symbols, {} });
}

}  // namespace molrl
