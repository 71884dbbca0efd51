//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_TOY_DATA_H_
#define MOLRL_TOY_DATA_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "molrl/dataset.h"
#include "molrl/molgraph.h"

namespace molrl {

struct ToyDataConfig {
  int count = 500;
  int min_atoms = 3;
  int max_atoms = 9;
  // Relative element frequencies, aligned with `symbols`.
  std::vector<std::string> symbols { "C", "N", "O", "F" };
  std::vector<double> weights { 0.70, 0.12, 0.14, 0.04 };
  double double_bond_prob = 0.15;
};

// Random acyclic molecules grown atom by atom in 3D: bonded pairs sit at the
// sum of covalent radii (shortened for double bonds), and every non-bonded
// pair stays well outside bonding range, so each molecule is valid under
// infer_bonds. Deterministic in `seed`.
std::vector<MolecularConfig> generate_toy_molecules(const ToyDataConfig &cfg,
                                                    std::uint64_t seed);

// Writes one XYZ file per molecule ("mol_0000.xyz", ...) plus manifest.json.
void write_toy_dataset(const std::filesystem::path &dir,
                       const ToyDataConfig &cfg, std::uint64_t seed);

}  // namespace molrl

#endif  // MOLRL_TOY_DATA_H_
