//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_METRICS_H_
#define MOLRL_METRICS_H_

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "molrl/molgraph.h"
#include "molrl/reward.h"
#include "molrl/uncertainty.h"

namespace molrl {

struct MoleculeDetail {
  bool valid = false;
  bool unique = false;
  bool novel = false;
  bool connected = false;
  bool valences_ok = false;
  // Fraction of atoms within valence bounds (the per-atom variant common in
  // the EDM literature; not part of the headline numbers).
  double stable_atom_fraction = 0;
  bool passes_cutoffs = false;
  std::vector<double> property_means;
};

struct GenerationReport {
  int n_generated = 0;
  int n_valid = 0;
  int n_unique = 0;
  int n_novel = 0;
  int n_atom_stable = 0;
  int n_mol_stable = 0;
  int n_top = 0;

  // Percentages in [0, 100].
  double validity = 0;
  double uniqueness = 0;
  double novelty = 0;
  double vun = 0;
  double atom_stability = 0;
  double mol_stability = 0;
  double top_molecules = 0;
  // Set when no generated molecule is valid; the ratios over the valid set
  // are then reported as 0.
  bool degenerate = false;

  std::vector<MoleculeDetail> details;

  nlohmann::ordered_json to_json() const;
};

// The headline numbers are all ratios of the counts above.
void fill_percentages(GenerationReport &report);

// vun = validity uniqueness novelty / 100^2.
double vun_percent(double validity, double uniqueness, double novelty);

// Metrics over a generated set. Top molecules are the novel ones whose
// oracle means satisfy every cutoff strictly. Throws kDomain when empty.
GenerationReport evaluate(std::span<const MolecularConfig> generated,
                          const AtomVocabulary &vocab, const HashSet &train_hashes,
                          const PropertyOracle &oracle,
                          std::span<const ObjectiveSpec> cutoffs);

// Same report by explicit enumeration: duplicates and training-set membership
// are decided by pairwise graph isomorphism. Meant for small sets.
GenerationReport brute_force_report(std::span<const MolecularConfig> generated,
                                    const AtomVocabulary &vocab,
                                    std::span<const MolecularConfig> train,
                                    const PropertyOracle &oracle,
                                    std::span<const ObjectiveSpec> cutoffs);

// Labelled-graph isomorphism (elements and bond orders) by backtracking.
bool isomorphic(const MolecularGraph &a, const MolecularGraph &b);

bool satisfies(double value, const ObjectiveSpec &spec);

}  // namespace molrl

#endif  // MOLRL_METRICS_H_
