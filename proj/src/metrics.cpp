//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/metrics.h"

#include <algorithm>
#include <functional>

#include "molrl/error.h"
#include "molrl/parallel.h"

namespace molrl {

namespace {

double pct(int num, int den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

// Per-molecule facts that do not depend on the rest of the set.
MoleculeDetail describe(const MolecularConfig &m, const MolecularGraph &g,
                        const AtomVocabulary &vocab, const PropertyOracle &oracle) {
  MoleculeDetail d;
  d.connected = g.is_connected();
  int ok = 0;
  for (int i = 0; i < g.num_atoms(); ++i)
    ok += atom_valence_ok(g, i, vocab);
  d.valences_ok = ok == g.num_atoms();
  d.stable_atom_fraction = static_cast<double>(ok) / g.num_atoms();
  d.valid = is_valid(m, vocab);
  for (const auto &e: oracle.predict(m))
    d.property_means.push_back(e.mean);
  return d;
}

bool passes(const std::vector<double> &means, std::span<const ObjectiveSpec> cutoffs) {
  if (means.size() != cutoffs.size())
    fail(ErrorKind::kConfig, "cutoff count differs from the oracle's property count");
  for (std::size_t k = 0; k < means.size(); ++k)
    if (!satisfies(means[k], cutoffs[k]))
      return false;
  return true;
}

void tally(GenerationReport &r) {
  r.n_generated = static_cast<int>(r.details.size());
  for (const auto &d: r.details) {
    r.n_valid += d.valid;
    r.n_unique += d.unique;
    r.n_novel += d.novel;
    r.n_atom_stable += d.valid && d.valences_ok;
    r.n_mol_stable += d.valid && d.valences_ok && d.connected;
    r.n_top += d.passes_cutoffs;
  }
  fill_percentages(r);
}

}  // namespace

bool satisfies(double value, const ObjectiveSpec &spec) {
  return spec.direction > 0 ? value > spec.cutoff : value < spec.cutoff;
}

double vun_percent(double validity, double uniqueness, double novelty) {
  return validity * uniqueness * novelty / 10000.0;
}

void fill_percentages(GenerationReport &r) {
  r.degenerate = r.n_valid == 0;
  r.validity = pct(r.n_valid, r.n_generated);
  r.uniqueness = pct(r.n_unique, r.n_valid);
  r.novelty = pct(r.n_novel, r.n_unique);
  r.vun = vun_percent(r.validity, r.uniqueness, r.novelty);
  r.atom_stability = pct(r.n_atom_stable, r.n_valid);
  r.mol_stability = pct(r.n_mol_stable, r.n_valid);
  r.top_molecules = pct(r.n_top, r.n_generated);
}

nlohmann::ordered_json GenerationReport::to_json() const {
  nlohmann::ordered_json j;
  j["n_generated"] = n_generated;
  j["n_valid"] = n_valid;
  j["n_unique"] = n_unique;
  j["n_novel"] = n_novel;
  j["n_top"] = n_top;
  j["validity"] = validity;
  j["uniqueness"] = uniqueness;
  j["novelty"] = novelty;
  j["vun"] = vun;
  j["atom_stability"] = atom_stability;
  j["mol_stability"] = mol_stability;
  j["top_molecules"] = top_molecules;
  j["degenerate"] = degenerate;
  return j;
}

GenerationReport evaluate(std::span<const MolecularConfig> generated,
                          const AtomVocabulary &vocab, const HashSet &train_hashes,
                          const PropertyOracle &oracle,
                          std::span<const ObjectiveSpec> cutoffs) {
  if (generated.empty())
    fail(ErrorKind::kDomain, "cannot evaluate an empty generated set");
  GenerationReport r;
  r.details.resize(generated.size());
  std::vector<CanonicalHash> hashes(generated.size(), 0);
  parallel_for(generated.size(), [&](std::size_t i) {
    const MolecularGraph g = infer_bonds(generated[i], vocab);
    r.details[i] = describe(generated[i], g, vocab, oracle);
    if (r.details[i].valid)
      hashes[i] = canonical_hash(g);
  });
  HashSet seen;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    auto &d = r.details[i];
    if (!d.valid)
      continue;
    d.unique = seen.insert(hashes[i]).second;
    d.novel = d.unique && !train_hashes.contains(hashes[i]);
    d.passes_cutoffs = d.novel && passes(d.property_means, cutoffs);
  }
  tally(r);
  return r;
}

GenerationReport brute_force_report(std::span<const MolecularConfig> generated,
                                    const AtomVocabulary &vocab,
                                    std::span<const MolecularConfig> train,
                                    const PropertyOracle &oracle,
                                    std::span<const ObjectiveSpec> cutoffs) {
  if (generated.empty())
    fail(ErrorKind::kDomain, "cannot evaluate an empty generated set");
  std::vector<MolecularGraph> gen_graphs, train_graphs;
  for (const auto &m: generated)
    gen_graphs.push_back(infer_bonds(m, vocab));
  for (const auto &m: train)
    train_graphs.push_back(infer_bonds(m, vocab));

  GenerationReport r;
  for (std::size_t i = 0; i < generated.size(); ++i)
    r.details.push_back(describe(generated[i], gen_graphs[i], vocab, oracle));
  for (std::size_t i = 0; i < generated.size(); ++i) {
    auto &d = r.details[i];
    if (!d.valid)
      continue;
    d.unique = true;
    for (std::size_t j = 0; j < i && d.unique; ++j)
      if (r.details[j].valid && isomorphic(gen_graphs[i], gen_graphs[j]))
        d.unique = false;
    if (!d.unique)
      continue;
    d.novel = std::none_of(train_graphs.begin(), train_graphs.end(),
                           [&](const MolecularGraph &t) { return isomorphic(gen_graphs[i], t); });
    d.passes_cutoffs = d.novel && passes(d.property_means, cutoffs);
  }
  tally(r);
  return r;
}

bool isomorphic(const MolecularGraph &a, const MolecularGraph &b) {
  const int n = a.num_atoms();
  if (n != b.num_atoms() || a.num_bonds() != b.num_bonds())
    return false;
  // Order matrices; 0 = no bond.
  std::vector<int> oa(n * n, 0), ob(n * n, 0);
  for (const auto &e: a.bonds())
    oa[e.i * n + e.j] = oa[e.j * n + e.i] = e.order;
  for (const auto &e: b.bonds())
    ob[e.i * n + e.j] = ob[e.j * n + e.i] = e.order;

  std::vector<int> map(n, -1);
  std::vector<bool> used(n, false);
  std::function<bool(int)> extend = [&](int i) {
    if (i == n)
      return true;
    for (int c = 0; c < n; ++c) {
      if (used[c] || a.element(i) != b.element(c) || a.degree(i) != b.degree(c))
        continue;
      bool ok = true;
      for (int k = 0; k < i && ok; ++k)
        ok = oa[i * n + k] == ob[c * n + map[k]];
      if (!ok)
        continue;
      map[i] = c;
      used[c] = true;
      if (extend(i + 1))
        return true;
      used[c] = false;
    }
    return false;
  };
  return extend(0);
}

}  // namespace molrl
