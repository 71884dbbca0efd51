//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/molgraph.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "molrl/error.h"
#include "molrl/random.h"

namespace molrl {
namespace {

struct ElementData {
  std::string_view symbol;
  double radius;
  int valence;
};

constexpr std::array<ElementData, kNumElements> kElementTable { {
    { "C", 0.76, 4 },
    { "N", 0.71, 3 },
    { "O", 0.66, 2 },
    { "F", 0.57, 1 },
    { "P", 1.07, 5 },
    { "S", 1.05, 6 },
    { "Cl", 1.02, 1 },
    { "Br", 1.20, 1 },
    { "I", 1.39, 1 },
} };

const ElementData &data(Element e) {
  return kElementTable[static_cast<int>(e)];
}

std::uint64_t combine(std::uint64_t seed, std::uint64_t value) {
  return mix_seed(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6)
                          + (seed >> 2)));
}

}  // namespace

std::optional<Element> element_from_symbol(std::string_view symbol) {
  for (int i = 0; i < kNumElements; ++i)
    if (kElementTable[i].symbol == symbol)
      return static_cast<Element>(i);
  return std::nullopt;
}

std::string_view element_symbol(Element e) {
  return data(e).symbol;
}

AtomVocabulary::AtomVocabulary(const std::vector<std::string> &symbols) {
  for (const auto &s: symbols) {
    auto e = element_from_symbol(s);
    if (!e)
      fail(ErrorKind::kVocabulary, "unknown element symbol '" + s + "'");
    if (contains(*e))
      fail(ErrorKind::kVocabulary, "duplicate element symbol '" + s + "'");
    index_[static_cast<int>(*e)] = static_cast<int>(elements_.size());
    elements_.push_back(*e);
  }
}

int AtomVocabulary::index_of(Element e) const {
  int idx = index_[static_cast<int>(e)];
  if (idx < 0)
    fail(ErrorKind::kVocabulary, "element '" + std::string(element_symbol(e))
                                     + "' is not in the atom vocabulary");
  return idx;
}

int AtomVocabulary::index_of(std::string_view symbol) const {
  auto e = element_from_symbol(symbol);
  if (!e)
    fail(ErrorKind::kVocabulary,
         "unknown element symbol '" + std::string(symbol) + "'");
  return index_of(*e);
}

std::vector<std::string> AtomVocabulary::symbols() const {
  std::vector<std::string> out;
  out.reserve(elements_.size());
  for (auto e: elements_)
    out.emplace_back(element_symbol(e));
  return out;
}

double AtomVocabulary::covalent_radius(Element e) const {
  index_of(e);
  return data(e).radius;
}

int AtomVocabulary::max_valence(Element e) const {
  index_of(e);
  return data(e).valence;
}

void validate(const MolecularConfig &config, const AtomVocabulary &vocab) {
  if (config.atoms.empty())
    fail(ErrorKind::kInvalidGeometry, "molecule has no atoms");
  if (config.coords.rows() != config.size() || config.coords.cols() != 3)
    fail(ErrorKind::kShape, "coordinate matrix must be M x 3");
  if (!config.coords.allFinite())
    fail(ErrorKind::kInvalidGeometry, "coordinates contain non-finite values");
  for (auto e: config.atoms)
    vocab.index_of(e);
}

Eigen::MatrixXd project_to_zero_cog(const Eigen::MatrixXd &coords) {
  if (!coords.allFinite())
    fail(ErrorKind::kInvalidGeometry, "coordinates contain non-finite values");
  if (coords.rows() == 0)
    return coords;
  Eigen::RowVectorXd mean = coords.colwise().mean();
  return coords.rowwise() - mean;
}

MolecularGraph::MolecularGraph(std::vector<Element> atoms,
                               std::vector<Bond> bonds)
    : atoms_(std::move(atoms)), bonds_(std::move(bonds)),
      adjacency_(atoms_.size()) {
  for (const auto &b: bonds_) {
    adjacency_.at(b.i).emplace_back(b.j, b.order);
    adjacency_.at(b.j).emplace_back(b.i, b.order);
  }
}

int MolecularGraph::bond_order_sum(int atom) const {
  int sum = 0;
  for (auto [nb, order]: adjacency_.at(atom))
    sum += order;
  return sum;
}

int MolecularGraph::num_components() const {
  const int n = num_atoms();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x)
      x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = n;
  for (const auto &b: bonds_) {
    int a = find(b.i), c = find(b.j);
    if (a != c) {
      parent[a] = c;
      --components;
    }
  }
  return components;
}

int MolecularGraph::ring_count() const {
  return num_bonds() - num_atoms() + num_components();
}

MolecularGraph infer_bonds(const MolecularConfig &config,
                           const AtomVocabulary &vocab) {
  const int n = config.size();
  std::vector<Bond> bonds;
  for (int i = 0; i < n; ++i) {
    const double ri = vocab.covalent_radius(config.atoms[i]);
    const int vi = vocab.max_valence(config.atoms[i]);
    for (int j = i + 1; j < n; ++j) {
      const double rj = vocab.covalent_radius(config.atoms[j]);
      const int vj = vocab.max_valence(config.atoms[j]);
      const double d = (config.coords.row(i) - config.coords.row(j)).norm();
      const double ref = ri + rj;
      if (!(d <= ref + kBondMargin))
        continue;
      int order = 1;
      if (d <= ref - kTripleBondShift && std::min(vi, vj) >= 3)
        order = 3;
      else if (d <= ref - kDoubleBondShift && std::min(vi, vj) >= 2)
        order = 2;
      bonds.push_back({ i, j, order });
    }
  }
  return MolecularGraph(config.atoms, std::move(bonds));
}

bool atom_valence_ok(const MolecularGraph &graph, int atom,
                     const AtomVocabulary &vocab) {
  return graph.bond_order_sum(atom) <= vocab.max_valence(graph.element(atom));
}

bool is_valid(const MolecularConfig &config, const AtomVocabulary &vocab) {
  if (config.atoms.empty() || config.coords.rows() != config.size()
      || config.coords.cols() != 3 || !config.coords.allFinite())
    return false;
  for (auto e: config.atoms)
    if (!vocab.contains(e))
      return false;

  MolecularGraph graph = infer_bonds(config, vocab);
  if (!graph.is_connected())
    return false;
  for (int i = 0; i < graph.num_atoms(); ++i)
    if (!atom_valence_ok(graph, i, vocab))
      return false;
  return true;
}

CanonicalHash canonical_hash(const MolecularGraph &graph) {
  constexpr int kIterations = 4;
  const int n = graph.num_atoms();

  std::vector<std::uint64_t> colors(n), next(n);
  for (int i = 0; i < n; ++i)
    colors[i] = combine(static_cast<std::uint64_t>(graph.element(i)) + 1,
                        static_cast<std::uint64_t>(graph.degree(i)));

  std::vector<std::uint64_t> digest_terms;
  auto absorb = [&](std::vector<std::uint64_t> c) {
    std::sort(c.begin(), c.end());
    std::uint64_t h = combine(0x6d6f6c72ULL, c.size());
    for (auto v: c)
      h = combine(h, v);
    digest_terms.push_back(h);
  };
  absorb(colors);

  std::vector<std::uint64_t> neigh;
  for (int it = 0; it < kIterations; ++it) {
    for (int i = 0; i < n; ++i) {
      neigh.clear();
      for (auto [j, order]: graph.neighbors(i))
        neigh.push_back(combine(static_cast<std::uint64_t>(order), colors[j]));
      std::sort(neigh.begin(), neigh.end());
      std::uint64_t h = combine(colors[i], neigh.size());
      for (auto v: neigh)
        h = combine(h, v);
      next[i] = h;
    }
    colors.swap(next);
    absorb(colors);
  }

  std::uint64_t digest = combine(static_cast<std::uint64_t>(n),
                                 static_cast<std::uint64_t>(graph.num_bonds()));
  for (auto v: digest_terms)
    digest = combine(digest, v);
  return digest;
}

Fingerprint::Fingerprint(int width): width_(width) {
  if (width <= 0)
    fail(ErrorKind::kShape, "fingerprint width must be positive");
  words_.assign((width + 63) / 64, 0);
}

void Fingerprint::set(int bit) {
  words_.at(bit / 64) |= std::uint64_t { 1 } << (bit % 64);
}

bool Fingerprint::test(int bit) const {
  return (words_.at(bit / 64) >> (bit % 64)) & 1U;
}

int Fingerprint::count() const {
  int c = 0;
  for (auto w: words_)
    c += std::popcount(w);
  return c;
}

Fingerprint fingerprint(const MolecularGraph &graph, int width) {
  constexpr int kRadius = 2;
  const int n = graph.num_atoms();
  Fingerprint fp(width);

  std::vector<std::uint64_t> ids(n), next(n);
  for (int i = 0; i < n; ++i) {
    std::uint64_t h = combine(static_cast<std::uint64_t>(graph.element(i)) + 1,
                              static_cast<std::uint64_t>(graph.degree(i)));
    ids[i] = combine(h, static_cast<std::uint64_t>(graph.bond_order_sum(i)));
  }
  auto fold = [&](std::uint64_t id) {
    fp.set(static_cast<int>(id % static_cast<std::uint64_t>(width)));
  };
  for (auto id: ids)
    fold(id);

  std::vector<std::uint64_t> neigh;
  for (int r = 1; r <= kRadius; ++r) {
    for (int i = 0; i < n; ++i) {
      neigh.clear();
      for (auto [j, order]: graph.neighbors(i))
        neigh.push_back(combine(static_cast<std::uint64_t>(order), ids[j]));
      std::sort(neigh.begin(), neigh.end());
      std::uint64_t h = combine(ids[i], static_cast<std::uint64_t>(r));
      for (auto v: neigh)
        h = combine(h, v);
      next[i] = h;
    }
    ids.swap(next);
    for (auto id: ids)
      fold(id);
  }
  return fp;
}

double tanimoto(const Fingerprint &a, const Fingerprint &b) {
  if (a.width_ != b.width_)
    fail(ErrorKind::kShape, "fingerprint width mismatch");
  int both = 0, either = 0;
  for (std::size_t k = 0; k < a.words_.size(); ++k) {
    both += std::popcount(a.words_[k] & b.words_[k]);
    either += std::popcount(a.words_[k] | b.words_[k]);
  }
  if (either == 0)
    return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace molrl
