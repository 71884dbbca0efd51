//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_MOLGRAPH_H_
#define MOLRL_MOLGRAPH_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace molrl {

// Heavy elements understood by the toolkit. Hydrogens are implicit.
enum class Element : std::uint8_t { kC, kN, kO, kF, kP, kS, kCl, kBr, kI };

inline constexpr int kNumElements = 9;

std::optional<Element> element_from_symbol(std::string_view symbol);
std::string_view element_symbol(Element e);

// Bond-inference tolerances (Angstrom).
inline constexpr double kBondMargin = 0.40;
inline constexpr double kDoubleBondShift = 0.15;
inline constexpr double kTripleBondShift = 0.30;

/// Ordered atom-type vocabulary with per-element covalent radius and maximum
/// valence. The index of a symbol is its one-hot channel in the denoiser.
class AtomVocabulary {
public:
  AtomVocabulary() = default;

  // Throws a vocabulary error on unknown or duplicated symbols.
  explicit AtomVocabulary(const std::vector<std::string> &symbols);

  static AtomVocabulary qm9() { return AtomVocabulary({ "C", "N", "O", "F" }); }

  int size() const { return static_cast<int>(elements_.size()); }
  bool empty() const { return elements_.empty(); }

  bool contains(Element e) const { return index_[static_cast<int>(e)] >= 0; }

  // Throws a vocabulary error if e is not part of this vocabulary.
  int index_of(Element e) const;
  int index_of(std::string_view symbol) const;

  Element element(int index) const { return elements_.at(index); }
  std::string_view symbol(int index) const {
    return element_symbol(elements_.at(index));
  }
  std::vector<std::string> symbols() const;

  double covalent_radius(Element e) const;
  int max_valence(Element e) const;

  bool operator==(const AtomVocabulary &other) const {
    return elements_ == other.elements_;
  }

private:
  std::vector<Element> elements_;
  std::array<int, kNumElements> index_ { -1, -1, -1, -1, -1, -1, -1, -1, -1 };
};

/// A generated or loaded molecule: heavy atoms, coordinates in Angstrom (one
/// row per atom), and the property condition vector.
struct MolecularConfig {
  std::vector<Element> atoms;
  Eigen::MatrixXd coords;  // M x 3
  Eigen::VectorXd condition;

  int size() const { return static_cast<int>(atoms.size()); }
};

// Checks M >= 1, shape agreement, finite coordinates and vocabulary
// membership. Throws on violation.
void validate(const MolecularConfig &config, const AtomVocabulary &vocab);

// Subtracts the column means. Throws kInvalidGeometry on non-finite input.
Eigen::MatrixXd project_to_zero_cog(const Eigen::MatrixXd &coords);

struct Bond {
  int i;
  int j;
  int order;  // 1, 2 or 3
};

class MolecularGraph {
public:
  MolecularGraph() = default;
  MolecularGraph(std::vector<Element> atoms, std::vector<Bond> bonds);

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }

  Element element(int atom) const { return atoms_.at(atom); }
  const std::vector<Element> &atoms() const { return atoms_; }
  const std::vector<Bond> &bonds() const { return bonds_; }

  // (neighbor, bond order) pairs.
  const std::vector<std::pair<int, int>> &neighbors(int atom) const {
    return adjacency_.at(atom);
  }
  int degree(int atom) const {
    return static_cast<int>(adjacency_.at(atom).size());
  }
  int bond_order_sum(int atom) const;

  int num_components() const;
  bool is_connected() const { return num_atoms() > 0 && num_components() == 1; }
  // Cycle rank |E| - |V| + #components.
  int ring_count() const;

private:
  std::vector<Element> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<std::pair<int, int>>> adjacency_;
};

// Distance-bin bond perception: bonded iff d <= r_i + r_j + kBondMargin;
// double/triple orders only where both elements have the valence for it.
MolecularGraph infer_bonds(const MolecularConfig &config,
                           const AtomVocabulary &vocab);

bool atom_valence_ok(const MolecularGraph &graph, int atom,
                     const AtomVocabulary &vocab);

// Bond perception succeeds, graph connected, every valence within bounds.
bool is_valid(const MolecularConfig &config, const AtomVocabulary &vocab);

using CanonicalHash = std::uint64_t;

// Weisfeiler-Lehman refinement digest; invariant to atom ordering.
CanonicalHash canonical_hash(const MolecularGraph &graph);

inline constexpr int kDefaultFingerprintWidth = 2048;

class Fingerprint {
public:
  explicit Fingerprint(int width = kDefaultFingerprintWidth);

  int width() const { return width_; }
  void set(int bit);
  bool test(int bit) const;
  int count() const;

  friend double tanimoto(const Fingerprint &a, const Fingerprint &b);

private:
  int width_;
  std::vector<std::uint64_t> words_;
};

// Circular neighbourhood hashes up to radius 2 folded into `width` bits.
Fingerprint fingerprint(const MolecularGraph &graph,
                        int width = kDefaultFingerprintWidth);

// |a & b| / |a | b|, 1 when both are empty; throws kShape on width mismatch.
double tanimoto(const Fingerprint &a, const Fingerprint &b);

}  // namespace molrl

#endif  // MOLRL_MOLGRAPH_H_
