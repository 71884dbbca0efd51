//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "molrl/dataset.h"
#include "molrl/error.h"
#include "molrl/toy_data.h"
#include "test_util.h"

namespace molrl {
namespace {

namespace fs = std::filesystem;
const AtomVocabulary kVocab = AtomVocabulary::qm9();

Dataset parse(const std::string &text) {
  std::istringstream in(text);
  return parse_xyz(in, "mem.xyz", kVocab);
}

TEST(ParseXyz, ReadsRecordsAndProperties) {
  const auto d = parse("2\nprops: a=1.5;b=-2\nC 0 0 0\nO 1.2 0 0\n"
                       "1\n\nN 0 0 0\n");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.molecules[0].atoms, (std::vector<Element> { Element::kC, Element::kO }));
  EXPECT_DOUBLE_EQ(d.molecules[0].coords(1, 0), 1.2);
  EXPECT_EQ(d.ids[0], "mem#0");
  EXPECT_EQ(d.property_names, (std::vector<std::string> { "a", "b" }));
  EXPECT_DOUBLE_EQ(d.molecules[0].condition(1), -2.0);
}

TEST(ParseXyz, ErrorsNameFileAndLine) {
  try {
    parse("2\n\nC 0 0 0\nC 1.5 zero 0\n");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("mem.xyz:4"), std::string::npos) << e.what();
  }
  try {
    parse("3\n\nC 0 0 0\n");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("mem.xyz:4"), std::string::npos) << e.what();
  }
  try {
    parse("1\n\nXe 0 0 0\n");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kVocabulary);
    EXPECT_NE(std::string(e.what()).find("mem.xyz"), std::string::npos) << e.what();
  }
}

TEST(ParseXyz, EmptyInputGivesEmptyDatasetThatCannotBeSplit) {
  const auto d = parse("");
  EXPECT_TRUE(d.empty());
  EXPECT_THROW(species_split(d, { 0.8, 0.1, 0.1 }, 1), Error);
}

TEST(ParseXyz, FormatRoundTrip) {
  ToyDataConfig cfg;
  cfg.count = 5;
  const auto mols = generate_toy_molecules(cfg, 2);
  std::string text;
  for (const auto &m: mols)
    text += format_xyz(m);
  const auto d = parse(text);
  ASSERT_EQ(d.size(), mols.size());
  for (std::size_t k = 0; k < mols.size(); ++k) {
    EXPECT_EQ(d.molecules[k].atoms, mols[k].atoms);
    // Six decimals on disk.
    EXPECT_LE((d.molecules[k].coords - mols[k].coords).cwiseAbs().maxCoeff(), 5e-7);
  }
}

Dataset with_species(const std::vector<std::vector<Element>> &species) {
  Dataset d;
  for (std::size_t k = 0; k < species.size(); ++k) {
    MolecularConfig m;
    m.atoms = species[k];
    m.coords = Eigen::MatrixXd::Zero(m.size(), 3);
    d.ids.push_back(std::to_string(k));
    d.molecules.push_back(m);
  }
  return d;
}

int split_of(const DatasetSplit &s, std::size_t i) {
  if (std::ranges::count(s.train, i))
    return 0;
  if (std::ranges::count(s.valid, i))
    return 1;
  return std::ranges::count(s.test, i) ? 2 : -1;
}

TEST(SpeciesSplit, GroupsStayTogether) {
  using E = Element;
  const auto d = with_species({ { E::kC, E::kN }, { E::kC, E::kO }, { E::kN, E::kC } });
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = species_split(d, { 0.5, 0.25, 0.25 }, seed);
    EXPECT_EQ(split_of(s, 0), split_of(s, 2));
    EXPECT_GE(split_of(s, 1), 0);
  }
}

TEST(SpeciesSplit, DisjointCoverAndAtomicGroups) {
  ToyDataConfig cfg;
  cfg.count = 300;
  Dataset d;
  for (auto &m: generate_toy_molecules(cfg, 4)) {
    d.ids.push_back(std::to_string(d.size()));
    d.molecules.push_back(std::move(m));
  }
  const auto s = species_split(d, { 0.8, 0.1, 0.1 }, 17);
  EXPECT_EQ(s.train.size() + s.valid.size() + s.test.size(), d.size());
  std::map<std::set<Element>, int> where;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int k = split_of(s, i);
    ASSERT_GE(k, 0);
    const std::set<Element> key(d.molecules[i].atoms.begin(), d.molecules[i].atoms.end());
    auto [it, fresh] = where.emplace(key, k);
    EXPECT_EQ(it->second, k) << "species group split across partitions";
  }
  const auto again = species_split(d, { 0.8, 0.1, 0.1 }, 17);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);
}

TEST(SpeciesSplit, AllTrain) {
  const auto d = with_species({ { Element::kC }, { Element::kO }, { Element::kN } });
  const auto s = species_split(d, { 1, 0, 0 }, 3);
  EXPECT_EQ(s.train.size(), 3u);
  EXPECT_TRUE(s.valid.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(SpeciesSplit, RejectsBadRatios) {
  const auto d = with_species({ { Element::kC } });
  EXPECT_THROW(species_split(d, { 0.5, 0.2, 0.2 }, 1), Error);
  EXPECT_THROW(species_split(d, { 1.2, -0.1, -0.1 }, 1), Error);
}

TEST(LoadDataset, DirectoryInLexicographicOrder) {
  const fs::path dir = fs::temp_directory_path() / "molrl_dataset_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "b.xyz") << "1\n\nO 0 0 0\n";
  std::ofstream(dir / "a.xyz") << "1\n\nC 0 0 0\n";
  const auto d = load_xyz_dataset(dir, kVocab);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.ids[0], "a");
  EXPECT_EQ(d.molecules[1].atoms[0], Element::kO);
  std::ofstream(dir / "c.xyz") << "1\n\nS 0 0 0\n";
  try {
    load_xyz_dataset(dir, kVocab);
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("c.xyz"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

}  // namespace
}  // namespace molrl
