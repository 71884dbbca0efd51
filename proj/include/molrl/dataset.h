//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_DATASET_H_
#define MOLRL_DATASET_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "molrl/molgraph.h"

namespace molrl {

// A molecule set read from XYZ records. ids[k] names molecules[k] as
// "<file stem>" or "<file stem>#<record>" for multi-record files.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<MolecularConfig> molecules;
  std::vector<std::string> property_names;

  std::size_t size() const { return molecules.size(); }
  bool empty() const { return molecules.empty(); }
};

// Contents of manifest.json in a dataset directory.
struct DatasetManifest {
  std::vector<std::string> vocabulary;
  std::vector<std::string> property_names;
};

DatasetManifest read_manifest(const std::filesystem::path &path);
void write_manifest(const std::filesystem::path &path,
                    const DatasetManifest &manifest);

// Parses concatenated XYZ records: atom count, comment (optionally
// "props: name=value;..."), then one "SYMBOL x y z" line per atom. Parse
// errors name `source` and the 1-based line.
Dataset parse_xyz(std::istream &in, const std::string &source,
                  const AtomVocabulary &vocab);

// `path` is either one XYZ file or a directory whose *.xyz files are read in
// lexicographic order. A manifest.json next to the records supplies property
// names and must agree with `vocab`.
Dataset load_xyz_dataset(const std::filesystem::path &path,
                         const AtomVocabulary &vocab);

std::string format_xyz(const MolecularConfig &config,
                       const std::string &comment = "");
void write_xyz(const std::filesystem::path &path,
               const MolecularConfig &config, const std::string &comment = "");

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

// Groups molecules by their set of element types, shuffles the groups with
// `seed`, and assigns whole groups to the split with the largest remaining
// deficit against its target size. Throws on an empty dataset or ratios that
// are negative or do not sum to 1.
DatasetSplit species_split(const Dataset &dataset,
                           const std::array<double, 3> &ratios,
                           std::uint64_t seed);

}  // namespace molrl

#endif  // MOLRL_DATASET_H_
