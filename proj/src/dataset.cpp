//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <utility>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "molrl/error.h"
#include "molrl/random.h"

namespace molrl {
namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_fail(const std::string &source, int line,
                             const std::string &what) {
  fail(ErrorKind::kParse, fmt::format("{}:{}: {}", source, line, what));
}

double parse_double(std::string_view token, const std::string &source,
                    int line) {
  std::string s(token);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    parse_fail(source, line, "expected a number, got '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v))
    parse_fail(source, line, "expected a finite number, got '" + s + "'");
  return v;
}

// "props: qed=0.5; sas=3.1" -> ordered (name, value) pairs.
std::vector<std::pair<std::string, double>>
parse_props(std::string_view comment, const std::string &source, int line) {
  std::vector<std::pair<std::string, double>> out;
  auto pos = comment.find("props:");
  if (pos == std::string_view::npos)
    return out;
  std::string_view rest = comment.substr(pos + 6);
  while (!rest.empty()) {
    auto semi = rest.find(';');
    std::string_view item = trim(rest.substr(0, semi));
    rest = semi == std::string_view::npos ? std::string_view()
                                          : rest.substr(semi + 1);
    if (item.empty())
      continue;
    auto eq = item.find('=');
    if (eq == std::string_view::npos)
      parse_fail(source, line, "malformed property '" + std::string(item)
                                   + "', expected name=value");
    out.emplace_back(std::string(trim(item.substr(0, eq))),
                     parse_double(trim(item.substr(eq + 1)), source, line));
  }
  return out;
}

void append_records(std::istream &in, const std::string &source,
                    const std::string &stem, const AtomVocabulary &vocab,
                    Dataset &out) {
  int line_no = 0;
  int record = 0;

  auto next_line = [&](std::string &line) -> bool {
    if (!std::getline(in, line))
      return false;
    ++line_no;
    return true;
  };

  std::string line;
  std::vector<std::size_t> added;
  while (next_line(line)) {
    if (trim(line).empty())
      continue;

    const int count_line = line_no;
    int count = 0;
    {
      std::string tok(trim(line));
      std::size_t used = 0;
      try {
        count = std::stoi(tok, &used);
      } catch (const std::exception &) {
        parse_fail(source, count_line, "expected atom count, got '" + tok + "'");
      }
      if (used != tok.size() || count < 1)
        parse_fail(source, count_line, "invalid atom count '" + tok + "'");
    }

    std::string comment;
    if (!next_line(comment))
      parse_fail(source, count_line + 1, "missing comment line");
    const int comment_line = line_no;
    auto props = parse_props(comment, source, comment_line);

    MolecularConfig mol;
    mol.atoms.reserve(count);
    mol.coords.resize(count, 3);
    for (int a = 0; a < count; ++a) {
      if (!next_line(line))
        parse_fail(source, line_no + 1,
                   fmt::format("expected {} atom lines, found {}", count, a));
      std::istringstream fields(line);
      std::string sym, x, y, z, extra;
      if (!(fields >> sym >> x >> y >> z))
        parse_fail(source, line_no, "expected 'SYMBOL x y z'");
      auto e = element_from_symbol(sym);
      if (!e || !vocab.contains(*e))
        fail(ErrorKind::kVocabulary,
             fmt::format("{}:{}: element '{}' is not in the atom vocabulary",
                         source, line_no, sym));
      mol.atoms.push_back(*e);
      mol.coords(a, 0) = parse_double(x, source, line_no);
      mol.coords(a, 1) = parse_double(y, source, line_no);
      mol.coords(a, 2) = parse_double(z, source, line_no);
    }

    if (!props.empty()) {
      if (out.property_names.empty())
        for (const auto &p: props)
          out.property_names.push_back(p.first);
      mol.condition.resize(static_cast<Eigen::Index>(out.property_names.size()));
      for (std::size_t k = 0; k < out.property_names.size(); ++k) {
        auto it = std::find_if(props.begin(), props.end(), [&](const auto &p) {
          return p.first == out.property_names[k];
        });
        if (it == props.end())
          parse_fail(source, comment_line,
                     "missing property '" + out.property_names[k] + "'");
        mol.condition[static_cast<Eigen::Index>(k)] = it->second;
      }
    }

    added.push_back(out.molecules.size());
    out.ids.push_back(stem + "#" + std::to_string(record));
    out.molecules.push_back(std::move(mol));
    ++record;
  }

  // Single-record files are named after the file alone.
  if (added.size() == 1)
    out.ids[added.front()] = stem;
}

}  // namespace

DatasetManifest read_manifest(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    for (const auto &[key, value]: j.items()) {
      if (key == "vocabulary")
        m.vocabulary = value.get<std::vector<std::string>>();
      else if (key == "property_names")
        m.property_names = value.get<std::vector<std::string>>();
      else
        fail(ErrorKind::kParse,
             path.string() + ": unknown manifest key '" + key + "'");
    }
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const fs::path &path, const DatasetManifest &manifest) {
  nlohmann::ordered_json j;
  j["vocabulary"] = manifest.vocabulary;
  j["property_names"] = manifest.property_names;
  std::ofstream out(path);
  if (!out)
    fail(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Dataset parse_xyz(std::istream &in, const std::string &source,
                  const AtomVocabulary &vocab) {
  Dataset out;
  append_records(in, source, fs::path(source).stem().string(), vocab, out);
  return out;
}

Dataset load_xyz_dataset(const fs::path &path, const AtomVocabulary &vocab) {
  Dataset out;
  std::vector<fs::path> files;
  fs::path manifest_path;

  if (fs::is_directory(path)) {
    for (const auto &entry: fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".xyz")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    manifest_path = path / "manifest.json";
  } else if (fs::is_regular_file(path)) {
    files.push_back(path);
    manifest_path = path.parent_path() / "manifest.json";
  } else {
    fail(ErrorKind::kIo, "dataset path does not exist: " + path.string());
  }

  if (fs::is_regular_file(manifest_path)) {
    DatasetManifest manifest = read_manifest(manifest_path);
    if (!manifest.vocabulary.empty()
        && AtomVocabulary(manifest.vocabulary) != vocab)
      fail(ErrorKind::kVocabulary,
           manifest_path.string()
               + ": manifest vocabulary differs from the configured one");
    out.property_names = manifest.property_names;
  }

  for (const auto &file: files) {
    std::ifstream in(file);
    if (!in)
      fail(ErrorKind::kIo, "cannot open " + file.string());
    append_records(in, file.string(), file.stem().string(), vocab, out);
  }
  return out;
}

std::string format_xyz(const MolecularConfig &config,
                       const std::string &comment) {
  std::string out = fmt::format("{}\n{}\n", config.size(), comment);
  for (int i = 0; i < config.size(); ++i)
    out += fmt::format("{} {:.6f} {:.6f} {:.6f}\n",
                       element_symbol(config.atoms[i]), config.coords(i, 0),
                       config.coords(i, 1), config.coords(i, 2));
  return out;
}

void write_xyz(const fs::path &path, const MolecularConfig &config,
               const std::string &comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    fail(ErrorKind::kIo, "cannot write " + path.string());
  out << format_xyz(config, comment);
}

DatasetSplit species_split(const Dataset &dataset,
                           const std::array<double, 3> &ratios,
                           std::uint64_t seed) {
  if (dataset.empty())
    fail(ErrorKind::kConfig, "cannot split an empty dataset");
  double total = 0;
  for (double r: ratios) {
    if (!(r >= 0))
      fail(ErrorKind::kConfig, "split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9)
    fail(ErrorKind::kConfig, "split ratios must sum to 1");

  // Element-set key -> member indices; std::map gives a seed-independent
  // starting order before shuffling.
  std::map<std::vector<Element>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::set<Element> species(dataset.molecules[i].atoms.begin(),
                              dataset.molecules[i].atoms.end());
    groups[std::vector<Element>(species.begin(), species.end())].push_back(i);
  }

  std::vector<const std::vector<std::size_t> *> order;
  order.reserve(groups.size());
  for (const auto &[key, members]: groups)
    order.push_back(&members);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[uniform_int(rng, 0, static_cast<int>(i - 1))]);

  const double n = static_cast<double>(dataset.size());
  DatasetSplit split;
  std::array<std::vector<std::size_t> *, 3> parts { &split.train, &split.valid,
                                                    &split.test };
  for (const auto *members: order) {
    int best = -1;
    double best_deficit = 0;
    for (int k = 0; k < 3; ++k) {
      if (ratios[k] <= 0)
        continue;
      double deficit = ratios[k] * n - static_cast<double>(parts[k]->size());
      if (best < 0 || deficit > best_deficit) {
        best = k;
        best_deficit = deficit;
      }
    }
    parts[best]->insert(parts[best]->end(), members->begin(), members->end());
  }
  for (auto *p: parts)
    std::sort(p->begin(), p->end());
  return split;
}

}  // namespace molrl
