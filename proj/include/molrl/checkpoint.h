//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_CHECKPOINT_H_
#define MOLRL_CHECKPOINT_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "molrl/denoiser.h"
#include "molrl/molgraph.h"

namespace molrl {

// Binary container: "MOLRLCK1", u32 version, u64 header length, a JSON
// header, then each tensor as little-endian doubles in row-major order. The
// header's "tensors" array lists {name, rows, cols} in payload order.
// docs/checkpoint_format.md has the byte-level description.
inline constexpr char kContainerMagic[9] = "MOLRLCK1";
inline constexpr std::uint32_t kContainerVersion = 1;

struct NamedMatrix {
  std::string name;
  Eigen::MatrixXd value;
};

struct Container {
  nlohmann::ordered_json header;
  std::vector<NamedMatrix> tensors;
};

// `header` must not contain a "tensors" key; it is generated.
std::string encode_container(const Container &container);
Container decode_container(const std::string &bytes, const std::string &source);

void write_container(const std::filesystem::path &path,
                     const Container &container);
Container read_container(const std::filesystem::path &path);

// Model state: denoiser weights plus what is needed to use and resume them.
struct Checkpoint {
  DenoiserParams params;
  AtomVocabulary vocab;
  int schedule_T = 0;
  double schedule_s = 1e-5;
  long long step = 0;
  std::optional<AdamState> adam;
  // Free-form run metadata (episode, cutoff state, ...).
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::filesystem::path &path);

}  // namespace molrl

#endif  // MOLRL_CHECKPOINT_H_
