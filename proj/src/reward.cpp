//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/reward.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "molrl/error.h"
#include "molrl/parallel.h"

namespace molrl {

std::string_view cutoff_mode_name(CutoffMode mode) {
  return mode == CutoffMode::kDynamic ? "dynamic" : "static";
}

CutoffMode cutoff_mode_from_name(std::string_view name) {
  if (name == "dynamic")
    return CutoffMode::kDynamic;
  if (name == "static")
    return CutoffMode::kStatic;
  fail(ErrorKind::kConfig, fmt::format("unknown cutoff mode '{}'", name));
}

void RewardConfig::check() const {
  for (double w: { b_valid, b_unique, b_novel, lambda0, decay_rate })
    if (!(w >= 0) || !std::isfinite(w))
      fail(ErrorKind::kConfig, "reward weights must be finite and non-negative");
  if (!(ema_momentum >= 0 && ema_momentum < 1))
    fail(ErrorKind::kConfig, "ema_momentum must lie in [0, 1)");
}

double bonus(bool valid, bool unique, bool novel, const RewardConfig &cfg) {
  if (!cfg.bonus_enabled)
    return 1.0;
  return cfg.b_valid * valid + cfg.b_unique * unique + cfg.b_novel * novel;
}

std::vector<double> batch_diversity(std::span<const Fingerprint> fingerprints) {
  const std::size_t n = fingerprints.size();
  std::vector<double> d(n, 0.0);
  if (n < 2)
    return d;
  std::vector<double> sim(n * n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        sim[i * n + j] = tanimoto(fingerprints[i], fingerprints[j]);
  });
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j)
      s += sim[i * n + j];
    d[i] = s / static_cast<double>(n - 1);
  }
  return d;
}

double lambda_at(int episode, const RewardConfig &cfg) {
  if (episode < 0)
    fail(ErrorKind::kConfig, "episode must be non-negative");
  if (!cfg.diversity_enabled)
    return 0.0;
  return cfg.lambda0 * std::exp(-cfg.decay_rate * episode);
}

RewardBreakdown total_reward(double u_multi, double bonus, double diversity,
                             double lambda) {
  RewardBreakdown r;
  r.u_multi = u_multi;
  r.bonus = bonus;
  r.diversity = diversity;
  r.lambda = lambda;
  r.total = u_multi * bonus - lambda * diversity;
  return r;
}

// -- cutoffs -------------------------------------------------------------------

DynamicCutoffState::DynamicCutoffState(std::vector<ObjectiveSpec> floors,
                                       std::vector<double> initial_ema)
    : floors_(std::move(floors)), ema_(std::move(initial_ema)) {
  if (ema_.empty())
    for (const auto &f: floors_)
      ema_.push_back(f.cutoff);
  if (ema_.size() != floors_.size())
    fail(ErrorKind::kShape, "one moving average per objective is required");
  for (const auto &f: floors_)
    if (f.direction != 1 && f.direction != -1)
      fail(ErrorKind::kConfig, "objective '" + f.name + "' direction must be +1 or -1");
}

std::vector<ObjectiveSpec> DynamicCutoffState::effective() const {
  std::vector<ObjectiveSpec> out = floors_;
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k].cutoff = out[k].direction > 0 ? std::max(ema_[k], floors_[k].cutoff)
                                         : std::min(ema_[k], floors_[k].cutoff);
  return out;
}

void DynamicCutoffState::update(std::span<const double> batch_means,
                                const RewardConfig &cfg) {
  if (cfg.cutoff_mode == CutoffMode::kStatic)
    return;
  if (batch_means.size() != ema_.size())
    fail(ErrorKind::kShape, "batch means do not match the objectives");
  const double m = cfg.ema_momentum;
  for (std::size_t k = 0; k < ema_.size(); ++k)
    ema_[k] = m * ema_[k] + (1 - m) * batch_means[k];
}

nlohmann::ordered_json DynamicCutoffState::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < floors_.size(); ++k)
    j.push_back({ { "name", floors_[k].name },
                  { "direction", floors_[k].direction },
                  { "floor", floors_[k].cutoff },
                  { "ema", ema_[k] } });
  return j;
}

DynamicCutoffState DynamicCutoffState::from_json(const nlohmann::ordered_json &j) {
  std::vector<ObjectiveSpec> floors;
  std::vector<double> ema;
  try {
    for (const auto &e: j) {
      floors.push_back({ e.at("name").get<std::string>(), e.at("direction").get<int>(),
                         e.at("floor").get<double>() });
      ema.push_back(e.at("ema").get<double>());
    }
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kParse, std::string("bad cutoff state: ") + e.what());
  }
  return DynamicCutoffState(std::move(floors), std::move(ema));
}

// -- batch scoring -------------------------------------------------------------

std::vector<MoleculeFlags> classify_batch(std::span<const MolecularConfig> batch,
                                          const AtomVocabulary &vocab,
                                          const HashSet &reference) {
  std::vector<MoleculeFlags> flags(batch.size());
  std::vector<CanonicalHash> hashes(batch.size(), 0);
  parallel_for(batch.size(), [&](std::size_t i) {
    flags[i].valid = is_valid(batch[i], vocab);
    if (flags[i].valid)
      hashes[i] = canonical_hash(infer_bonds(batch[i], vocab));
  });
  HashSet seen;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!flags[i].valid)
      continue;
    flags[i].unique = seen.insert(hashes[i]).second;
    flags[i].novel = !reference.contains(hashes[i]);
  }
  return flags;
}

std::vector<ScoredMolecule> score_batch(std::span<const MolecularConfig> batch,
                                        const AtomVocabulary &vocab,
                                        const PropertyOracle &oracle,
                                        const HashSet &reference,
                                        std::span<const ObjectiveSpec> objectives,
                                        const RewardConfig &cfg, int episode) {
  const auto names = oracle.property_names();
  if (names.size() != objectives.size())
    fail(ErrorKind::kConfig, fmt::format("oracle has {} properties, {} objectives configured",
                                         names.size(), objectives.size()));
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] != objectives[k].name)
      fail(ErrorKind::kConfig, fmt::format("objective {} is '{}' but the oracle reports '{}'",
                                           k, objectives[k].name, names[k]));
  const auto flags = classify_batch(batch, vocab, reference);
  std::vector<ScoredMolecule> out(batch.size());
  std::vector<Fingerprint> fps(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    out[i].flags = flags[i];
    out[i].estimates = oracle.predict(batch[i]);
    fps[i] = fingerprint(infer_bonds(batch[i], vocab));
  });
  const auto div = batch_diversity(fps);
  const double lambda = lambda_at(episode, cfg);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double u = multi_objective_prob(out[i].estimates, objectives);
    const double b = bonus(flags[i].valid, flags[i].unique, flags[i].novel, cfg);
    out[i].reward = total_reward(u, b, div[i], lambda);
  }
  return out;
}

}  // namespace molrl
