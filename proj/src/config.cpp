//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/config.h"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "molrl/error.h"

namespace molrl {

namespace {

std::string_view condition_name(ConditionSource c) {
  switch (c) {
  case ConditionSource::kOracle: return "oracle";
  case ConditionSource::kDataset: return "dataset";
  case ConditionSource::kNone: return "none";
  }
  return "?";
}

ConditionSource condition_from_name(const std::string &s) {
  if (s == "oracle")
    return ConditionSource::kOracle;
  if (s == "dataset")
    return ConditionSource::kDataset;
  if (s == "none")
    return ConditionSource::kNone;
  fail(ErrorKind::kConfig, "data.condition must be oracle, dataset or none, got '" + s + "'");
}

// Reads the keys of one JSON object and rejects any it was not asked for.
class Section {
public:
  Section(const nlohmann::json &j, std::string path): j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      fail(ErrorKind::kConfig, where() + " must be an object");
  }

  template <class T>
  void get(const std::string &key, T &out) {
    seen_.insert(key);
    if (!j_.contains(key))
      return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
      fail(ErrorKind::kConfig, fmt::format("{}: {}", name(key), e.what()));
    }
  }

  bool has(const std::string &key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const nlohmann::json &raw(const std::string &key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string name(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  // Call after every get; throws on leftovers.
  void finish() const {
    for (const auto &item: j_.items())
      if (!seen_.contains(item.key()))
        fail(ErrorKind::kConfig, "unknown config key '" + name(item.key()) + "'");
  }

private:
  std::string where() const { return path_.empty() ? "config" : "config." + path_; }

  const nlohmann::json &j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

DenoiserConfig RunConfig::denoiser(int condition_dim) const {
  DenoiserConfig c;
  c.num_atom_types = static_cast<int>(data.vocabulary.size());
  c.condition_dim = condition_dim;
  c.layers = model.layers;
  c.hidden = model.hidden;
  c.time_steps = schedule.T;
  c.schedule_s = schedule.s;
  c.output = model.output;
  c.feature_scale = model.feature_scale;
  c.coord_range = model.coord_range;
  return c;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["data"] = { { "dir", data.dir },
                { "vocabulary", data.vocabulary },
                { "split", data.split },
                { "condition", condition_name(data.condition) },
                { "condition_bins", data.condition_bins } };
  j["toy"] = { { "count", toy.count },
               { "min_atoms", toy.min_atoms },
               { "max_atoms", toy.max_atoms },
               { "symbols", toy.symbols },
               { "weights", toy.weights },
               { "double_bond_prob", toy.double_bond_prob } };
  j["schedule"] = { { "T", schedule.T }, { "s", schedule.s } };
  j["model"] = { { "layers", model.layers },
                 { "hidden", model.hidden },
                 { "output", output_mode_name(model.output) },
                 { "feature_scale", model.feature_scale },
                 { "coord_range", model.coord_range } };
  j["pretrain"] = { { "steps", pretrain.steps },
                    { "batch_size", pretrain.batch_size },
                    { "learning_rate", pretrain.learning_rate },
                    { "chunks", pretrain.chunks } };
  j["ppo"] = { { "clip_eps", ppo.clip_eps },
               { "learning_rate", ppo.learning_rate },
               { "reuse", ppo.reuse },
               { "n_samples", ppo.n_samples },
               { "k_timesteps", ppo.k_timesteps },
               { "episodes", ppo.episodes },
               { "grad_accum_batches", ppo.grad_accum_batches },
               { "final_lr_fraction", ppo.final_lr_fraction } };
  j["reward"] = { { "b_valid", reward.b_valid },
                  { "b_unique", reward.b_unique },
                  { "b_novel", reward.b_novel },
                  { "lambda0", reward.lambda0 },
                  { "decay_rate", reward.decay_rate },
                  { "cutoff_mode", cutoff_mode_name(reward.cutoff_mode) },
                  { "cutoff_init", cutoff_init == CutoffInit::kTrainMean ? "train_mean" : "floor" },
                  { "ema_momentum", reward.ema_momentum },
                  { "bonus_enabled", reward.bonus_enabled },
                  { "diversity_enabled", reward.diversity_enabled } };
  j["objectives"] = nlohmann::ordered_json::array();
  for (const auto &o: objectives)
    j["objectives"].push_back(
        { { "name", o.name }, { "direction", o.direction }, { "cutoff", o.cutoff } });
  j["oracle"] = { { "kind", oracle.kind },
                  { "table", oracle.table },
                  { "aleatoric_variance", oracle.synthetic.aleatoric_variance },
                  { "epistemic_scale", oracle.synthetic.epistemic_scale } };
  j["sample"] = { { "n", sample_n } };
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json &j) {
  RunConfig c;
  Section root(j, "");
  root.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion)
    fail(ErrorKind::kConfig, fmt::format("unsupported schema_version {} (expected {})",
                                         c.schema_version, kConfigSchemaVersion));
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);

  if (root.has("data")) {
    Section s(root.raw("data"), "data");
    s.get("dir", c.data.dir);
    s.get("vocabulary", c.data.vocabulary);
    s.get("split", c.data.split);
    std::string cond(condition_name(c.data.condition));
    s.get("condition", cond);
    c.data.condition = condition_from_name(cond);
    s.get("condition_bins", c.data.condition_bins);
    s.finish();
  }
  if (root.has("toy")) {
    Section s(root.raw("toy"), "toy");
    s.get("count", c.toy.count);
    s.get("min_atoms", c.toy.min_atoms);
    s.get("max_atoms", c.toy.max_atoms);
    s.get("symbols", c.toy.symbols);
    s.get("weights", c.toy.weights);
    s.get("double_bond_prob", c.toy.double_bond_prob);
    s.finish();
  }
  if (root.has("schedule")) {
    Section s(root.raw("schedule"), "schedule");
    s.get("T", c.schedule.T);
    s.get("s", c.schedule.s);
    s.finish();
  }
  if (root.has("model")) {
    Section s(root.raw("model"), "model");
    s.get("layers", c.model.layers);
    s.get("hidden", c.model.hidden);
    std::string out(output_mode_name(c.model.output));
    s.get("output", out);
    try {
      c.model.output = output_mode_from_name(out);
    } catch (const Error &e) {
      fail(ErrorKind::kConfig, std::string("model.output: ") + e.what());
    }
    s.get("feature_scale", c.model.feature_scale);
    s.get("coord_range", c.model.coord_range);
    s.finish();
  }
  if (root.has("pretrain")) {
    Section s(root.raw("pretrain"), "pretrain");
    s.get("steps", c.pretrain.steps);
    s.get("batch_size", c.pretrain.batch_size);
    s.get("learning_rate", c.pretrain.learning_rate);
    s.get("chunks", c.pretrain.chunks);
    s.finish();
  }
  if (root.has("ppo")) {
    Section s(root.raw("ppo"), "ppo");
    s.get("clip_eps", c.ppo.clip_eps);
    s.get("learning_rate", c.ppo.learning_rate);
    s.get("reuse", c.ppo.reuse);
    s.get("n_samples", c.ppo.n_samples);
    s.get("k_timesteps", c.ppo.k_timesteps);
    s.get("episodes", c.ppo.episodes);
    s.get("grad_accum_batches", c.ppo.grad_accum_batches);
    s.get("final_lr_fraction", c.ppo.final_lr_fraction);
    s.finish();
  }
  if (root.has("reward")) {
    Section s(root.raw("reward"), "reward");
    s.get("b_valid", c.reward.b_valid);
    s.get("b_unique", c.reward.b_unique);
    s.get("b_novel", c.reward.b_novel);
    s.get("lambda0", c.reward.lambda0);
    s.get("decay_rate", c.reward.decay_rate);
    std::string mode(cutoff_mode_name(c.reward.cutoff_mode));
    s.get("cutoff_mode", mode);
    try {
      c.reward.cutoff_mode = cutoff_mode_from_name(mode);
    } catch (const Error &e) {
      fail(ErrorKind::kConfig, std::string("reward.cutoff_mode: ") + e.what());
    }
    std::string init = c.cutoff_init == CutoffInit::kTrainMean ? "train_mean" : "floor";
    s.get("cutoff_init", init);
    if (init == "train_mean")
      c.cutoff_init = CutoffInit::kTrainMean;
    else if (init == "floor")
      c.cutoff_init = CutoffInit::kFloor;
    else
      fail(ErrorKind::kConfig, "reward.cutoff_init must be train_mean or floor");
    s.get("ema_momentum", c.reward.ema_momentum);
    s.get("bonus_enabled", c.reward.bonus_enabled);
    s.get("diversity_enabled", c.reward.diversity_enabled);
    s.finish();
  }
  if (root.has("objectives")) {
    const auto &arr = root.raw("objectives");
    if (!arr.is_array())
      fail(ErrorKind::kConfig, "objectives must be an array");
    c.objectives.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      Section s(arr[k], fmt::format("objectives[{}]", k));
      ObjectiveSpec o;
      s.get("name", o.name);
      s.get("direction", o.direction);
      s.get("cutoff", o.cutoff);
      s.finish();
      c.objectives.push_back(o);
    }
  }
  if (root.has("oracle")) {
    Section s(root.raw("oracle"), "oracle");
    s.get("kind", c.oracle.kind);
    s.get("table", c.oracle.table);
    s.get("aleatoric_variance", c.oracle.synthetic.aleatoric_variance);
    s.get("epistemic_scale", c.oracle.synthetic.epistemic_scale);
    s.finish();
  }
  if (root.has("sample")) {
    Section s(root.raw("sample"), "sample");
    s.get("n", c.sample_n);
    s.finish();
  }
  root.finish();
  c.check();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::kIo, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  return from_json(j);
}

void RunConfig::check() const {
  try {
    (void) vocabulary();
  } catch (const Error &e) {
    fail(ErrorKind::kConfig, std::string("data.vocabulary: ") + e.what());
  }
  double total = 0;
  for (double r: data.split) {
    if (!(r >= 0))
      fail(ErrorKind::kConfig, "data.split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9)
    fail(ErrorKind::kConfig, "data.split ratios must sum to 1");
  if (data.condition_bins < 1)
    fail(ErrorKind::kConfig, "data.condition_bins must be >= 1");
  if (schedule.T < 1 || !(schedule.s > 0 && schedule.s < 0.5))
    fail(ErrorKind::kConfig, "schedule needs T >= 1 and 0 < s < 0.5");
  if (model.layers < 1 || model.hidden < 1 || !(model.feature_scale > 0)
      || !(model.coord_range > 0))
    fail(ErrorKind::kConfig, "model sizes and scales must be positive");
  if (pretrain.steps < 0 || pretrain.batch_size < 1 || !(pretrain.learning_rate > 0)
      || pretrain.chunks < 1)
    fail(ErrorKind::kConfig, "pretrain needs steps >= 0, batch_size >= 1, lr > 0, chunks >= 1");
  ppo.check();
  reward.check();
  if (objectives.empty())
    fail(ErrorKind::kConfig, "at least one objective is required");
  std::set<std::string> names;
  for (const auto &o: objectives) {
    if (o.direction != 1 && o.direction != -1)
      fail(ErrorKind::kConfig, "objective '" + o.name + "' direction must be +1 or -1");
    if (!std::isfinite(o.cutoff))
      fail(ErrorKind::kConfig, "objective '" + o.name + "' cutoff must be finite");
    if (!names.insert(o.name).second)
      fail(ErrorKind::kConfig, "duplicate objective '" + o.name + "'");
  }
  if (oracle.kind != "synthetic" && oracle.kind != "table")
    fail(ErrorKind::kConfig, "oracle.kind must be synthetic or table");
  if (oracle.kind == "table" && oracle.table.empty())
    fail(ErrorKind::kConfig, "oracle.table is required for a table oracle");
  if (sample_n < 1)
    fail(ErrorKind::kConfig, "sample.n must be >= 1");
}

}  // namespace molrl
