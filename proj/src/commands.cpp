//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/commands.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "molrl/checkpoint.h"
#include "molrl/error.h"
#include "molrl/toy_data.h"

namespace molrl {

namespace {

constexpr int kSampleChunk = 64;

void write_text(const fs::path &path, const std::string &text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      fail(ErrorKind::kIo, "cannot write " + tmp.string());
    out << text;
    if (!out)
      fail(ErrorKind::kIo, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void append_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out)
    fail(ErrorKind::kIo, "cannot append to " + path.string());
  out << text;
}

std::string read_text(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Keeps the header and the rows whose leading integer is below `episode`.
void truncate_log(const fs::path &path, int episode) {
  if (!fs::exists(path))
    return;
  std::istringstream in(read_text(path));
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header || std::stoi(line.substr(0, line.find(','))) < episode)
      kept += line + "\n";
    header = false;
  }
  write_text(path, kept);
}

std::string csv_join(const std::vector<std::string> &cells) {
  std::string s;
  for (std::size_t k = 0; k < cells.size(); ++k)
    s += (k ? "," : "") + cells[k];
  return s + "\n";
}

std::vector<double> as_vector(const VectorXd &v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void check_objectives(const RunConfig &cfg, const PropertyOracle &oracle) {
  const auto names = oracle.property_names();
  bool same = names.size() == cfg.objectives.size();
  for (std::size_t k = 0; same && k < names.size(); ++k)
    same = names[k] == cfg.objectives[k].name;
  if (!same) {
    std::string have;
    for (const auto &n: names)
      have += (have.empty() ? "" : ", ") + n;
    fail(ErrorKind::kConfig, "objectives must list the oracle's properties in order: " + have);
  }
}

Checkpoint load_matching(const fs::path &path, const PreparedData &data) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.vocab == data.vocab))
    fail(ErrorKind::kModel, path.string() + ": vocabulary differs from the config");
  if (ck.params.config.condition_dim != data.condition_dim)
    fail(ErrorKind::kModel,
         fmt::format("{}: model expects {} condition values, the data has {}", path.string(),
                     ck.params.config.condition_dim, data.condition_dim));
  return ck;
}

}  // namespace

std::unique_ptr<PropertyOracle> make_oracle(const RunConfig &cfg,
                                            const AtomVocabulary &vocab) {
  if (cfg.oracle.kind == "table")
    return std::make_unique<TableOracle>(cfg.oracle.table, vocab);
  return std::make_unique<SyntheticOracle>(vocab, cfg.oracle.synthetic);
}

ConditionSizeDistribution PreparedData::condition_distribution(int bins) const {
  std::vector<VectorXd> conds;
  std::vector<int> sizes;
  for (const auto &m: train) {
    conds.push_back(m.condition);
    sizes.push_back(m.size());
  }
  return ConditionSizeDistribution::fit(conds, sizes, bins);
}

std::vector<double> PreparedData::train_property_means() const {
  std::vector<double> mean;
  for (const auto &m: train) {
    const auto est = oracle->predict(m);
    mean.resize(est.size(), 0.0);
    for (std::size_t k = 0; k < est.size(); ++k)
      mean[k] += est[k].mean;
  }
  for (double &x: mean)
    x /= static_cast<double>(train.size());
  return mean;
}

PreparedData load_prepared(const RunConfig &cfg) {
  if (cfg.data.dir.empty())
    fail(ErrorKind::kConfig, "data.dir is not set");
  if (!fs::exists(cfg.data.dir))
    fail(ErrorKind::kIo, "dataset path " + cfg.data.dir + " does not exist");
  PreparedData d;
  d.vocab = cfg.vocabulary();
  d.dataset = load_xyz_dataset(cfg.data.dir, d.vocab);
  if (d.dataset.empty())
    fail(ErrorKind::kUsage, "dataset " + cfg.data.dir + " holds no molecules");
  d.split = species_split(d.dataset, cfg.data.split, stream_seed(cfg.seed, "split"));
  if (d.split.train.empty())
    fail(ErrorKind::kConfig, "the training split is empty");
  d.oracle = make_oracle(cfg, d.vocab);
  check_objectives(cfg, *d.oracle);

  for (std::size_t idx: d.split.train) {
    MolecularConfig m = d.dataset.molecules[idx];
    switch (cfg.data.condition) {
    case ConditionSource::kOracle: {
      const auto est = d.oracle->predict(m);
      m.condition.resize(static_cast<Eigen::Index>(est.size()));
      for (std::size_t k = 0; k < est.size(); ++k)
        m.condition[static_cast<Eigen::Index>(k)] = est[k].mean;
      break;
    }
    case ConditionSource::kDataset:
      if (m.condition.size() == 0)
        fail(ErrorKind::kConfig, "molecule " + d.dataset.ids[idx]
                                     + " has no props: values to condition on");
      break;
    case ConditionSource::kNone:
      m.condition.resize(0);
      break;
    }
    d.train_hashes.insert(canonical_hash(infer_bonds(m, d.vocab)));
    d.train.push_back(std::move(m));
  }
  d.condition_dim = static_cast<int>(d.train.front().condition.size());
  return d;
}

void write_resolved_config(const RunConfig &cfg, const fs::path &dir) {
  fs::create_directories(dir);
  write_text(dir / "resolved_config.json", cfg.to_json().dump(2) + "\n");
}

nlohmann::ordered_json cmd_make_toy(const RunConfig &cfg, const fs::path &out) {
  write_toy_dataset(out, cfg.toy, stream_seed(cfg.seed, "toy"));
  return { { "command", "make-toy" }, { "dir", out.string() }, { "count", cfg.toy.count } };
}

nlohmann::ordered_json cmd_prepare(const RunConfig &cfg, const fs::path &out) {
  const PreparedData d = load_prepared(cfg);
  write_resolved_config(cfg, out);

  nlohmann::ordered_json splits;
  const std::pair<const char *, const std::vector<std::size_t> *> parts[] = {
    { "train", &d.split.train }, { "valid", &d.split.valid }, { "test", &d.split.test }
  };
  for (const auto &[name, idx]: parts) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i: *idx)
      arr.push_back(d.dataset.ids[i]);
    splits[name] = arr;
  }
  write_text(out / "splits.json", splits.dump(2) + "\n");
  write_text(out / "vocabulary.json", nlohmann::ordered_json(d.vocab.symbols()).dump() + "\n");

  // Oracle annotations for every molecule, keyed by id and graph hash.
  const auto names = d.oracle->property_names();
  std::vector<std::string> header { "molecule_id", "hash" };
  for (const auto &n: names) {
    header.push_back(n + "_mean");
    header.push_back(n + "_var_aleatoric");
    header.push_back(n + "_var_epistemic");
  }
  std::string csv = csv_join(header);
  for (std::size_t i = 0; i < d.dataset.size(); ++i) {
    const auto &m = d.dataset.molecules[i];
    std::vector<std::string> row { d.dataset.ids[i],
                                   hash_hex(canonical_hash(infer_bonds(m, d.vocab))) };
    for (const auto &e: d.oracle->predict(m)) {
      row.push_back(fmt::format("{}", e.mean));
      row.push_back(fmt::format("{}", e.var_aleatoric));
      row.push_back(fmt::format("{}", e.var_epistemic));
    }
    csv += csv_join(row);
  }
  write_text(out / "properties.csv", csv);
  return { { "command", "prepare" },
           { "molecules", d.dataset.size() },
           { "train", d.split.train.size() },
           { "valid", d.split.valid.size() },
           { "test", d.split.test.size() } };
}

nlohmann::ordered_json cmd_pretrain(const RunConfig &cfg, const fs::path &out) {
  const PreparedData d = load_prepared(cfg);
  write_resolved_config(cfg, out);
  const NoiseSchedule schedule(cfg.schedule.T, cfg.schedule.s);
  Rng init = make_rng(cfg.seed, "init");
  DenoiserParams params = init_denoiser(cfg.denoiser(d.condition_dim), init);
  AdamState adam = AdamState::zeros_like(params);
  Rng rng = make_rng(cfg.seed, "pretrain");

  std::string csv = "step,loss\n";
  const auto log = pretrain(params, adam, d.train, cfg.pretrain, schedule, d.vocab, rng);
  for (const auto &r: log)
    csv += fmt::format("{},{}\n", r.step, r.loss);
  write_text(out / "pretrain_loss.csv", csv);

  Checkpoint ck;
  ck.params = params;
  ck.vocab = d.vocab;
  ck.schedule_T = cfg.schedule.T;
  ck.schedule_s = cfg.schedule.s;
  ck.step = cfg.pretrain.steps;
  ck.adam = adam;
  ck.extra = { { "stage", "pretrain" }, { "seed", cfg.seed } };
  save_checkpoint(out / "pretrain.ckpt", ck);
  return { { "command", "pretrain" },
           { "checkpoint", (out / "pretrain.ckpt").string() },
           { "steps", cfg.pretrain.steps },
           { "final_loss", log.empty() ? 0.0 : log.back().loss } };
}

nlohmann::ordered_json cmd_finetune(const RunConfig &cfg, const fs::path &out,
                                    const fs::path &checkpoint) {
  const PreparedData d = load_prepared(cfg);
  write_resolved_config(cfg, out);
  const NoiseSchedule schedule(cfg.schedule.T, cfg.schedule.s);
  const auto dist = d.condition_distribution(cfg.data.condition_bins);

  PpoContext ctx;
  ctx.schedule = &schedule;
  ctx.vocab = &d.vocab;
  ctx.conditions = &dist;
  ctx.oracle = d.oracle.get();
  ctx.train_hashes = &d.train_hashes;
  ctx.reward = cfg.reward;

  PpoState state;
  const fs::path rng_state = out / "rng_state.json";
  const fs::path ck_dir = out / "checkpoints";
  fs::create_directories(ck_dir);
  if (fs::exists(rng_state)) {
    const auto j = nlohmann::ordered_json::parse(read_text(rng_state));
    if (j.at("seed").get<std::uint64_t>() != cfg.seed)
      fail(ErrorKind::kConfig, "rng_state.json belongs to a run with another seed");
    Checkpoint ck = load_matching(out / j.at("checkpoint").get<std::string>(), d);
    state.params = ck.params;
    if (!ck.adam)
      fail(ErrorKind::kParse, "episode checkpoint lacks optimizer state");
    state.adam = *ck.adam;
    state.cutoffs = DynamicCutoffState::from_json(ck.extra.at("cutoffs"));
    state.next_episode = j.at("next_episode").get<int>();
    state.updates = j.at("updates").get<long long>();
  } else {
    Checkpoint ck = load_matching(checkpoint, d);
    state.params = ck.params;
    state.adam = AdamState::zeros_like(state.params);
    state.cutoffs = DynamicCutoffState(cfg.objectives, cfg.cutoff_init == CutoffInit::kTrainMean
                                                           ? d.train_property_means()
                                                           : std::vector<double> {});
    write_text(out / "episodes.csv",
               "episode,mean_reward,validity,uniqueness,novelty,vun,atom_stability,"
               "mol_stability,mean_u_multi,lambda,first_epoch_loss,first_epoch_ratio_dev,lr\n");
    write_text(out / "rewards.csv", "episode,molecule,u_multi,bonus,diversity,lambda,total\n");
    write_text(out / "cutoffs.csv", "episode,name,ema,effective\n");
  }
  for (const char *log: { "episodes.csv", "rewards.csv", "cutoffs.csv" })
    truncate_log(out / log, state.next_episode);

  const auto on_episode = [&](const PpoState &s, const EpisodeLogRow &row,
                              const EpisodeBatch &batch) {
    const auto &r = row.report;
    append_text(out / "episodes.csv",
                fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", row.episode,
                            row.mean_reward, r.validity, r.uniqueness, r.novelty, r.vun,
                            r.atom_stability, r.mol_stability, row.mean_u_multi, row.lambda,
                            row.first_epoch_loss, row.first_epoch_ratio_dev, row.last_lr));
    std::string rewards;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto &b = batch.scored[i].reward;
      rewards += fmt::format("{},{},{},{},{},{},{}\n", row.episode, i, b.u_multi, b.bonus,
                             b.diversity, b.lambda, b.total);
    }
    append_text(out / "rewards.csv", rewards);
    std::string cut;
    const auto eff = s.cutoffs.effective();
    for (std::size_t k = 0; k < eff.size(); ++k)
      cut += fmt::format("{},{},{},{}\n", row.episode, eff[k].name, s.cutoffs.ema()[k],
                         eff[k].cutoff);
    append_text(out / "cutoffs.csv", cut);

    Checkpoint ck;
    ck.params = s.params;
    ck.vocab = d.vocab;
    ck.schedule_T = cfg.schedule.T;
    ck.schedule_s = cfg.schedule.s;
    ck.step = s.updates;
    ck.adam = s.adam;
    ck.extra = { { "stage", "finetune" }, { "episode", row.episode },
                 { "cutoffs", s.cutoffs.to_json() } };
    const std::string name = fmt::format("episode_{:03d}.ckpt", row.episode);
    save_checkpoint(ck_dir / name, ck);
    const nlohmann::ordered_json st = { { "seed", cfg.seed },
                                        { "stream", "ppo" },
                                        { "next_episode", s.next_episode },
                                        { "updates", s.updates },
                                        { "checkpoint", "checkpoints/" + name } };
    write_text(rng_state, st.dump(2) + "\n");
  };
  const auto log = ppo_train(state, cfg.ppo, ctx, cfg.seed, on_episode);

  Checkpoint final_ck;
  final_ck.params = state.params;
  final_ck.vocab = d.vocab;
  final_ck.schedule_T = cfg.schedule.T;
  final_ck.schedule_s = cfg.schedule.s;
  final_ck.step = state.updates;
  final_ck.extra = { { "stage", "finetune" }, { "cutoffs", state.cutoffs.to_json() } };
  save_checkpoint(out / "finetuned.ckpt", final_ck);

  nlohmann::ordered_json summary = { { "command", "finetune" },
                                     { "checkpoint", (out / "finetuned.ckpt").string() },
                                     { "episodes_run", log.size() } };
  if (!log.empty())
    summary["last_mean_reward"] = log.back().mean_reward;
  return summary;
}

std::vector<MolecularConfig> draw_samples(const DenoiserParams &params,
                                          const PreparedData &data,
                                          const RunConfig &cfg, int n,
                                          std::uint64_t seed) {
  const NoiseSchedule schedule(cfg.schedule.T, cfg.schedule.s);
  const auto dist = data.condition_distribution(cfg.data.condition_bins);
  Rng rng = make_rng(seed, "sample");
  std::vector<MolecularConfig> out;
  for (int start = 0; start < n; start += kSampleChunk) {
    const int count = std::min(kSampleChunk, n - start);
    std::vector<VectorXd> conds;
    std::vector<int> sizes;
    std::vector<SamplerNoise> noise;
    for (int i = 0; i < count; ++i) {
      const auto dr = dist.draw(rng);
      conds.push_back(dr.condition);
      sizes.push_back(dr.num_atoms);
      noise.push_back(draw_sampler_noise(dr.num_atoms, data.vocab.size(), schedule.T(), rng));
    }
    for (auto &r: sample_batch(params, conds, sizes, schedule, data.vocab, noise, false))
      out.push_back(std::move(r.molecule));
  }
  return out;
}

nlohmann::ordered_json cmd_sample(const RunConfig &cfg, const fs::path &out,
                                  const fs::path &checkpoint, int n) {
  if (n < 1)
    fail(ErrorKind::kUsage, "--n must be >= 1");
  const PreparedData d = load_prepared(cfg);
  write_resolved_config(cfg, out);
  const Checkpoint ck = load_matching(checkpoint, d);
  const auto mols = draw_samples(ck.params, d, cfg, n, cfg.seed);

  const fs::path dir = out / "samples";
  fs::create_directories(dir);
  const auto names = d.oracle->property_names();
  std::vector<std::string> header { "molecule_id", "num_atoms", "valid" };
  for (const auto &p: names) {
    header.push_back(p + "_mean");
    header.push_back(p + "_sigma");
  }
  std::string csv = csv_join(header);
  int valid = 0;
  for (std::size_t i = 0; i < mols.size(); ++i) {
    const std::string id = fmt::format("mol_{:04d}", i);
    std::string comment = "generated";
    if (mols[i].condition.size() > 0) {
      comment += " condition=";
      for (Eigen::Index k = 0; k < mols[i].condition.size(); ++k)
        comment += fmt::format("{}{}", k ? ";" : "", mols[i].condition[k]);
    }
    write_xyz(dir / (id + ".xyz"), mols[i], comment);
    const bool ok = is_valid(mols[i], d.vocab);
    valid += ok;
    std::vector<std::string> row { id, std::to_string(mols[i].size()), ok ? "1" : "0" };
    for (const auto &e: d.oracle->predict(mols[i])) {
      row.push_back(fmt::format("{}", e.mean));
      row.push_back(fmt::format("{}", e.sigma()));
    }
    csv += csv_join(row);
  }
  write_manifest(dir / "manifest.json", { d.vocab.symbols(), {} });
  write_text(out / "sample_properties.csv", csv);
  return { { "command", "sample" }, { "dir", dir.string() }, { "n", n }, { "valid", valid } };
}

std::string format_report_row(const GenerationReport &r) {
  return fmt::format("n={} Val={:.2f} Uni={:.2f} Nov={:.2f} VUN={:.2f} AtomStab={:.2f} "
                     "MolStab={:.2f} Top={:.2f}{}",
                     r.n_generated, r.validity, r.uniqueness, r.novelty, r.vun,
                     r.atom_stability, r.mol_stability, r.top_molecules,
                     r.degenerate ? " (no valid molecules)" : "");
}

nlohmann::ordered_json cmd_evaluate(const RunConfig &cfg, const fs::path &out,
                                    const fs::path &samples) {
  if (samples.empty() || !fs::is_directory(samples))
    fail(ErrorKind::kUsage, "evaluate needs a directory of generated XYZ files");
  bool any = false;
  for (const auto &e: fs::directory_iterator(samples))
    any |= e.path().extension() == ".xyz";
  if (!any)
    fail(ErrorKind::kUsage, "no .xyz files in " + samples.string());
  const PreparedData d = load_prepared(cfg);
  write_resolved_config(cfg, out);
  const Dataset gen = load_xyz_dataset(samples, d.vocab);
  const auto report = evaluate(gen.molecules, d.vocab, d.train_hashes, *d.oracle, cfg.objectives);

  std::vector<std::string> header { "molecule_id", "valid", "unique", "novel", "connected",
                                    "valences_ok", "stable_atom_fraction", "top" };
  for (const auto &p: d.oracle->property_names())
    header.push_back(p + "_mean");
  std::string csv = csv_join(header);
  for (std::size_t i = 0; i < report.details.size(); ++i) {
    const auto &m = report.details[i];
    std::vector<std::string> row { gen.ids[i], std::to_string(m.valid), std::to_string(m.unique),
                                   std::to_string(m.novel), std::to_string(m.connected),
                                   std::to_string(m.valences_ok),
                                   fmt::format("{}", m.stable_atom_fraction),
                                   std::to_string(m.passes_cutoffs) };
    for (double v: m.property_means)
      row.push_back(fmt::format("{}", v));
    csv += csv_join(row);
  }
  write_text(out / "report_details.csv", csv);
  write_text(out / "report.json", report.to_json().dump(2) + "\n");
  auto summary = report.to_json();
  summary["command"] = "evaluate";
  summary["row"] = format_report_row(report);
  return summary;
}

nlohmann::ordered_json cmd_calibrate(const RunConfig &cfg, const fs::path &out,
                                     const fs::path &table) {
  std::istringstream in(read_text(table));
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorKind::kParse, table.string() + ": empty table");
  const auto split = [](const std::string &s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string c;
    while (std::getline(ss, c, ',')) {
      const auto b = c.find_first_not_of(" \t\r");
      const auto e = c.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : c.substr(b, e - b + 1));
    }
    return cells;
  };
  const auto header = split(line);
  if (header.size() < 4 || (header.size() - 1) % 3 != 0 || header[0] != "molecule_id")
    fail(ErrorKind::kParse, table.string()
                                + ": header must be molecule_id, then the property columns, "
                                  "then mean_<p> and sigma_<p> for each");
  const std::size_t k = (header.size() - 1) / 3;
  std::vector<std::string> names(header.begin() + 1, header.begin() + 1 + static_cast<long>(k));
  for (std::size_t p = 0; p < k; ++p)
    if (header[1 + k + p] != "mean_" + names[p] || header[1 + 2 * k + p] != "sigma_" + names[p])
      fail(ErrorKind::kParse, table.string() + ": expected mean_" + names[p] + " and sigma_"
                                  + names[p]);

  std::vector<std::vector<double>> truth(k), mean(k), sigma(k);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      fail(ErrorKind::kParse, fmt::format("{}:{}: wrong number of columns", table.string(), lineno));
    for (std::size_t p = 0; p < k; ++p) {
      try {
        truth[p].push_back(std::stod(cells[1 + p]));
        mean[p].push_back(std::stod(cells[1 + k + p]));
        sigma[p].push_back(std::stod(cells[1 + 2 * k + p]));
      } catch (const std::exception &) {
        fail(ErrorKind::kParse, fmt::format("{}:{}: not a number", table.string(), lineno));
      }
    }
  }
  if (truth[0].size() < 2)
    fail(ErrorKind::kUsage, table.string() + ": calibration needs at least two rows");
  fs::create_directories(out);
  write_resolved_config(cfg, out);

  nlohmann::ordered_json result = { { "command", "calibrate" }, { "n", truth[0].size() } };
  result["properties"] = nlohmann::ordered_json::array();
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(truth[0].size()), static_cast<Eigen::Index>(k));
  for (std::size_t p = 0; p < k; ++p) {
    const auto curve = calibration_curve(truth[p], mean[p], sigma[p]);
    std::string csv = "c,empirical_coverage\n";
    for (const auto &[c, cov]: curve)
      csv += fmt::format("{},{}\n", c, cov);
    write_text(out / ("calibration_" + names[p] + ".csv"), csv);
    result["properties"].push_back({ { "name", names[p] },
                                     { "r2", r_squared(truth[p], mean[p]) },
                                     { "auce", auce(truth[p], mean[p], sigma[p]) } });
    for (std::size_t i = 0; i < truth[p].size(); ++i)
      cols(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = truth[p][i];
  }
  if (k > 1) {
    const Eigen::MatrixXd r = pearson_matrix(cols);
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      rows.push_back(as_vector(r.row(i).transpose()));
    result["pearson"] = rows;
  }
  write_text(out / "calibration.json", result.dump(2) + "\n");
  return result;
}

}  // namespace molrl
