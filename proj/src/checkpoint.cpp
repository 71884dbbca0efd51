//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "molrl/error.h"

namespace molrl {

namespace {

void put_u64(std::string &out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k)
    out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_u32(std::string &out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k)
    out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

class Reader {
public:
  Reader(const std::string &bytes, const std::string &source)
      : bytes_(bytes), source_(source) { }

  std::uint64_t u(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int k = 0; k < width; ++k)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k]))
           << (8 * k);
    pos_ += width;
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      fail(ErrorKind::kParse, source_ + ": truncated container");
  }

  const std::string &bytes_;
  const std::string &source_;
  std::size_t pos_ = 0;
};

nlohmann::ordered_json config_json(const DenoiserConfig &c) {
  nlohmann::ordered_json j;
  j["num_atom_types"] = c.num_atom_types;
  j["condition_dim"] = c.condition_dim;
  j["layers"] = c.layers;
  j["hidden"] = c.hidden;
  j["time_steps"] = c.time_steps;
  j["feature_scale"] = c.feature_scale;
  j["coord_range"] = c.coord_range;
  j["schedule_s"] = c.schedule_s;
  j["output"] = output_mode_name(c.output);
  return j;
}

DenoiserConfig config_from_json(const nlohmann::ordered_json &j) {
  DenoiserConfig c;
  c.num_atom_types = j.at("num_atom_types").get<int>();
  c.condition_dim = j.at("condition_dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.time_steps = j.at("time_steps").get<int>();
  c.feature_scale = j.at("feature_scale").get<double>();
  c.coord_range = j.at("coord_range").get<double>();
  c.schedule_s = j.at("schedule_s").get<double>();
  c.output = output_mode_from_name(j.at("output").get<std::string>());
  return c;
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string encode_container(const Container &container) {
  if (container.header.contains("tensors"))
    fail(ErrorKind::kModel, "container header must not define 'tensors'");
  nlohmann::ordered_json header = container.header;
  header["tensors"] = nlohmann::ordered_json::array();
  for (const auto &t: container.tensors)
    header["tensors"].push_back(
        { { "name", t.name }, { "rows", t.value.rows() }, { "cols", t.value.cols() } });
  const std::string text = header.dump();

  std::string out(kContainerMagic, 8);
  put_u32(out, kContainerVersion);
  put_u64(out, text.size());
  out += text;
  for (const auto &t: container.tensors)
    for (Eigen::Index i = 0; i < t.value.rows(); ++i)
      for (Eigen::Index j = 0; j < t.value.cols(); ++j)
        put_u64(out, std::bit_cast<std::uint64_t>(t.value(i, j)));
  return out;
}

Container decode_container(const std::string &bytes, const std::string &source) {
  Reader r(bytes, source);
  if (r.take(8) != std::string(kContainerMagic, 8))
    fail(ErrorKind::kParse, source + ": not a molrl container (bad magic)");
  const auto version = r.u(4);
  if (version != kContainerVersion)
    fail(ErrorKind::kParse,
         fmt::format("{}: unsupported container version {}", source, version));
  const auto length = r.u(8);
  Container c;
  try {
    c.header = nlohmann::ordered_json::parse(r.take(length));
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kParse, source + ": bad header: " + e.what());
  }
  try {
    for (const auto &t: c.header.at("tensors")) {
      NamedMatrix m;
      m.name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      if (rows < 0 || cols < 0)
        fail(ErrorKind::kParse, source + ": negative tensor shape");
      m.value.resize(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
          m.value(i, j) = std::bit_cast<double>(r.u(8));
      c.tensors.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kParse, source + ": bad tensor table: " + e.what());
  }
  if (!r.done())
    fail(ErrorKind::kParse, source + ": trailing bytes after payload");
  c.header.erase("tensors");
  return c;
}

void write_container(const std::filesystem::path &path,
                     const Container &container) {
  const std::string bytes = encode_container(container);
  // Write then rename so a crash never leaves a half-written file behind.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      fail(ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      fail(ErrorKind::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Container read_container(const std::filesystem::path &path) {
  return decode_container(read_file(path), path.string());
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  check_denoiser_shapes(ckpt.params);
  Container c;
  c.header["kind"] = "denoiser";
  c.header["architecture"] = config_json(ckpt.params.config);
  c.header["vocabulary"] = ckpt.vocab.symbols();
  c.header["schedule"] = { { "T", ckpt.schedule_T }, { "s", ckpt.schedule_s } };
  c.header["step"] = ckpt.step;
  c.header["optimizer"] = ckpt.adam
                              ? nlohmann::ordered_json({ { "kind", "adam" },
                                                         { "step", ckpt.adam->step } })
                              : nlohmann::ordered_json(nullptr);
  c.header["extra"] = ckpt.extra;
  for (std::size_t k = 0; k < ckpt.params.tensors.size(); ++k)
    c.tensors.push_back({ ckpt.params.names[k], ckpt.params.tensors[k] });
  if (ckpt.adam) {
    if (ckpt.adam->m.size() != ckpt.params.tensors.size()
        || ckpt.adam->v.size() != ckpt.params.tensors.size())
      fail(ErrorKind::kModel, "optimizer state does not match the parameters");
    for (std::size_t k = 0; k < ckpt.params.tensors.size(); ++k)
      c.tensors.push_back({ "adam.m." + ckpt.params.names[k], ckpt.adam->m[k] });
    for (std::size_t k = 0; k < ckpt.params.tensors.size(); ++k)
      c.tensors.push_back({ "adam.v." + ckpt.params.names[k], ckpt.adam->v[k] });
  }
  write_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  Container c = read_container(path);
  const std::string source = path.string();
  Checkpoint ckpt;
  try {
    if (c.header.at("kind").get<std::string>() != "denoiser")
      fail(ErrorKind::kParse, source + ": not a denoiser checkpoint");
    ckpt.params.config = config_from_json(c.header.at("architecture"));
    ckpt.vocab = AtomVocabulary(
        c.header.at("vocabulary").get<std::vector<std::string>>());
    ckpt.schedule_T = c.header.at("schedule").at("T").get<int>();
    ckpt.schedule_s = c.header.at("schedule").at("s").get<double>();
    ckpt.step = c.header.at("step").get<long long>();
    ckpt.extra = c.header.at("extra");
    const auto &opt = c.header.at("optimizer");
    if (!opt.is_null()) {
      ckpt.adam = AdamState {};
      ckpt.adam->step = opt.at("step").get<long long>();
    }
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::kParse, source + ": bad checkpoint header: " + e.what());
  }

  for (auto &t: c.tensors) {
    if (t.name.starts_with("adam.m.")) {
      if (!ckpt.adam)
        fail(ErrorKind::kParse, source + ": optimizer tensors without state");
      ckpt.adam->m.push_back(std::move(t.value));
    } else if (t.name.starts_with("adam.v.")) {
      if (!ckpt.adam)
        fail(ErrorKind::kParse, source + ": optimizer tensors without state");
      ckpt.adam->v.push_back(std::move(t.value));
    } else {
      ckpt.params.names.push_back(t.name);
      ckpt.params.tensors.push_back(std::move(t.value));
    }
  }
  check_denoiser_shapes(ckpt.params);
  if (ckpt.params.config.num_atom_types != ckpt.vocab.size())
    fail(ErrorKind::kModel, source + ": vocabulary size differs from the model");
  if (ckpt.params.config.time_steps != ckpt.schedule_T
      || ckpt.params.config.schedule_s != ckpt.schedule_s)
    fail(ErrorKind::kModel, source + ": schedule differs from the model's");
  if (ckpt.adam
      && (ckpt.adam->m.size() != ckpt.params.tensors.size()
          || ckpt.adam->v.size() != ckpt.params.tensors.size()))
    fail(ErrorKind::kParse, source + ": incomplete optimizer state");
  return ckpt;
}

}  // namespace molrl
