//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "molrl/checkpoint.h"
#include "molrl/error.h"
#include "test_util.h"

namespace molrl {
namespace {

namespace fs = std::filesystem;

TEST(Container, EncodeDecodeRoundTrip) {
  Container c;
  c.header = { { "kind", "test" }, { "n", 3 } };
  Eigen::MatrixXd a(2, 3);
  a << 1, -2.5, 3e-300, 4, 5, std::numeric_limits<double>::denorm_min();
  c.tensors.push_back({ "a", a });
  c.tensors.push_back({ "empty", Eigen::MatrixXd(0, 4) });
  const std::string bytes = encode_container(c);
  EXPECT_EQ(bytes.substr(0, 8), "MOLRLCK1");
  const Container d = decode_container(bytes, "mem");
  EXPECT_EQ(d.header.at("kind"), "test");
  ASSERT_EQ(d.tensors.size(), 2u);
  EXPECT_EQ(d.tensors[0].name, "a");
  EXPECT_EQ(d.tensors[0].value, a);
  EXPECT_EQ(d.tensors[1].value.cols(), 4);
  EXPECT_EQ(encode_container(d), bytes);
}

TEST(Container, RejectsCorruptInput) {
  Container c;
  c.header = { { "kind", "test" } };
  c.tensors.push_back({ "a", Eigen::MatrixXd::Ones(2, 2) });
  const std::string bytes = encode_container(c);
  EXPECT_THROW(decode_container("NOTMAGIC" + bytes.substr(8), "mem"), Error);
  EXPECT_THROW(decode_container(bytes.substr(0, bytes.size() - 3), "mem"), Error);
  EXPECT_THROW(decode_container(bytes + "x", "mem"), Error);
}

TEST(Checkpoint, SaveLoadIsExact) {
  const auto cfg = testing::small_config();
  Checkpoint ck;
  ck.params = testing::random_params(cfg, 3);
  ck.vocab = AtomVocabulary::qm9();
  ck.schedule_T = cfg.time_steps;
  ck.step = 42;
  ck.adam = AdamState::zeros_like(ck.params);
  ck.adam->step = 7;
  ck.adam->m[0](0, 0) = 0.125;
  ck.extra = { { "stage", "pretrain" } };
  const fs::path path = fs::temp_directory_path() / "molrl_ckpt_test.ckpt";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.params.config, ck.params.config);
  EXPECT_EQ(back.params.names, ck.params.names);
  for (std::size_t k = 0; k < ck.params.tensors.size(); ++k)
    EXPECT_EQ(back.params.tensors[k], ck.params.tensors[k]);
  EXPECT_EQ(back.vocab, ck.vocab);
  EXPECT_EQ(back.schedule_T, ck.schedule_T);
  EXPECT_EQ(back.step, 42);
  ASSERT_TRUE(back.adam.has_value());
  EXPECT_EQ(back.adam->step, 7);
  EXPECT_EQ(back.adam->m[0](0, 0), 0.125);
  EXPECT_EQ(back.extra.at("stage"), "pretrain");

  // Writing the loaded checkpoint again gives the same bytes.
  const fs::path again = fs::temp_directory_path() / "molrl_ckpt_test2.ckpt";
  save_checkpoint(again, back);
  auto slurp = [](const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(path), slurp(again));
  fs::remove(path);
  fs::remove(again);
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    load_checkpoint("/nonexistent/dir/x.ckpt");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

}  // namespace
}  // namespace molrl
