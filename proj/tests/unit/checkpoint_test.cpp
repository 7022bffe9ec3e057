// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "wearembed/errors.hpp"

namespace wearembed {
namespace {

namespace fs = std::filesystem;

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool bitwise_equal(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape() ||
        std::memcmp(a[i].values().data(), b[i].values().data(), a[i].size() * sizeof(double))) {
      return false;
    }
  }
  return true;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("wearembed_ckpt_" +
           std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    archives = testing::tiny_population(6, 6, 41);
    config = testing::tiny_train_config();
    options.arch = testing::tiny_arch();
  }
  void TearDown() override { fs::remove_all(dir); }

  TrainerState trained(std::size_t epochs) {
    TrainConfig c = config;
    c.max_epochs = epochs;
    return fit(archives, c, options);
  }

  fs::path dir;
  std::vector<UserArchive> archives;
  TrainConfig config;
  FitOptions options;
};

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  const TrainerState s = trained(2);
  save_checkpoint(dir / "a.ckpt", s);
  const TrainerState loaded = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(dir / "b.ckpt", loaded);
  EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));
  EXPECT_EQ(read_bytes(dir / "a.ckpt").substr(0, 4), "PSPC");

  EXPECT_EQ(loaded.config, s.config);
  EXPECT_EQ(loaded.model.config(), s.model.config());
  EXPECT_EQ(loaded.epoch, s.epoch);
  EXPECT_EQ(loaded.step, s.step);
  EXPECT_EQ(loaded.history, s.history);
  EXPECT_EQ(loaded.rng, s.rng);
  EXPECT_EQ(loaded.adam.step, s.adam.step);
  EXPECT_EQ(loaded.best_val, s.best_val);
  EXPECT_EQ(loaded.best_epoch, s.best_epoch);
  EXPECT_TRUE(bitwise_equal(loaded.model.snapshot(), s.model.snapshot()));
  EXPECT_TRUE(bitwise_equal(loaded.adam.first_moment, s.adam.first_moment));
  EXPECT_TRUE(bitwise_equal(loaded.adam.second_moment, s.adam.second_moment));
  EXPECT_TRUE(bitwise_equal(loaded.best_values, s.best_values));
}

TEST_F(CheckpointTest, FreshStateRoundTrips) {
  const TrainerState s = initial_state(config, model_config_for(config, testing::tiny_arch()));
  const std::string bytes = serialize_checkpoint(s);
  EXPECT_EQ(serialize_checkpoint(deserialize_checkpoint(bytes)), bytes);
}

TEST_F(CheckpointTest, TruncatedOrDamagedPayloadIsAnIntegrityError) {
  const std::string bytes = serialize_checkpoint(trained(1));
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t cut = rng.index(bytes.size());
    EXPECT_THROW(deserialize_checkpoint(std::string_view(bytes).substr(0, cut)), IntegrityError)
        << "cut at " << cut;
    std::string flipped = bytes;
    const std::size_t at = 8 + rng.index(bytes.size() - 8);
    flipped[at] = static_cast<char>(flipped[at] ^ 0x10);
    EXPECT_THROW(deserialize_checkpoint(flipped), IntegrityError) << "flip at " << at;
  }
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), IntegrityError);

  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), IntegrityError);
}

TEST_F(CheckpointTest, OtherVersionIsRefused) {
  const TrainerState s = trained(1);
  EXPECT_THROW(deserialize_checkpoint(serialize_checkpoint(s, kCheckpointVersion + 1)),
               VersionError);
}

TEST_F(CheckpointTest, UnwritableLocationThrowsAndKeepsExistingFile) {
  const TrainerState s = trained(1);
  EXPECT_THROW(save_checkpoint(dir / "missing" / "x.ckpt", s), std::runtime_error);
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), std::runtime_error);
  save_checkpoint(dir / "keep.ckpt", s);
  const std::string before = read_bytes(dir / "keep.ckpt");
  fs::create_directory(dir / "keep.ckpt.tmp");  // blocks the temporary sibling
  EXPECT_THROW(save_checkpoint(dir / "keep.ckpt", trained(2)), std::runtime_error);
  EXPECT_EQ(read_bytes(dir / "keep.ckpt"), before);
}

TEST_F(CheckpointTest, FitWritesAfterEveryEpoch) {
  options.checkpoint_path = dir / "run.ckpt";
  std::vector<std::size_t> saved_epochs;
  options.on_epoch = [&](const TrainerState&) {
    saved_epochs.push_back(load_checkpoint(dir / "run.ckpt").epoch);
  };
  const TrainerState s = trained(3);
  EXPECT_EQ(saved_epochs, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(read_bytes(dir / "run.ckpt"), serialize_checkpoint(s));
}

TEST_F(CheckpointTest, ResumeContinuesTheUninterruptedRunExactly) {
  const TrainerState straight = trained(5);

  options.checkpoint_path = dir / "part.ckpt";
  trained(2);
  FitOptions resume_options;
  resume_options.arch = testing::tiny_arch();
  resume_options.resume = load_checkpoint(dir / "part.ckpt");
  TrainConfig c = config;
  c.max_epochs = 5;
  const TrainerState resumed = fit(archives, c, std::move(resume_options));

  EXPECT_EQ(resumed.history, straight.history);
  ASSERT_EQ(resumed.steps.size(), straight.steps.size());
  for (std::size_t i = 0; i < straight.steps.size(); ++i) {
    EXPECT_EQ(resumed.steps[i].l_joint, straight.steps[i].l_joint) << "step " << i;
    EXPECT_EQ(resumed.steps[i].l_ae, straight.steps[i].l_ae) << "step " << i;
  }
  EXPECT_TRUE(bitwise_equal(resumed.model.snapshot(), straight.model.snapshot()));
  EXPECT_EQ(serialize_checkpoint(resumed), serialize_checkpoint(straight));
}

}  // namespace
}  // namespace wearembed
