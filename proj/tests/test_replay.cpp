#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "laifo/replay/buffer.hpp"
#include "laifo/replay/dataset.hpp"

using namespace laifo;
using replay::ReplayBuffer;
using M = grad::Matrix<double>;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("laifo_replay_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

replay::ExpertDataset make_dataset(int episodes, int length, bool actions, bool rewards, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  replay::ExpertDataset ds;
  ds.env = "pointmass-v";
  ds.obs_shape = {2};
  ds.act_shape = {2};
  ds.has_actions = actions;
  ds.has_rewards = rewards;
  for (int e = 0; e < episodes; ++e) {
    replay::ExpertEpisode ep;
    for (int i = 0; i < 2 * length; ++i) ep.observations.push_back(n(rng));
    if (actions) {
      for (int i = 0; i < 2 * (length - 1); ++i) ep.actions.push_back(n(rng));
    }
    if (rewards) {
      for (int i = 0; i < length - 1; ++i) ep.rewards.push_back(n(rng));
    }
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

}  // namespace

TEST(ReplayBuffer, CapacityOneReturnsTheTransition) {
  ReplayBuffer<double> buf(2, 1, 1);
  buf.start(std::vector<double>{1, 2});
  buf.push(std::vector<double>{3, 4}, std::vector<double>{0.5}, 7.0, false);
  std::mt19937_64 rng(0);
  const auto b = buf.sample(1, 1, rng);
  EXPECT_EQ(b.obs, (M(1, 2) << 1, 2).finished());
  EXPECT_EQ(b.next, (M(1, 2) << 3, 4).finished());
  EXPECT_EQ(b.actions(0, 0), 0.5);
  EXPECT_EQ(b.rewards(0, 0), 7.0);
}

TEST(ReplayBuffer, OldestEvictedPastCapacity) {
  const int k = 5;
  ReplayBuffer<double> buf(1, 1, k);
  buf.start(std::vector<double>{0});
  for (int t = 1; t <= k + 1; ++t) buf.push(std::vector<double>{double(t)}, std::vector<double>{double(t)}, 0.0, false);
  EXPECT_EQ(buf.size(), k);
  const auto all = buf.all(1);
  ASSERT_EQ(all.size(), k);
  for (int i = 0; i < all.size(); ++i) EXPECT_NE(all.obs(i, 0), 0.0);  // transition 0→1 is gone
  EXPECT_EQ(all.obs(0, 0), 1.0);
  EXPECT_EQ(all.next(k - 1, 0), double(k + 1));
}

TEST(ReplayBuffer, WindowsNeverSpanEpisodesAndSuccessorsShift) {
  // Frames encode (episode, step) so every window can be checked exactly.
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 12);
  ReplayBuffer<double> buf(2, 1, 64, 3);
  int ep = 0;
  int remaining = len(rng);
  int t = 0;
  buf.start(std::vector<double>{0.0, 0.0});
  long scanned = 0;
  for (int i = 0; i < 100000; ++i) {
    ++t;
    --remaining;
    const bool done = remaining == 0;
    buf.push(std::vector<double>{double(ep), double(t)}, std::vector<double>{double(t)}, 0.0, done);
    if (done) {
      ++ep;
      t = 0;
      remaining = len(rng);
      buf.start(std::vector<double>{double(ep), 0.0});
    }
    if (i % 997 != 0) continue;
    for (int d = 1; d <= 3; ++d) {
      const auto all = buf.all(d);
      for (grad::Index r = 0; r < all.size(); ++r) {
        const double e = all.next(r, 2 * (d - 1));
        const double t1 = all.next(r, 2 * (d - 1) + 1);
        ASSERT_EQ(all.actions(r, 0), t1);
        for (int j = 0; j < d; ++j) {
          const double expect_obs = std::max(0.0, t1 - 1 - (d - 1) + j);
          const double expect_next = std::max(0.0, t1 - (d - 1) + j);
          ASSERT_EQ(all.obs(r, 2 * j), e);
          ASSERT_EQ(all.next(r, 2 * j), e);
          ASSERT_EQ(all.obs(r, 2 * j + 1), expect_obs);
          ASSERT_EQ(all.next(r, 2 * j + 1), expect_next);
          if (j + 1 < d) {
            ASSERT_EQ(all.next(r, 2 * j + 1), all.obs(r, 2 * (j + 1) + 1));
          }
        }
        ++scanned;
      }
    }
  }
  EXPECT_GT(scanned, 10000);
}

TEST(ReplayBuffer, LengthOneEpisodePadsWithFirstFrame) {
  ReplayBuffer<double> buf(1, 1, 10, 3);
  buf.start(std::vector<double>{5});
  buf.push(std::vector<double>{6}, std::vector<double>{0}, 0.0, true);
  const auto w = buf.all(3);
  EXPECT_EQ(w.obs, (M(1, 3) << 5, 5, 5).finished());
  EXPECT_EQ(w.next, (M(1, 3) << 5, 5, 6).finished());
  const auto win = buf.window_at(0, 3);
  EXPECT_EQ(win.frames, (M(3, 1) << 5, 5, 5).finished());
}

TEST(ReplayBuffer, DepthOneIsSingleFrame) {
  ReplayBuffer<double> buf(1, 1, 10, 3);
  buf.start(std::vector<double>{0});
  for (int t = 1; t < 5; ++t) buf.push(std::vector<double>{double(t)}, std::vector<double>{0}, 0.0, false);
  const auto all = buf.all(1);
  for (grad::Index r = 0; r < all.size(); ++r) {
    EXPECT_EQ(all.obs.cols(), 1);
    EXPECT_EQ(all.next(r, 0), all.obs(r, 0) + 1);
  }
}

TEST(ReplayBuffer, SamplingIsUniform) {
  ReplayBuffer<double> buf(1, 1, 10);
  buf.start(std::vector<double>{0});
  for (int t = 1; t <= 10; ++t) buf.push(std::vector<double>{double(t)}, std::vector<double>{0}, 0.0, false);
  std::mt19937_64 rng(3);
  const auto b = buf.sample(100000, 1, rng);
  std::vector<int> counts(10, 0);
  for (auto k : b.indices) ++counts[k];
  for (int c : counts) EXPECT_NEAR(c / 1e5, 0.1, 0.1 * 0.05);
}

TEST(ReplayBuffer, Errors) {
  ReplayBuffer<double> buf(2, 1, 10);
  std::mt19937_64 rng(0);
  EXPECT_THROW(buf.sample(1, 1, rng), replay::BufferError);
  EXPECT_THROW(buf.start(std::vector<double>{1}), replay::ShapeMismatch);
  EXPECT_THROW(buf.push(std::vector<double>{1, 1}, std::vector<double>{0}, 0.0, false), replay::BufferError);
  buf.start(std::vector<double>{0, 0});
  EXPECT_THROW(buf.push(std::vector<double>{1, 1}, std::vector<double>{0, 0}, 0.0, false), replay::ShapeMismatch);
  buf.push(std::vector<double>{1, 1}, std::vector<double>{0}, 0.0, false);
  EXPECT_THROW(buf.sample(1, 4, rng), std::invalid_argument);
}

TEST(Dataset, RoundTripIsBitIdentical) {
  const auto ds = make_dataset(2, 7, true, true);
  const auto p1 = temp_path("rt1.laifo"), p2 = temp_path("rt2.laifo");
  replay::save_dataset(ds, p1);
  const auto back = replay::load_dataset(p1);
  EXPECT_EQ(back, ds);
  replay::save_dataset(back, p2);
  EXPECT_EQ(slurp(p1), slurp(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST(Dataset, HeaderCountDisagreeingWithEpisodesFails) {
  const auto ds = make_dataset(100, 4, true, true);
  const auto p = temp_path("count.laifo");
  replay::save_dataset(ds, p);
  std::string bytes = slurp(p);
  // 4-byte length, 4×2 observation floats, 3×2 actions, 3 rewards.
  const std::size_t episode_bytes = 4 + 4 * (8 + 6 + 3);
  bytes.resize(bytes.size() - episode_bytes);
  dump(p, bytes);
  try {
    replay::load_dataset(p);
    FAIL() << "expected a load error";
  } catch (const replay::DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("declares 100 episodes but only 99"), std::string::npos) << e.what();
  }
  std::filesystem::remove(p);
}

TEST(Dataset, CorruptFilesRejected) {
  const auto ds = make_dataset(3, 5, false, true);
  const auto p = temp_path("corrupt.laifo");
  replay::save_dataset(ds, p);
  const std::string good = slurp(p);

  std::string bad_magic = good;
  bad_magic[5] = '2';
  dump(p, bad_magic);
  EXPECT_THROW(replay::load_dataset(p), replay::DatasetError);

  dump(p, good.substr(0, good.size() - 3));
  EXPECT_THROW(replay::load_dataset(p), replay::DatasetError);

  dump(p, good + "x");
  EXPECT_THROW(replay::load_dataset(p), replay::DatasetError);

  dump(p, good.substr(0, 8));
  EXPECT_THROW(replay::load_dataset(p), replay::DatasetError);
  std::filesystem::remove(p);
}

TEST(Dataset, ShapeDisagreementRejectedOnSave) {
  auto ds = make_dataset(1, 4, true, false);
  ds.episodes[0].actions.pop_back();
  EXPECT_THROW(replay::save_dataset(ds, temp_path("bad.laifo")), replay::DatasetError);
}

TEST(Dataset, NoActionsGatesActionConsumers) {
  const auto ds = make_dataset(2, 6, false, false);
  const auto p = temp_path("noact.laifo");
  replay::save_dataset(ds, p);
  const auto back = replay::load_dataset(p);
  EXPECT_FALSE(back.has_actions);
  EXPECT_THROW(replay::expert_buffer<double>(back, 3, true), replay::DatasetError);
  EXPECT_NO_THROW(replay::expert_buffer<double>(back, 3, false));
  std::filesystem::remove(p);
}

TEST(Dataset, ExpertBufferHoldsEveryTransitionAndIsFrozen) {
  const auto ds = make_dataset(3, 6, true, true);
  auto buf = replay::expert_buffer<double>(ds, 3, true);
  EXPECT_TRUE(buf.frozen());
  EXPECT_EQ(buf.size(), 3 * 5);
  EXPECT_THROW(buf.start(std::vector<double>{0, 0}), replay::BufferError);
  const auto all = buf.all(1);
  EXPECT_FLOAT_EQ(float(all.obs(0, 0)), ds.episodes[0].observations[0]);
  EXPECT_FLOAT_EQ(float(all.actions(0, 1)), ds.episodes[0].actions[1]);
  EXPECT_FLOAT_EQ(float(all.next(5, 1)), ds.episodes[1].observations[3]);
}

TEST(FrameStack, PadsWithFirstFrameThenRolls) {
  replay::FrameStack<double> fs(3, 1);
  const std::vector<double> a{1}, b{2}, c{3}, d{4};
  fs.reset(a);
  EXPECT_EQ(fs.flat(), (M(1, 3) << 1, 1, 1).finished());
  fs.push(b);
  fs.push(c);
  fs.push(d);
  EXPECT_EQ(fs.flat(), (M(1, 3) << 2, 3, 4).finished());
}
