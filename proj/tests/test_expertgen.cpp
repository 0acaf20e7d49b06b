#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "laifo/expertgen/expert.hpp"

using namespace laifo;
using imitate::Config;

namespace {

Config expert_recipe() {
  Config cfg;
  cfg.hidden = 128;
  cfg.batch = 128;
  cfg.precision = imitate::Precision::f32;
  cfg.eval_interval = 10000;
  cfg.seed = 0;
  return cfg;
}

Config small_recipe() {
  Config cfg = expert_recipe();
  cfg.hidden = 32;
  cfg.batch = 32;
  cfg.warmup = 200;
  cfg.eval_interval = 500;
  cfg.eval_episodes = 2;
  cfg.seed = 5;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("laifo_expertgen_" + name)).string();
}

template <class T>
bool same_parameters(imitate::AgentBundle<T>& a, imitate::AgentBundle<T>& b) {
  auto pa = a.named_parameters(), pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].first != pb[i].first || pa[i].second->value() != pb[i].second->value()) return false;
  }
  return true;
}

}  // namespace

TEST(TrainExpert, PointMassReachesNinetyPercentOfBestLinearController) {
  double kp = 0, kv = 0;
  const double oracle = expertgen::linear_policy_oracle(16, 32, 10, 0, &kp, &kv);
  auto e = expertgen::train_expert<float>("pointmass-v", 60000, expert_recipe());
  EXPECT_EQ(e.state_env, "pointmass-s");
  EXPECT_GE(e.score, 0.9 * oracle) << "oracle " << oracle << " at kp=" << kp << " kv=" << kv;
}

TEST(TrainExpert, DeterministicPerSeed) {
  auto a = expertgen::train_expert<float>("pointmass-v", 1500, small_recipe());
  auto b = expertgen::train_expert<float>("pointmass-v", 1500, small_recipe());
  EXPECT_EQ(a.score, b.score);
  EXPECT_TRUE(same_parameters(a.bundle, b.bundle));
  ASSERT_EQ(a.report.rows.size(), b.report.rows.size());
  for (std::size_t i = 0; i < a.report.rows.size(); ++i) EXPECT_EQ(a.report.rows[i].eval_return, b.report.rows[i].eval_return);
}

TEST(TrainExpert, ZeroFrameBudgetKeepsInitialPolicy) {
  const Config cfg = small_recipe();
  auto e = expertgen::train_expert<float>("pointmass-v", 0, cfg);
  imitate::Trainer<float> fresh(imitate::Algo::rl, "pointmass-s", nullptr, expertgen::expert_config(cfg, 0));
  EXPECT_TRUE(same_parameters(e.bundle, fresh.bundle()));
  EXPECT_EQ(e.score, fresh.evaluate());
}

TEST(Record, SingleEpisodeHasEpisodeLimitLength) {
  auto e = expertgen::train_expert<float>("pointmass-v", 0, small_recipe());
  const auto ds = expertgen::record(e.bundle, e.state_env, "pointmass-v", 1, true, 0);
  ASSERT_EQ(ds.count(), 1);
  EXPECT_EQ(ds.env, "pointmass-v");
  EXPECT_EQ(ds.episodes[0].observations.size(), 201u * 2);
  EXPECT_EQ(ds.episodes[0].actions.size(), 200u * 2);
  EXPECT_EQ(ds.episodes[0].rewards.size(), 200u);
  EXPECT_THROW(expertgen::record(e.bundle, e.state_env, "pointmass-v", 0, true, 0), std::invalid_argument);
}

TEST(Record, ActionlessDatasetRefusedByLail) {
  auto e = expertgen::train_expert<float>("pointmass-v", 0, small_recipe());
  const auto ds = expertgen::record(e.bundle, e.state_env, "pointmass-v", 2, false, 0);
  EXPECT_FALSE(ds.has_actions);
  const auto p = temp_path("noact.laifo");
  replay::save_dataset(ds, p);
  const auto back = replay::load_dataset(p);
  EXPECT_FALSE(back.has_actions);
  try {
    imitate::check_capabilities(imitate::Algo::lail, "pointmass-v", &back);
    FAIL() << "lail accepted an actionless dataset";
  } catch (const imitate::CapabilityError& err) {
    EXPECT_NE(std::string(err.what()).find("expert actions required"), std::string::npos);
  }
  EXPECT_NO_THROW(imitate::check_capabilities(imitate::Algo::laifo, "pointmass-v", &back));
  std::filesystem::remove(p);
}

TEST(Record, MeanReturnReevaluatesExpertScore) {
  const Config cfg = small_recipe();
  auto e = expertgen::train_expert<float>("pointmass-v", 3000, cfg);
  const auto ds = expertgen::record(e.bundle, e.state_env, "pointmass-v", cfg.eval_episodes, false, cfg.seed);
  EXPECT_LE(std::abs(ds.mean_return() - e.score), 0.01 * std::abs(e.score));
}

TEST(Record, SameSeedIsByteIdenticalAndRoundTrips) {
  auto e = expertgen::train_expert<float>("pointmass-v", 1000, small_recipe());
  const auto p1 = temp_path("a.laifo"), p2 = temp_path("b.laifo"), p3 = temp_path("c.laifo");
  const auto ds = expertgen::record(e.bundle, e.state_env, "pointmass-px32", 2, true, 11);
  replay::save_dataset(ds, p1);
  replay::save_dataset(expertgen::record(e.bundle, e.state_env, "pointmass-px32", 2, true, 11), p2);
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_EQ(replay::load_dataset(p1), ds);
  replay::save_dataset(expertgen::record(e.bundle, e.state_env, "pointmass-px32", 2, true, 12), p3);
  EXPECT_NE(slurp(p1), slurp(p3));
  for (const auto& p : {p1, p2, p3}) std::filesystem::remove(p);
}
