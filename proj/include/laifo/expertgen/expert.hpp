#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "laifo/envs/continuous.hpp"
#include "laifo/imitate/train.hpp"
#include "laifo/replay/dataset.hpp"

namespace laifo::expertgen {

using imitate::AgentBundle;
using imitate::Config;

/// A policy trained on the privileged state, plus the score it earned.
template <class T>
struct Expert {
  AgentBundle<T> bundle;
  std::string state_env;  ///< fully observable id the policy acts on
  double score = 0.0;     ///< mean deterministic evaluation return
  imitate::TrainReport report;
};

/// Configuration the expert trainer actually uses: no stacking, no
/// augmentation and reward-only learning.
inline Config expert_config(Config cfg, std::int64_t frames) {
  cfg.frames = frames;
  cfg.depth = 1;
  cfg.augment = false;
  cfg.warmup = std::min(cfg.warmup, frames);
  return cfg;
}

/// Deterministic-policy-gradient training on the full state with the
/// environment reward only.
template <class T>
Expert<T> train_expert(const std::string& env_id, std::int64_t frames, const Config& cfg,
                       const std::function<void(const imitate::TrainRow&)>& on_row = {}) {
  const Config ec = expert_config(cfg, frames);
  const std::string state_env = envs::full_state_id(imitate::resolve_env_id(env_id, cfg));
  imitate::Trainer<T> trainer(imitate::Algo::rl, state_env, nullptr, ec);
  Expert<T> e;
  e.report = trainer.run(on_row);
  e.bundle = trainer.bundle();
  e.state_env = state_env;
  e.score = e.report.rows.empty() ? trainer.evaluate() : e.report.final_return();
  return e;
}

/// Rolls out the expert deterministically for n episodes and stores what
/// environment `obs_env` would have shown. Episode i starts from the i-th
/// evaluation start state of `seed`, so recorded returns re-evaluate exactly.
template <class T>
replay::ExpertDataset record(const AgentBundle<T>& policy, const std::string& state_env, const std::string& obs_env,
                             int n_episodes, bool with_actions, std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("record: n_episodes must be >= 1");
  auto env = envs::make_env(state_env);
  auto view = envs::make_env(obs_env);
  replay::ExpertDataset ds;
  ds.env = obs_env;
  ds.obs_shape = view->obs_shape();
  ds.act_shape = {env->act_dim()};
  ds.has_actions = with_actions;
  ds.has_rewards = true;
  for (int i = 0; i < n_episodes; ++i) {
    replay::ExpertEpisode ep;
    auto obs = env->reset(imitate::eval_episode_seed(seed, i));
    auto add_frame = [&]() {
      const auto x = envs::project_observation(obs_env, env->privileged_state());
      ep.observations.insert(ep.observations.end(), x.begin(), x.end());
    };
    add_frame();
    replay::FrameStack<T> stack(policy.depth, env->obs_size());
    stack.reset(imitate::to_frame<T>(obs));
    while (!env->done()) {
      const grad::Matrix<T> a = policy.actor.mean(policy.encoder.encode_batch(stack.flat()));
      std::vector<double> act(a.data(), a.data() + a.size());
      const auto res = env->step(act);
      obs = res.observation;
      stack.push(imitate::to_frame<T>(obs));
      add_frame();
      if (with_actions) {
        for (double v : act) ep.actions.push_back(static_cast<float>(std::clamp(v, -1.0, 1.0)));
      }
      ep.rewards.push_back(static_cast<float>(res.reward));
    }
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

/// Best mean return over a log-spaced grid of linear feedback laws
/// a = clamp(−k_p·p − k_v·v) on the point-mass task (a reference score for
/// expert quality). Gains span k_p ∈ [0.1, 40] and k_v ∈ [0.05, 20] with
/// `n_kp` × `n_kv` grid points.
inline double linear_policy_oracle(int n_kp, int n_kv, int episodes, std::uint64_t seed, double* best_kp = nullptr,
                                   double* best_kv = nullptr) {
  if (n_kp < 2 || n_kv < 2 || episodes < 1) throw std::invalid_argument("linear_policy_oracle: grid too small");
  double best = -1e300;
  envs::PointMass env("pointmass-s", envs::ObservationMode::full_state);
  for (int i = 0; i < n_kp; ++i) {
    const double kp = 0.1 * std::pow(400.0, static_cast<double>(i) / (n_kp - 1));
    for (int j = 0; j < n_kv; ++j) {
      const double kv = 0.05 * std::pow(400.0, static_cast<double>(j) / (n_kv - 1));
      double total = 0.0;
      for (int e = 0; e < episodes; ++e) {
        auto s = env.reset(imitate::eval_episode_seed(seed, e));
        while (!env.done()) {
          std::vector<double> a = {-kp * s[0] - kv * s[2], -kp * s[1] - kv * s[3]};
          auto res = env.step(a);
          total += res.reward;
          s = res.observation;
        }
      }
      const double mean = total / episodes;
      if (mean > best) {
        best = mean;
        if (best_kp) *best_kp = kp;
        if (best_kv) *best_kv = kv;
      }
    }
  }
  return best;
}

}  // namespace laifo::expertgen
