#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "laifo/augment/shift.hpp"
#include "laifo/envs/continuous.hpp"
#include "laifo/imitate/agent.hpp"
#include "laifo/imitate/config.hpp"
#include "laifo/imitate/losses.hpp"
#include "laifo/imitate/report.hpp"
#include "laifo/replay/buffer.hpp"
#include "laifo/replay/dataset.hpp"

namespace laifo::imitate {

class CapabilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent, reproducible stream `k` for experiment seed `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) { return splitmix64(splitmix64(seed) ^ (k * 0x2545f4914f6cdd1dULL)); }

/// Evaluation episodes use a fixed seed set so every algorithm and
/// checkpoint of one experiment seed is scored on the same start states.
inline std::uint64_t eval_episode_seed(std::uint64_t seed, int i) { return derive_seed(seed, 1000000 + static_cast<std::uint64_t>(i)); }

/// "pointmass-px" expands to the configured image size.
inline std::string resolve_env_id(const std::string& id, const Config& cfg) {
  if (id == "pointmass-px") return "pointmass-px" + std::to_string(cfg.image_size);
  return id;
}

inline AlgoTraits traits_for(Algo algo, const Config& cfg) {
  AlgoTraits t = traits(algo);
  if (algo == Algo::rl_plus_videos) t.imitation_weight = cfg.imitation_weight;
  return t;
}

inline std::string training_env_id(Algo algo, const std::string& id) {
  return traits(algo).full_state ? envs::full_state_id(id) : id;
}

inline ObservationLayout layout_of(const envs::Environment& env) {
  ObservationLayout l;
  l.frame_size = env.obs_size();
  l.act_dim = env.act_dim();
  if (env.image_mode()) {
    const auto s = env.obs_shape();
    l.image = augment::ImageShape{s[0], s[1]};
  }
  return l;
}

/// Rejects algorithm/data combinations the algorithm cannot use.
inline void check_capabilities(Algo algo, const std::string& env_id, const replay::ExpertDataset* expert) {
  const AlgoTraits tr = traits(algo);
  if (!tr.needs_expert) return;
  if (!expert) throw CapabilityError(std::string(algo_name(algo)) + ": expert dataset required");
  if (tr.needs_actions && !expert->has_actions) {
    throw CapabilityError(std::string(algo_name(algo)) + ": expert actions required");
  }
  if (expert->env != env_id) {
    throw CapabilityError(std::string(algo_name(algo)) + ": expert dataset was recorded on '" + expert->env +
                          "' but this algorithm trains on '" + env_id + "'");
  }
}

template <class T>
struct DiscStats {
  double loss = 0.0;
  double penalty = 0.0;
};

template <class T>
struct CriticStats {
  double loss = 0.0;
  double imit_reward_mean = std::numeric_limits<double>::quiet_NaN();
  Matrix<T> z;  ///< encoder output on the batch, reused (detached) by the actor
};

/// Applies the random shift to every window of a batch.
template <class T>
Matrix<T> augmented(const Matrix<T>& windows, int depth, const ObservationLayout& layout, const Config& cfg,
                    nets::Rng& rng) {
  if (!cfg.augment || !layout.image) return windows;
  return augment::shift_batch(windows, depth, layout.image, cfg.pad, rng);
}

/// Discriminator inputs: (z, z′) or (z, a), concatenated per row.
template <class T>
Matrix<T> make_pairs(nets::Pairing pairing, const Matrix<T>& z, const Matrix<T>& z_next, const Matrix<T>& actions) {
  const Matrix<T>& right = pairing == nets::Pairing::transition ? z_next : actions;
  Matrix<T> out(z.rows(), z.cols() + right.cols());
  out << z, right;
  return out;
}

/// One step on χ. Latents come from the current encoder as constants, so δ
/// receives no gradient from this loss.
template <class T>
DiscStats<T> update_discriminator(AgentBundle<T>& b, const replay::StackedBatch<T>& agent,
                                  const replay::StackedBatch<T>& expert, nets::Pairing pairing,
                                  const ObservationLayout& layout, const Config& cfg, nets::Rng& rng) {
  if (!b.disc) throw std::logic_error("update_discriminator: bundle has no discriminator");
  b.disc->require(pairing);
  if (agent.size() == 0 || expert.size() == 0) throw std::invalid_argument("update_discriminator: empty batch");
  const Matrix<T> za = b.encoder.encode_batch(augmented(agent.obs, b.depth, layout, cfg, rng));
  const Matrix<T> za1 = b.encoder.encode_batch(augmented(agent.next, b.depth, layout, cfg, rng));
  const Matrix<T> ze = b.encoder.encode_batch(augmented(expert.obs, b.depth, layout, cfg, rng));
  const Matrix<T> ze1 = b.encoder.encode_batch(augmented(expert.next, b.depth, layout, cfg, rng));
  Tape<T> tape;
  auto parts = discriminator_loss(tape, *b.disc, make_pairs(pairing, ze, ze1, expert.actions),
                                  make_pairs(pairing, za, za1, agent.actions), cfg.lambda, rng);
  const auto grads = tape.backward(parts.total);
  b.disc_opt.step(b.disc->parameters(), grads);
  DiscStats<T> s;
  s.loss = static_cast<double>(parts.total.scalar());
  s.penalty = parts.penalty ? static_cast<double>(parts.penalty->scalar()) : 0.0;
  return s;
}

/// r_χ(z, z′) or r_χ(z, a) as a B×1 matrix.
template <class T>
Matrix<T> imitation_reward(const nets::Discriminator<T>& d, const Matrix<T>& left, const Matrix<T>& right,
                           nets::Pairing pairing) {
  return nets::discriminate(d, left, right, pairing);
}

/// Largest |Q| reachable when every per-step reward is bounded by |w_env|·r_max + |w_imit|.
inline double value_bound(const AlgoTraits& tr, double r_max, double gamma) {
  double per_step = std::abs(tr.env_reward_weight) * r_max;
  if (tr.pairing) per_step += std::abs(tr.imitation_weight);
  return per_step / (1.0 - gamma);
}

/// Regresses both critics onto the shared target; steps ψ1, ψ2 and δ.
/// Targets are clamped to ±bound, so bootstrapping cannot run past the feasible return range.
template <class T>
CriticStats<T> update_critic(AgentBundle<T>& b, const replay::StackedBatch<T>& batch, const AlgoTraits& tr,
                             const ObservationLayout& layout, const Config& cfg, double sigma, nets::Rng& rng,
                             double bound = std::numeric_limits<double>::infinity()) {
  const Matrix<T> obs = augmented(batch.obs, b.depth, layout, cfg, rng);
  const Matrix<T> next = augmented(batch.next, b.depth, layout, cfg, rng);
  const Matrix<T> z_next = b.encoder.encode_batch(next);

  Tape<T> tape;
  Var<T> z = b.encoder.forward(tape, tape.constant(obs));
  CriticStats<T> s;
  s.z = z.value();

  Matrix<T> reward = Matrix<T>::Zero(batch.size(), 1);
  if (tr.env_reward_weight != 0.0) reward += static_cast<T>(tr.env_reward_weight) * batch.rewards;
  if (tr.pairing && b.disc) {
    const Matrix<T>& right = *tr.pairing == nets::Pairing::transition ? z_next : batch.actions;
    const Matrix<T> r = imitation_reward(*b.disc, s.z, right, *tr.pairing);
    s.imit_reward_mean = static_cast<double>(r.mean());
    reward += static_cast<T>(tr.imitation_weight) * r;
  }
  Matrix<T> y = critic_target(b.critics, b.actor, z_next, reward, cfg.gamma, sigma, cfg.clip, rng);
  if (std::isfinite(bound)) y = y.cwiseMax(static_cast<T>(-bound)).cwiseMin(static_cast<T>(bound));
  Var<T> loss = critic_loss(tape, b.critics, z, batch.actions, y);
  const auto grads = tape.backward(loss);
  b.critic_opt.step(b.critic_parameters(), grads);
  nets::soft_update(b.critics, cfg.tau);
  s.loss = static_cast<double>(loss.scalar());
  return s;
}

/// Steps θ only; latents and critics enter as constants or are left unstepped.
template <class T>
double update_actor(AgentBundle<T>& b, const Matrix<T>& z, const Config& cfg, double sigma, nets::Rng& rng) {
  Tape<T> tape;
  Var<T> loss = actor_loss(tape, b.actor, b.critics, z, sigma, cfg.clip, rng);
  const auto grads = tape.backward(loss);
  b.actor_opt.step(b.actor.parameters(), grads);
  return static_cast<double>(loss.scalar());
}

/// One supervised step on expert (window, action) pairs; trains δ and θ.
template <class T>
double update_bc(AgentBundle<T>& b, const replay::StackedBatch<T>& batch, const ObservationLayout& layout,
                 const Config& cfg, nets::Rng& rng) {
  const Matrix<T> obs = augmented(batch.obs, b.depth, layout, cfg, rng);
  Tape<T> tape;
  Var<T> loss = bc_loss(tape, b.encoder, b.actor, obs, batch.actions);
  const auto grads = tape.backward(loss);
  auto params = b.encoder.parameters();
  auto ap = b.actor.parameters();
  params.insert(params.end(), ap.begin(), ap.end());
  b.critic_opt.step(params, grads);
  return static_cast<double>(loss.scalar());
}

template <class T>
std::vector<T> to_frame(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

/// Mean undiscounted return of the deterministic policy (σ = 0).
template <class T>
double evaluate_policy(const AgentBundle<T>& b, const std::string& env_id, std::uint64_t seed, int episodes) {
  auto env = envs::make_env(env_id);
  double total = 0.0;
  for (int i = 0; i < episodes; ++i) {
    auto first = to_frame<T>(env->reset(eval_episode_seed(seed, i)));
    replay::FrameStack<T> stack(b.depth, env->obs_size());
    stack.reset(first);
    while (!env->done()) {
      const Matrix<T> a = b.actor.mean(b.encoder.encode_batch(stack.flat()));
      std::vector<double> act(a.data(), a.data() + a.size());
      auto res = env->step(act);
      total += res.reward;
      const auto f = to_frame<T>(res.observation);
      stack.push(f);
    }
  }
  return total / episodes;
}

/// Runs one algorithm on one environment: Algorithm-1 style interleaving
/// of environment steps and updates (discriminator, critic, actor), with
/// periodic deterministic evaluation.
template <class T>
class Trainer {
 public:
  Trainer(Algo algo, const std::string& env_id, const replay::ExpertDataset* expert, const Config& cfg)
      : algo_(algo),
        traits_(traits_for(algo, cfg)),
        cfg_(cfg),
        env_id_(training_env_id(algo, resolve_env_id(env_id, cfg))),
        env_(envs::make_env(env_id_)),
        layout_(layout_of(*env_)),
        init_rng_(derive_seed(cfg.seed, 1)),
        act_rng_(derive_seed(cfg.seed, 2)),
        update_rng_(derive_seed(cfg.seed, 3)),
        bundle_(make_bundle<T>(algo, layout_, cfg, init_rng_)),
        buffer_(layout_.frame_size, layout_.act_dim, traits_.offline ? 1 : cfg.capacity,
                std::max(cfg.depth, 1)) {
    cfg_.validate();
    check_capabilities(algo, env_id_, expert);
    if (expert) expert_.emplace(replay::expert_buffer<T>(*expert, bundle_.depth, traits_.needs_actions));
  }

  const std::string& env_id() const { return env_id_; }
  AgentBundle<T>& bundle() { return bundle_; }
  const AgentBundle<T>& bundle() const { return bundle_; }
  const ObservationLayout& layout() const { return layout_; }

  double evaluate() const { return evaluate_policy(bundle_, env_id_, cfg_.seed, cfg_.eval_episodes); }

  TrainReport run(const std::function<void(const TrainRow&)>& on_row = {}) {
    return traits_.offline ? run_offline(on_row) : run_online(on_row);
  }

 private:
  struct Accum {
    double disc = 0, critic = 0, actor = 0, reward = 0;
    long n_disc = 0, n_critic = 0, n_actor = 0, n_reward = 0;
    void reset() { *this = Accum{}; }
    static double avg(double s, long n) { return n ? s / n : std::numeric_limits<double>::quiet_NaN(); }
  };

  TrainRow make_row(std::int64_t frame, std::int64_t episode, const Accum& acc) const {
    TrainRow r;
    r.frame = frame;
    r.episode = episode;
    r.eval_return = evaluate();
    r.disc_loss = Accum::avg(acc.disc, acc.n_disc);
    r.critic_loss = Accum::avg(acc.critic, acc.n_critic);
    r.actor_loss = Accum::avg(acc.actor, acc.n_actor);
    r.imit_reward_mean = Accum::avg(acc.reward, acc.n_reward);
    r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    r.seed = cfg_.seed;
    return r;
  }

  bool emit(TrainReport& rep, TrainRow row, const std::function<void(const TrainRow&)>& on_row) {
    rep.rows.push_back(row);
    if (on_row) on_row(row);
    return row.eval_return >= cfg_.stop_return;
  }

  TrainReport run_online(const std::function<void(const TrainRow&)>& on_row) {
    t0_ = std::chrono::steady_clock::now();
    TrainReport rep;
    Accum acc;
    std::int64_t episode = 0;
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    replay::FrameStack<T> stack(bundle_.depth, layout_.frame_size);

    auto begin_episode = [&]() {
      const auto first = to_frame<T>(env_->reset(derive_seed(cfg_.seed, 100 + static_cast<std::uint64_t>(episode))));
      stack.reset(first);
      buffer_.start(first);
    };
    if (cfg_.frames == 0) {
      emit(rep, make_row(0, 0, acc), on_row);
      return rep;
    }
    begin_episode();
    for (std::int64_t frame = 0; frame < cfg_.frames; ++frame) {
      const double sigma = sigma_schedule(cfg_, frame);
      std::vector<double> action(static_cast<std::size_t>(layout_.act_dim));
      if (frame < cfg_.warmup) {
        for (auto& a : action) a = uniform(act_rng_);
      } else {
        const Matrix<T> mean = bundle_.actor.mean(bundle_.encoder.encode_batch(stack.flat()));
        const Matrix<T> a = nets::add_exploration_noise<T>(mean, sigma, std::nullopt, act_rng_);
        for (Index i = 0; i < a.size(); ++i) action[i] = static_cast<double>(a.data()[i]);
      }
      const auto res = env_->step(action);
      const auto next = to_frame<T>(res.observation);
      const std::vector<T> act_t(action.begin(), action.end());
      buffer_.push(next, act_t, static_cast<T>(res.reward), res.done);
      stack.push(next);

      if (frame >= cfg_.warmup) update_step(sigma, acc);

      if (res.done) {
        ++episode;
        if (frame + 1 < cfg_.frames) begin_episode();
      }
      const std::int64_t done_frames = frame + 1;
      if (done_frames % cfg_.eval_interval == 0 || done_frames == cfg_.frames) {
        const bool stop = emit(rep, make_row(done_frames, episode, acc), on_row);
        acc.reset();
        if (stop) break;
      }
    }
    return rep;
  }

  void update_step(double sigma, Accum& acc) {
    if (traits_.pairing) {
      const auto agent = buffer_.sample(cfg_.batch, bundle_.depth, update_rng_);
      const auto expert = expert_->sample(cfg_.batch, bundle_.depth, update_rng_);
      const auto ds = update_discriminator(bundle_, agent, expert, *traits_.pairing, layout_, cfg_, update_rng_);
      acc.disc += ds.loss;
      ++acc.n_disc;
    }
    const auto batch = buffer_.sample(cfg_.batch, bundle_.depth, update_rng_);
    const auto cs = update_critic(bundle_, batch, traits_, layout_, cfg_, sigma, update_rng_,
                                    value_bound(traits_, env_->r_max(), cfg_.gamma));
    acc.critic += cs.loss;
    ++acc.n_critic;
    if (!std::isnan(cs.imit_reward_mean)) {
      acc.reward += cs.imit_reward_mean;
      ++acc.n_reward;
    }
    acc.actor += update_actor(bundle_, cs.z, cfg_, sigma, update_rng_);
    ++acc.n_actor;
  }

  TrainReport run_offline(const std::function<void(const TrainRow&)>& on_row) {
    t0_ = std::chrono::steady_clock::now();
    TrainReport rep;
    Accum acc;
    const std::int64_t interval = std::min<std::int64_t>(cfg_.eval_interval, std::max<std::int64_t>(cfg_.bc_steps, 1));
    if (cfg_.bc_steps == 0) {
      emit(rep, make_row(0, 0, acc), on_row);
      return rep;
    }
    for (std::int64_t step = 0; step < cfg_.bc_steps; ++step) {
      const auto batch = expert_->sample(cfg_.batch, bundle_.depth, update_rng_);
      acc.actor += update_bc(bundle_, batch, layout_, cfg_, update_rng_);
      ++acc.n_actor;
      const std::int64_t done = step + 1;
      if (done % interval == 0 || done == cfg_.bc_steps) {
        const bool stop = emit(rep, make_row(done, 0, acc), on_row);
        acc.reset();
        if (stop) break;
      }
    }
    return rep;
  }

  Algo algo_;
  AlgoTraits traits_;
  Config cfg_;
  std::string env_id_;
  std::unique_ptr<envs::Environment> env_;
  ObservationLayout layout_;
  nets::Rng init_rng_;
  nets::Rng act_rng_;
  nets::Rng update_rng_;
  AgentBundle<T> bundle_;
  replay::ReplayBuffer<T> buffer_;
  std::optional<replay::ReplayBuffer<T>> expert_;
  std::chrono::steady_clock::time_point t0_;
};

/// Convenience wrapper: build a trainer and run it to completion.
template <class T>
TrainReport train(Algo algo, const std::string& env_id, const replay::ExpertDataset* expert, const Config& cfg,
                  const std::function<void(const TrainRow&)>& on_row = {}) {
  Trainer<T> t(algo, env_id, expert, cfg);
  return t.run(on_row);
}

}  // namespace laifo::imitate
