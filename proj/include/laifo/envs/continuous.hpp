#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "laifo/envs/environment.hpp"

namespace laifo::envs {

/// Shared bookkeeping for fixed-horizon episodes.
class EpisodicEnv : public Environment {
 public:
  EpisodicEnv(std::string id, ObservationMode mode, int limit) : id_(std::move(id)), mode_(mode), limit_(limit) {}

  const std::string& id() const override { return id_; }
  ObservationMode mode() const override { return mode_; }
  int episode_limit() const override { return limit_; }
  int steps() const override { return t_; }
  bool done() const override { return t_ >= limit_; }

 protected:
  void begin() {
    t_ = 0;
    started_ = true;
  }
  void check_step() const {
    if (!started_) throw EpisodeError(id_ + ": step() before reset()");
    if (done()) throw EpisodeError(id_ + ": step() on a finished episode");
  }
  void tick() { ++t_; }

 private:
  std::string id_;
  ObservationMode mode_;
  int limit_;
  int t_ = 0;
  bool started_ = false;
};

/// 2-D double integrator in the box [-1, 1]^2 with the goal at the origin.
/// Walls are inelastic: a clamped coordinate loses its velocity component.
class PointMass : public EpisodicEnv {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kAccel = 2.0;
  static constexpr int kLimit = 200;

  PointMass(std::string id, ObservationMode mode, int image_size = 32)
      : EpisodicEnv(std::move(id), mode, kLimit), image_size_(image_size) {}

  std::vector<double> reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    state_ = {u(rng), u(rng), 0.0, 0.0};
    begin();
    return observe();
  }

  StepResult step(const std::vector<double>& action) override {
    check_step();
    if (action.size() != 2) throw std::invalid_argument(id() + ": expected a 2-D action");
    for (int i = 0; i < 2; ++i) {
      const double a = std::clamp(action[i], -1.0, 1.0);
      double& p = state_[i];
      double& v = state_[2 + i];
      v += kDt * kAccel * a;
      p += kDt * v;
      if (p > 1.0 || p < -1.0) {
        p = std::clamp(p, -1.0, 1.0);
        v = 0.0;
      }
    }
    tick();
    return {observe(), shaping(state_), done()};
  }

  /// 1 − tanh(distance to goal); depends on the successor state only.
  static double shaping(const std::array<double, 4>& s) { return 1.0 - std::tanh(std::hypot(s[0], s[1])); }

  std::vector<double> privileged_state() const override { return {state_.begin(), state_.end()}; }

  std::vector<std::int64_t> obs_shape() const override {
    switch (mode()) {
      case ObservationMode::position: return {2};
      case ObservationMode::full_state: return {4};
      case ObservationMode::image: return {image_size_, image_size_};
    }
    return {2};
  }
  std::int64_t act_dim() const override { return 2; }
  std::int64_t state_dim() const override { return 4; }
  double r_max() const override { return 1.0; }

  /// Grayscale frame: gray goal dot under a white agent dot on black, values in [0, 1].
  static std::vector<double> render(double px, double py, int size) {
    std::vector<double> img(static_cast<std::size_t>(size) * size, 0.0);
    const double radius = std::max(1.0, size / 16.0);
    auto to_pixel = [size](double c) { return (c + 1.0) * 0.5 * (size - 1); };
    auto dot = [&](double cx, double cy, double value) {
      const double x0 = to_pixel(cx);
      const double y0 = to_pixel(cy);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          if (std::hypot(x - x0, y - y0) <= radius) img[static_cast<std::size_t>(y) * size + x] = value;
        }
      }
    };
    dot(0.0, 0.0, 0.5);
    dot(px, py, 1.0);
    return img;
  }

 private:
  std::vector<double> observe() const {
    switch (mode()) {
      case ObservationMode::position: return {state_[0], state_[1]};
      case ObservationMode::full_state: return privileged_state();
      case ObservationMode::image: return render(state_[0], state_[1], image_size_);
    }
    return {};
  }

  std::array<double, 4> state_{};
  int image_size_;
};

/// Torque-limited swing-up. The partially observable variant shows (cos θ,
/// sin θ) and hides the angular velocity.
class Pendulum : public EpisodicEnv {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr int kLimit = 200;

  Pendulum(std::string id, ObservationMode mode) : EpisodicEnv(std::move(id), mode, kLimit) {}

  std::vector<double> reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> speed(-1.0, 1.0);
    theta_ = angle(rng);
    omega_ = speed(rng);
    begin();
    return observe();
  }

  StepResult step(const std::vector<double>& action) override {
    check_step();
    if (action.size() != 1) throw std::invalid_argument(id() + ": expected a 1-D action");
    const double u = kMaxTorque * std::clamp(action[0], -1.0, 1.0);
    const double th = normalize(theta_);
    const double cost = th * th + 0.1 * omega_ * omega_ + 0.001 * u * u;
    omega_ += (3.0 * kGravity / 2.0 * std::sin(theta_) + 3.0 * u) * kDt;
    omega_ = std::clamp(omega_, -kMaxSpeed, kMaxSpeed);
    theta_ += omega_ * kDt;
    tick();
    return {observe(), -cost, done()};
  }

  std::vector<double> privileged_state() const override {
    return {std::cos(theta_), std::sin(theta_), omega_};
  }
  std::vector<std::int64_t> obs_shape() const override {
    return {mode() == ObservationMode::full_state ? 3 : 2};
  }
  std::int64_t act_dim() const override { return 1; }
  std::int64_t state_dim() const override { return 3; }
  double r_max() const override {
    return std::numbers::pi * std::numbers::pi + 0.1 * kMaxSpeed * kMaxSpeed +
           0.001 * kMaxTorque * kMaxTorque;
  }

  double theta() const { return theta_; }
  double omega() const { return omega_; }

 private:
  static double normalize(double th) {
    return std::remainder(th, 2.0 * std::numbers::pi);
  }
  std::vector<double> observe() const {
    if (mode() == ObservationMode::full_state) return privileged_state();
    return {std::cos(theta_), std::sin(theta_)};
  }

  double theta_ = 0.0;
  double omega_ = 0.0;
};

inline bool is_tabular_id(const std::string& id) { return id.rfind("tabular:", 0) == 0; }

/// Known continuous ids. The "-s" variants observe the full state and are
/// the inputs of the fully observable algorithms and of expert training.
inline std::unique_ptr<Environment> make_env(const std::string& id) {
  if (id == "pointmass-v") return std::make_unique<PointMass>(id, ObservationMode::position);
  if (id == "pointmass-s") return std::make_unique<PointMass>(id, ObservationMode::full_state);
  if (id == "pointmass-px32") return std::make_unique<PointMass>(id, ObservationMode::image, 32);
  if (id == "pointmass-px84") return std::make_unique<PointMass>(id, ObservationMode::image, 84);
  if (id == "pendulum-po") return std::make_unique<Pendulum>(id, ObservationMode::position);
  if (id == "pendulum-s") return std::make_unique<Pendulum>(id, ObservationMode::full_state);
  if (is_tabular_id(id)) {
    throw UnknownEnvironment("'" + id + "' is a tabular model; use the theory tools (make_tabular)");
  }
  throw UnknownEnvironment("unknown environment id '" + id + "'");
}

/// The fully observable counterpart that shares dynamics with `id`.
inline std::string full_state_id(const std::string& id) {
  if (id.rfind("pointmass", 0) == 0) return "pointmass-s";
  if (id.rfind("pendulum", 0) == 0) return "pendulum-s";
  throw UnknownEnvironment("no fully observable counterpart for '" + id + "'");
}

/// Maps a privileged state to what environment `id` would show, so data
/// recorded once can feed both observation regimes.
inline std::vector<double> project_observation(const std::string& id, const std::vector<double>& state) {
  if (id == "pointmass-v") return {state[0], state[1]};
  if (id == "pointmass-s" || id == "pendulum-s") return state;
  if (id == "pointmass-px32") return PointMass::render(state[0], state[1], 32);
  if (id == "pointmass-px84") return PointMass::render(state[0], state[1], 84);
  if (id == "pendulum-po") return {state[0], state[1]};
  throw UnknownEnvironment("unknown environment id '" + id + "'");
}

}  // namespace laifo::envs
