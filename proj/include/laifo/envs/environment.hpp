#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace laifo::envs {

enum class ObservationMode { position, full_state, image };

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
};

class EpisodeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnknownEnvironment : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Continuous-action episodic POMDP with a hidden physical state.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<double>& action) = 0;
  /// The full physical state, including components hidden from observations.
  virtual std::vector<double> privileged_state() const = 0;

  virtual const std::string& id() const = 0;
  virtual ObservationMode mode() const = 0;
  /// Shape of one observation frame: {n} for vectors, {H, W} for images.
  virtual std::vector<std::int64_t> obs_shape() const = 0;
  virtual std::int64_t act_dim() const = 0;
  virtual std::int64_t state_dim() const = 0;
  virtual int episode_limit() const = 0;
  /// Upper bound on |reward|.
  virtual double r_max() const = 0;
  virtual int steps() const = 0;
  virtual bool done() const = 0;

  std::int64_t obs_size() const {
    std::int64_t n = 1;
    for (auto s : obs_shape()) n *= s;
    return n;
  }
  bool fully_observable() const { return mode() == ObservationMode::full_state; }
  bool image_mode() const { return mode() == ObservationMode::image; }
};

}  // namespace laifo::envs
