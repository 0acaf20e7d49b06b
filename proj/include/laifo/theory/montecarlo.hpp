#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "laifo/theory/occupancy.hpp"

namespace laifo::theory {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
  std::int64_t steps = 0;
};

namespace detail {

class Categorical {
 public:
  Categorical() = default;
  template <class Row>
  explicit Categorical(const Row& p) {
    cdf_.resize(static_cast<std::size_t>(p.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) cdf_[i] = (acc += p(i));
  }
  int draw(std::mt19937_64& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, cdf_.back())(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace detail

/// Estimates E_{d_π}[f(s, z, a)] with a ~ π(·|z) by independent episodes:
/// each runs a geometric(1−γ) number of transitions from a fresh start, and
/// the state where it stops is an exact draw from the discounted occupancy.
/// Sampling continues until `step_budget` transitions have been simulated.
inline McEstimate mc_occupancy(const TabularPOMDP& m, const LatentScheme& scheme, const LatentPolicy& pi,
                               double gamma, std::int64_t step_budget, std::mt19937_64& rng,
                               const std::function<double(int, std::int64_t, int)>& f) {
  detail::Categorical start(m.rho0);
  std::vector<detail::Categorical> obs(m.S);
  for (int s = 0; s < m.S; ++s) obs[s] = detail::Categorical(m.U.row(s));
  std::vector<std::vector<detail::Categorical>> trans(m.A, std::vector<detail::Categorical>(m.S));
  for (int a = 0; a < m.A; ++a) {
    for (int s = 0; s < m.S; ++s) trans[a][s] = detail::Categorical(m.T[a].row(s));
  }
  std::vector<detail::Categorical> act(static_cast<std::size_t>(pi.probs.rows()));
  std::vector<char> act_ready(act.size(), 0);
  auto draw_action = [&](std::int64_t z) {
    if (!act_ready[z]) {
      act[z] = detail::Categorical(pi.probs.row(z));
      act_ready[z] = 1;
    }
    return act[z].draw(rng);
  };
  std::bernoulli_distribution stop(1.0 - gamma);
  McEstimate est;
  double sum = 0.0, sum_sq = 0.0;
  while (est.steps < step_budget) {
    int s = start.draw(rng);
    std::int64_t z = scheme.initial(obs[s].draw(rng));
    while (!stop(rng)) {
      const int a = draw_action(z);
      s = trans[a][s].draw(rng);
      z = scheme.shift(z, obs[s].draw(rng));
      ++est.steps;
    }
    ++est.steps;  // count the stopping draw as one simulated step
    const double v = f(s, z, draw_action(z));
    sum += v;
    sum_sq += v * v;
    ++est.samples;
  }
  const double n = static_cast<double>(est.samples);
  est.mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - est.mean * est.mean);
  est.std_error = std::sqrt(var / n);
  return est;
}

}  // namespace laifo::theory
