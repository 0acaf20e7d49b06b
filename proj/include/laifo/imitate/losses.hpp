#pragma once

// Tape builders for the four training objectives. Each function only
// records operations; optimizer steps live in the trainer.

#include <algorithm>
#include <optional>
#include <random>
#include <stdexcept>

#include "laifo/nets/networks.hpp"

namespace laifo::imitate {

using grad::Index;
using grad::Matrix;
using grad::Tape;
using grad::Var;
using nets::Rng;

/// Row-wise u·expert + (1−u)·agent with one u ~ U(0,1) per pair.
template <class T>
Matrix<T> interpolate(const Matrix<T>& expert, const Matrix<T>& agent, Rng& rng) {
  if (expert.rows() != agent.rows() || expert.cols() != agent.cols()) {
    throw std::invalid_argument("gradient_penalty: expert and agent pair sets differ in size");
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Matrix<T> out(expert.rows(), expert.cols());
  for (Index i = 0; i < expert.rows(); ++i) {
    const T u = static_cast<T>(u01(rng));
    out.row(i) = u * expert.row(i) + (T(1) - u) * agent.row(i);
  }
  return out;
}

/// λ·mean_i (‖∇_x score(x_i)‖ − 1)² at the given interpolants. The input
/// gradient is itself a tape node, so the result is differentiable in χ.
template <class T>
Var<T> gradient_penalty_at(Tape<T>& tape, const nets::Discriminator<T>& disc, const Matrix<T>& interpolants,
                           double lambda) {
  Var<T> x = tape.input(interpolants);
  // Rows are independent, so the gradient of the summed score w.r.t. row i
  // equals the gradient of score_i.
  Var<T> g = tape.input_gradient(grad::sum(disc.score_joint(tape, x)), x);
  Var<T> dev = grad::scale_shift(grad::l2norm(g), T(1), T(-1));
  return grad::scale(grad::mean(grad::square(dev)), static_cast<T>(lambda));
}

template <class T>
Var<T> gradient_penalty(Tape<T>& tape, const nets::Discriminator<T>& disc, const Matrix<T>& expert_pairs,
                        const Matrix<T>& agent_pairs, double lambda, Rng& rng) {
  return gradient_penalty_at(tape, disc, interpolate(expert_pairs, agent_pairs, rng), lambda);
}

template <class T>
struct DiscriminatorLoss {
  Var<T> total;
  Var<T> adversarial;
  std::optional<Var<T>> penalty;  ///< absent when λ = 0
};

/// −[mean log(D(expert) + ε) + mean log(1 − D(agent) + ε)] + penalty.
/// Pairs are rows of concatenated (left, right) inputs.
template <class T>
DiscriminatorLoss<T> discriminator_loss(Tape<T>& tape, const nets::Discriminator<T>& disc,
                                        const Matrix<T>& expert_pairs, const Matrix<T>& agent_pairs, double lambda,
                                        Rng& rng) {
  if (expert_pairs.rows() == 0 || agent_pairs.rows() == 0) {
    throw std::invalid_argument("update_discriminator: empty batch");
  }
  Var<T> pe = grad::sigmoid(disc.score_joint(tape, tape.constant(expert_pairs)));
  Var<T> pa = grad::sigmoid(disc.score_joint(tape, tape.constant(agent_pairs)));
  Var<T> fit = grad::mean(grad::log(pe)) + grad::mean(grad::log(grad::scale_shift(pa, T(-1), T(1))));
  DiscriminatorLoss<T> out;
  out.adversarial = grad::scale(fit, T(-1));
  out.total = out.adversarial;
  if (lambda > 0) {
    out.penalty = gradient_penalty(tape, disc, expert_pairs, agent_pairs, lambda, rng);
    out.total = out.total + *out.penalty;
  }
  return out;
}

/// Σ_k mean (Q_k(z, a) − y)² with y held constant.
template <class T>
Var<T> critic_loss(Tape<T>& tape, const nets::TwinCritics<T>& critics, Var<T> z, const Matrix<T>& actions,
                   const Matrix<T>& target) {
  auto [q1, q2] = critics.forward(tape, z, tape.constant(actions), false);
  Var<T> y = tape.constant(target);
  return grad::mean(grad::square(q1 - y)) + grad::mean(grad::square(q2 - y));
}

/// y = r + γ·min_k Q̄_k(z′, clamp(π(z′) + clip(ε, −c, c))), with ε ~ N(0, σ²).
template <class T>
Matrix<T> critic_target(const nets::TwinCritics<T>& critics, const nets::Actor<T>& actor, const Matrix<T>& z_next,
                        const Matrix<T>& reward, double gamma, double sigma, double clip_c, Rng& rng) {
  const Matrix<T> a_next = nets::act(actor, z_next, sigma, clip_c, rng);
  auto [q1, q2] = nets::q_values(critics, z_next, a_next, true);
  return reward + static_cast<T>(gamma) * q1.cwiseMin(q2);
}

/// −mean min_k Q_k(z, clamp(π(z) + clip(ε, −c, c))) with z held constant.
template <class T>
Var<T> actor_loss(Tape<T>& tape, const nets::Actor<T>& actor, const nets::TwinCritics<T>& critics,
                  const Matrix<T>& z, double sigma, double clip_c, Rng& rng) {
  Var<T> zc = tape.constant(z);
  Var<T> mean = actor.forward(tape, zc);
  Matrix<T> eps = Matrix<T>::Zero(z.rows(), actor.act_dim());
  if (sigma > 0) {
    std::normal_distribution<double> n(0.0, sigma);
    for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = static_cast<T>(std::clamp(n(rng), -clip_c, clip_c));
  }
  Var<T> a = grad::clip(mean + tape.constant(eps), T(-1), T(1));
  auto [q1, q2] = critics.forward(tape, zc, a, false);
  return grad::scale(grad::mean(grad::minimum(q1, q2)), T(-1));
}

/// Mean squared action error of π(φ(window)) against expert actions.
template <class T>
Var<T> bc_loss(Tape<T>& tape, const nets::Encoder<T>& enc, const nets::Actor<T>& actor, const Matrix<T>& windows,
               const Matrix<T>& actions) {
  Var<T> pred = actor.forward(tape, enc.forward(tape, tape.constant(windows)));
  return grad::mean(grad::square(pred - tape.constant(actions)));
}

}  // namespace laifo::imitate
