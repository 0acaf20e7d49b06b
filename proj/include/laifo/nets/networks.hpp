#pragma once

// The four function approximators of the adversarial imitation game: feature
// extractor, actor, twin critics with slow targets, and discriminator. All
// of them except the extractor live on the latent space.

#include <algorithm>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "laifo/nets/layers.hpp"
#include "laifo/replay/window.hpp"

namespace laifo::nets {

enum class EncoderKind { identity, mlp, conv };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::mlp;
  Index frame_size = 0;  ///< values per observation frame
  Index frames = 1;      ///< stack depth d
  Index height = 0;      ///< image frames only
  Index width = 0;
  Index z_dim = 50;
  Index hidden = 256;
  Index conv_channels = 16;
};

template <class T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderSpec& spec, Rng& rng) : spec_(spec) {
    const Index in = spec.frame_size * spec.frames;
    switch (spec.kind) {
      case EncoderKind::identity:
        spec_.z_dim = in;
        break;
      case EncoderKind::mlp:
        mlp_ = Mlp<T>("encoder", {in, spec.hidden, spec.hidden, spec.z_dim}, Activation::tanh, rng);
        break;
      case EncoderKind::conv:
        if (spec.height * spec.width != spec.frame_size) {
          throw std::invalid_argument("Encoder: image frame size must equal height*width");
        }
        conv1_ = Conv2d<T>("encoder.conv1", spec.frames, spec.height, spec.width,
                           spec.conv_channels, 3, 2, Layout::chw, rng);
        conv2_ = Conv2d<T>("encoder.conv2", spec.conv_channels, conv1_.out_h(), conv1_.out_w(),
                           spec.conv_channels, 3, 2, Layout::hwc, rng);
        head_ = Linear<T>("encoder.head", conv2_.out_features(), spec.z_dim, rng);
        break;
    }
  }

  const EncoderSpec& spec() const { return spec_; }
  Index input_dim() const { return spec_.frame_size * spec_.frames; }
  Index z_dim() const { return spec_.z_dim; }
  Index frames() const { return spec_.frames; }

  /// Rows of flattened windows → rows of latents.
  Var<T> forward(Tape<T>& tape, Var<T> windows) const {
    if (windows.cols() != input_dim()) {
      throw grad::ShapeError("Encoder: expected " + std::to_string(input_dim()) +
                             " inputs per window, got " + std::to_string(windows.cols()));
    }
    switch (spec_.kind) {
      case EncoderKind::identity: return windows;
      case EncoderKind::mlp: return mlp_.forward(tape, windows);
      case EncoderKind::conv: return head_(tape, conv2_(tape, conv1_(tape, windows)));
    }
    return windows;
  }

  Matrix<T> encode_batch(const Matrix<T>& windows) const {
    Tape<T> tape;
    return forward(tape, tape.constant(windows)).value();
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    mlp_.collect(out);
    if (spec_.kind == EncoderKind::conv) {
      conv1_.collect(out);
      conv2_.collect(out);
      head_.collect(out);
    }
    return out;
  }
  std::vector<const Parameter<T>*> parameters() const {
    std::vector<const Parameter<T>*> out;
    mlp_.collect(out);
    if (spec_.kind == EncoderKind::conv) {
      conv1_.collect(out);
      conv2_.collect(out);
      head_.collect(out);
    }
    return out;
  }
  /// The dense stack of the mlp kind (empty for the other kinds).
  const Mlp<T>& mlp() const { return mlp_; }

 private:
  EncoderSpec spec_;
  Mlp<T> mlp_;
  Conv2d<T> conv1_;
  Conv2d<T> conv2_;
  Linear<T> head_;
};

template <class T>
Matrix<T> encode(const Encoder<T>& enc, const replay::ObservationWindow<T>& window) {
  if (window.depth() != enc.frames()) {
    throw std::invalid_argument("encode: window has " + std::to_string(window.depth()) +
                                " frames, encoder expects " + std::to_string(enc.frames()));
  }
  return enc.encode_batch(window.flatten());
}

/// Deterministic policy head; the final tanh keeps every coordinate in [-1, 1].
template <class T>
class Actor {
 public:
  Actor() = default;
  Actor(Index z_dim, Index act_dim, Index hidden, Rng& rng)
      : mlp_("actor", {z_dim, hidden, hidden, act_dim}, Activation::relu, rng, true) {}

  Var<T> forward(Tape<T>& tape, Var<T> z) const { return grad::tanh(mlp_.forward(tape, z)); }
  Matrix<T> mean(const Matrix<T>& z) const {
    Tape<T> tape;
    return forward(tape, tape.constant(z)).value();
  }
  Index act_dim() const { return mlp_.out_features(); }
  Index z_dim() const { return mlp_.in_features(); }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    mlp_.collect(out);
    return out;
  }
  std::vector<const Parameter<T>*> parameters() const {
    std::vector<const Parameter<T>*> out;
    mlp_.collect(out);
    return out;
  }
  Mlp<T>& mlp() { return mlp_; }

 private:
  Mlp<T> mlp_;
};

/// a = mean + eps, eps ~ N(0, sigma^2) optionally clipped to [-c, c], then
/// clamped to the action box.
template <class T>
Matrix<T> add_exploration_noise(const Matrix<T>& mean, double sigma, std::optional<double> clip_c,
                                Rng& rng) {
  if (sigma < 0) throw std::invalid_argument("act: sigma must be >= 0");
  Matrix<T> a = mean;
  if (sigma > 0) {
    std::normal_distribution<double> n(0.0, sigma);
    for (Index i = 0; i < a.size(); ++i) {
      double eps = n(rng);
      if (clip_c) eps = std::clamp(eps, -*clip_c, *clip_c);
      a.data()[i] += static_cast<T>(eps);
    }
  }
  return a.cwiseMax(T(-1)).cwiseMin(T(1));
}

template <class T>
Matrix<T> act(const Actor<T>& actor, const Matrix<T>& z, double sigma, std::optional<double> clip_c,
              Rng& rng) {
  return add_exploration_noise<T>(actor.mean(z), sigma, clip_c, rng);
}

/// Two independent Q(z, a) estimators and their slow-moving copies.
template <class T>
class TwinCritics {
 public:
  TwinCritics() = default;
  TwinCritics(Index z_dim, Index act_dim, Index hidden, Rng& rng)
      : q1_("critic1", {z_dim + act_dim, hidden, hidden, 1}, Activation::relu, rng, true),
        q2_("critic2", {z_dim + act_dim, hidden, hidden, 1}, Activation::relu, rng, true),
        target1_(q1_),
        target2_(q2_) {}

  /// Returns (q1, q2) as B×1 nodes.
  std::pair<Var<T>, Var<T>> forward(Tape<T>& tape, Var<T> z, Var<T> a, bool use_target) const {
    Var<T> in = grad::concat(z, a);
    const Mlp<T>& n1 = use_target ? target1_ : q1_;
    const Mlp<T>& n2 = use_target ? target2_ : q2_;
    return {n1.forward(tape, in), n2.forward(tape, in)};
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    q1_.collect(out);
    q2_.collect(out);
    return out;
  }
  std::vector<const Parameter<T>*> parameters() const {
    std::vector<const Parameter<T>*> out;
    q1_.collect(out);
    q2_.collect(out);
    return out;
  }
  std::vector<Parameter<T>*> target_parameters() {
    std::vector<Parameter<T>*> out;
    target1_.collect(out);
    target2_.collect(out);
    return out;
  }
  std::vector<const Parameter<T>*> target_parameters() const {
    std::vector<const Parameter<T>*> out;
    target1_.collect(out);
    target2_.collect(out);
    return out;
  }

  void hard_copy() {
    target1_ = q1_;
    target2_ = q2_;
  }

  Mlp<T>& online(int k) { return k == 0 ? q1_ : q2_; }
  Mlp<T>& target(int k) { return k == 0 ? target1_ : target2_; }

 private:
  Mlp<T> q1_;
  Mlp<T> q2_;
  Mlp<T> target1_;
  Mlp<T> target2_;
};

template <class T>
std::pair<Matrix<T>, Matrix<T>> q_values(const TwinCritics<T>& critics, const Matrix<T>& z,
                                         const Matrix<T>& a, bool use_target) {
  Tape<T> tape;
  auto [q1, q2] = critics.forward(tape, tape.constant(z), tape.constant(a), use_target);
  return {q1.value(), q2.value()};
}

/// target ← (1 − tau)·target + tau·online, elementwise.
template <class T>
void soft_update(TwinCritics<T>& critics, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must lie in [0, 1]");
  auto online = critics.parameters();
  auto target = critics.target_parameters();
  const T t = static_cast<T>(tau);
  const T keep = T(1) - t;
  for (std::size_t i = 0; i < online.size(); ++i) {
    Matrix<T>& dst = target[i]->value();
    const Matrix<T>& src = online[i]->value();
    for (Index j = 0; j < dst.size(); ++j) dst.data()[j] = keep * dst.data()[j] + t * src.data()[j];
  }
}

/// Which second argument the discriminator scores the latent against.
enum class Pairing { transition, action };

inline const char* pairing_name(Pairing p) { return p == Pairing::transition ? "transition" : "action"; }

class PairingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// D(left, right) = sigmoid(score(left, right)).
template <class T>
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(Pairing pairing, Index left_dim, Index right_dim, Index hidden, Rng& rng)
      : pairing_(pairing),
        left_dim_(left_dim),
        right_dim_(right_dim),
        mlp_("discriminator", {left_dim + right_dim, hidden, hidden, 1}, Activation::relu, rng) {}

  Pairing pairing() const { return pairing_; }
  Index left_dim() const { return left_dim_; }
  Index right_dim() const { return right_dim_; }
  Index input_dim() const { return left_dim_ + right_dim_; }

  void require(Pairing p) const {
    if (p != pairing_) {
      throw PairingError(std::string("discriminator is configured for ") + pairing_name(pairing_) +
                         " pairs, got " + pairing_name(p));
    }
  }

  /// Pre-sigmoid score of concatenated pairs [B × (left+right)].
  Var<T> score_joint(Tape<T>& tape, Var<T> pairs) const {
    if (pairs.cols() != input_dim()) {
      throw grad::ShapeError("Discriminator: expected " + std::to_string(input_dim()) +
                             " input columns, got " + std::to_string(pairs.cols()));
    }
    return mlp_.forward(tape, pairs);
  }
  Var<T> score(Tape<T>& tape, Var<T> left, Var<T> right, Pairing p) const {
    require(p);
    return score_joint(tape, grad::concat(left, right));
  }
  Var<T> prob(Tape<T>& tape, Var<T> left, Var<T> right, Pairing p) const {
    return grad::sigmoid(score(tape, left, right, p));
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    mlp_.collect(out);
    return out;
  }
  std::vector<const Parameter<T>*> parameters() const {
    std::vector<const Parameter<T>*> out;
    mlp_.collect(out);
    return out;
  }
  Mlp<T>& mlp() { return mlp_; }

 private:
  Pairing pairing_ = Pairing::transition;
  Index left_dim_ = 0;
  Index right_dim_ = 0;
  Mlp<T> mlp_;
};

template <class T>
Matrix<T> discriminate(const Discriminator<T>& d, const Matrix<T>& left, const Matrix<T>& right,
                       Pairing p) {
  Tape<T> tape;
  return d.prob(tape, tape.constant(left), tape.constant(right), p).value();
}

}  // namespace laifo::nets
