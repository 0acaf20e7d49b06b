#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "laifo/augment/shift.hpp"
#include "laifo/imitate/config.hpp"
#include "laifo/nets/adam.hpp"
#include "laifo/nets/networks.hpp"

namespace laifo::imitate {

/// `rl` is plain off-policy actor-critic on the environment reward; it
/// trains experts and serves as a reward-only reference.
enum class Algo { laifo, lail, dacfo, dac, bc, rl_plus_videos, rl };

struct AlgoTraits {
  std::optional<nets::Pairing> pairing;  ///< discriminator input, if adversarial
  bool needs_actions = false;            ///< expert actions required
  bool needs_expert = true;
  bool full_state = false;               ///< observes the privileged state
  bool offline = false;
  double env_reward_weight = 0.0;
  double imitation_weight = 1.0;
};

inline AlgoTraits traits(Algo a) {
  using nets::Pairing;
  switch (a) {
    case Algo::laifo: return {Pairing::transition, false, true, false, false, 0.0, 1.0};
    case Algo::lail: return {Pairing::action, true, true, false, false, 0.0, 1.0};
    case Algo::dacfo: return {Pairing::transition, false, true, true, false, 0.0, 1.0};
    case Algo::dac: return {Pairing::action, true, true, true, false, 0.0, 1.0};
    case Algo::bc: return {std::nullopt, true, true, false, true, 0.0, 0.0};
    case Algo::rl_plus_videos: return {Pairing::transition, false, true, false, false, 1.0, 1.0};
    case Algo::rl: return {std::nullopt, false, false, false, false, 1.0, 0.0};
  }
  return {};
}

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::laifo: return "laifo";
    case Algo::lail: return "lail";
    case Algo::dacfo: return "dacfo";
    case Algo::dac: return "dac";
    case Algo::bc: return "bc";
    case Algo::rl_plus_videos: return "rl_plus_videos";
    case Algo::rl: return "rl";
  }
  return "?";
}

inline Algo parse_algo(const std::string& s) {
  for (Algo a : {Algo::laifo, Algo::lail, Algo::dacfo, Algo::dac, Algo::bc, Algo::rl_plus_videos, Algo::rl}) {
    if (s == algo_name(a)) return a;
  }
  if (s == "rl-plus-videos") return Algo::rl_plus_videos;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

/// Shape of what the agent observes each step.
struct ObservationLayout {
  grad::Index frame_size = 0;
  std::optional<augment::ImageShape> image;
  grad::Index act_dim = 0;
};

/// Encoder φ_δ, actor π_θ, twin critics with targets, discriminator D_χ and
/// their optimizers. The encoder is stepped by the critic optimizer only.
template <class T>
struct AgentBundle {
  nets::Encoder<T> encoder;
  nets::Actor<T> actor;
  nets::TwinCritics<T> critics;
  std::optional<nets::Discriminator<T>> disc;
  nets::Adam<T> critic_opt;
  nets::Adam<T> actor_opt;
  nets::Adam<T> disc_opt;
  int depth = 1;

  std::vector<grad::Parameter<T>*> critic_parameters() {
    auto out = encoder.parameters();
    auto c = critics.parameters();
    out.insert(out.end(), c.begin(), c.end());
    return out;
  }

  /// Every tensor with a stable, unique name (targets prefixed "target.").
  std::vector<std::pair<std::string, grad::Parameter<T>*>> named_parameters() {
    std::vector<std::pair<std::string, grad::Parameter<T>*>> out;
    for (auto* p : encoder.parameters()) out.emplace_back(p->name(), p);
    for (auto* p : actor.parameters()) out.emplace_back(p->name(), p);
    for (auto* p : critics.parameters()) out.emplace_back(p->name(), p);
    for (auto* p : critics.target_parameters()) out.emplace_back("target." + p->name(), p);
    if (disc) {
      for (auto* p : disc->parameters()) out.emplace_back(p->name(), p);
    }
    return out;
  }
};

template <class T>
AgentBundle<T> make_bundle(Algo algo, const ObservationLayout& layout, const Config& cfg, nets::Rng& rng) {
  const AlgoTraits tr = traits(algo);
  AgentBundle<T> b;
  nets::EncoderSpec spec;
  spec.frame_size = layout.frame_size;
  spec.z_dim = cfg.z_dim;
  spec.hidden = cfg.hidden;
  if (tr.full_state) {
    // State-based agents observe a sufficient statistic directly.
    spec.kind = nets::EncoderKind::identity;
    spec.frames = 1;
  } else if (layout.image) {
    spec.kind = nets::EncoderKind::conv;
    spec.frames = cfg.depth;
    spec.height = layout.image->height;
    spec.width = layout.image->width;
  } else {
    spec.kind = nets::EncoderKind::mlp;
    spec.frames = cfg.depth;
  }
  if (algo == Algo::rl && !layout.image && cfg.depth == 1) spec.kind = nets::EncoderKind::identity;
  b.depth = static_cast<int>(spec.frames);
  b.encoder = nets::Encoder<T>(spec, rng);
  const grad::Index z = b.encoder.z_dim();
  b.actor = nets::Actor<T>(z, layout.act_dim, cfg.hidden, rng);
  b.critics = nets::TwinCritics<T>(z, layout.act_dim, cfg.hidden, rng);
  if (tr.pairing) {
    const grad::Index right = *tr.pairing == nets::Pairing::transition ? z : layout.act_dim;
    b.disc.emplace(*tr.pairing, z, right, cfg.hidden, rng);
  }
  b.critic_opt = nets::Adam<T>(cfg.lr);
  b.actor_opt = nets::Adam<T>(cfg.lr);
  b.disc_opt = nets::Adam<T>(cfg.lr_disc);
  return b;
}

}  // namespace laifo::imitate
