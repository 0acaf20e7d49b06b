#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "laifo/theory/divergence.hpp"
#include "laifo/theory/occupancy.hpp"

namespace laifo::theory {

enum class RewardMode { sa, ss };

enum class Claim { theorem1, theorem2, corollary1, theorem3, lemma1, lemma2, lemma4 };

inline const char* claim_name(Claim c) {
  switch (c) {
    case Claim::theorem1: return "theorem1";
    case Claim::theorem2: return "theorem2";
    case Claim::corollary1: return "corollary1";
    case Claim::theorem3: return "theorem3";
    case Claim::lemma1: return "lemma1";
    case Claim::lemma2: return "lemma2";
    case Claim::lemma4: return "lemma4";
  }
  return "?";
}

inline Claim parse_claim(const std::string& s) {
  for (Claim c : {Claim::theorem1, Claim::theorem2, Claim::corollary1, Claim::theorem3, Claim::lemma1, Claim::lemma2,
                  Claim::lemma4}) {
    if (s == claim_name(c)) return c;
  }
  throw std::invalid_argument("unknown claim '" + s + "'");
}

class RewardModeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// J(π) = E_ρ[R] / (1−γ) with ρ = ρ(s,a) or ρ(s,s′).
inline double policy_value(const TabularPOMDP& m, const OccupancyTables& occ, RewardMode mode, double gamma) {
  if (mode == RewardMode::sa && (m.R_sa.rows() != m.S || m.R_sa.cols() != m.A)) {
    throw RewardModeError("policy_value: model has no R(s, a) table");
  }
  if (mode == RewardMode::ss && (m.R_ss.rows() != m.S || m.R_ss.cols() != m.S)) {
    throw RewardModeError("policy_value: model has no R(s, s') table");
  }
  double e = 0.0;
  if (mode == RewardMode::sa) {
    for (const auto& [k, p] : occ.rho_sa) e += p * m.R_sa(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu));
  } else {
    for (const auto& [k, p] : occ.rho_ss) e += p * m.R_ss(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu));
  }
  return e / (1.0 - gamma);
}

inline double policy_value(const TabularPOMDP& m, const LatentScheme& scheme, const LatentPolicy& pi, RewardMode mode) {
  return policy_value(m, occupancies(m, scheme, pi, m.gamma), mode, m.gamma);
}

/// C = 2R_max/(1−γ) · Σ_{z,z′} ρ_θ(z,z′)·TV(P_θ(·|z,z′), P_E(·|z,z′)).
/// When the expert posterior is undefined at (z, z′) it falls back to π_E(·|z).
inline double c_term(const OccupancyTables& occ_theta, const LatentKernel& K, const LatentPolicy& pi_theta,
                     const LatentPolicy& pi_expert, double r_max, double gamma) {
  double acc = 0.0;
  for (const auto& [key, p] : occ_theta.rho_zz) {
    if (p == 0.0) continue;
    const auto z = static_cast<std::int64_t>(key >> 32);
    const auto z2 = static_cast<std::int64_t>(key & 0xffffffffu);
    const auto pt = action_posterior(K, pi_theta, z, z2);
    if (!pt) continue;  // mass on (z, z′) that the reference kernel never reaches
    auto pe = action_posterior(K, pi_expert, z, z2);
    const VectorXd pe_v = pe ? *pe : VectorXd(pi_expert.probs.row(z).transpose());
    acc += p * 0.5 * (*pt - pe_v).cwiseAbs().sum();
  }
  return 2.0 * r_max / (1.0 - gamma) * acc;
}

struct BoundReport {
  std::string claim;
  std::string divergence;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  ///< rhs − lhs (negative means the inequality failed)
  double value_gap = 0.0;
  double tv_term = 0.0;
  double r_max = 0.0;
  double c_value = 0.0;
  double violation = 0.0;  ///< max_z TV(P_θ(s|z), P_E(s|z)); 0 when the window is sufficient
  std::string structure;
  int S = 0, A = 0, X = 0, k = 1;
  double gamma = 0.0;

  nlohmann::json to_json() const {
    return {{"claim", claim},   {"divergence", divergence}, {"lhs", lhs},         {"rhs", rhs},
            {"slack", slack},   {"value_gap", value_gap},   {"tv_term", tv_term}, {"r_max", r_max},
            {"c", c_value},     {"violation", violation},   {"structure", structure},
            {"S", S},           {"A", A},                   {"X", X},             {"k", k},
            {"gamma", gamma}};
  }
};

/// Policy dependence of the filtering posterior between the two policies.
inline double posterior_violation(const OccupancyTables& a, const OccupancyTables& b, int S) {
  const auto pa = state_posterior(a, S);
  const auto pb = state_posterior(b, S);
  double worst = 0.0;
  for (const auto& [z, va] : pa) {
    auto it = pb.find(z);
    if (it == pb.end()) continue;
    worst = std::max(worst, 0.5 * (va - it->second).cwiseAbs().sum());
  }
  return worst;
}

/// Evaluates one claim for the pair (π_θ, π_E) on model m under the scheme.
/// For lemma claims lhs/rhs are the two sides of the stated (in)equality.
inline BoundReport verify(Claim claim, const TabularPOMDP& m, const LatentScheme& scheme, const LatentPolicy& pi_theta,
                          const LatentPolicy& pi_expert, FKind kind = FKind::tv) {
  const double g = m.gamma;
  const OccupancyTables ot = occupancies(m, scheme, pi_theta, g);
  const OccupancyTables oe = occupancies(m, scheme, pi_expert, g);
  BoundReport r;
  r.claim = claim_name(claim);
  r.divergence = fkind_name(kind);
  r.structure = envs::structure_name(m.structure);
  r.S = m.S;
  r.A = m.A;
  r.X = m.X;
  r.k = scheme.k;
  r.gamma = g;
  r.violation = posterior_violation(ot, oe, m.S);
  r.tv_term = f_divergence(FKind::tv, ot.rho_zz, oe.rho_zz);

  auto c_value = [&](double r_max) {
    // The reference occupancy for P(s|z) is the agent's own, which covers
    // every (z, z′) the expectation visits.
    const LatentKernel K = latent_kernel(m, scheme, ot);
    return c_term(ot, K, pi_theta, pi_expert, r_max, g);
  };

  switch (claim) {
    case Claim::theorem1: {
      r.r_max = m.r_max_sa();
      r.value_gap = std::abs(policy_value(m, oe, RewardMode::sa, g) - policy_value(m, ot, RewardMode::sa, g));
      r.c_value = c_value(r.r_max);
      r.lhs = r.value_gap;
      r.rhs = 2.0 * r.r_max / (1.0 - g) * r.tv_term + r.c_value;
      break;
    }
    case Claim::theorem2: {
      r.r_max = m.r_max_ss();
      r.value_gap = std::abs(policy_value(m, oe, RewardMode::ss, g) - policy_value(m, ot, RewardMode::ss, g));
      r.lhs = r.value_gap;
      r.rhs = 2.0 * r.r_max / (1.0 - g) * r.tv_term;
      break;
    }
    case Claim::corollary1: {
      r.r_max = m.r_max_sa();
      r.c_value = c_value(r.r_max);
      r.lhs = r.c_value;
      r.rhs = 0.0;
      break;
    }
    case Claim::theorem3: {
      r.lhs = f_divergence(kind, ot.rho_sa, oe.rho_sa);
      r.rhs = f_divergence(kind, ot.rho_za, oe.rho_za);
      break;
    }
    case Claim::lemma1: {
      r.lhs = f_divergence(kind, ot.rho_zaz, oe.rho_zaz);
      r.rhs = f_divergence(kind, ot.rho_za, oe.rho_za);
      break;
    }
    case Claim::lemma2: {
      r.lhs = f_divergence(FKind::tv, ot.rho_za, oe.rho_za);
      const double unit_c = c_value(1.0) * (1.0 - g) / 2.0;  // E_ρθ TV(posteriors)
      r.rhs = r.tv_term + unit_c;
      break;
    }
    case Claim::lemma4: {
      r.lhs = r.tv_term;
      r.rhs = std::sqrt(f_divergence(FKind::js, ot.rho_zz, oe.rho_zz));
      break;
    }
  }
  r.slack = r.rhs - r.lhs;
  return r;
}

/// Size caps and structure for randomly generated verification instances.
struct InstanceSpec {
  envs::Structure structure = envs::Structure::mdp;
  int max_states = 16;
  int max_actions = 4;
  int max_observations = 8;
  int k = 1;
  double gamma = 0.9;
};

struct Instance {
  TabularPOMDP model;
  LatentScheme scheme;
  LatentPolicy pi_theta;
  LatentPolicy pi_expert;
};

/// Random model and random full-support policy pair; sizes drawn from 2..max.
inline Instance random_instance(const InstanceSpec& spec, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> s_dist(2, spec.max_states);
  std::uniform_int_distribution<int> a_dist(2, spec.max_actions);
  std::uniform_int_distribution<int> x_dist(2, spec.max_observations);
  envs::TabularSpec ts;
  ts.structure = spec.structure;
  ts.actions = a_dist(rng);
  ts.states = s_dist(rng);
  if (spec.structure == envs::Structure::injective) ts.states = std::max(ts.states, ts.actions);
  ts.observations = x_dist(rng);
  ts.gamma = spec.gamma;
  ts.seed = rng();
  Instance inst;
  inst.model = envs::make_tabular(ts);
  inst.scheme = LatentScheme{spec.k, inst.model.X};
  inst.pi_theta = random_policy(inst.scheme, inst.model.A, rng);
  inst.pi_expert = random_policy(inst.scheme, inst.model.A, rng);
  return inst;
}

}  // namespace laifo::theory
