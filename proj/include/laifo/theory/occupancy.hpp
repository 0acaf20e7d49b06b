#pragma once

// Exact discounted visitation measures of a finite POMDP under a policy
// that acts on a finite observation window. The pair (s_t, z_t) is a Markov
// chain, so every measure follows from one sparse linear solve.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "laifo/envs/tabular.hpp"
#include "laifo/theory/divergence.hpp"

namespace laifo::theory {

using envs::MatrixXd;
using envs::TabularPOMDP;
using envs::VectorXd;

/// z_t = the last k observations, front-padded with a blank symbol. Codes are
/// base-(X+1) numbers with the newest observation in the lowest digit.
struct LatentScheme {
  int k = 1;
  int X = 0;

  int base() const { return X + 1; }
  int blank() const { return X; }
  std::int64_t alphabet() const {
    std::int64_t n = 1;
    for (int i = 0; i < k; ++i) n *= base();
    return n;
  }
  /// Window code at t = 0 after observing x0.
  std::int64_t initial(int x0) const {
    std::int64_t code = 0;
    for (int i = 0; i < k - 1; ++i) code = code * base() + blank();
    return code * base() + x0;
  }
  std::int64_t shift(std::int64_t z, int x_next) const { return (z * base() + x_next) % alphabet(); }
  int newest(std::int64_t z) const { return static_cast<int>(z % base()); }
  /// Oldest first; blanks appear as X.
  std::vector<int> digits(std::int64_t z) const {
    std::vector<int> d(k);
    for (int i = k - 1; i >= 0; --i) {
      d[i] = static_cast<int>(z % base());
      z /= base();
    }
    return d;
  }
};

/// π(a | z) as a dense table over the whole window alphabet.
struct LatentPolicy {
  MatrixXd probs;  ///< alphabet × A

  int actions() const { return static_cast<int>(probs.cols()); }
  double operator()(std::int64_t z, int a) const { return probs(z, a); }

  void validate() const {
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      if (probs.row(i).minCoeff() < 0.0 || std::abs(probs.row(i).sum() - 1.0) > 1e-9) {
        throw std::invalid_argument("policy row " + std::to_string(i) + " is not a probability distribution");
      }
    }
  }
};

/// Full-support random policy (Dirichlet(1) rows).
inline LatentPolicy random_policy(const LatentScheme& scheme, int actions, std::mt19937_64& rng) {
  LatentPolicy p;
  p.probs.resize(scheme.alphabet(), actions);
  std::exponential_distribution<double> e(1.0);
  for (Eigen::Index i = 0; i < p.probs.rows(); ++i) {
    for (int a = 0; a < actions; ++a) p.probs(i, a) = e(rng) + 1e-3;
    p.probs.row(i) /= p.probs.row(i).sum();
  }
  return p;
}

inline LatentPolicy uniform_policy(const LatentScheme& scheme, int actions) {
  LatentPolicy p;
  p.probs = MatrixXd::Constant(scheme.alphabet(), actions, 1.0 / actions);
  return p;
}

inline std::uint64_t pack(std::uint64_t a, std::uint64_t b) { return (a << 32) | b; }
inline std::uint64_t pack(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return (a << 42) | (b << 21) | c; }

/// Reachable (s, z) pairs with their transition matrix and start distribution.
struct JointChain {
  std::vector<std::pair<int, std::int64_t>> states;  ///< index → (s, z)
  std::unordered_map<std::uint64_t, int> index;      ///< pack(s, z) → index
  Eigen::SparseMatrix<double, Eigen::RowMajor> P;    ///< row-stochastic
  VectorXd init;

  int size() const { return static_cast<int>(states.size()); }
  int find(int s, std::int64_t z) const {
    auto it = index.find(pack(static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(z)));
    return it == index.end() ? -1 : it->second;
  }
};

inline void check_scheme(const TabularPOMDP& m, const LatentScheme& scheme) {
  if (scheme.X != m.X) throw std::invalid_argument("latent scheme alphabet does not match the model's |X|");
  if (scheme.k < 1) throw std::invalid_argument("latent scheme needs k >= 1");
}

inline JointChain joint_chain(const TabularPOMDP& m, const LatentScheme& scheme, const LatentPolicy& pi) {
  check_scheme(m, scheme);
  pi.validate();
  if (pi.probs.rows() != scheme.alphabet() || pi.actions() != m.A) {
    throw std::invalid_argument("policy table shape does not match the scheme and action count");
  }
  JointChain c;
  auto intern = [&c](int s, std::int64_t z) {
    const auto key = pack(static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(z));
    auto [it, fresh] = c.index.try_emplace(key, static_cast<int>(c.states.size()));
    if (fresh) c.states.emplace_back(s, z);
    return it->second;
  };
  std::map<int, double> init;
  for (int s = 0; s < m.S; ++s) {
    if (m.rho0(s) == 0.0) continue;
    for (int x = 0; x < m.X; ++x) {
      const double p = m.rho0(s) * m.U(s, x);
      if (p > 0.0) init[intern(s, scheme.initial(x))] += p;
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < c.states.size(); ++i) {  // c.states grows while scanning
    const auto [s, z] = c.states[i];
    std::map<int, double> row;
    for (int a = 0; a < m.A; ++a) {
      const double pa = pi(z, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < m.S; ++s2) {
        const double pt = m.T[a](s, s2);
        if (pt == 0.0) continue;
        for (int x = 0; x < m.X; ++x) {
          const double pu = m.U(s2, x);
          if (pu == 0.0) continue;
          row[intern(s2, scheme.shift(z, x))] += pa * pt * pu;
        }
      }
    }
    for (const auto& [j, p] : row) trip.emplace_back(static_cast<int>(i), j, p);
  }
  const int n = c.size();
  c.P.resize(n, n);
  c.P.setFromTriplets(trip.begin(), trip.end());
  c.init = VectorXd::Zero(n);
  for (const auto& [i, p] : init) c.init(i) = p;
  return c;
}

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// d = (1−γ)·init + γ·Pᵀd solved directly.
inline VectorXd discounted_occupancy(const JointChain& c, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("occupancies: gamma must lie in [0, 1)");
  const int n = c.size();
  Eigen::SparseMatrix<double> A(n, n);
  A.setIdentity();
  Eigen::SparseMatrix<double> Pt = Eigen::SparseMatrix<double>(c.P.transpose());
  A -= gamma * Pt;
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolveError("occupancies: singular system");
  VectorXd d = lu.solve((1.0 - gamma) * c.init);
  if (lu.info() != Eigen::Success) throw SolveError("occupancies: solve failed");
  return d;
}

/// All normalized discounted measures of one policy.
struct OccupancyTables {
  JointChain chain;
  VectorXd d_joint;  ///< over chain.states
  Dist d_z;          ///< key z
  Dist d_s;          ///< key s
  Dist rho_za;       ///< pack(z, a)
  Dist rho_sa;       ///< pack(s, a)
  Dist rho_ss;       ///< pack(s, s')
  Dist rho_zaz;      ///< pack(z, a, z')
  Dist rho_zz;       ///< pack(z, z')
};

inline OccupancyTables occupancies(const TabularPOMDP& m, const LatentScheme& scheme, const LatentPolicy& pi,
                                   double gamma) {
  OccupancyTables t;
  t.chain = joint_chain(m, scheme, pi);
  t.d_joint = discounted_occupancy(t.chain, gamma);
  for (int i = 0; i < t.chain.size(); ++i) {
    const double d = t.d_joint(i);
    if (d == 0.0) continue;
    const auto [s, z] = t.chain.states[i];
    const auto us = static_cast<std::uint64_t>(s);
    const auto uz = static_cast<std::uint64_t>(z);
    t.d_z[uz] += d;
    t.d_s[us] += d;
    for (int a = 0; a < m.A; ++a) {
      const double r = d * pi(z, a);
      if (r == 0.0) continue;
      t.rho_za[pack(uz, a)] += r;
      t.rho_sa[pack(us, a)] += r;
      for (int s2 = 0; s2 < m.S; ++s2) {
        const double pt = m.T[a](s, s2);
        if (pt == 0.0) continue;
        t.rho_ss[pack(us, s2)] += r * pt;
        for (int x = 0; x < m.X; ++x) {
          const double pu = m.U(s2, x);
          if (pu == 0.0) continue;
          const auto z2 = static_cast<std::uint64_t>(scheme.shift(z, x));
          t.rho_zaz[pack(uz, a, z2)] += r * pt * pu;
          t.rho_zz[pack(uz, z2)] += r * pt * pu;
        }
      }
    }
  }
  return t;
}

/// P(s | z) for every z visited under the occupancy.
inline std::map<std::int64_t, VectorXd> state_posterior(const OccupancyTables& t, int S) {
  std::map<std::int64_t, VectorXd> out;
  for (int i = 0; i < t.chain.size(); ++i) {
    const auto [s, z] = t.chain.states[i];
    auto [it, fresh] = out.try_emplace(z, VectorXd::Zero(S));
    it->second(s) += t.d_joint(i);
  }
  for (auto it = out.begin(); it != out.end();) {
    const double tot = it->second.sum();
    if (tot <= 0.0) {
      it = out.erase(it);
    } else {
      it->second /= tot;
      ++it;
    }
  }
  return out;
}

/// P(z′ | z, a) = Σ_s P(s|z) Σ_{s′} T(s′|s,a) Σ_{x′} U(x′|s′) [z′ = shift(z, x′)],
/// with P(s|z) taken from the reference occupancy. Only z visited under the
/// reference appear; other pairs are unreachable.
struct LatentKernel {
  int A = 0;
  std::map<std::int64_t, std::vector<std::map<std::int64_t, double>>> rows;  ///< z → per action → z′ → prob

  bool reachable(std::int64_t z) const { return rows.count(z) != 0; }
  double operator()(std::int64_t z, int a, std::int64_t z2) const {
    auto it = rows.find(z);
    if (it == rows.end()) return 0.0;
    auto jt = it->second[a].find(z2);
    return jt == it->second[a].end() ? 0.0 : jt->second;
  }
};

inline LatentKernel latent_kernel(const TabularPOMDP& m, const LatentScheme& scheme, const OccupancyTables& reference) {
  LatentKernel K;
  K.A = m.A;
  for (const auto& [z, ps] : state_posterior(reference, m.S)) {
    auto& per_action = K.rows[z];
    per_action.assign(m.A, {});
    for (int a = 0; a < m.A; ++a) {
      for (int s = 0; s < m.S; ++s) {
        if (ps(s) == 0.0) continue;
        for (int s2 = 0; s2 < m.S; ++s2) {
          const double pt = m.T[a](s, s2);
          if (pt == 0.0) continue;
          for (int x = 0; x < m.X; ++x) {
            const double pu = m.U(s2, x);
            if (pu != 0.0) per_action[a][scheme.shift(z, x)] += ps(s) * pt * pu;
          }
        }
      }
    }
  }
  return K;
}

/// P_π(a | z, z′) ∝ P(z′|z,a)·π(a|z). Returns nothing for unreachable (z, z′).
inline std::optional<VectorXd> action_posterior(const LatentKernel& K, const LatentPolicy& pi, std::int64_t z,
                                                std::int64_t z2) {
  VectorXd w(K.A);
  for (int a = 0; a < K.A; ++a) w(a) = K(z, a, z2) * pi(z, a);
  const double tot = w.sum();
  if (tot <= 0.0) return std::nullopt;
  return VectorXd(w / tot);
}

/// E_table[f(key)].
inline double expectation(const Dist& table, const std::function<double(std::uint64_t)>& f) {
  double out = 0.0;
  for (const auto& [k, p] : table) out += p * f(k);
  return out;
}

inline double total_mass(const Dist& t) {
  double s = 0.0;
  for (const auto& [k, p] : t) s += p;
  return s;
}

/// Marginalizes the trailing action out of a pack(x, a) table.
inline Dist marginal_first(const Dist& t) {
  Dist out;
  for (const auto& [k, p] : t) out[k >> 32] += p;
  return out;
}

}  // namespace laifo::theory
