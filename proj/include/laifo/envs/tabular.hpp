#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace laifo::envs {

using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;

enum class Structure { random, mdp, injective };

inline const char* structure_name(Structure s) {
  switch (s) {
    case Structure::random: return "random";
    case Structure::mdp: return "mdp";
    case Structure::injective: return "injective-deterministic";
  }
  return "random";
}

struct TabularSpec {
  int states = 4;
  int actions = 2;
  int observations = 4;  ///< ignored unless structure is random
  Structure structure = Structure::random;
  double gamma = 0.9;
  std::uint64_t seed = 0;
};

class InfeasibleModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite POMDP (S, A, X, T, U, R, ρ0, γ). Both reward tables are stored so
/// either reward mode can be evaluated on the same dynamics.
struct TabularPOMDP {
  int S = 0;
  int A = 0;
  int X = 0;
  std::vector<MatrixXd> T;  ///< T[a](s, s') = T(s'|s, a)
  MatrixXd U;               ///< U(s, x) = U(x|s)
  MatrixXd R_sa;            ///< R(s, a)
  MatrixXd R_ss;            ///< R(s, s')
  VectorXd rho0;
  double gamma = 0.9;
  Structure structure = Structure::random;

  double r_max_sa() const { return R_sa.cwiseAbs().maxCoeff(); }
  double r_max_ss() const { return R_ss.cwiseAbs().maxCoeff(); }

  /// Largest deviation of any stochastic row from summing to one, or of any entry below zero.
  double stochasticity_error() const {
    double err = std::abs(rho0.sum() - 1.0);
    err = std::max(err, std::max(0.0, -rho0.minCoeff()));
    auto rows = [&err](const MatrixXd& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) err = std::max(err, std::abs(m.row(i).sum() - 1.0));
      err = std::max(err, std::max(0.0, -m.minCoeff()));
    };
    for (const auto& t : T) rows(t);
    rows(U);
    return err;
  }
};

namespace detail {

/// Uniform draw from the probability simplex (flat Dirichlet).
inline void random_simplex_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  for (Eigen::Index i = 0; i < row.size(); ++i) row(i) = e(rng);
  row /= row.sum();
  // Push the rounding residue into the largest entry so the row sums to
  // one as closely as doubles allow.
  Eigen::Index k;
  row.maxCoeff(&k);
  row(k) += 1.0 - row.sum();
}

}  // namespace detail

inline TabularPOMDP make_tabular(const TabularSpec& spec) {
  if (spec.states < 2 || spec.actions < 2) throw InfeasibleModel("make_tabular: |S| and |A| must be >= 2");
  if (spec.structure == Structure::random && spec.observations < 2) {
    throw InfeasibleModel("make_tabular: |X| must be >= 2");
  }
  if (!(spec.gamma >= 0.0 && spec.gamma < 1.0)) throw InfeasibleModel("make_tabular: gamma must lie in [0, 1)");
  if (spec.structure == Structure::injective && spec.states < spec.actions) {
    throw InfeasibleModel("make_tabular: injective-deterministic needs |S| >= |A| (got |S|=" +
                          std::to_string(spec.states) + ", |A|=" + std::to_string(spec.actions) + ")");
  }
  std::mt19937_64 rng(spec.seed);
  TabularPOMDP m;
  m.S = spec.states;
  m.A = spec.actions;
  m.X = spec.structure == Structure::random ? spec.observations : spec.states;
  m.gamma = spec.gamma;
  m.structure = spec.structure;

  m.T.assign(m.A, MatrixXd::Zero(m.S, m.S));
  if (spec.structure == Structure::injective) {
    std::vector<int> succ(m.S);
    for (int s = 0; s < m.S; ++s) {
      std::iota(succ.begin(), succ.end(), 0);
      std::shuffle(succ.begin(), succ.end(), rng);
      for (int a = 0; a < m.A; ++a) m.T[a](s, succ[a]) = 1.0;
    }
  } else {
    for (int a = 0; a < m.A; ++a) {
      for (int s = 0; s < m.S; ++s) detail::random_simplex_row(m.T[a].row(s), rng);
    }
  }

  if (spec.structure == Structure::random) {
    m.U.resize(m.S, m.X);
    for (int s = 0; s < m.S; ++s) detail::random_simplex_row(m.U.row(s), rng);
  } else {
    m.U = MatrixXd::Identity(m.S, m.S);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  m.R_sa.resize(m.S, m.A);
  for (Eigen::Index i = 0; i < m.R_sa.size(); ++i) m.R_sa.data()[i] = unit(rng);
  m.R_ss.resize(m.S, m.S);
  for (Eigen::Index i = 0; i < m.R_ss.size(); ++i) m.R_ss.data()[i] = unit(rng);
  m.rho0.resize(m.S);
  Eigen::RowVectorXd r0(m.S);
  detail::random_simplex_row(r0, rng);
  m.rho0 = r0.transpose();
  return m;
}

/// Parses "S=6,A=2,X=4,structure=random,gamma=0.9,seed=3" (any order, all optional).
inline TabularSpec parse_tabular_spec(const std::string& text) {
  TabularSpec spec;
  std::string body = text;
  if (body.rfind("tabular:", 0) == 0) body = body.substr(8);
  std::stringstream ss(body);
  std::string item;
  auto as_int = [](const std::string& key, const std::string& v) {
    int out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      throw std::invalid_argument("tabular spec: '" + key + "' needs an integer, got '" + v + "'");
    }
    return out;
  };
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("tabular spec: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "S") spec.states = as_int(key, val);
    else if (key == "A") spec.actions = as_int(key, val);
    else if (key == "X") spec.observations = as_int(key, val);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(as_int(key, val));
    else if (key == "gamma") spec.gamma = std::stod(val);
    else if (key == "structure") {
      if (val == "random") spec.structure = Structure::random;
      else if (val == "mdp") spec.structure = Structure::mdp;
      else if (val == "injective" || val == "injective-deterministic") spec.structure = Structure::injective;
      else throw std::invalid_argument("tabular spec: unknown structure '" + val + "'");
    } else {
      throw std::invalid_argument("tabular spec: unknown key '" + key + "'");
    }
  }
  return spec;
}

}  // namespace laifo::envs
