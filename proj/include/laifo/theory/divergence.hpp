#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace laifo::theory {

enum class FKind { tv, js, kl };

inline const char* fkind_name(FKind k) {
  switch (k) {
    case FKind::tv: return "tv";
    case FKind::js: return "js";
    case FKind::kl: return "kl";
  }
  return "?";
}

inline FKind parse_fkind(const std::string& s) {
  if (s == "tv") return FKind::tv;
  if (s == "js") return FKind::js;
  if (s == "kl") return FKind::kl;
  throw std::invalid_argument("unknown divergence '" + s + "'");
}

/// Sparse distribution over packed integer keys.
using Dist = std::map<std::uint64_t, double>;

namespace detail {

inline void check_normalized(const std::vector<double>& v, const char* which) {
  double s = 0.0;
  for (double x : v) {
    if (x < 0.0) throw std::invalid_argument(std::string("f_divergence: negative mass in ") + which);
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument(std::string("f_divergence: ") + which + " does not sum to 1");
}

inline double kl_term(double p, double q) {
  if (p == 0.0) return 0.0;
  if (q == 0.0) return std::numeric_limits<double>::infinity();
  return p * std::log(p / q);
}

}  // namespace detail

/// tv = ½Σ|P−Q|; js = KL(P‖M) + KL(Q‖M) with M = (P+Q)/2 (no ½ prefactor,
/// so js ∈ [0, 2 ln 2]); kl = Σ P log(P/Q), +∞ when Q misses P's support.
inline double f_divergence(FKind kind, const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("f_divergence: P and Q have different supports");
  detail::check_normalized(p, "P");
  detail::check_normalized(q, "Q");
  double out = 0.0;
  switch (kind) {
    case FKind::tv:
      for (std::size_t i = 0; i < p.size(); ++i) out += std::abs(p[i] - q[i]);
      return 0.5 * out;
    case FKind::kl:
      for (std::size_t i = 0; i < p.size(); ++i) out += detail::kl_term(p[i], q[i]);
      return out;
    case FKind::js:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        out += detail::kl_term(p[i], m) + detail::kl_term(q[i], m);
      }
      return out;
  }
  return out;
}

/// Aligns two sparse tables on the union of their keys.
inline void align(const Dist& p, const Dist& q, std::vector<double>& pv, std::vector<double>& qv) {
  std::map<std::uint64_t, std::pair<double, double>> u;
  for (const auto& [k, v] : p) u[k].first = v;
  for (const auto& [k, v] : q) u[k].second = v;
  pv.clear();
  qv.clear();
  for (const auto& [k, pq] : u) {
    pv.push_back(pq.first);
    qv.push_back(pq.second);
  }
}

inline double f_divergence(FKind kind, const Dist& p, const Dist& q) {
  std::vector<double> pv, qv;
  align(p, q, pv, qv);
  return f_divergence(kind, pv, qv);
}

}  // namespace laifo::theory
