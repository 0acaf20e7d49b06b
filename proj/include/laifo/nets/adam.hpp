#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "laifo/grad/tape.hpp"

namespace laifo::nets {

/// Adaptive-moment optimizer. State is positional: always pass the same
/// parameter list, in the same order.
template <class T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double learning_rate() const { return lr_; }
  long steps() const { return t_; }

  void step(const std::vector<grad::Parameter<T>*>& params, const grad::GradientMap<T>& grads) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(grad::Matrix<T>::Zero(p->rows(), p->cols()));
        v_.push_back(grad::Matrix<T>::Zero(p->rows(), p->cols()));
      }
    }
    if (m_.size() != params.size()) throw std::logic_error("Adam: parameter list changed size");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T step = static_cast<T>(lr_ / c1);
    const T b1 = static_cast<T>(beta1_);
    const T b2 = static_cast<T>(beta2_);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!grads.contains(*params[i])) continue;
      const grad::Matrix<T>& g = grads.at(*params[i]);
      auto& m = m_[i];
      auto& v = v_[i];
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
      auto& w = params[i]->value();
      w.array() -= step * m.array() / ((v.array() * inv_c2).sqrt() + eps);
    }
  }

 private:
  double lr_ = 1e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  std::vector<grad::Matrix<T>> m_;
  std::vector<grad::Matrix<T>> v_;
};

}  // namespace laifo::nets
