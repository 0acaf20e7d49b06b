#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "laifo/grad/tape.hpp"

namespace laifo::grad {

/// Scaled gradient discrepancy |a-b| / max(|a|, |b|, floor).
template <class T>
T relative_error(T a, T b, T floor = T(1e-3)) {
  const T denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

/// Compares tape gradients of `f` against central differences over every
/// coordinate of `params`, returning the worst relative error. `f` must build
/// a scalar on the tape it is given and be deterministic.
template <class T>
T finite_diff_check(const std::function<Var<T>(Tape<T>&)>& f,
                    const std::vector<Parameter<T>*>& params, T eps) {
  GradientMap<T> analytic;
  {
    Tape<T> tape;
    for (auto* p : params) tape.param(*p);
    analytic = tape.backward(f(tape));
  }
  auto eval = [&]() {
    Tape<T> tape;
    return f(tape).scalar();
  };
  T worst = T(0);
  for (auto* p : params) {
    const Matrix<T> g = analytic.get_or_zero(*p);
    for (Index i = 0; i < p->size(); ++i) {
      T& coord = p->value().data()[i];
      const T saved = coord;
      coord = saved + eps;
      const T up = eval();
      coord = saved - eps;
      const T down = eval();
      coord = saved;
      const T numeric = (up - down) / (T(2) * eps);
      worst = std::max(worst, relative_error(numeric, g.data()[i]));
    }
  }
  return worst;
}

}  // namespace laifo::grad
