#pragma once

#include <algorithm>
#include <atomic>
#include <iostream>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>

#include "laifo/replay/window.hpp"

namespace laifo::augment {

using grad::Index;
using grad::Matrix;
using replay::ObservationWindow;

struct ImageShape {
  Index height = 0;
  Index width = 0;
};

struct Offset {
  int dy = 0;
  int dx = 0;
};

namespace detail {

inline void vector_mode_notice() {
  static std::atomic<bool> shown{false};
  if (!shown.exchange(true)) {
    std::clog << "[augment] vector observations: random shift skipped (identity)\n";
  }
}

/// Shifts every H×W frame stored contiguously in `row` by the same offset,
/// replicating edge pixels for source coordinates that fall outside.
template <class T, class Src, class Dst>
void shift_frames(const Src& src, Dst&& dst, Index frames, const ImageShape& img, Offset off) {
  const Index h = img.height;
  const Index w = img.width;
  for (Index f = 0; f < frames; ++f) {
    const Index base = f * h * w;
    for (Index y = 0; y < h; ++y) {
      const Index sy = std::clamp<Index>(y + off.dy, 0, h - 1);
      for (Index x = 0; x < w; ++x) {
        const Index sx = std::clamp<Index>(x + off.dx, 0, w - 1);
        dst(base + y * w + x) = src(base + sy * w + sx);
      }
    }
  }
}

inline Offset draw_offset(int pad, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(-pad, pad);
  const int dy = u(rng);
  const int dx = u(rng);
  return {dy, dx};
}

}  // namespace detail

/// Pad-and-crop augmentation realized as an integer translation of the whole
/// window. `image` is empty for vector observations, which pass through.
template <class T>
std::pair<ObservationWindow<T>, Offset> random_shift_with_offset(const ObservationWindow<T>& window,
                                                                 std::optional<ImageShape> image, int pad,
                                                                 std::mt19937_64& rng) {
  if (pad < 0) throw std::invalid_argument("random_shift: pad must be >= 0");
  if (!image) {
    detail::vector_mode_notice();
    return {window, {}};
  }
  if (image->height * image->width != window.frame_size()) {
    throw std::invalid_argument("random_shift: frame size does not match the image shape");
  }
  if (pad == 0) return {window, {}};
  const Offset off = detail::draw_offset(pad, rng);
  ObservationWindow<T> out = window;
  for (Index f = 0; f < window.depth(); ++f) {
    auto srow = window.frames.row(f);
    auto drow = out.frames.row(f);
    detail::shift_frames<T>(srow, drow, 1, *image, off);
  }
  return {out, off};
}

template <class T>
ObservationWindow<T> random_shift(const ObservationWindow<T>& window, std::optional<ImageShape> image, int pad,
                                  std::mt19937_64& rng) {
  return random_shift_with_offset(window, image, pad, rng).first;
}

/// Independent draws for the window at t and its successor.
template <class T>
std::pair<ObservationWindow<T>, ObservationWindow<T>> augment_pair(const ObservationWindow<T>& window_t,
                                                                   const ObservationWindow<T>& window_t1,
                                                                   std::optional<ImageShape> image, int pad,
                                                                   std::mt19937_64& rng) {
  auto a = random_shift(window_t, image, pad, rng);
  auto b = random_shift(window_t1, image, pad, rng);
  return {std::move(a), std::move(b)};
}

/// Batch form used by the trainers: every row is one flattened window of
/// `frames` images and receives its own offset.
template <class T>
Matrix<T> shift_batch(const Matrix<T>& rows, Index frames, std::optional<ImageShape> image, int pad,
                      std::mt19937_64& rng) {
  if (!image || pad == 0) return rows;
  Matrix<T> out(rows.rows(), rows.cols());
  for (Index b = 0; b < rows.rows(); ++b) {
    const Offset off = detail::draw_offset(pad, rng);
    auto src = rows.row(b);
    auto dst = out.row(b);
    detail::shift_frames<T>(src, dst, frames, *image, off);
  }
  return out;
}

}  // namespace laifo::augment
