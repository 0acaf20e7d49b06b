#pragma once

#include <cstdint>
#include <stdexcept>

#include "laifo/grad/tape.hpp"

namespace laifo::replay {

/// The d most recent observations of one episode, oldest first (one frame per row).
template <class T>
struct ObservationWindow {
  grad::Matrix<T> frames;
  std::int64_t episode = 0;

  grad::Index depth() const { return frames.rows(); }
  grad::Index frame_size() const { return frames.cols(); }

  /// Frames concatenated oldest first; for image frames this is channel-major.
  grad::Matrix<T> flatten() const {
    return Eigen::Map<const grad::Matrix<T>>(frames.data(), 1, frames.size());
  }

  static ObservationWindow from_flat(const grad::Matrix<T>& row, grad::Index depth,
                                     std::int64_t episode = 0) {
    if (row.rows() != 1 || depth <= 0 || row.cols() % depth != 0) {
      throw std::invalid_argument("ObservationWindow: flat row does not split into frames");
    }
    ObservationWindow w;
    w.frames = Eigen::Map<const grad::Matrix<T>>(row.data(), depth, row.cols() / depth);
    w.episode = episode;
    return w;
  }
};

}  // namespace laifo::replay
