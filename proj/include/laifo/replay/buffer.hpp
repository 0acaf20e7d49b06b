#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "laifo/grad/tape.hpp"
#include "laifo/replay/window.hpp"

namespace laifo::replay {

using grad::Index;
using grad::Matrix;

class BufferError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// B transitions as flattened windows; row i of `next` is row i of `obs`
/// shifted by one frame.
template <class T>
struct StackedBatch {
  Matrix<T> obs;      ///< B × (d·frame)
  Matrix<T> next;     ///< B × (d·frame)
  Matrix<T> actions;  ///< B × act (empty when the buffer stores none)
  Matrix<T> rewards;  ///< B × 1
  std::vector<std::int64_t> indices;  ///< global transition ids, for diagnostics
  std::vector<std::int64_t> episodes;
  Index size() const { return obs.rows(); }
};

/// Ring buffer of frames with windows assembled at sampling time.
///
/// An episode is entered with `start(x0)`; each `push(x', a, r, done)` then
/// records the transition from the previous frame to x'. A transition is
/// sampleable while every frame of its widest window is still resident.
template <class T>
class ReplayBuffer {
 public:
  ReplayBuffer(Index frame_size, Index act_dim, std::int64_t capacity, Index max_depth = 3)
      : frame_size_(frame_size),
        act_dim_(act_dim),
        capacity_(capacity),
        max_depth_(max_depth),
        frame_capacity_(capacity + max_depth + 1) {
    if (frame_size <= 0 || act_dim < 0 || capacity <= 0 || max_depth <= 0) {
      throw std::invalid_argument("ReplayBuffer: sizes must be positive");
    }
    frames_.resize(frame_capacity_ * frame_size_);
    frame_episode_.resize(frame_capacity_);
    frame_start_.resize(frame_capacity_);
    succ_.resize(capacity_);
    actions_.resize(capacity_ * std::max<Index>(act_dim_, 1));
    rewards_.resize(capacity_);
  }

  Index frame_size() const { return frame_size_; }
  Index act_dim() const { return act_dim_; }
  std::int64_t capacity() const { return capacity_; }
  Index max_depth() const { return max_depth_; }
  std::int64_t episodes() const { return episode_count_; }
  std::int64_t total_transitions() const { return n_trans_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  void start(std::span<const T> obs) {
    guard(obs.size());
    if (in_episode_) throw BufferError("ReplayBuffer: start() while an episode is open");
    episode_start_ = n_frames_;
    current_episode_ = episode_count_++;
    write_frame(obs);
    in_episode_ = true;
  }

  void push(std::span<const T> next_obs, std::span<const T> action, T reward, bool done) {
    guard(next_obs.size());
    if (!in_episode_) throw BufferError("ReplayBuffer: push() without start() after an episode ended");
    if (static_cast<Index>(action.size()) != act_dim_) {
      throw ShapeMismatch("ReplayBuffer: action has " + std::to_string(action.size()) + " values, expected " +
                          std::to_string(act_dim_));
    }
    write_frame(next_obs);
    const std::int64_t slot = n_trans_ % capacity_;
    succ_[slot] = n_frames_ - 1;
    std::copy(action.begin(), action.end(), actions_.begin() + slot * std::max<Index>(act_dim_, 1));
    rewards_[slot] = reward;
    ++n_trans_;
    if (done) in_episode_ = false;
  }

  /// Convenience overloads for std::vector inputs.
  void start(const std::vector<T>& obs) { start(std::span<const T>(obs)); }
  void push(const std::vector<T>& next_obs, const std::vector<T>& action, T reward, bool done) {
    push(std::span<const T>(next_obs), std::span<const T>(action), reward, done);
  }

  /// Number of transitions currently available to `sample`.
  std::int64_t size() const { return n_trans_ - first_valid(); }

  /// Uniform draw of B transitions (with replacement) stacked to depth d.
  StackedBatch<T> sample(Index batch, Index depth, std::mt19937_64& rng) const {
    if (depth < 1 || depth > max_depth_) {
      throw std::invalid_argument("ReplayBuffer: depth must lie in [1, " + std::to_string(max_depth_) + "]");
    }
    const std::int64_t lo = first_valid();
    if (n_trans_ - lo <= 0) throw BufferError("ReplayBuffer: cannot sample from an empty buffer");
    std::uniform_int_distribution<std::int64_t> pick(lo, n_trans_ - 1);
    StackedBatch<T> out;
    out.obs.resize(batch, depth * frame_size_);
    out.next.resize(batch, depth * frame_size_);
    out.actions.resize(batch, act_dim_);
    out.rewards.resize(batch, 1);
    out.indices.resize(batch);
    out.episodes.resize(batch);
    for (Index b = 0; b < batch; ++b) {
      const std::int64_t k = pick(rng);
      fill(k, depth, out, b);
    }
    return out;
  }

  /// Every resident transition in storage order; used for deterministic scans.
  StackedBatch<T> all(Index depth) const {
    const std::int64_t lo = first_valid();
    StackedBatch<T> out;
    const Index n = static_cast<Index>(n_trans_ - lo);
    out.obs.resize(n, depth * frame_size_);
    out.next.resize(n, depth * frame_size_);
    out.actions.resize(n, act_dim_);
    out.rewards.resize(n, 1);
    out.indices.resize(n);
    out.episodes.resize(n);
    for (Index b = 0; b < n; ++b) fill(lo + b, depth, out, b);
    return out;
  }

  /// Window of depth d whose newest frame is global frame `seq`.
  ObservationWindow<T> window_at(std::int64_t seq, Index depth) const {
    ObservationWindow<T> w;
    w.frames.resize(depth, frame_size_);
    const std::int64_t start = frame_start_[seq % frame_capacity_];
    for (Index j = 0; j < depth; ++j) {
      const std::int64_t src = std::max(start, seq - (depth - 1) + j);
      w.frames.row(j) = frame_row(src);
    }
    w.episode = frame_episode_[seq % frame_capacity_];
    return w;
  }

 private:
  void guard(std::size_t n) const {
    if (frozen_) throw BufferError("ReplayBuffer: buffer is read-only");
    if (static_cast<Index>(n) != frame_size_) {
      throw ShapeMismatch("ReplayBuffer: observation has " + std::to_string(n) + " values, expected " +
                          std::to_string(frame_size_));
    }
  }

  void write_frame(std::span<const T> obs) {
    const std::int64_t slot = n_frames_ % frame_capacity_;
    std::copy(obs.begin(), obs.end(), frames_.begin() + slot * frame_size_);
    frame_episode_[slot] = current_episode_;
    frame_start_[slot] = episode_start_;
    ++n_frames_;
  }

  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> frame_row(std::int64_t seq) const {
    return {frames_.data() + (seq % frame_capacity_) * frame_size_, frame_size_};
  }

  /// Oldest frame the widest window of transition k touches.
  std::int64_t oldest_needed(std::int64_t k, std::int64_t oldest_frame) const {
    const std::int64_t s = succ_[k % capacity_];
    if (s < oldest_frame) return -1;  // the slot's bookkeeping was overwritten
    return std::max(frame_start_[s % frame_capacity_], s - max_depth_);
  }

  /// Smallest resident, fully assembled transition id. Residency is
  /// monotone in age, so a binary search over the transition ring suffices.
  std::int64_t first_valid() const {
    std::int64_t lo = std::max<std::int64_t>(0, n_trans_ - capacity_);
    std::int64_t hi = n_trans_;
    const std::int64_t oldest_frame = std::max<std::int64_t>(0, n_frames_ - frame_capacity_);
    while (lo < hi) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      if (oldest_needed(mid, oldest_frame) >= oldest_frame) hi = mid;
      else lo = mid + 1;
    }
    return lo;
  }

  void fill(std::int64_t k, Index depth, StackedBatch<T>& out, Index b) const {
    const std::int64_t slot = k % capacity_;
    const std::int64_t s = succ_[slot];
    const std::int64_t start = frame_start_[s % frame_capacity_];
    for (Index j = 0; j < depth; ++j) {
      const std::int64_t cur = std::max(start, s - 1 - (depth - 1) + j);
      const std::int64_t nxt = std::max(start, s - (depth - 1) + j);
      out.obs.row(b).segment(j * frame_size_, frame_size_) = frame_row(cur);
      out.next.row(b).segment(j * frame_size_, frame_size_) = frame_row(nxt);
    }
    for (Index a = 0; a < act_dim_; ++a) out.actions(b, a) = actions_[slot * act_dim_ + a];
    out.rewards(b, 0) = rewards_[slot];
    out.indices[b] = k;
    out.episodes[b] = frame_episode_[s % frame_capacity_];
  }

  Index frame_size_;
  Index act_dim_;
  std::int64_t capacity_;
  Index max_depth_;
  std::int64_t frame_capacity_;

  std::vector<T> frames_;
  std::vector<std::int64_t> frame_episode_;
  std::vector<std::int64_t> frame_start_;
  std::vector<std::int64_t> succ_;
  std::vector<T> actions_;
  std::vector<T> rewards_;

  std::int64_t n_frames_ = 0;
  std::int64_t n_trans_ = 0;
  std::int64_t episode_count_ = 0;
  std::int64_t current_episode_ = -1;
  std::int64_t episode_start_ = 0;
  bool in_episode_ = false;
  bool frozen_ = false;
};

/// Rolling window fed one frame at a time during interaction; pads the
/// front with the episode's first frame.
template <class T>
class FrameStack {
 public:
  FrameStack(Index depth, Index frame_size) : depth_(depth), frame_size_(frame_size) {}

  void reset(std::span<const T> first) {
    frames_.assign(depth_, std::vector<T>(first.begin(), first.end()));
  }
  void push(std::span<const T> frame) {
    frames_.pop_front();
    frames_.emplace_back(frame.begin(), frame.end());
  }

  Matrix<T> flat() const {
    Matrix<T> out(1, depth_ * frame_size_);
    for (Index j = 0; j < depth_; ++j) {
      for (Index i = 0; i < frame_size_; ++i) out(0, j * frame_size_ + i) = frames_[j][i];
    }
    return out;
  }
  ObservationWindow<T> window() const { return ObservationWindow<T>::from_flat(flat(), depth_); }

 private:
  Index depth_;
  Index frame_size_;
  std::deque<std::vector<T>> frames_;
};

}  // namespace laifo::replay
