#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "laifo/grad/tape.hpp"

namespace laifo::nets {

using grad::Index;
using grad::Matrix;
using grad::Parameter;
using grad::Tape;
using grad::Var;
using Rng = std::mt19937_64;

enum class Activation { none, relu, tanh };

template <class T>
Var<T> activate(Var<T> x, Activation act) {
  switch (act) {
    case Activation::relu: return grad::relu(x);
    case Activation::tanh: return grad::tanh(x);
    case Activation::none: break;
  }
  return x;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
template <class T>
Matrix<T> fan_in_uniform(Index rows, Index cols, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix<T> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(u(rng));
  return m;
}

template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, Index in, Index out, Rng& rng, bool zero_init = false)
      : weight_(name + ".weight",
                zero_init ? Matrix<T>(Matrix<T>::Zero(in, out)) : fan_in_uniform<T>(in, out, in, rng)),
        bias_(name + ".bias",
              zero_init ? Matrix<T>(Matrix<T>::Zero(1, out)) : fan_in_uniform<T>(1, out, in, rng)) {}

  Var<T> operator()(Tape<T>& tape, Var<T> x) const {
    return grad::affine(x, tape.param(weight_), tape.param(bias_));
  }

  Index in_features() const { return weight_.rows(); }
  Index out_features() const { return weight_.cols(); }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Parameter<T>& weight() const { return weight_; }
  const Parameter<T>& bias() const { return bias_; }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  void collect(std::vector<const Parameter<T>*>& out) const {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Fully connected stack; `hidden` is applied after every layer but the last.
template <class T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<Index>& sizes, Activation hidden, Rng& rng,
      bool zero_last = false)
      : hidden_(hidden) {
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const bool last = i + 2 == sizes.size();
      layers_.emplace_back(name + "." + std::to_string(i), sizes[i], sizes[i + 1], rng,
                           last && zero_last);
    }
  }

  Var<T> forward(Tape<T>& tape, Var<T> x) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i](tape, x);
      if (i + 1 < layers_.size()) x = activate(x, hidden_);
    }
    return x;
  }

  Index in_features() const { return layers_.empty() ? 0 : layers_.front().in_features(); }
  Index out_features() const { return layers_.empty() ? 0 : layers_.back().out_features(); }
  std::vector<Linear<T>>& layers() { return layers_; }
  const std::vector<Linear<T>>& layers() const { return layers_; }

  void collect(std::vector<Parameter<T>*>& out) {
    for (auto& l : layers_) l.collect(out);
  }
  void collect(std::vector<const Parameter<T>*>& out) const {
    for (const auto& l : layers_) l.collect(out);
  }

 private:
  std::vector<Linear<T>> layers_;
  Activation hidden_ = Activation::relu;
};

enum class Layout { chw, hwc };

/// 3×3 (or k×k) valid convolution with stride, expressed as patch extraction
/// followed by one matrix product. Input rows hold one image each.
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, Index channels, Index height, Index width, Index out_channels,
         Index kernel, Index stride, Layout layout, Rng& rng)
      : channels_(channels),
        out_channels_(out_channels),
        out_h_((height - kernel) / stride + 1),
        out_w_((width - kernel) / stride + 1),
        weight_(name + ".weight", fan_in_uniform<T>(channels * kernel * kernel, out_channels,
                                                    channels * kernel * kernel, rng)),
        bias_(name + ".bias",
              fan_in_uniform<T>(1, out_channels, channels * kernel * kernel, rng)) {
    if (height < kernel || width < kernel) throw grad::ShapeError("Conv2d: image smaller than kernel");
    auto t = std::make_shared<grad::PatchTable>();
    t->patches = out_h_ * out_w_;
    t->width = channels * kernel * kernel;
    t->input_cols = channels * height * width;
    t->index.reserve(static_cast<std::size_t>(t->patches * t->width));
    for (Index oy = 0; oy < out_h_; ++oy) {
      for (Index ox = 0; ox < out_w_; ++ox) {
        for (Index c = 0; c < channels; ++c) {
          for (Index ky = 0; ky < kernel; ++ky) {
            for (Index kx = 0; kx < kernel; ++kx) {
              const Index y = oy * stride + ky;
              const Index x = ox * stride + kx;
              const Index idx = layout == Layout::chw ? (c * height + y) * width + x
                                                      : (y * width + x) * channels + c;
              t->index.push_back(idx);
            }
          }
        }
      }
    }
    table_ = std::move(t);
  }

  /// [B × in] → [B × (out_h·out_w·out_channels)] in HWC order, with relu.
  Var<T> operator()(Tape<T>& tape, Var<T> x) const {
    const Index batch = x.rows();
    Var<T> cols = grad::patches(x, table_);
    Var<T> y = grad::affine(cols, tape.param(weight_), tape.param(bias_));
    y = grad::relu(y);
    return grad::reshape(y, batch, out_h_ * out_w_ * out_channels_);
  }

  Index out_h() const { return out_h_; }
  Index out_w() const { return out_w_; }
  Index out_channels() const { return out_channels_; }
  Index out_features() const { return out_h_ * out_w_ * out_channels_; }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  void collect(std::vector<const Parameter<T>*>& out) const {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Index channels_ = 0;
  Index out_channels_ = 0;
  Index out_h_ = 0;
  Index out_w_ = 0;
  Parameter<T> weight_;
  Parameter<T> bias_;
  std::shared_ptr<const grad::PatchTable> table_;
};

}  // namespace laifo::nets
