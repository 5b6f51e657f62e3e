// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rvseg {

/// Dense C x H x W activation grid, channel-major (each channel is a
/// contiguous H*W plane).
template <typename T>
class FeatureMap {
 public:
  using value_type = T;

  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, T fill = T(0))
      : channels_(channels), height_(height), width_(width) {
    if (channels < 0 || height < 0 || width < 0) {
      throw std::invalid_argument("FeatureMap: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const FeatureMap& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  T& at(int c, int h, int w) { return data_[index(c, h, w)]; }
  const T& at(int c, int h, int w) const { return data_[index(c, h, w)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> channel(int c) { return {data_.data() + static_cast<std::size_t>(c) * pixels(), pixels()}; }
  std::span<const T> channel(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * pixels(), pixels()};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_string() const {
    return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
  }

 private:
  std::size_t index(int c, int h, int w) const {
    return (static_cast<std::size_t>(c) * height_ + h) * width_ + w;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Per-pixel validity of an H x W grid.
class ValidMask {
 public:
  ValidMask() = default;
  ValidMask(int height, int width, bool fill = true)
      : height_(height), width_(width),
        valid_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {}

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return valid_.size(); }

  bool operator[](std::size_t i) const { return valid_[i] != 0; }
  bool at(int h, int w) const { return valid_[static_cast<std::size_t>(h) * width_ + w] != 0; }
  void set(std::size_t i, bool v) { valid_[i] = v ? 1 : 0; }
  void set(int h, int w, bool v) { set(static_cast<std::size_t>(h) * width_ + w, v); }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : valid_) n += v;
    return n;
  }

  template <typename T>
  bool matches(const FeatureMap<T>& f) const {
    return f.height() == height_ && f.width() == width_;
  }

  std::span<const std::uint8_t> bytes() const { return valid_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> valid_;
};

/// Channel-wise mean and population standard deviation; std is floored.
template <typename T>
struct ChannelStats {
  std::vector<T> mean;
  std::vector<T> std;

  std::size_t channels() const { return mean.size(); }
};

enum class ParamRole : std::uint8_t { weight = 0, bias = 1, memory = 2 };

/// Learnable tensor with paired gradient storage of identical shape.
template <typename T>
struct Param {
  std::string name;
  ParamRole role = ParamRole::weight;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Ordered list of parameters. Modules hold indices into it, so the layout
/// is the single source of truth for optimizers and checkpoints.
template <typename T>
class ParamList {
 public:
  std::size_t add(std::string name, ParamRole role, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    Param<T> p;
    p.name = std::move(name);
    p.role = role;
    p.shape = std::move(shape);
    p.value.assign(n, T(0));
    p.grad.assign(n, T(0));
    params_.push_back(std::move(p));
    return params_.size() - 1;
  }

  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

 private:
  std::vector<Param<T>> params_;
};

/// Gradient buffer laid out like a ParamList, one vector per parameter.
template <typename T>
using GradBuffer = std::vector<std::vector<T>>;

template <typename T>
GradBuffer<T> make_grad_buffer(const ParamList<T>& params) {
  GradBuffer<T> g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.size(), T(0));
  return g;
}

}  // namespace rvseg
