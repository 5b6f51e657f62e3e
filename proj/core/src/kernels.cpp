// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rvseg::kernels {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapVec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MapConstVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

void check_size(const std::string& op, const char* name, std::size_t got, std::size_t want) {
  if (got != want) {
    std::ostringstream os;
    os << name << " has " << got << " elements, expected " << want;
    shape_error(op, os.str());
  }
}

int strided_extent(int n, int stride) { return (n + stride - 1) / stride; }

// Row r = ci*9 + ky*3 + kx holds the input tap (ky-1, kx-1) for every
// output pixel.
template <typename T>
RowMat<T> im2col3x3(const FeatureMap<T>& in, int stride, int out_h, int out_w) {
  const int c_in = in.channels();
  const int h = in.height();
  const int w = in.width();
  const Eigen::Index cols = static_cast<Eigen::Index>(out_h) * out_w;
  RowMat<T> m = RowMat<T>::Zero(static_cast<Eigen::Index>(c_in) * 9, cols);
  for (int ci = 0; ci < c_in; ++ci) {
    auto plane = in.channel(ci);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* row = m.row(ci * 9 + ky * 3 + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          const T* src = plane.data() + static_cast<std::size_t>(iy) * w;
          T* dst = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < w) dst[ox] = src[ix];
          }
        }
      }
    }
  }
  return m;
}

template <typename T>
void col2im3x3_add(const RowMat<T>& cols, int stride, int out_h, int out_w, FeatureMap<T>& grad_in) {
  const int c_in = grad_in.channels();
  const int h = grad_in.height();
  const int w = grad_in.width();
  for (int ci = 0; ci < c_in; ++ci) {
    auto plane = grad_in.channel(ci);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = cols.row(ci * 9 + ky * 3 + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          T* dst = plane.data() + static_cast<std::size_t>(iy) * w;
          const T* src = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

double ordered_sum(std::span<const double> values) {
  double total = 0.0;
  for (std::size_t start = 0; start < values.size(); start += kReductionChunk) {
    const std::size_t end = std::min(values.size(), start + kReductionChunk);
    double partial = 0.0;
    for (std::size_t i = start; i < end; ++i) partial += values[i];
    total += partial;
  }
  return total;
}

// Bias gradients. Eigen's vectorized reductions split the sum by buffer
// alignment, so a plain loop keeps the order fixed across allocations.
template <typename T>
void add_row_sums(const T* data, int rows, std::size_t cols, std::span<T> out) {
  for (int r = 0; r < rows; ++r) {
    const T* row = data + static_cast<std::size_t>(r) * cols;
    double total = 0.0;
    for (std::size_t i = 0; i < cols; ++i) total += row[i];
    out[r] += static_cast<T>(total);
  }
}

// ---------------------------------------------------------------------------

template <typename T>
FeatureMap<T> linear_pixelwise(const FeatureMap<T>& in, std::span<const T> weight,
                               std::span<const T> bias, int out_channels) {
  const std::string op = "linear_pixelwise";
  if (out_channels <= 0) shape_error(op, "out_channels must be positive");
  check_size(op, "weight", weight.size(), static_cast<std::size_t>(out_channels) * in.channels());
  check_size(op, "bias", bias.size(), static_cast<std::size_t>(out_channels));

  FeatureMap<T> out(out_channels, in.height(), in.width());
  const auto p = static_cast<Eigen::Index>(in.pixels());
  MapConstMat<T> w(weight.data(), out_channels, in.channels());
  MapConstMat<T> x(in.data(), in.channels(), p);
  MapMat<T> y(out.data(), out_channels, p);
  y.noalias() = w * x;
  y.colwise() += MapConstVec<T>(bias.data(), out_channels);
  return out;
}

template <typename T>
void linear_pixelwise_backward(const FeatureMap<T>& in, std::span<const T> weight,
                               int out_channels, const FeatureMap<T>& grad_out,
                               FeatureMap<T>* grad_in, std::span<T> grad_weight,
                               std::span<T> grad_bias) {
  const std::string op = "linear_pixelwise_backward";
  check_size(op, "weight", weight.size(), static_cast<std::size_t>(out_channels) * in.channels());
  check_size(op, "grad_weight", grad_weight.size(), weight.size());
  check_size(op, "grad_bias", grad_bias.size(), static_cast<std::size_t>(out_channels));
  if (grad_out.channels() != out_channels || grad_out.height() != in.height() ||
      grad_out.width() != in.width()) {
    shape_error(op, "grad_out shape " + grad_out.shape_string() + " does not match output");
  }
  if (grad_in && !grad_in->same_shape(in)) shape_error(op, "grad_in shape mismatch");

  const auto p = static_cast<Eigen::Index>(in.pixels());
  MapConstMat<T> w(weight.data(), out_channels, in.channels());
  MapConstMat<T> x(in.data(), in.channels(), p);
  MapConstMat<T> gy(grad_out.data(), out_channels, p);
  MapMat<T>(grad_weight.data(), out_channels, in.channels()).noalias() += gy * x.transpose();
  add_row_sums(grad_out.data(), out_channels, static_cast<std::size_t>(gy.cols()), grad_bias);
  if (grad_in) {
    MapMat<T>(grad_in->data(), in.channels(), p).noalias() += w.transpose() * gy;
  }
}

// ---------------------------------------------------------------------------

template <typename T>
FeatureMap<T> conv3x3(const FeatureMap<T>& in, std::span<const T> weight, std::span<const T> bias,
                      int out_channels, int stride) {
  const std::string op = "conv3x3";
  if (stride != 1 && stride != 2) shape_error(op, "stride must be 1 or 2");
  if (out_channels <= 0) shape_error(op, "out_channels must be positive");
  check_size(op, "weight", weight.size(), static_cast<std::size_t>(out_channels) * in.channels() * 9);
  check_size(op, "bias", bias.size(), static_cast<std::size_t>(out_channels));

  const int oh = strided_extent(in.height(), stride);
  const int ow = strided_extent(in.width(), stride);
  FeatureMap<T> out(out_channels, oh, ow);
  const RowMat<T> cols = im2col3x3(in, stride, oh, ow);
  MapConstMat<T> w(weight.data(), out_channels, static_cast<Eigen::Index>(in.channels()) * 9);
  MapMat<T> y(out.data(), out_channels, cols.cols());
  y.noalias() = w * cols;
  y.colwise() += MapConstVec<T>(bias.data(), out_channels);
  return out;
}

template <typename T>
void conv3x3_backward(const FeatureMap<T>& in, std::span<const T> weight, int out_channels,
                      int stride, const FeatureMap<T>& grad_out, FeatureMap<T>* grad_in,
                      std::span<T> grad_weight, std::span<T> grad_bias) {
  const std::string op = "conv3x3_backward";
  if (stride != 1 && stride != 2) shape_error(op, "stride must be 1 or 2");
  check_size(op, "weight", weight.size(), static_cast<std::size_t>(out_channels) * in.channels() * 9);
  check_size(op, "grad_weight", grad_weight.size(), weight.size());
  check_size(op, "grad_bias", grad_bias.size(), static_cast<std::size_t>(out_channels));
  const int oh = strided_extent(in.height(), stride);
  const int ow = strided_extent(in.width(), stride);
  if (grad_out.channels() != out_channels || grad_out.height() != oh || grad_out.width() != ow) {
    shape_error(op, "grad_out shape " + grad_out.shape_string() + " does not match output");
  }
  if (grad_in && !grad_in->same_shape(in)) shape_error(op, "grad_in shape mismatch");

  const RowMat<T> cols = im2col3x3(in, stride, oh, ow);
  const Eigen::Index k = static_cast<Eigen::Index>(in.channels()) * 9;
  MapConstMat<T> w(weight.data(), out_channels, k);
  MapConstMat<T> gy(grad_out.data(), out_channels, cols.cols());
  MapMat<T>(grad_weight.data(), out_channels, k).noalias() += gy * cols.transpose();
  add_row_sums(grad_out.data(), out_channels, static_cast<std::size_t>(gy.cols()), grad_bias);
  if (grad_in) {
    RowMat<T> gcols(k, cols.cols());
    gcols.noalias() = w.transpose() * gy;
    col2im3x3_add(gcols, stride, oh, ow, *grad_in);
  }
}

// ---------------------------------------------------------------------------

template <typename T>
FeatureMap<T> leaky_relu(const FeatureMap<T>& in, T slope) {
  FeatureMap<T> out(in.channels(), in.height(), in.width());
  const T* x = in.data();
  T* y = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
  return out;
}

template <typename T>
void leaky_relu_backward(const FeatureMap<T>& in, T slope, const FeatureMap<T>& grad_out,
                         FeatureMap<T>& grad_in) {
  if (!in.same_shape(grad_out) || !in.same_shape(grad_in)) {
    shape_error("leaky_relu_backward", "shape mismatch");
  }
  const T* x = in.data();
  const T* gy = grad_out.data();
  T* gx = grad_in.data();
  for (std::size_t i = 0; i < in.size(); ++i) gx[i] += x[i] >= T(0) ? gy[i] : slope * gy[i];
}

template <typename T>
FeatureMap<T> softmax_channel(const FeatureMap<T>& logits) {
  const int k = logits.channels();
  const std::size_t p = logits.pixels();
  FeatureMap<T> out(k, logits.height(), logits.width());
  if (k == 0) return out;
  const T* x = logits.data();
  T* y = out.data();
  for (std::size_t i = 0; i < p; ++i) {
    T mx = x[i];
    for (int c = 1; c < k; ++c) mx = std::max(mx, x[c * p + i]);
    T sum = T(0);
    for (int c = 0; c < k; ++c) {
      const T e = std::exp(x[c * p + i] - mx);
      y[c * p + i] = e;
      sum += e;
    }
    const T inv = T(1) / sum;
    for (int c = 0; c < k; ++c) y[c * p + i] *= inv;
  }
  return out;
}

template <typename T>
void softmax_channel_backward(const FeatureMap<T>& probs, const FeatureMap<T>& grad_probs,
                              FeatureMap<T>& grad_logits) {
  if (!probs.same_shape(grad_probs) || !probs.same_shape(grad_logits)) {
    shape_error("softmax_channel_backward", "shape mismatch");
  }
  const int k = probs.channels();
  const std::size_t p = probs.pixels();
  const T* y = probs.data();
  const T* gy = grad_probs.data();
  T* gx = grad_logits.data();
  for (std::size_t i = 0; i < p; ++i) {
    T dot = T(0);
    for (int c = 0; c < k; ++c) dot += y[c * p + i] * gy[c * p + i];
    for (int c = 0; c < k; ++c) gx[c * p + i] += y[c * p + i] * (gy[c * p + i] - dot);
  }
}

// ---------------------------------------------------------------------------

template <typename T>
FeatureMap<T> upsample_nearest2x(const FeatureMap<T>& in) {
  FeatureMap<T> out(in.channels(), in.height() * 2, in.width() * 2);
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
    }
  }
  return out;
}

template <typename T>
void upsample_nearest2x_backward(const FeatureMap<T>& grad_out, FeatureMap<T>& grad_in) {
  if (grad_out.channels() != grad_in.channels() || grad_out.height() != grad_in.height() * 2 ||
      grad_out.width() != grad_in.width() * 2) {
    shape_error("upsample_nearest2x_backward", "shape mismatch");
  }
  for (int c = 0; c < grad_in.channels(); ++c) {
    for (int y = 0; y < grad_in.height(); ++y) {
      for (int x = 0; x < grad_in.width(); ++x) {
        grad_in.at(c, y, x) += (grad_out.at(c, 2 * y, 2 * x) + grad_out.at(c, 2 * y, 2 * x + 1)) +
                               (grad_out.at(c, 2 * y + 1, 2 * x) + grad_out.at(c, 2 * y + 1, 2 * x + 1));
      }
    }
  }
}

template <typename T>
void add_inplace(FeatureMap<T>& a, const FeatureMap<T>& b) {
  if (!a.same_shape(b)) {
    shape_error("add_inplace", a.shape_string() + " vs " + b.shape_string());
  }
  T* x = a.data();
  const T* y = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) x[i] += y[i];
}

template <typename T>
void apply_mask(FeatureMap<T>& f, const ValidMask& mask) {
  if (!mask.matches(f)) shape_error("apply_mask", "mask does not match " + f.shape_string());
  const std::size_t p = f.pixels();
  for (int c = 0; c < f.channels(); ++c) {
    T* x = f.data() + c * p;
    for (std::size_t i = 0; i < p; ++i) {
      if (!mask[i]) x[i] = T(0);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

// Sum over valid pixels of g(x_i), chunked by pixel index, partials combined
// in chunk order.
template <typename T, typename Fn>
double masked_ordered_sum(std::span<const T> plane, const ValidMask& mask, Fn&& g) {
  double total = 0.0;
  for (std::size_t start = 0; start < plane.size(); start += kReductionChunk) {
    const std::size_t end = std::min(plane.size(), start + kReductionChunk);
    double partial = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      if (mask[i]) partial += g(static_cast<double>(plane[i]));
    }
    total += partial;
  }
  return total;
}

struct RawMoments {
  double mean;
  double std;
};

template <typename T>
RawMoments raw_moments(std::span<const T> plane, const ValidMask& mask, double n) {
  const double mean = masked_ordered_sum(plane, mask, [](double x) { return x; }) / n;
  const double var =
      masked_ordered_sum(plane, mask, [mean](double x) { return (x - mean) * (x - mean); }) / n;
  return {mean, std::sqrt(var)};
}

}  // namespace

template <typename T>
ChannelStats<T> channel_stats(const FeatureMap<T>& f, const ValidMask& mask, double std_floor) {
  if (!mask.matches(f)) shape_error("channel_stats", "mask does not match " + f.shape_string());
  const std::size_t n = mask.count();
  if (n == 0) throw std::invalid_argument("channel_stats: mask has no valid pixel");
  ChannelStats<T> s;
  s.mean.resize(f.channels());
  s.std.resize(f.channels());
  for (int c = 0; c < f.channels(); ++c) {
    const RawMoments m = raw_moments(f.channel(c), mask, static_cast<double>(n));
    s.mean[c] = static_cast<T>(m.mean);
    s.std[c] = static_cast<T>(std::max(m.std, std_floor));
  }
  return s;
}

template <typename T>
void channel_stats_backward(const FeatureMap<T>& f, const ValidMask& mask,
                            const ChannelStats<T>& stats, std::span<const T> grad_mean,
                            std::span<const T> grad_std, FeatureMap<T>& grad_f, double std_floor) {
  const std::string op = "channel_stats_backward";
  if (!mask.matches(f) || !f.same_shape(grad_f)) shape_error(op, "shape mismatch");
  check_size(op, "grad_mean", grad_mean.size(), static_cast<std::size_t>(f.channels()));
  check_size(op, "grad_std", grad_std.size(), static_cast<std::size_t>(f.channels()));
  const std::size_t n = mask.count();
  if (n == 0) throw std::invalid_argument("channel_stats_backward: mask has no valid pixel");
  const T inv_n = T(1) / static_cast<T>(n);
  for (int c = 0; c < f.channels(); ++c) {
    const RawMoments m = raw_moments(f.channel(c), mask, static_cast<double>(n));
    const bool clamped = m.std < std_floor;
    const T gm = grad_mean[c] * inv_n;
    const T gs = clamped ? T(0) : grad_std[c] * inv_n / stats.std[c];
    const T mu = stats.mean[c];
    auto x = f.channel(c);
    auto g = grad_f.channel(c);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (mask[i]) g[i] += gm + gs * (x[i] - mu);
    }
  }
}

template <typename T>
FeatureMap<T> normalize_channels(const FeatureMap<T>& f, const ChannelStats<T>& stats,
                                 const ValidMask& mask) {
  if (!mask.matches(f) || stats.channels() != static_cast<std::size_t>(f.channels())) {
    shape_error("normalize_channels", "shape mismatch");
  }
  FeatureMap<T> out(f.channels(), f.height(), f.width());
  for (int c = 0; c < f.channels(); ++c) {
    auto x = f.channel(c);
    auto y = out.channel(c);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (mask[i]) y[i] = (x[i] - stats.mean[c]) / stats.std[c];
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> denormalize_channels(const FeatureMap<T>& f, const ChannelStats<T>& stats,
                                   const ValidMask& mask) {
  if (!mask.matches(f) || stats.channels() != static_cast<std::size_t>(f.channels())) {
    shape_error("denormalize_channels", "shape mismatch");
  }
  FeatureMap<T> out(f.channels(), f.height(), f.width());
  for (int c = 0; c < f.channels(); ++c) {
    auto x = f.channel(c);
    auto y = out.channel(c);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (mask[i]) y[i] = x[i] * stats.std[c] + stats.mean[c];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
CrossEntropyResult<T> cross_entropy(const FeatureMap<T>& logits, std::span<const int> targets,
                                    const ValidMask& include) {
  const std::string op = "cross_entropy";
  const int k = logits.channels();
  const std::size_t p = logits.pixels();
  check_size(op, "targets", targets.size(), p);
  if (!include.matches(logits)) shape_error(op, "mask does not match logits");

  std::size_t n = 0;
  for (std::size_t i = 0; i < p; ++i) {
    if (!include[i]) continue;
    if (targets[i] < 0 || targets[i] >= k) {
      std::ostringstream os;
      os << "target id " << targets[i] << " at pixel " << i << " outside [0, " << k << ")";
      throw std::invalid_argument(op + ": " + os.str());
    }
    ++n;
  }
  if (n == 0) throw std::invalid_argument(op + ": every pixel is ignored");

  CrossEntropyResult<T> r;
  r.counted = n;
  r.grad = FeatureMap<T>(k, logits.height(), logits.width());
  const T inv_n = T(1) / static_cast<T>(n);
  const T* x = logits.data();
  T* g = r.grad.data();
  std::vector<double> per_pixel;
  per_pixel.reserve(n);
  for (std::size_t i = 0; i < p; ++i) {
    if (!include[i]) continue;
    T mx = x[i];
    for (int c = 1; c < k; ++c) mx = std::max(mx, x[c * p + i]);
    T sum = T(0);
    for (int c = 0; c < k; ++c) sum += std::exp(x[c * p + i] - mx);
    const T lse = mx + std::log(sum);
    per_pixel.push_back(static_cast<double>(lse - x[targets[i] * p + i]));
    for (int c = 0; c < k; ++c) {
      const T prob = std::exp(x[c * p + i] - lse);
      g[c * p + i] = (prob - (c == targets[i] ? T(1) : T(0))) * inv_n;
    }
  }
  r.loss = static_cast<T>(ordered_sum(per_pixel) / static_cast<double>(n));
  return r;
}

template <typename T>
std::vector<int> argmax_channel(const FeatureMap<T>& logits, int excluded) {
  const int k = logits.channels();
  const std::size_t p = logits.pixels();
  std::vector<int> out(p, excluded == 0 && k > 1 ? 1 : 0);
  const T* x = logits.data();
  for (std::size_t i = 0; i < p; ++i) {
    int best = -1;
    T best_v = -std::numeric_limits<T>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == excluded) continue;
      if (best < 0 || x[c * p + i] > best_v) {
        best = c;
        best_v = x[c * p + i];
      }
    }
    if (best >= 0) out[i] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------

#define RVSEG_INSTANTIATE_KERNELS(T)                                                              \
  template FeatureMap<T> linear_pixelwise<T>(const FeatureMap<T>&, std::span<const T>,            \
                                             std::span<const T>, int);                            \
  template void linear_pixelwise_backward<T>(const FeatureMap<T>&, std::span<const T>, int,       \
                                             const FeatureMap<T>&, FeatureMap<T>*, std::span<T>,  \
                                             std::span<T>);                                       \
  template FeatureMap<T> conv3x3<T>(const FeatureMap<T>&, std::span<const T>, std::span<const T>, \
                                    int, int);                                                    \
  template void conv3x3_backward<T>(const FeatureMap<T>&, std::span<const T>, int, int,           \
                                    const FeatureMap<T>&, FeatureMap<T>*, std::span<T>,           \
                                    std::span<T>);                                                \
  template FeatureMap<T> leaky_relu<T>(const FeatureMap<T>&, T);                                  \
  template void leaky_relu_backward<T>(const FeatureMap<T>&, T, const FeatureMap<T>&,             \
                                       FeatureMap<T>&);                                           \
  template FeatureMap<T> softmax_channel<T>(const FeatureMap<T>&);                                \
  template void softmax_channel_backward<T>(const FeatureMap<T>&, const FeatureMap<T>&,           \
                                            FeatureMap<T>&);                                      \
  template FeatureMap<T> upsample_nearest2x<T>(const FeatureMap<T>&);                             \
  template void upsample_nearest2x_backward<T>(const FeatureMap<T>&, FeatureMap<T>&);             \
  template void add_inplace<T>(FeatureMap<T>&, const FeatureMap<T>&);                             \
  template void apply_mask<T>(FeatureMap<T>&, const ValidMask&);                                  \
  template ChannelStats<T> channel_stats<T>(const FeatureMap<T>&, const ValidMask&, double);      \
  template void channel_stats_backward<T>(const FeatureMap<T>&, const ValidMask&,                 \
                                          const ChannelStats<T>&, std::span<const T>,             \
                                          std::span<const T>, FeatureMap<T>&, double);            \
  template FeatureMap<T> normalize_channels<T>(const FeatureMap<T>&, const ChannelStats<T>&,      \
                                               const ValidMask&);                                 \
  template FeatureMap<T> denormalize_channels<T>(const FeatureMap<T>&, const ChannelStats<T>&,    \
                                                 const ValidMask&);                               \
  template CrossEntropyResult<T> cross_entropy<T>(const FeatureMap<T>&, std::span<const int>,     \
                                                  const ValidMask&);                              \
  template std::vector<int> argmax_channel<T>(const FeatureMap<T>&, int);

RVSEG_INSTANTIATE_KERNELS(float)
RVSEG_INSTANTIATE_KERNELS(double)

#undef RVSEG_INSTANTIATE_KERNELS

}  // namespace rvseg::kernels
