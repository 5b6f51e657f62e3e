// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/rdc.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rvseg/errors.hpp"
#include "rvseg/kernels.hpp"

namespace rvseg::rdc {

void RdcConfig::validate() const {
  if (slots < 1) throw ConfigError("rdc.slots must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("rdc.temperature must be > 0");
  if (loss_weight < 0.0) throw ConfigError("rdc.loss_weight must be >= 0");
}

template <typename T>
StyleMemory StyleMemory::create(ParamList<T>& params, const std::string& name, int slots,
                                int channels) {
  StyleMemory m;
  m.param = params.add(name, ParamRole::memory, {slots, channels});
  m.slots = slots;
  m.channels = channels;
  return m;
}

template <typename T>
void StyleMemory::init(ParamList<T>& params, Rng& rng) const {
  std::normal_distribution<double> n(0.0, 1.0);
  auto& v = params[param].value;
  for (int t = 0; t < slots; ++t) {
    T* row = v.data() + static_cast<std::size_t>(t) * channels;
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int c = 0; c < channels; ++c) {
        row[c] = static_cast<T>(n(rng));
        norm += static_cast<double>(row[c]) * row[c];
      }
    } while (std::sqrt(norm) < kMinInitRowNorm);
  }
}

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapConstRowMat = Eigen::Map<const RowMat<T>>;

std::vector<std::size_t> valid_indices(const ValidMask& mask) {
  std::vector<std::size_t> idx;
  idx.reserve(mask.pixels());
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i]) idx.push_back(i);
  }
  return idx;
}

void check_memory(const char* op, std::size_t memory_size, int slots, int channels) {
  if (slots < 1 || memory_size != static_cast<std::size_t>(slots) * channels) {
    throw std::invalid_argument(std::string(op) + ": memory has " + std::to_string(memory_size) +
                                " elements, expected " + std::to_string(slots) + " x " +
                                std::to_string(channels));
  }
}

// Dense intermediates of the retrieval restricted to valid pixels.
template <typename T>
struct Dense {
  std::vector<std::size_t> idx;
  Mat<T> q;       // C x P
  Vec<T> q_norm;  // clamped
  std::vector<bool> q_clamped;
  Mat<T> q_hat;
  Mat<T> m;       // S x C
  Vec<T> m_norm;
  std::vector<bool> m_clamped;
  Mat<T> m_hat;
  Mat<T> attention;  // S x P
};

template <typename T>
Dense<T> dense_forward(const FeatureMap<T>& f, std::span<const T> memory, int slots,
                       const ValidMask& mask, double temperature) {
  Dense<T> d;
  const int c = f.channels();
  const std::size_t p = f.pixels();
  d.idx = valid_indices(mask);
  const auto n = static_cast<Eigen::Index>(d.idx.size());
  const T eps = static_cast<T>(kNormEps);

  d.q.resize(c, n);
  for (int ch = 0; ch < c; ++ch) {
    const T* plane = f.data() + ch * p;
    for (Eigen::Index j = 0; j < n; ++j) d.q(ch, j) = plane[d.idx[j]];
  }
  d.q_norm.resize(n);
  d.q_clamped.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const T norm = d.q.col(j).norm();
    d.q_clamped[j] = norm < eps;
    d.q_norm(j) = std::max(norm, eps);
  }
  d.q_hat = d.q * d.q_norm.cwiseInverse().asDiagonal();

  d.m = MapConstRowMat<T>(memory.data(), slots, c);
  d.m_norm.resize(slots);
  d.m_clamped.resize(slots);
  for (int t = 0; t < slots; ++t) {
    const T norm = d.m.row(t).norm();
    d.m_clamped[t] = norm < eps;
    d.m_norm(t) = std::max(norm, eps);
  }
  d.m_hat = d.m_norm.cwiseInverse().asDiagonal() * d.m;

  d.attention = (d.m_hat * d.q_hat) / static_cast<T>(temperature);
  for (Eigen::Index j = 0; j < n; ++j) {
    auto col = d.attention.col(j);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
  return d;
}

// d/dx of x / max(|x|, eps) applied to g, for each column.
template <typename T>
Mat<T> normalize_backward(const Mat<T>& x_hat, const Vec<T>& norm, const std::vector<bool>& clamped,
                          const Mat<T>& g) {
  Mat<T> out(g.rows(), g.cols());
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    if (clamped[j]) {
      out.col(j) = g.col(j) / norm(j);
    } else {
      const T dot = x_hat.col(j).dot(g.col(j));
      out.col(j) = (g.col(j) - x_hat.col(j) * dot) / norm(j);
    }
  }
  return out;
}

}  // namespace

template <typename T>
Retrieval<T> retrieve_style(const FeatureMap<T>& f, std::span<const T> memory, int slots,
                            const ValidMask& mask, double temperature) {
  check_memory("retrieve_style", memory.size(), slots, f.channels());
  if (!mask.matches(f)) throw std::invalid_argument("retrieve_style: mask does not match features");
  if (!(temperature > 0.0)) throw std::invalid_argument("retrieve_style: temperature must be > 0");

  const Dense<T> d = dense_forward(f, memory, slots, mask, temperature);
  const std::size_t p = f.pixels();
  Retrieval<T> r;
  r.attention = FeatureMap<T>(slots, f.height(), f.width());
  r.style = FeatureMap<T>(f.channels(), f.height(), f.width());
  const Mat<T> v = d.m.transpose() * d.attention;
  for (std::size_t j = 0; j < d.idx.size(); ++j) {
    const std::size_t i = d.idx[j];
    for (int t = 0; t < slots; ++t) r.attention[t * p + i] = d.attention(t, j);
    for (int c = 0; c < f.channels(); ++c) r.style[c * p + i] = v(c, j);
    if (d.q_clamped[j]) ++r.zero_norm_pixels;
  }
  r.stats = kernels::channel_stats(r.style, mask);
  return r;
}

template <typename T>
void retrieve_style_backward(const FeatureMap<T>& f, std::span<const T> memory, int slots,
                             const ValidMask& mask, double temperature, const Retrieval<T>& fwd,
                             std::span<const T> grad_mean, std::span<const T> grad_std,
                             FeatureMap<T>* grad_f, std::span<T> grad_memory) {
  check_memory("retrieve_style_backward", memory.size(), slots, f.channels());
  if (!grad_memory.empty()) check_memory("retrieve_style_backward", grad_memory.size(), slots, f.channels());
  if (grad_f && !grad_f->same_shape(f)) throw std::invalid_argument("retrieve_style_backward: grad_f shape mismatch");

  const int c = f.channels();
  const std::size_t p = f.pixels();
  FeatureMap<T> grad_style(c, f.height(), f.width());
  kernels::channel_stats_backward(fwd.style, mask, fwd.stats, grad_mean, grad_std, grad_style);

  const Dense<T> d = dense_forward(f, memory, slots, mask, temperature);
  const auto n = static_cast<Eigen::Index>(d.idx.size());
  Mat<T> gv(c, n);
  for (int ch = 0; ch < c; ++ch) {
    for (Eigen::Index j = 0; j < n; ++j) gv(ch, j) = grad_style[ch * p + d.idx[j]];
  }

  // V = M^T A
  Mat<T> gm = d.attention * gv.transpose();  // S x C
  const Mat<T> ga = d.m * gv;                // S x P

  // softmax over slots, then the temperature
  Mat<T> gs(slots, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const T dot = d.attention.col(j).dot(ga.col(j));
    gs.col(j) = d.attention.col(j).cwiseProduct((ga.col(j).array() - dot).matrix());
  }
  gs /= static_cast<T>(temperature);

  // S = M_hat Q_hat
  const Mat<T> gq_hat = d.m_hat.transpose() * gs;
  const Mat<T> gm_hat = gs * d.q_hat.transpose();

  if (!grad_memory.empty()) {
    const Mat<T> gm_hat_t = gm_hat.transpose();
    const Mat<T> m_hat_t = d.m_hat.transpose();
    gm += normalize_backward<T>(m_hat_t, d.m_norm, d.m_clamped, gm_hat_t).transpose();
    for (int t = 0; t < slots; ++t) {
      for (int ch = 0; ch < c; ++ch) grad_memory[static_cast<std::size_t>(t) * c + ch] += gm(t, ch);
    }
  }
  if (grad_f) {
    const Mat<T> gq = normalize_backward<T>(d.q_hat, d.q_norm, d.q_clamped, gq_hat);
    for (int ch = 0; ch < c; ++ch) {
      T* plane = grad_f->data() + ch * p;
      for (Eigen::Index j = 0; j < n; ++j) plane[d.idx[j]] += gq(ch, j);
    }
  }
}

AugmentDraw draw_augment(int channels, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AugmentDraw d;
  d.alpha.resize(channels);
  d.beta.resize(channels);
  for (int c = 0; c < channels; ++c) d.alpha[c] = u(rng);
  for (int c = 0; c < channels; ++c) d.beta[c] = u(rng);
  return d;
}

namespace {

template <typename T>
ChannelStats<T> augmented_stats(const ChannelStats<T>& ref, const AugmentDraw& draw) {
  ChannelStats<T> s = ref;
  for (std::size_t c = 0; c < ref.channels(); ++c) {
    s.mean[c] = static_cast<T>((draw.alpha[c] + 0.5) * ref.mean[c]);
    s.std[c] = static_cast<T>((draw.beta[c] + 0.5) * ref.std[c]);
  }
  return s;
}

void check_draw(const AugmentDraw& draw, int channels) {
  if (draw.alpha.size() != static_cast<std::size_t>(channels) ||
      draw.beta.size() != static_cast<std::size_t>(channels)) {
    throw std::invalid_argument("augment: draw has wrong channel count");
  }
}

}  // namespace

template <typename T>
FeatureMap<T> augment(const FeatureMap<T>& f, const ValidMask& mask, const AugmentDraw& draw) {
  check_draw(draw, f.channels());
  const auto stats = kernels::channel_stats(f, mask);
  const auto normalized = kernels::normalize_channels(f, stats, mask);
  return kernels::denormalize_channels(normalized, augmented_stats(stats, draw), mask);
}

template <typename T>
FeatureMap<T> calibrate(const FeatureMap<T>& f, const ChannelStats<T>& target, const ValidMask& mask) {
  if (target.channels() != static_cast<std::size_t>(f.channels())) {
    throw std::invalid_argument("calibrate: target stats have wrong channel count");
  }
  const auto stats = kernels::channel_stats(f, mask);
  return kernels::denormalize_channels(kernels::normalize_channels(f, stats, mask), target, mask);
}

template <typename T>
RdcTrainResult<T> rdc_train_forward(const FeatureMap<T>& f_ref, std::span<const T> memory, int slots,
                                    const ValidMask& mask, const AugmentDraw& draw,
                                    double temperature) {
  check_draw(draw, f_ref.channels());
  RdcTrainResult<T> r;
  r.draw = draw;
  r.ref_stats = kernels::channel_stats(f_ref, mask);
  r.normalized = kernels::normalize_channels(f_ref, r.ref_stats, mask);
  r.augmented = kernels::denormalize_channels(r.normalized, augmented_stats(r.ref_stats, draw), mask);
  r.retrieval = retrieve_style(r.augmented, memory, slots, mask, temperature);
  r.output = kernels::denormalize_channels(r.normalized, r.retrieval.stats, mask);

  const int c = f_ref.channels();
  const std::size_t p = f_ref.pixels();
  double sc = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    if (!mask[i]) continue;
    double d2 = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double d = static_cast<double>(r.output[ch * p + i]) - f_ref[ch * p + i];
      d2 += d * d;
    }
    sc += std::sqrt(d2);
  }
  r.l_sc = static_cast<T>(sc / static_cast<double>(mask.count()));
  double dm = 0.0;
  double ds = 0.0;
  for (int ch = 0; ch < c; ++ch) {
    const double em = static_cast<double>(r.retrieval.stats.mean[ch]) - r.ref_stats.mean[ch];
    const double es = static_cast<double>(r.retrieval.stats.std[ch]) - r.ref_stats.std[ch];
    dm += em * em;
    ds += es * es;
  }
  r.l_sa = static_cast<T>(std::sqrt(dm) + std::sqrt(ds));
  r.loss = r.l_sc + r.l_sa;
  return r;
}

template <typename T>
void rdc_train_backward(const FeatureMap<T>& f_ref, std::span<const T> memory, int slots,
                        const ValidMask& mask, double temperature, const RdcTrainResult<T>& fwd,
                        const FeatureMap<T>* grad_output, T loss_scale, FeatureMap<T>& grad_ref,
                        std::span<T> grad_memory) {
  if (!grad_ref.same_shape(f_ref)) throw std::invalid_argument("rdc_train_backward: grad_ref shape mismatch");
  if (grad_output && !grad_output->same_shape(f_ref)) {
    throw std::invalid_argument("rdc_train_backward: grad_output shape mismatch");
  }
  const int c = f_ref.channels();
  const std::size_t p = f_ref.pixels();
  const double inv_n = 1.0 / static_cast<double>(mask.count());
  constexpr double kTiny = 1e-12;

  // d/d(output) and the direct d/d(f_ref) from the consistency term.
  FeatureMap<T> g_out(c, f_ref.height(), f_ref.width());
  if (grad_output) g_out = *grad_output;
  if (loss_scale != T(0)) {
    for (std::size_t i = 0; i < p; ++i) {
      if (!mask[i]) continue;
      double d2 = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double d = static_cast<double>(fwd.output[ch * p + i]) - f_ref[ch * p + i];
        d2 += d * d;
      }
      const double dist = std::sqrt(d2);
      if (dist < kTiny) continue;
      const double k = static_cast<double>(loss_scale) * inv_n / dist;
      for (int ch = 0; ch < c; ++ch) {
        const double d = static_cast<double>(fwd.output[ch * p + i]) - f_ref[ch * p + i];
        g_out[ch * p + i] += static_cast<T>(k * d);
        grad_ref[ch * p + i] -= static_cast<T>(k * d);
      }
    }
  }

  // output = std_src * N + mean_src
  std::vector<T> g_mean_src(c), g_std_src(c);
  FeatureMap<T> g_norm(c, f_ref.height(), f_ref.width());
  for (int ch = 0; ch < c; ++ch) {
    double gm = 0.0;
    double gs = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      if (!mask[i]) continue;
      const double g = g_out[ch * p + i];
      gm += g;
      gs += g * fwd.normalized[ch * p + i];
      g_norm[ch * p + i] += g_out[ch * p + i] * fwd.retrieval.stats.std[ch];
    }
    g_mean_src[ch] = static_cast<T>(gm);
    g_std_src[ch] = static_cast<T>(gs);
  }

  // alignment term
  std::vector<double> g_mean_ref(c, 0.0), g_std_ref(c, 0.0);
  if (loss_scale != T(0)) {
    double dm = 0.0;
    double ds = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double em = static_cast<double>(fwd.retrieval.stats.mean[ch]) - fwd.ref_stats.mean[ch];
      const double es = static_cast<double>(fwd.retrieval.stats.std[ch]) - fwd.ref_stats.std[ch];
      dm += em * em;
      ds += es * es;
    }
    dm = std::sqrt(dm);
    ds = std::sqrt(ds);
    for (int ch = 0; ch < c; ++ch) {
      if (dm >= kTiny) {
        const double g = loss_scale * (static_cast<double>(fwd.retrieval.stats.mean[ch]) - fwd.ref_stats.mean[ch]) / dm;
        g_mean_src[ch] += static_cast<T>(g);
        g_mean_ref[ch] -= g;
      }
      if (ds >= kTiny) {
        const double g = loss_scale * (static_cast<double>(fwd.retrieval.stats.std[ch]) - fwd.ref_stats.std[ch]) / ds;
        g_std_src[ch] += static_cast<T>(g);
        g_std_ref[ch] -= g;
      }
    }
  }

  // retrieval from the augmented map
  FeatureMap<T> g_aug(c, f_ref.height(), f_ref.width());
  retrieve_style_backward<T>(fwd.augmented, memory, slots, mask, temperature, fwd.retrieval,
                             g_mean_src, g_std_src, &g_aug, grad_memory);

  // augmented = std_aug * N + mean_aug, std_aug = (beta + .5) std_ref, mean_aug = (alpha + .5) mean_ref
  for (int ch = 0; ch < c; ++ch) {
    const double std_aug = (fwd.draw.beta[ch] + 0.5) * fwd.ref_stats.std[ch];
    double gm = 0.0;
    double gs = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      if (!mask[i]) continue;
      const double g = g_aug[ch * p + i];
      gm += g;
      gs += g * fwd.normalized[ch * p + i];
      g_norm[ch * p + i] += static_cast<T>(g * std_aug);
    }
    g_mean_ref[ch] += (fwd.draw.alpha[ch] + 0.5) * gm;
    g_std_ref[ch] += (fwd.draw.beta[ch] + 0.5) * gs;
  }

  // N = (f_ref - mean_ref) / std_ref
  for (int ch = 0; ch < c; ++ch) {
    const double inv_std = 1.0 / static_cast<double>(fwd.ref_stats.std[ch]);
    double gm = 0.0;
    double gs = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      if (!mask[i]) continue;
      const double g = g_norm[ch * p + i];
      grad_ref[ch * p + i] += static_cast<T>(g * inv_std);
      gm += g;
      gs += g * fwd.normalized[ch * p + i];
    }
    g_mean_ref[ch] -= gm * inv_std;
    g_std_ref[ch] -= gs * inv_std;
  }

  std::vector<T> gmr(c), gsr(c);
  for (int ch = 0; ch < c; ++ch) {
    gmr[ch] = static_cast<T>(g_mean_ref[ch]);
    gsr[ch] = static_cast<T>(g_std_ref[ch]);
  }
  kernels::channel_stats_backward<T>(f_ref, mask, fwd.ref_stats, gmr, gsr, grad_ref);
}

template <typename T>
RdcInference<T> rdc_inference(const FeatureMap<T>& f_ref, std::span<const T> memory, int slots,
                              const ValidMask& mask, double temperature) {
  RdcInference<T> r;
  r.retrieval = retrieve_style(f_ref, memory, slots, mask, temperature);
  r.output = calibrate(f_ref, r.retrieval.stats, mask);
  return r;
}

#define RVSEG_INSTANTIATE_RDC(T)                                                                   \
  template StyleMemory StyleMemory::create<T>(ParamList<T>&, const std::string&, int, int);        \
  template void StyleMemory::init<T>(ParamList<T>&, Rng&) const;                                   \
  template Retrieval<T> retrieve_style<T>(const FeatureMap<T>&, std::span<const T>, int,           \
                                          const ValidMask&, double);                              \
  template void retrieve_style_backward<T>(const FeatureMap<T>&, std::span<const T>, int,          \
                                           const ValidMask&, double, const Retrieval<T>&,          \
                                           std::span<const T>, std::span<const T>,                 \
                                           FeatureMap<T>*, std::span<T>);                          \
  template FeatureMap<T> augment<T>(const FeatureMap<T>&, const ValidMask&, const AugmentDraw&);   \
  template FeatureMap<T> calibrate<T>(const FeatureMap<T>&, const ChannelStats<T>&,                \
                                      const ValidMask&);                                          \
  template RdcTrainResult<T> rdc_train_forward<T>(const FeatureMap<T>&, std::span<const T>, int,   \
                                                  const ValidMask&, const AugmentDraw&, double);  \
  template void rdc_train_backward<T>(const FeatureMap<T>&, std::span<const T>, int,               \
                                      const ValidMask&, double, const RdcTrainResult<T>&,          \
                                      const FeatureMap<T>*, T, FeatureMap<T>&, std::span<T>);      \
  template RdcInference<T> rdc_inference<T>(const FeatureMap<T>&, std::span<const T>, int,         \
                                            const ValidMask&, double);

RVSEG_INSTANTIATE_RDC(float)
RVSEG_INSTANTIATE_RDC(double)

#undef RVSEG_INSTANTIATE_RDC

}  // namespace rvseg::rdc
