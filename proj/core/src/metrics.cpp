// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rvseg {

ConfusionMatrix::ConfusionMatrix(int num_classes, int ignore_label)
    : k_(num_classes), ignore_(ignore_label), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 0) throw std::invalid_argument("ConfusionMatrix: negative class count");
}

void ConfusionMatrix::accumulate(std::span<const int> gt, std::span<const int> pred) {
  if (gt.size() != pred.size()) {
    throw std::invalid_argument("ConfusionMatrix::accumulate: " + std::to_string(gt.size()) +
                                " ground-truth labels vs " + std::to_string(pred.size()) + " predictions");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_) {
      ++ignored_;
      continue;
    }
    if (gt[i] < 0 || gt[i] >= k_ || pred[i] < 0 || pred[i] >= k_) {
      throw std::out_of_range("ConfusionMatrix::accumulate: label out of range at point " + std::to_string(i));
    }
    ++counts_[static_cast<std::size_t>(gt[i]) * k_ + pred[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_ || other.ignore_ != ignore_) {
    throw std::invalid_argument("ConfusionMatrix::merge: incompatible matrices");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
}

std::uint64_t ConfusionMatrix::counted() const {
  std::uint64_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::vector<std::optional<double>> ConfusionMatrix::iou() const {
  std::vector<std::optional<double>> out(k_);
  for (int c = 0; c < k_; ++c) {
    if (c == ignore_) continue;
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (int j = 0; j < k_; ++j) {
      row += at(c, j);
      col += at(j, c);
    }
    const std::uint64_t tp = at(c, c);
    const std::uint64_t uni = row + col - tp;
    if (uni > 0) out[c] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

double ConfusionMatrix::mean_iou() const {
  // Ratios are summed in extended precision from the integer counts, so the
  // result is the correctly rounded mean in all but pathological cases.
  long double sum = 0.0L;
  int n = 0;
  for (int c = 0; c < k_; ++c) {
    if (c == ignore_) continue;
    const std::uint64_t tp = at(c, c);
    std::uint64_t gt = 0;
    std::uint64_t pred = 0;
    for (int j = 0; j < k_; ++j) {
      gt += at(c, j);
      pred += at(j, c);
    }
    const std::uint64_t uni = gt + pred - tp;
    if (uni == 0) continue;
    sum += static_cast<long double>(tp) / static_cast<long double>(uni);
    ++n;
  }
  return n ? static_cast<double>(sum / n) : std::numeric_limits<double>::quiet_NaN();
}

double roc_auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw std::invalid_argument("roc_auc: both score sets must be non-empty");
  // Rank-sum form with midranks for ties.
  std::vector<std::pair<double, bool>> all;
  all.reserve(pos.size() + neg.size());
  for (double s : pos) all.emplace_back(s, true);
  for (double s : neg) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second) rank_sum += mid;
    }
    i = j;
  }
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace rvseg
