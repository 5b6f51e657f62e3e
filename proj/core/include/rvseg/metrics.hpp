// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rvseg {

/// K x K point counts, rows = ground truth, columns = prediction. Points
/// whose ground truth is the ignore id are counted separately and never
/// enter the matrix. An ignore id of -1 means none.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0, int ignore_label = -1);

  /// Adds one scan's points. Labels outside [0, K) throw std::out_of_range.
  void accumulate(std::span<const int> gt, std::span<const int> pred);
  void merge(const ConfusionMatrix& other);

  int num_classes() const { return k_; }
  int ignore_label() const { return ignore_; }
  std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * k_ + pred]; }
  std::uint64_t ignored() const { return ignored_; }
  std::uint64_t counted() const;

  /// TP / (TP + FP + FN) per class; nullopt for the ignore class and for
  /// classes whose union is empty.
  std::vector<std::optional<double>> iou() const;
  /// Mean over classes with a defined IoU; NaN when there are none.
  double mean_iou() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int k_ = 0;
  int ignore_ = 0;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

/// Area under the ROC curve for scores where positives should rank higher;
/// ties count one half.
double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores);

}  // namespace rvseg
