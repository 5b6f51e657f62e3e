// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rvseg {

/// One tensor whose analytic gradient is checked. `values` is perturbed in
/// place (and restored) while the loss is re-evaluated.
struct GradCheckTarget {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  double max_rel_error = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> tensors;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
  std::string summary() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  // |a - n| / max(|a|, |n|, floor); keeps entries whose true gradient is ~0
  // from turning round-off into huge relative errors.
  double denominator_floor = 1e-4;
  // 0 checks every element; otherwise an evenly strided subset.
  std::size_t max_elements_per_tensor = 0;
};

double relative_error(double analytic, double numeric, double floor);

/// Central finite differences of `loss` against the analytic gradients of
/// every listed tensor; reports the worst relative error.
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const GradCheckTarget> targets,
                           const GradCheckOptions& options = {});

}  // namespace rvseg
