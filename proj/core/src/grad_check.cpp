// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rvseg {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << "max_rel_error=" << max_rel_error;
  for (const auto& t : tensors) {
    os << "\n  " << t.name << ": n=" << t.checked << " worst=" << t.max_rel_error << " at ["
       << t.worst_index << "] analytic=" << t.analytic << " numeric=" << t.numeric;
  }
  return os.str();
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const GradCheckTarget> targets,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  for (const auto& target : targets) {
    if (target.values.size() != target.analytic.size()) {
      throw std::invalid_argument("grad_check: '" + target.name +
                                  "' values and analytic gradient differ in size");
    }
    GradCheckEntry entry;
    entry.name = target.name;
    const std::size_t n = target.values.size();
    std::size_t stride = 1;
    if (options.max_elements_per_tensor > 0 && n > options.max_elements_per_tensor) {
      stride = (n + options.max_elements_per_tensor - 1) / options.max_elements_per_tensor;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = target.values[i];
      target.values[i] = saved + options.step;
      const double up = loss();
      target.values[i] = saved - options.step;
      const double down = loss();
      target.values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(target.analytic[i], numeric, options.denominator_floor);
      ++entry.checked;
      if (err > entry.max_rel_error || entry.checked == 1) {
        entry.max_rel_error = std::max(err, entry.max_rel_error);
        if (err >= entry.max_rel_error) {
          entry.worst_index = i;
          entry.analytic = target.analytic[i];
          entry.numeric = numeric;
        }
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

}  // namespace rvseg
