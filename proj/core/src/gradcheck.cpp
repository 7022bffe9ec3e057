// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wearembed/errors.hpp"

namespace wearembed {
namespace {

double scalar_of(const Tensor& t) {
  if (t.size() != 1) {
    throw ShapeError("gradient_check: graph output must be scalar, got " +
                     shape_to_string(t.shape()));
  }
  return t[0];
}

}  // namespace

GradCheckReport gradient_check(const std::function<Tensor()>& forward,
                               const std::function<void()>& backward,
                               std::span<Parameter* const> params,
                               const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  scalar_of(forward());
  backward();

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    ParameterCheck check{p.name};
    const std::size_t count = p.value.size();
    std::size_t stride = 1;
    if (options.max_entries_per_parameter > 0 && count > options.max_entries_per_parameter) {
      stride = (count + options.max_entries_per_parameter - 1) / options.max_entries_per_parameter;
    }
    for (std::size_t i = 0; i < count; i += stride) {
      const double original = p.value[i];
      p.value[i] = original + options.step;
      const double plus = scalar_of(forward());
      p.value[i] = original - options.step;
      const double minus = scalar_of(forward());
      p.value[i] = original;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double exact = analytic[pi][i];
      const double scale = std::max({std::abs(numeric), std::abs(exact), options.absolute_floor});
      const double error = std::abs(numeric - exact) / scale;
      if (i == 0 || error > check.max_relative_error) {
        check.max_relative_error = error;
        check.worst_index = i;
        check.analytic = exact;
        check.numeric = numeric;
      }
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.parameters.push_back(std::move(check));
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace wearembed
