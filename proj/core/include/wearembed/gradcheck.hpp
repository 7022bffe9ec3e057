// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wearembed/tensor.hpp"

namespace wearembed {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error.
  double absolute_floor = 1e-8;
  /// Entries probed per parameter; 0 probes all of them. Larger parameters
  /// are probed at a deterministic evenly spaced subset.
  std::size_t max_entries_per_parameter = 0;
};

struct ParameterCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParameterCheck> parameters;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Compares analytic gradients against central finite differences.
///
/// `forward` evaluates the graph and must return a one-element tensor;
/// `backward` runs the backward pass for the most recent forward with seed
/// gradient 1 and accumulates into each Parameter::grad. Parameter values
/// are restored exactly after probing.
GradCheckReport gradient_check(const std::function<Tensor()>& forward,
                               const std::function<void()>& backward,
                               std::span<Parameter* const> params,
                               const GradCheckOptions& options = {});

}  // namespace wearembed
