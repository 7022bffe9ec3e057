// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance criteria 1-10. Each check returns a verdict plus a short
// account of what it measured.

#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace wearembed::acceptance {

/// Collects failed expectations; the first few are kept for the report.
class Verdict {
 public:
  void expect(bool ok, const std::string& what);
  void note(const std::string& text);

  bool passed() const { return failures_ == 0; }
  std::string summary() const;

 private:
  std::size_t failures_ = 0;
  std::string first_failures_;
  std::string notes_;
};

struct Criterion {
  int number;
  std::string title;
  double budget_seconds;  // 0: none
  std::function<void(Verdict&)> run;
};

void kernel_oracles(Verdict& v);
void gradient_suite(Verdict& v);
void masking(Verdict& v);
void fidelity_examples(Verdict& v);
void default_config(Verdict& v);
void reference_run(Verdict& v);
void cli_determinism(Verdict& v);
void aggregator_symmetry(Verdict& v);
void metric_oracles(Verdict& v);
void checkpoint_resume(Verdict& v);

}  // namespace wearembed::acceptance
