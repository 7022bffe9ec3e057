// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Prints one PASS/FAIL line per criterion and exits non-zero on any FAIL.
// Optional arguments select criteria by number.

#include <chrono>
#include <cstdio>
#include <exception>
#include <set>
#include <string>

#include "criteria.hpp"
#include "wearembed/text_format.hpp"

namespace wearembed::acceptance {

void Verdict::expect(bool ok, const std::string& what) {
  if (ok) return;
  if (failures_ < 3) first_failures_ += (first_failures_.empty() ? "" : "; ") + what;
  ++failures_;
}

void Verdict::note(const std::string& text) { notes_ += (notes_.empty() ? "" : ", ") + text; }

std::string Verdict::summary() const {
  if (passed()) return notes_;
  return std::to_string(failures_) + " failed: " + first_failures_ +
         (notes_.empty() ? "" : " | " + notes_);
}

}  // namespace wearembed::acceptance

int main(int argc, char** argv) {
  using namespace wearembed::acceptance;
  const Criterion criteria[] = {
      {1, "kernel oracle equivalence", 10, kernel_oracles},
      {2, "finite-difference gradient suite", 60, gradient_suite},
      {3, "masked slots leave loss and gradients unchanged", 0, masking},
      {4, "worked examples", 0, fidelity_examples},
      {5, "TrainConfig defaults", 0, default_config},
      {6, "reference training run", 600, reference_run},
      {7, "end-to-end CLI determinism", 0, cli_determinism},
      {8, "aggregator permutation and date-shift symmetry", 0, aggregator_symmetry},
      {9, "metric oracles", 0, metric_oracles},
      {10, "checkpoint resume matches uninterrupted run", 0, checkpoint_resume},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    Verdict verdict;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(verdict);
    } catch (const std::exception& e) {
      verdict.expect(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0) {
      verdict.expect(seconds <= c.budget_seconds,
                     "took " + wearembed::format_fixed(seconds, 1) + " s, budget " +
                         wearembed::format_fixed(c.budget_seconds, 0) + " s");
    }
    const bool ok = verdict.passed();
    failed += !ok;
    std::printf("criterion %2d %s  %s (%s; %.1f s)\n", c.number, ok ? "PASS" : "FAIL",
                c.title.c_str(), verdict.summary().c_str(), seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
