#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nsbm/autodiff.hpp"

namespace nsbm {

struct GradCheckEntry {
  std::string name;
  double max_error = 0.0;  // relative, or absolute where both gradients are tiny
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed = true;
  double max_error = 0.0;
  std::string summary() const;
};

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  /// Below this magnitude the comparison switches to absolute error.
  double floor = 1e-3;
  /// Check at most this many entries per parameter (0 = all); picked evenly.
  std::size_t max_entries = 0;
};

/// Compares tape gradients of `build` against central differences for every
/// parameter in `params` that requires a gradient. `build` must be
/// deterministic: re-seed any sampling inside it.
GradCheckReport finite_difference_check(const std::function<Var(Tape&)>& build,
                                         ParameterStore& params, GradCheckOptions options = {});

}  // namespace nsbm
