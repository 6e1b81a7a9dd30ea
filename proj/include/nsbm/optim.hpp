#pragma once

#include <cstddef>
#include <vector>

#include "nsbm/autodiff.hpp"

namespace nsbm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer over a ParameterStore. Moments are created
/// lazily in store order, so a restored state must come from the same store
/// layout.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// One update from the gradients currently held by the parameters. Throws
  /// NumericalError naming the first parameter with a non-finite gradient;
  /// in that case no parameter is modified.
  void step(ParameterStore& params);

  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::size_t step_count() const noexcept { return steps_; }

  // Exposed for checkpoints.
  struct Moments {
    Tensor m;
    Tensor v;
  };
  const std::vector<Moments>& moments() const noexcept { return moments_; }
  void restore(std::size_t steps, std::vector<Moments> moments);

 private:
  AdamConfig config_;
  std::size_t steps_ = 0;
  std::vector<Moments> moments_;
};

}  // namespace nsbm
