#include "nsbm/optim.hpp"

#include <cmath>

#include "nsbm/error.hpp"

namespace nsbm {

void Adam::step(ParameterStore& params) {
  for (const auto& p : params) {
    if (!p->requires_grad) continue;
    for (double g : p->grad.values()) {
      if (!std::isfinite(g)) throw NumericalError("adam: non-finite gradient in parameter '" + p->name + "'");
    }
  }
  std::size_t i = 0;
  for (const auto& p : params) {
    if (i == moments_.size()) {
      moments_.push_back({Tensor(p->value.rows(), p->value.cols()), Tensor(p->value.rows(), p->value.cols())});
    }
    Moments& mom = moments_[i++];
    if (!mom.m.same_shape(p->value)) {
      throw ShapeError("adam: moment shape " + mom.m.shape_string() + " does not match parameter '" +
                       p->name + "' " + p->value.shape_string());
    }
    if (!p->requires_grad || !p->grad.same_shape(p->value)) continue;
    const auto t = static_cast<double>(steps_ + 1);
    const double bc1 = 1.0 - std::pow(config_.beta1, t);
    const double bc2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double g = p->grad[k];
      mom.m[k] = config_.beta1 * mom.m[k] + (1.0 - config_.beta1) * g;
      mom.v[k] = config_.beta2 * mom.v[k] + (1.0 - config_.beta2) * g * g;
      const double mhat = mom.m[k] / bc1;
      const double vhat = mom.v[k] / bc2;
      p->value[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
  ++steps_;
}

void Adam::restore(std::size_t steps, std::vector<Moments> moments) {
  steps_ = steps;
  moments_ = std::move(moments);
}

}  // namespace nsbm
