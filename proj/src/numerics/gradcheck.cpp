#include "nsbm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nsbm {

GradCheckReport finite_difference_check(const std::function<Var(Tape&)>& build,
                                         ParameterStore& params, GradCheckOptions options) {
  evaluate_with_gradients(build, params);
  std::vector<Tensor> analytic;
  for (const auto& p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  std::size_t pi = 0;
  for (const auto& p : params) {
    const Tensor& ga = analytic[pi++];
    if (!p->requires_grad) continue;
    GradCheckEntry entry;
    entry.name = p->name;
    const std::size_t n = p->value.size();
    const std::size_t stride =
        options.max_entries == 0 || n <= options.max_entries ? 1 : (n + options.max_entries - 1) / options.max_entries;
    for (std::size_t k = 0; k < n; k += stride) {
      const double saved = p->value[k];
      p->value[k] = saved + options.step;
      const double up = evaluate(build);
      p->value[k] = saved - options.step;
      const double down = evaluate(build);
      p->value[k] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = ga[k];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double err = scale < options.floor ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
      const double e = std::isnan(err) ? INFINITY : err;
      if (k == 0 || e > entry.max_error) {
        entry.max_error = e;
        entry.worst_index = k;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    entry.passed = entry.max_error <= options.tolerance;
    report.passed = report.passed && entry.passed;
    report.max_error = std::max(report.max_error, entry.max_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << (e.passed ? "ok   " : "FAIL ") << e.name << " max_err=" << e.max_error << " at " << e.worst_index
       << " (analytic " << e.analytic << ", numeric " << e.numeric << ")\n";
  }
  return os.str();
}

}  // namespace nsbm
