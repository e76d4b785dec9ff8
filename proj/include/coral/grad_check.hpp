#ifndef CORAL_GRAD_CHECK_HPP
#define CORAL_GRAD_CHECK_HPP

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace coral::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  size_t worst_index = 0;
  size_t checked = 0;
  bool pass = false;
};

// Central-difference comparison of an analytic gradient. loss() must
// recompute the forward pass from the current contents of params; entries of
// params are perturbed in place and restored. indices empty = check all.
template <typename T>
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<T> params, std::span<const T> analytic,
                           double step, double tolerance,
                           std::span<const size_t> indices = {}) {
  GradCheckReport report;
  std::vector<size_t> all;
  if (indices.empty()) {
    all.resize(params.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    indices = all;
  }
  for (size_t idx : indices) {
    const T saved = params[idx];
    const double h = step * std::max(1.0, std::abs(static_cast<double>(saved)));
    params[idx] = static_cast<T>(saved + h);
    const double up = loss();
    params[idx] = static_cast<T>(saved - h);
    const double down = loss();
    params[idx] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double an = static_cast<double>(analytic[idx]);
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-12});
    const double rel = std::abs(fd - an) / denom;
    ++report.checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = idx;
    }
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace coral::nn

#endif
