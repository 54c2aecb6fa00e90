#include "ion/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ion {

FiniteDiff finite_diff_grad(const std::function<double(const std::vector<double>&)>& scalar_fn,
                            const std::vector<double>& point, double epsilon, Rng* rng) {
  check(epsilon > 0.0, "finite_diff_grad: epsilon must be positive");
  FiniteDiff result;
  const size_t n = point.size();
  if (n > 10000 && rng != nullptr) {
    std::set<size_t> picked;
    size_t want = std::max<size_t>(200, n / 200);
    while (picked.size() < want) picked.insert(static_cast<size_t>(rng->uniform_int(static_cast<int>(n))));
    result.probes.assign(picked.begin(), picked.end());
  } else {
    result.probes.resize(n);
    for (size_t i = 0; i < n; ++i) result.probes[i] = i;
  }

  std::vector<double> x = point;
  result.grad.reserve(result.probes.size());
  for (size_t idx : result.probes) {
    double orig = x[idx];
    x[idx] = orig + epsilon;
    double fp = scalar_fn(x);
    x[idx] = orig - epsilon;
    double fm = scalar_fn(x);
    x[idx] = orig;
    check(std::isfinite(fp) && std::isfinite(fm), "finite_diff_grad: non-finite function value");
    result.grad.push_back((fp - fm) / (2.0 * epsilon));
  }
  return result;
}

double max_rel_error(const std::vector<double>& analytic, const FiniteDiff& fd) {
  double worst = 0.0;
  for (size_t k = 0; k < fd.probes.size(); ++k) {
    double a = analytic[fd.probes[k]];
    double b = fd.grad[k];
    double denom = std::max(std::abs(a), std::abs(b));
    double err = (denom < 1e-6) ? std::abs(a - b) : std::abs(a - b) / denom;
    worst = std::max(worst, err);
  }
  return worst;
}

GradCheckReport grad_check(const std::string& op_name,
                           const std::function<double(const std::vector<double>&)>& scalar_fn,
                           const std::vector<double>& point, const std::vector<double>& analytic_grad,
                           double epsilon, Rng* rng) {
  check(analytic_grad.size() == point.size(), "grad_check: analytic gradient size mismatch");
  FiniteDiff fd = finite_diff_grad(scalar_fn, point, epsilon, rng);
  GradCheckReport report;
  report.op_name = op_name;
  report.epsilon = epsilon;
  report.num_probes = static_cast<int>(fd.probes.size());
  report.max_rel_error = max_rel_error(analytic_grad, fd);
  return report;
}

}  // namespace ion
