#ifndef ION_GRADCHECK_HPP_
#define ION_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "ion/tensor.hpp"

namespace ion {

struct GradCheckReport {
  std::string op_name;
  double max_rel_error = 0.0;
  int num_probes = 0;
  double epsilon = 0.0;
};

// Central differences (f(x+eps) - f(x-eps)) / 2eps per coordinate. For points
// larger than 10^4 entries a random subset of at least 200 coordinates is
// probed; the probed indices are returned so analytic gradients can be
// compared entry for entry.
struct FiniteDiff {
  std::vector<double> grad;    // gradient per probed coordinate
  std::vector<size_t> probes;  // probed coordinate indices (ascending)
};

FiniteDiff finite_diff_grad(const std::function<double(const std::vector<double>&)>& scalar_fn,
                            const std::vector<double>& point, double epsilon, Rng* rng);

// max over probed coordinates of |a-b| / max(|a|,|b|), with tiny pairs
// compared absolutely so finite-difference noise near zero is not amplified.
double max_rel_error(const std::vector<double>& analytic, const FiniteDiff& fd);

// Convenience wrapper: checks a full analytic gradient against finite
// differences of scalar_fn at point.
GradCheckReport grad_check(const std::string& op_name,
                           const std::function<double(const std::vector<double>&)>& scalar_fn,
                           const std::vector<double>& point, const std::vector<double>& analytic_grad,
                           double epsilon, Rng* rng);

}  // namespace ion

#endif  // ION_GRADCHECK_HPP_
