#ifndef ION_GRADCHECK_SUITE_HPP_
#define ION_GRADCHECK_SUITE_HPP_

#include <string>
#include <vector>

#include "ion/gradcheck.hpp"

namespace ion {

// Central-difference verification of every differentiable op, each on several
// random small instances. corrupt_op, when set, perturbs that op's analytic
// gradient so callers can exercise the failure path (negative control).
std::vector<GradCheckReport> run_gradcheck_suite(int instances_per_op, uint64_t seed,
                                                 const std::string& corrupt_op = "");

// Names in suite order (one per differentiable op).
std::vector<std::string> gradcheck_op_names();

}  // namespace ion

#endif  // ION_GRADCHECK_SUITE_HPP_
