#pragma once

// Finite-difference validation of every gradient path the trainer uses:
// the attention path through the rule predictions, the supervised
// classifier path, the self-training path, and the joint weighted
// objective, each on seeded random micro-instances.

#include <cstdint>
#include <string>

namespace covote {

struct GradCheckReport {
  bool pass = true;
  double worst_rel_err = 0;
  std::string worst_case;  // e.g. "attention-path trial 3: attention.w1[7]"
  int trials = 0;
  double tolerance = 1e-5;
};

// corrupt_tensor is a test hook: the analytic gradient of the named
// tensor ("attention.w1", "classifier.b2", ...) is perturbed before
// comparison, so a working checker must fail and name it.
GradCheckReport run_gradcheck_suite(uint64_t seed, int trials,
                                    const std::string& corrupt_tensor = "");

}  // namespace covote
