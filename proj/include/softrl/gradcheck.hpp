#pragma once

#include <cstdint>
#include <string>

#include "softrl/rng.hpp"

namespace softrl {

struct GradcheckReport {
  std::string suite;
  int instances = 0;
  int failures = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  bool passed() const { return failures == 0; }
};

// suite is one of "metal", "mesh", "approx". Each instance draws a fresh
// random problem, evaluates the closed form against its finite-difference
// oracle, and scores the relative error.
GradcheckReport run_gradcheck(const std::string& suite, int n_instances,
                              std::uint64_t seed, double tolerance);

std::string gradcheck_report_line(const GradcheckReport& r);

// Single-instance relative errors, shared with the unit tests.
double metal_instance_check(Rng& rng);
double mesh_instance_check(Rng& rng);
double approx_instance_check(Rng& rng);

}  // namespace softrl
