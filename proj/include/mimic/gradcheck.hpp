#pragma once

#include "mimic/backbone.hpp"
#include "mimic/oracle.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mimic {

struct GradCheckOptions {
  int points = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
};

struct GradCheckCase {
  std::string name;
  std::vector<oracle::GradCheckReport> reports;  // one per random point
  double max_rel_error = 0.0;
  bool pass = false;
};

/// Small double-precision model used by the end-to-end checks.
ModelConfig gradcheck_model_config();

/// Runs every gradient check (losses, heads, encoder, both end-to-end paths)
/// at `points` random parameter points each.
std::vector<GradCheckCase> run_gradient_checks(const GradCheckOptions& opts);

}  // namespace mimic
