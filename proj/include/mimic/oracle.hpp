#pragma once

// Deliberately naive reference implementations used to check the fast paths.
// Nothing here calls into losses.hpp or backbone.hpp.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace mimic::oracle {

/// Direct double-loop supervised contrastive loss over explicit positive
/// index sets; anchors with no positives are skipped. Limited to 16 vectors.
double oracle_contrastive(const std::vector<std::vector<double>>& z,
                          const std::vector<std::vector<std::size_t>>& positives, double temperature);

using ScalarFunction = std::function<double(const std::vector<double>&)>;

/// Central differences (f(θ + h·e_k) − f(θ − h·e_k)) / 2h for every k.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::vector<double> theta, double h);

/// |a − b| / max(|a|, |b|, 1e-8) for scalars.
double relative_error(double a, double b);

/// Error for one named parameter tensor. `max_rel_error` applies the
/// relative-error metric with |·| taken as the Euclidean norm over the tensor;
/// `worst_coordinate_error` is the element-wise maximum, kept for diagnosis
/// (it is dominated by finite-difference rounding on near-zero entries).
struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double worst_coordinate_error = 0.0;
  std::size_t coordinates = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Compares an analytic gradient with central differences of f at θ.
/// `groups` optionally names contiguous coordinate ranges (name, length).
GradCheckReport check_gradient(const ScalarFunction& f, const std::vector<double>& theta,
                               const std::vector<double>& analytic, double h, double tolerance,
                               const std::vector<std::pair<std::string, std::size_t>>& groups = {});

}  // namespace mimic::oracle
