#include "mimic/oracle.hpp"

#include "mimic/core.hpp"

#include <algorithm>
#include <cmath>

namespace mimic::oracle {

double oracle_contrastive(const std::vector<std::vector<double>>& z,
                          const std::vector<std::vector<std::size_t>>& positives, double temperature) {
  const std::size_t n = z.size();
  expects(n <= 16, "oracle_contrastive: batch larger than 16 is outside the oracle's scope");
  expects(positives.size() == n, "oracle_contrastive: need one positive set per vector");
  expects(temperature > 0.0, "oracle_contrastive: temperature must be > 0");

  auto sim = [&](std::size_t i, std::size_t j) {
    double dot = 0.0;
    for (std::size_t k = 0; k < z[i].size(); ++k) dot += z[i][k] * z[j][k];
    return dot / temperature;
  };

  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (positives[i].empty()) continue;
    double m = -INFINITY;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i) m = std::max(m, sim(i, a));
    double anchor_sum = 0.0;
    for (std::size_t p : positives[i]) {
      expects(p < n && p != i, "oracle_contrastive: invalid positive index");
      double denom = 0.0;
      for (std::size_t a = 0; a < n; ++a)
        if (a != i) denom += std::exp(sim(i, a) - m);
      anchor_sum += -std::log(std::exp(sim(i, p) - m) / denom);
    }
    total += anchor_sum / static_cast<double>(positives[i].size());
    ++anchors;
  }
  return anchors == 0 ? 0.0 : total / static_cast<double>(anchors);
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::vector<double> theta, double h) {
  expects(h > 0.0, "finite_diff_grad: step must be > 0");
  std::vector<double> grad(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    theta[k] = saved + h;
    const double up = f(theta);
    theta[k] = saved - h;
    const double down = f(theta);
    theta[k] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericFault("finite_diff_grad: non-finite function value at coordinate " + std::to_string(k));
    }
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

GradCheckReport check_gradient(const ScalarFunction& f, const std::vector<double>& theta,
                               const std::vector<double>& analytic, double h, double tolerance,
                               const std::vector<std::pair<std::string, std::size_t>>& groups) {
  expects(analytic.size() == theta.size(), "check_gradient: analytic gradient has the wrong length");
  const std::vector<double> numeric = finite_diff_grad(f, theta, h);
  GradCheckReport report;
  report.step = h;
  report.tolerance = tolerance;
  std::vector<std::pair<std::string, std::size_t>> ranges = groups;
  if (ranges.empty()) ranges.emplace_back("theta", theta.size());
  std::size_t offset = 0;
  for (const auto& [name, length] : ranges) {
    expects(offset + length <= theta.size(), "check_gradient: groups exceed the parameter vector");
    GradCheckEntry entry{name, 0.0, 0.0, length};
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t k = offset; k < offset + length; ++k) {
      diff2 += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
      a2 += analytic[k] * analytic[k];
      n2 += numeric[k] * numeric[k];
      entry.worst_coordinate_error = std::max(entry.worst_coordinate_error, relative_error(analytic[k], numeric[k]));
    }
    entry.max_rel_error = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-8});
    offset += length;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  expects(offset == theta.size(), "check_gradient: groups do not cover every coordinate");
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace mimic::oracle
