#pragma once

// Helpers shared by the unit tests: random fixtures and small oracles that
// do not go through the library code paths they check.

#include "mimic/core.hpp"
#include "mimic/random.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace mimic::test {

/// Uniform point on the K-simplex (normalized exponentials).
inline std::vector<double> random_simplex(int k, RandomSource& rng) {
  std::vector<double> v(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (double& x : v) {
    x = -std::log(1.0 - rng.uniform());
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

inline SoftLabel random_soft_label(int k, RandomSource& rng) {
  const std::vector<double> v = random_simplex(k, rng);
  return validate_soft_label(v);
}

inline Image random_image(int h, int w, int c, RandomSource& rng) {
  Image img(h, w, c);
  for (float& x : img.data()) x = static_cast<float>(rng.uniform());
  return img;
}

inline Image constant_image(int h, int w, int c, float value) {
  Image img(h, w, c);
  for (float& x : img.data()) x = value;
  return img;
}

/// Entries uniform in [−1, 1).
inline Matrix<double> random_matrix(Index rows, Index cols, RandomSource& rng) {
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

inline Matrix<double> random_unit_rows(Index n, Index d, RandomSource& rng) {
  Matrix<double> z(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) z(i, j) = rng.normal();
    z.row(i).normalize();
  }
  return z;
}

inline std::vector<std::vector<double>> rows_of(const Matrix<double>& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  return out;
}

/// Closed-form ridge regression on raw pixels (plus bias) to one-hot targets;
/// returns test accuracy. Independent of everything trained in the library.
inline double ridge_probe_accuracy(const Dataset& train, const Dataset& test, double ridge = 1.0) {
  const auto features = [](const Dataset& d) {
    const Index dim = static_cast<Index>(d.samples.at(0).image.size());
    Eigen::MatrixXd x(static_cast<Index>(d.size()), dim + 1);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto px = d.samples[i].image.data();
      for (Index j = 0; j < dim; ++j) x(static_cast<Index>(i), j) = px[static_cast<std::size_t>(j)];
      x(static_cast<Index>(i), dim) = 1.0;
    }
    return x;
  };
  const Eigen::MatrixXd x = features(train);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), train.num_classes());
  for (std::size_t i = 0; i < train.size(); ++i) y(static_cast<Index>(i), train.samples[i].label.argmax()) = 1.0;
  const Eigen::MatrixXd gram = x.transpose() * x + ridge * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);
  const Eigen::MatrixXd scores = features(test) * w;
  int correct = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    Index k = 0;
    scores.row(i).maxCoeff(&k);
    correct += static_cast<int>(k) == test.samples[static_cast<std::size_t>(i)].label.argmax();
  }
  return static_cast<double>(correct) / static_cast<double>(scores.rows());
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mimic_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mimic::test
