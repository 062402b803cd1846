#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mimic {

/// Seeded random stream. Draws are produced from mt19937_64 with our own
/// distribution transforms, because the std:: distributions are not specified
/// bit-for-bit and differ between standard libraries.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Normal truncated to [mean − 2σ, mean + 2σ] by resampling.
  double truncated_normal(double stddev);

  double gamma(double shape);
  double beta(double a, double b);

  /// Independent child stream; advances this stream by one draw.
  RandomSource split();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(values[i - 1], values[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace mimic
