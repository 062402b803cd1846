#include "mimic/core.hpp"
#include "mimic/random.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace mimic;

TEST_CASE("label_distance worked examples") {
  CHECK(label_distance(SoftLabel::one_hot(3, 7), SoftLabel::one_hot(3, 7)) == 0.0);
  const std::vector<double> b = {0.7, 0.3, 0, 0, 0, 0, 0};
  CHECK(label_distance(SoftLabel::one_hot(0, 7), validate_soft_label(b)) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(label_distance(SoftLabel::one_hot(0, 7), SoftLabel::one_hot(1, 7)) == 1.0);
  CHECK_THROWS_AS(label_distance(SoftLabel::one_hot(0, 3), SoftLabel::one_hot(0, 4)), ContractViolation);
}

TEST_CASE("validate_soft_label accepts simplex points and names the problem otherwise") {
  const std::vector<double> one_hot = {0, 1, 0};
  CHECK(validate_soft_label(one_hot).is_one_hot());
  const std::vector<double> half = {0.5, 0.5, 0.0};
  CHECK_FALSE(validate_soft_label(half).is_one_hot());

  const std::vector<double> bad_sum = {0.5, 0.6, 0.0};
  CHECK_THROWS_WITH_AS(validate_soft_label(bad_sum), doctest::Contains("sum to 1.1"), ValidationError);
  const std::vector<double> negative = {1.2, -0.2, 0.0};
  CHECK_THROWS_WITH_AS(validate_soft_label(negative), doctest::Contains("entry 1"), ValidationError);
  const std::vector<double> nan = {NAN, 1.0};
  CHECK_THROWS_AS(validate_soft_label(nan), ValidationError);
}

TEST_CASE("label_distance is a metric on the simplex") {
  RandomSource rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(8));
    const SoftLabel a = test::random_soft_label(k, rng);
    const SoftLabel b = test::random_soft_label(k, rng);
    const SoftLabel c = test::random_soft_label(k, rng);
    const double ab = label_distance(a, b);
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0 + 1e-12);
    REQUIRE(ab == label_distance(b, a));
    REQUIRE(label_distance(a, a) == 0.0);
    REQUIRE(ab > 0.0);  // continuous draws never coincide
    REQUIRE(label_distance(a, c) <= ab + label_distance(b, c) + 1e-12);
  }
}

TEST_CASE("distance from a one-hot anchor to its mix is one minus the coefficient") {
  RandomSource rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(6));
    const int c = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
    const int other = (c + 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k - 1)))) % k;
    const double lambda = rng.uniform();
    const SoftLabel mixed = SoftLabel::mix(SoftLabel::one_hot(c, k), SoftLabel::one_hot(other, k), lambda);
    REQUIRE(label_distance(SoftLabel::one_hot(c, k), mixed) == 1.0 - lambda);
  }
}

TEST_CASE("mixing two simplex points stays on the simplex") {
  RandomSource rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const SoftLabel a = test::random_soft_label(7, rng);
    const SoftLabel b = test::random_soft_label(7, rng);
    const SoftLabel m = SoftLabel::mix(a, b, rng.uniform());
    REQUIRE(m.probs().minCoeff() >= 0.0);
    REQUIRE(std::abs(m.probs().sum() - 1.0) <= kLabelTolerance);
  }
  CHECK_THROWS_AS(SoftLabel::mix(SoftLabel::one_hot(0, 2), SoftLabel::one_hot(1, 2), 1.5), ContractViolation);
  CHECK_THROWS_AS(SoftLabel::one_hot(7, 7), ContractViolation);
}

TEST_CASE("argmax takes the first maximum") {
  const std::vector<double> tie = {0.4, 0.4, 0.2};
  CHECK(validate_soft_label(tie).argmax() == 0);
  CHECK(SoftLabel::one_hot(5, 7).argmax() == 5);
}

TEST_CASE("image values must be finite and within [0, 1]") {
  Image img(4, 4, 1);
  CHECK_NOTHROW(img.validate());
  img.at(1, 2, 0) = 1.5f;
  CHECK_THROWS_AS(img.validate(), ValidationError);
  img.at(1, 2, 0) = NAN;
  CHECK_THROWS_AS(img.validate(), ValidationError);
  CHECK_THROWS_AS(Image(2, 2, 1, std::vector<float>(3)), ContractViolation);
}

TEST_CASE("random source is reproducible and splits into independent streams") {
  RandomSource a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  RandomSource root1(5), root2(5);
  RandomSource c1 = root1.split(), c2 = root2.split();
  for (int i = 0; i < 100; ++i) REQUIRE(c1.uniform() == c2.uniform());
  RandomSource d = root1.split();
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += c1.next_u64() == d.next_u64();
  CHECK(equal == 0);
}

TEST_CASE("random source draws have the right ranges and moments") {
  RandomSource rng(99);
  const int n = 200000;
  double sum = 0, sum_sq = 0, beta_sum = 0;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t k = rng.uniform_int(7);
    REQUIRE(k < 7);
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
    const double tn = rng.truncated_normal(0.02);
    REQUIRE(std::abs(tn) <= 0.04);
    const double bt = rng.beta(2.0, 2.0);
    REQUIRE(bt >= 0.0);
    REQUIRE(bt <= 1.0);
    beta_sum += bt;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(beta_sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.class_names = {"a", "b"};
  d.samples.push_back({Image(4, 4, 1), SoftLabel::one_hot(0, 2), "x"});
  d.samples.push_back({Image(4, 4, 1), SoftLabel::one_hot(1, 2), "y"});
  CHECK_NOTHROW(d.validate());
  CHECK(d.classes() == std::vector<int>{0, 1});
  d.samples.push_back({Image(8, 8, 1), SoftLabel::one_hot(1, 2), "z"});
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d.samples.back() = {Image(4, 4, 1), SoftLabel::one_hot(1, 3), "z"};
  CHECK_THROWS_AS(d.validate(), ValidationError);
}
