#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "bounds.hpp"
#include "core_stats.hpp"

using namespace ranktuner;

namespace {

// Transformation behind the indicator; the CMVT residual check needs it
// independently of the implementation.
double f_transform(double x) { return 1.0 / std::log2(x + 1.0); }

} // namespace

TEST_CASE("normalize_and_sort basic distributions") {
  const std::vector<double> two{0.0, 0.0};
  const TokenDistribution d2 = normalize_and_sort(two);
  CHECK(d2.probs[0] == doctest::Approx(0.5));
  CHECK(d2.probs[1] == doctest::Approx(0.5));
  CHECK(d2.vocab_size == 2);

  const std::vector<double> three{std::log(2.0), 0.0, 0.0};
  const TokenDistribution d3 = normalize_and_sort(three);
  CHECK(d3.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d3.probs[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d3.probs[2] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d3.sort_index[0] == 0);

  const std::vector<double> saturated{1e3, 0.0};
  const TokenDistribution ds = normalize_and_sort(saturated);
  CHECK(std::abs(ds.probs[0] - 1.0) < 1e-12);
  CHECK(ds.probs[1] < 1e-12);
  CHECK(std::isfinite(ds.probs[0]));
}

TEST_CASE("normalize_and_sort rejects bad input") {
  CHECK_THROWS_AS(normalize_and_sort(std::vector<double>{1.0}), std::invalid_argument);
  const std::vector<double> with_nan{0.0, std::nan(""), 1.0};
  CHECK_THROWS_WITH_AS(normalize_and_sort(with_nan),
                       "logits contains a non-finite entry at index 1", std::invalid_argument);
  const std::vector<double> with_inf{0.0, 1.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_WITH_AS(normalize_and_sort(with_inf),
                       "logits contains a non-finite entry at index 2", std::invalid_argument);
}

TEST_CASE("from_probs validates normalization") {
  CHECK_THROWS_AS(TokenDistribution::from_probs({0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(TokenDistribution::from_probs({1.2, -0.2}), std::invalid_argument);
  const TokenDistribution d = TokenDistribution::from_probs({0.25, 0.5, 0.25});
  CHECK(d.sort_index[0] == 1);
}

TEST_CASE("entropy_bits known values") {
  CHECK(entropy_bits(TokenDistribution::from_probs({0.25, 0.25, 0.25, 0.25})) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(entropy_bits(TokenDistribution::from_probs({1.0, 0.0})) == 0.0);
  CHECK(entropy_bits(TokenDistribution::from_probs({0.5, 0.25, 0.25})) ==
        doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("entropy_bits is permutation invariant and maximized by uniform") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> probs = sweep_distribution(rng);
    double sum = 0.0;
    for (double p : probs) sum += p;
    for (double& p : probs) p /= sum;

    const double h = entropy_bits(TokenDistribution::from_probs(probs));
    std::shuffle(probs.begin(), probs.end(), rng);
    const double h_perm = entropy_bits(TokenDistribution::from_probs(probs));
    CHECK(h == doctest::Approx(h_perm).epsilon(1e-12));
    CHECK(h <= std::log2(static_cast<double>(probs.size())) + 1e-9);
  }
}

TEST_CASE("rank_of counts ties pessimistically") {
  CHECK(rank_of(std::vector<double>{3.0, 2.0, 1.0}, 0) == 1);
  CHECK(rank_of(std::vector<double>{1.0, 1.0, 1.0}, 1) == 3);
  CHECK(rank_of(std::vector<double>{5.0, 4.0, 4.0, 1.0}, 2) == 3);
  CHECK_THROWS_AS(rank_of(std::vector<double>{1.0, 2.0}, 5), std::out_of_range);
  CHECK_THROWS_AS(rank_of(std::vector<double>{1.0, 2.0}, -1), std::out_of_range);
}

TEST_CASE("expected_rank known values") {
  CHECK(expected_rank(TokenDistribution::from_probs({1.0, 0.0})) == doctest::Approx(1.0));
  CHECK(expected_rank(TokenDistribution::from_probs({0.2, 0.2, 0.2, 0.2, 0.2})) ==
        doctest::Approx(3.0).epsilon(1e-12));
  CHECK(expected_rank(TokenDistribution::from_probs({0.5, 0.3, 0.2})) ==
        doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("support_term branches") {
  CHECK(support_term(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(support_term(2.0, 0.9) == doctest::Approx(2.0));
  CHECK(support_term(3.0, 0.9) == doctest::Approx(3.0));
  // Below the threshold the term depends on p_max only.
  CHECK(support_term(1.9, 0.5) == doctest::Approx(1.5));
}

TEST_CASE("k_full matches the regime table") {
  CHECK(k_full(1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(k_full(2.0) == doctest::Approx(0.26538156929449336).epsilon(1e-12));
  CHECK(k_full(5.0) == doctest::Approx(0.12471257872103783).epsilon(1e-12));
  CHECK(k_full(10.0) == doctest::Approx(0.07596224892199151).epsilon(1e-12));
  CHECK_THROWS_AS(k_full(0.0), std::invalid_argument);
  CHECK_THROWS_AS(k_full(-1.0), std::invalid_argument);
}

TEST_CASE("k_simplified drops the xi/(xi+1) factor") {
  CHECK(k_simplified(1.0) == doctest::Approx(1.0));
  CHECK(k_simplified(3.0) == doctest::Approx(0.25));
  CHECK(k_simplified(7.0) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK_THROWS_AS(k_simplified(0.0), std::invalid_argument);
  for (double xi : {1.0, 2.5, 17.0, 400.0}) {
    CHECK(k_simplified(xi) ==
          doctest::Approx(k_full(xi) * (xi + 1.0) / xi).epsilon(1e-12));
  }
}

TEST_CASE("k_full and k_simplified decrease strictly on [1, 1e6]") {
  double prev_full = k_full(1.0);
  double prev_simple = k_simplified(1.0);
  for (int i = 1; i <= 600; ++i) {
    const double xi = std::pow(10.0, 6.0 * i / 600.0);
    const double cur_full = k_full(xi);
    const double cur_simple = k_simplified(xi);
    CHECK(cur_full < prev_full);
    CHECK(cur_simple < prev_simple);
    prev_full = cur_full;
    prev_simple = cur_simple;
  }
}

TEST_CASE("xi_estimate modes") {
  CHECK(xi_estimate(2.0, 2.0, XiMode::Max) == doctest::Approx(2.0));
  CHECK(xi_estimate(1.0, 4.0, XiMode::Max) == doctest::Approx(4.0));
  CHECK(xi_estimate(1.0, 4.0, XiMode::Arithmetic) == doctest::Approx(2.5));
  CHECK(xi_estimate(1.0, 4.0, XiMode::Geometric) == doctest::Approx(2.0));
  CHECK(xi_estimate(1.0, 4.0, XiMode::Logarithmic) ==
        doctest::Approx(2.1640425613334453).epsilon(1e-12));
  // Small-difference fallback to the arithmetic mean.
  CHECK(xi_estimate(3.0, 3.0 + 1e-12, XiMode::Logarithmic) == doctest::Approx(3.0));
}

TEST_CASE("relative_rank_indicator known values and antisymmetry") {
  CHECK(relative_rank_indicator(5.0, 5.0) == doctest::Approx(1.0));
  CHECK(relative_rank_indicator(1.0, 3.0) ==
        doctest::Approx(1.4142135623730951).epsilon(1e-12));
  CHECK(relative_rank_indicator(3.0, 1.0) ==
        doctest::Approx(0.7071067811865476).epsilon(1e-12));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pick(1.0, 100.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double a = pick(rng);
    const double b = pick(rng);
    CHECK(relative_rank_indicator(a, b) * relative_rank_indicator(b, a) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("indicator approaches 1 when both ranks grow") {
  const double far = relative_rank_indicator(900.0, 1800.0);
  const double near = relative_rank_indicator(3.0, 6.0);
  CHECK(std::abs(far - 1.0) < std::abs(near - 1.0));
  CHECK(far == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("relative_scale known values") {
  CHECK(relative_scale(1.0, 0.0, 1.0, 1, XiMode::Max) == doctest::Approx(1.0));
  CHECK(relative_scale(0.25, 2.0, 0.25, 2, XiMode::Max) ==
        doctest::Approx(1.3177460375849426).epsilon(1e-12));
  // p * s(H) = 1 is the neutral point.
  CHECK(relative_scale(0.5, 2.0, 0.5, 1, XiMode::Max) == doctest::Approx(1.0));
}

TEST_CASE("relative_scale respects floor and ceiling") {
  // p underflow hits the probability floor, then the ceiling clamps.
  CHECK(relative_scale(0.0, 0.0, 1.0, 1, XiMode::Max) == doctest::Approx(kDefaultScaleCeiling));
  CHECK(relative_scale(1e-300, 0.0, 1.0, 1, XiMode::Max, 100.0) == doctest::Approx(100.0));
  CHECK(relative_scale(1e-300, 0.0, 1.0, 1, XiMode::Max, 7.5) == doctest::Approx(7.5));
}

TEST_CASE("token_stats bundles are consistent") {
  SUBCASE("near one-hot") {
    const std::vector<double> logits{50.0, 0.0, 0.0, 0.0};
    const TokenStats st = token_stats(logits, 0, XiMode::Max);
    CHECK(st.p == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(st.rank == 1);
    CHECK(st.entropy_bits == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(st.scale == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(st.indicator == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("uniform over four") {
    const std::vector<double> logits{0.0, 0.0, 0.0, 0.0};
    const TokenStats st = token_stats(logits, 2, XiMode::Max);
    CHECK(st.p == doctest::Approx(0.25));
    CHECK(st.rank == 4);
    CHECK(st.entropy_bits == doctest::Approx(2.0));
    CHECK(st.expected_rank == doctest::Approx(2.5));
    CHECK(st.support_term == doctest::Approx(2.0));
  }

  SUBCASE("asymmetric three-way") {
    const std::vector<double> logits{std::log(2.0), 0.0, 0.0};
    const TokenStats st = token_stats(logits, 1, XiMode::Max);
    CHECK(st.p == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(st.rank == 3);
    CHECK(st.entropy_bits == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(st.support_term == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(st.xi == doctest::Approx(3.0));
    CHECK(st.k_coeff == doctest::Approx(k_simplified(st.xi)));
    CHECK(st.scale ==
          doctest::Approx(std::pow(st.p * st.support_term, -st.k_coeff)).epsilon(1e-12));
  }
}

TEST_CASE("bound and surrogate properties hold on a seeded sweep") {
  constexpr std::uint64_t kSweepSeed = 20260810;
  std::mt19937_64 rng(kSweepSeed);
  int eq4_violations = 0;
  int eq5_violations = 0;
  int surrogate_violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> probs = sweep_distribution(rng);
    double sum = 0.0;
    for (double p : probs) sum += p;
    for (double& p : probs) p /= sum;
    std::uniform_int_distribution<int> target_dist(0, static_cast<int>(probs.size()) - 1);
    const int target = target_dist(rng);

    const TokenStats st = token_stats(TokenDistribution::from_probs(probs), target, XiMode::Max);
    if (st.rank * st.p > 1.0 + 1e-9) ++eq4_violations;
    if (st.expected_rank < st.support_term - 1e-9) ++eq5_violations;

    // One-sided surrogate with the same exponent on both sides.
    const double lhs = std::pow(st.expected_rank / st.rank, st.k_coeff);
    const double rhs = std::pow(st.p * st.support_term, st.k_coeff);
    if (lhs < rhs - 1e-9) ++surrogate_violations;
  }
  CHECK(eq4_violations == 0);
  CHECK(eq5_violations == 0);
  CHECK(surrogate_violations == 0);
}

TEST_CASE("a CMVT witness exists strictly between rank and expected rank") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pick(1.0, 50.0);
  for (int trial = 0; trial < 1000; ++trial) {
    double a = pick(rng);
    double b = pick(rng);
    if (std::abs(a - b) < 1e-6) continue;
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double delta_f = f_transform(a) - f_transform(b);
    const double delta_log = std::log2(a) - std::log2(b);

    auto residual = [&](double xi) { return delta_f + k_full(xi) * delta_log; };
    const double r_lo = residual(lo);
    const double r_hi = residual(hi);
    REQUIRE(r_lo * r_hi < 0.0);

    double left = lo;
    double right = hi;
    for (int iter = 0; iter < 200 && right - left > 1e-13; ++iter) {
      const double mid = 0.5 * (left + right);
      if (residual(mid) * r_lo <= 0.0) {
        right = mid;
      } else {
        left = mid;
      }
    }
    const double root = 0.5 * (left + right);
    CHECK(root > lo);
    CHECK(root < hi);
    CHECK(std::abs(residual(root)) < 1e-9);
  }
}
