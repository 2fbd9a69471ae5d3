#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "patchtriage/random.hpp"
#include "patchtriage/stats.hpp"

using namespace patchtriage;

namespace {

double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  std::uint64_t c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace

TEST_CASE("normal cdf and kolmogorov survival") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
  CHECK(kolmogorov_survival(0.0) == 1.0);
  // tabulated critical values of the Kolmogorov distribution
  CHECK(kolmogorov_survival(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(kolmogorov_survival(1.6276) == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("rank-sum extreme separation is exact") {
  std::vector<double> x{1, 2, 3}, y{4, 5, 6};
  TestResult r = wilcoxon_rank_sum(x, y);
  CHECK(r.method == TestMethod::exact);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_numerator == 1);
  CHECK(r.p_denominator == 10);
  CHECK(r.p_value == doctest::Approx(0.1));
  CHECK(wilcoxon_rank_sum(y, x).p_value == doctest::Approx(0.1));
}

TEST_CASE("rank-sum on all-equal samples") {
  std::vector<double> c(4, 2.5), d(5, 2.5);
  CHECK(wilcoxon_rank_sum(c, d).p_value == 1.0);
  std::vector<double> big(20, 1.0);
  CHECK(wilcoxon_rank_sum(big, big).p_value == 1.0);
  CHECK_THROWS_AS(wilcoxon_rank_sum(std::vector<double>{}, d), InvalidArgument);
}

TEST_CASE("rank-sum exact branch boundary") {
  for (std::size_t n1 = 1; n1 <= 20; ++n1) {
    for (std::size_t n2 = 1; n2 <= 40; ++n2) {
      const bool expect = n1 + n2 <= kRankSumExactMax || choose(n1 + n2, std::min(n1, n2)) <= kRankSumExactAssignments;
      CHECK(rank_sum_is_exact(n1, n2) == expect);
      CHECK(rank_sum_is_exact(n2, n1) == expect);
    }
  }
  CHECK(rank_sum_is_exact(8, 8));
  CHECK_FALSE(rank_sum_is_exact(8, 9));
  CHECK(rank_sum_is_exact(3, 40));
  CHECK_FALSE(rank_sum_is_exact(3, 41));
  CHECK_FALSE(rank_sum_is_exact(200, 300));
}

TEST_CASE("rank-sum agrees with enumeration on random tied samples") {
  Rng rng(3);
  for (int rep = 0; rep < 60; ++rep) {
    const int n1 = rng.uniform_int(3, 7), n2 = rng.uniform_int(3, 9);
    std::vector<double> x, y;
    for (int i = 0; i < n1; ++i) x.push_back(rng.uniform_int(0, 6));
    for (int i = 0; i < n2; ++i) y.push_back(rng.uniform_int(0, 6));
    TestResult r = wilcoxon_rank_sum(x, y);
    oracle::Fraction want = oracle::rank_sum_p(x, y);
    CHECK(r.method == TestMethod::exact);
    CHECK(r.p_numerator == want.num);
    CHECK(r.p_denominator == want.den);
  }
}

TEST_CASE("rank-sum normal approximation beyond the exact range") {
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x, y;
    for (int i = 0; i < 8; ++i) x.push_back(rng.normal(0.0, 1.0));
    for (int i = 0; i < 10; ++i) y.push_back(rng.normal(0.7, 1.0));
    TestResult r = wilcoxon_rank_sum(x, y);
    CHECK(r.method == TestMethod::approximate);
    oracle::Fraction want = oracle::rank_sum_p(x, y);
    CHECK(std::abs(r.p_value - static_cast<double>(want.num) / want.den) < 0.02);
  }
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) {
    a.push_back(rng.normal(0.0, 1.0));
    b.push_back(rng.normal(5.0, 1.0));
  }
  TestResult far = wilcoxon_rank_sum(a, b);
  CHECK(far.p_value < 0.001);
  CHECK(significance_stars(far.p_value) == "***");
}

TEST_CASE("signed-rank") {
  std::vector<double> y{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, x = y;
  CHECK_THROWS_AS(wilcoxon_signed_rank(x, y), NotComputable);
  for (double& v : x) v += 2.5;
  TestResult r = wilcoxon_signed_rank(x, y);
  CHECK(r.method == TestMethod::exact);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_numerator == 1);
  CHECK(r.p_denominator == 512);
  CHECK(r.p_value == doctest::Approx(2.0 / 1024.0));
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2}, std::vector<double>{1}), InvalidArgument);

  Rng rng(5);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = rng.uniform_int(5, 12);
    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(rng.uniform_int(-4, 4));
      b.push_back(rng.uniform_int(-4, 4));
    }
    int nonzero = 0;
    for (int i = 0; i < n; ++i) nonzero += a[i] != b[i];
    if (nonzero < 5) continue;
    TestResult s = wilcoxon_signed_rank(a, b);
    oracle::Fraction want = oracle::signed_rank_p(a, b);
    CHECK(s.p_numerator == want.num);
    CHECK(s.p_denominator == want.den);
  }

  std::vector<double> big_x, big_y;
  for (int i = 0; i < 20; ++i) {
    big_x.push_back(rng.normal(0.5, 1.0));
    big_y.push_back(rng.normal(0.0, 1.0));
  }
  CHECK(wilcoxon_signed_rank(big_x, big_y).method == TestMethod::approximate);
}

TEST_CASE("ks normality") {
  std::vector<double> q;
  for (int i = 1; i <= 50; ++i) q.push_back(normal_quantile((i - 0.5) / 50.0));
  TestResult good = ks_normality(q);
  CHECK(good.p_value > 0.9);
  CHECK(good.statistic < 0.05);

  std::vector<double> bimodal(25, 0.0);
  bimodal.insert(bimodal.end(), 25, 1.0);
  TestResult bad = ks_normality(bimodal);
  // largest gap sits at the jump at 0: empirical 0.5 against the fitted Phi(-0.5 / s)
  CHECK(bad.statistic == doctest::Approx(0.5 - normal_cdf(-0.5 / std::sqrt(50.0 / 49.0 * 0.25))).epsilon(1e-9));
  CHECK(bad.p_value < 0.01);

  CHECK_THROWS_AS(ks_normality(std::vector<double>(10, 3.0)), NotComputable);
  CHECK_THROWS_AS(ks_normality(std::vector<double>{1, 2, 3, 4}), NotComputable);
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(0.0005) == "***");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.03) == "*");
  CHECK(significance_stars(0.05) == "-");
  CHECK(significance_stars(0.001) == "**");
  CHECK(significance_stars(1.0) == "-");
  CHECK_THROWS_AS(significance_stars(-0.1), InvalidArgument);
  CHECK_THROWS_AS(significance_stars(1.5), InvalidArgument);
}
