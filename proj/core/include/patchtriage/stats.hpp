#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace patchtriage {

enum class TestMethod { exact, approximate };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::approximate;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  /// For exact tests: p_value == p_numerator / p_denominator, reduced.
  std::uint64_t p_numerator = 0;
  std::uint64_t p_denominator = 0;
};

/// Largest signed-rank sample solved by exact enumeration.
inline constexpr std::size_t kSignedRankExactMax = 12;
/// Every rank-sum sample with n1 + n2 up to this is solved exactly.
inline constexpr std::size_t kRankSumExactMax = 16;
/// Larger samples are still solved exactly while C(n1+n2, n1) stays within
/// the assignment count of the balanced 16-point case, C(16, 8).
inline constexpr std::uint64_t kRankSumExactAssignments = 12870;

/// Whether wilcoxon_rank_sum takes the exact branch for these sizes.
bool rank_sum_is_exact(std::size_t n1, std::size_t n2) noexcept;

double normal_cdf(double x) noexcept;

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda) noexcept;

/// One-sample KS statistic against Normal(mean, sd) fitted to the sample
/// (sample sd, no Lilliefors correction); p from the asymptotic Kolmogorov
/// law of sqrt(n) * D. Needs n >= 5 and non-zero variance.
TestResult ks_normality(std::span<const double> sample);

/// Two-sided Wilcoxon signed-rank test on paired differences x - y.
/// Statistic is min(W+, W-) over midranks of the non-zero |differences|.
TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test. Statistic is U for x.
TestResult wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y);

/// "***" p<0.001, "**" p<0.01, "*" p<0.05, "-" otherwise.
std::string significance_stars(double p);

}  // namespace patchtriage
