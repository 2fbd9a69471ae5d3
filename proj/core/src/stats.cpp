#include "patchtriage/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "patchtriage/errors.hpp"

namespace patchtriage {

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double kolmogorov_survival(double lambda) noexcept {
  if (lambda <= 0.0) return 1.0;
  double p;
  if (lambda < 1.0) {
    // Theta-function form converges fast for small lambda.
    double cdf = 0.0;
    const double a = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    for (int k = 1; k <= 50; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(-odd * odd * a);
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    p = 1.0 - cdf;
  } else {
    p = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      p += (k % 2 == 1 ? 2.0 : -2.0) * term;
      if (term < 1e-18) break;
    }
  }
  return std::clamp(p, 0.0, 1.0);
}

namespace {

// Twice the midranks (1-based) of `values`, so tied ranks stay integral.
std::vector<long long> doubled_midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<long long> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share rank ((i+1)+(j+1))/2
    const long long twice = static_cast<long long>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = twice;
    i = j + 1;
  }
  return ranks;
}

// Sum over tie groups of t^3 - t.
double tie_term(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double acc = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    acc += t * t * t - t;
    i = j + 1;
  }
  return acc;
}

void set_exact(TestResult& r, std::uint64_t num, std::uint64_t den) {
  const std::uint64_t g = std::gcd(num, den);
  r.p_numerator = num / g;
  r.p_denominator = den / g;
  r.p_value = static_cast<double>(r.p_numerator) / static_cast<double>(r.p_denominator);
  r.method = TestMethod::exact;
}

double two_sided_normal(double deviation, double sd) {
  if (sd <= 0.0) return 1.0;
  const double z = (std::abs(deviation) - 0.5) / sd;
  if (z <= 0.0) return 1.0;
  return std::clamp(std::erfc(z / std::numbers::sqrt2), 0.0, 1.0);
}

}  // namespace

TestResult ks_normality(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 5) throw NotComputable("ks_normality: need at least 5 observations");
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw NotComputable("ks_normality: sample has zero variance");

  std::vector<double> v(sample.begin(), sample.end());
  std::sort(v.begin(), v.end());
  double d = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[j + 1] == v[i]) ++j;
    const double f = normal_cdf((v[i] - mean) / sd);
    const double below = static_cast<double>(i) / static_cast<double>(n);
    const double at = static_cast<double>(j + 1) / static_cast<double>(n);
    d = std::max({d, std::abs(at - f), std::abs(f - below)});
    i = j + 1;
  }
  TestResult r;
  r.statistic = d;
  r.p_value = kolmogorov_survival(std::sqrt(static_cast<double>(n)) * d);
  r.method = TestMethod::approximate;
  r.n1 = n;
  return r;
}

TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("wilcoxon_signed_rank: samples must have equal length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw NotComputable("wilcoxon_signed_rank: all differences are zero");
  if (diffs.size() < 5) throw NotComputable("wilcoxon_signed_rank: fewer than 5 non-zero differences");

  const std::size_t n = diffs.size();
  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(diffs[i]);
  const auto ranks2 = doubled_midranks(mags);
  long long plus2 = 0;
  long long total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += ranks2[i];
    if (diffs[i] > 0) plus2 += ranks2[i];
  }
  const long long w2 = std::min(plus2, total2 - plus2);

  TestResult r;
  r.statistic = static_cast<double>(w2) / 2.0;
  r.n1 = n;
  r.n2 = n;
  if (n <= kSignedRankExactMax) {
    // counts[s] = number of sign patterns whose positive doubled-rank sum is s
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(total2) + 1, 0);
    counts[0] = 1;
    for (long long rk : ranks2) {
      for (long long s = total2; s >= rk; --s) counts[static_cast<std::size_t>(s)] += counts[static_cast<std::size_t>(s - rk)];
    }
    std::uint64_t extreme = 0;
    for (long long s = 0; s <= total2; ++s) {
      if (std::min(s, total2 - s) <= w2) extreme += counts[static_cast<std::size_t>(s)];
    }
    set_exact(r, extreme, std::uint64_t{1} << n);
  } else {
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term(mags) / 48.0;
    r.p_value = two_sided_normal(r.statistic - mu, std::sqrt(std::max(var, 0.0)));
    r.method = TestMethod::approximate;
  }
  return r;
}

bool rank_sum_is_exact(std::size_t n1, std::size_t n2) noexcept {
  if (n1 + n2 <= kRankSumExactMax) return true;
  // C(n1+n2, k) built up one factor at a time; stops once past the limit
  const std::size_t k = std::min(n1, n2);
  std::uint64_t c = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * (n1 + n2 - k + i) / i;
    if (c > kRankSumExactAssignments) return false;
  }
  return true;
}

TestResult wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw InvalidArgument("wilcoxon_rank_sum: samples must be non-empty");
  if (x.size() < 3 || y.size() < 3) throw InvalidArgument("wilcoxon_rank_sum: each sample needs at least 3 values");
  const std::size_t n1 = x.size();
  const std::size_t n2 = y.size();
  const std::size_t total = n1 + n2;
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks2 = doubled_midranks(pooled);
  long long r1_2 = 0;
  for (std::size_t i = 0; i < n1; ++i) r1_2 += ranks2[i];
  // 2U = 2R1 - n1(n1+1); deviation from the null centre n1*n2 (in doubled units)
  const long long n1l = static_cast<long long>(n1);
  const long long n2l = static_cast<long long>(n2);
  const long long u2 = r1_2 - n1l * (n1l + 1);
  const long long dev_obs = std::llabs(u2 - n1l * n2l);

  TestResult r;
  r.statistic = static_cast<double>(u2) / 2.0;
  r.n1 = n1;
  r.n2 = n2;
  if (rank_sum_is_exact(n1, n2)) {
    const long long max_sum = std::accumulate(ranks2.begin(), ranks2.end(), 0LL);
    // ways[k][s]: subsets of size k with doubled-rank sum s
    std::vector<std::vector<std::uint64_t>> ways(n1 + 1, std::vector<std::uint64_t>(static_cast<std::size_t>(max_sum) + 1, 0));
    ways[0][0] = 1;
    for (std::size_t i = 0; i < total; ++i) {
      const long long rk = ranks2[i];
      for (std::size_t k = std::min(i + 1, n1); k >= 1; --k) {
        for (long long s = max_sum; s >= rk; --s) {
          ways[k][static_cast<std::size_t>(s)] += ways[k - 1][static_cast<std::size_t>(s - rk)];
        }
      }
    }
    std::uint64_t extreme = 0;
    std::uint64_t all = 0;
    for (long long s = 0; s <= max_sum; ++s) {
      const std::uint64_t c = ways[n1][static_cast<std::size_t>(s)];
      if (c == 0) continue;
      all += c;
      const long long dev = std::llabs(s - n1l * (n1l + 1) - n1l * n2l);
      if (dev >= dev_obs) extreme += c;
    }
    set_exact(r, extreme, all);
  } else {
    const double a = static_cast<double>(n1);
    const double b = static_cast<double>(n2);
    const double nn = a + b;
    const double var = a * b / 12.0 * ((nn + 1.0) - tie_term(pooled) / (nn * (nn - 1.0)));
    r.p_value = two_sided_normal(r.statistic - a * b / 2.0, std::sqrt(std::max(var, 0.0)));
    r.method = TestMethod::approximate;
  }
  return r;
}

std::string significance_stars(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("significance_stars: p outside [0, 1]");
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "-";
}

}  // namespace patchtriage
