#include <algorithm>
#include <cmath>
#include <numeric>

#include "prosody_eval/stats.hpp"

namespace prosody_eval {

const char* to_string(TestStatus status) {
  switch (status) {
    case TestStatus::kOk: return "ok";
    case TestStatus::kIdentical: return "identical";
    case TestStatus::kZeroVariance: return "zero_variance";
    case TestStatus::kInsufficientData: return "insufficient_data";
  }
  return "unknown";
}

const char* to_string(WilcoxonMethod method) {
  switch (method) {
    case WilcoxonMethod::kAuto: return "auto";
    case WilcoxonMethod::kExact: return "exact";
    case WilcoxonMethod::kNormal: return "normal";
  }
  return "unknown";
}

namespace {

std::vector<double> differences(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error("paired test: samples differ in length (" + std::to_string(x.size()) + " vs " +
                std::to_string(y.size()) + ")");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  return d;
}

// Average ranks of ascending values, 1-based.
std::vector<double> ascending_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Exact two-sided p: probability under random signs that the smaller signed
// rank sum is <= w. Ranks are multiples of 1/2, so the DP runs on doubled ranks.
double wilcoxon_exact_p(const std::vector<double>& ranks, double w) {
  std::vector<std::size_t> doubled(ranks.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
    total += doubled[i];
  }
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  for (std::size_t r : doubled)
    for (std::size_t s = total; s >= r; --s) {
      counts[s] += counts[s - r];
      if (s == r) break;
    }
  const auto w2 = static_cast<std::size_t>(std::llround(2.0 * w));
  double hits = 0.0;
  for (std::size_t s = 0; s <= total; ++s)
    if (std::min(s, total - s) <= w2) hits += counts[s];
  return std::min(1.0, hits / std::ldexp(1.0, static_cast<int>(ranks.size())));
}

double wilcoxon_normal_p(const std::vector<double>& abs_diffs, const std::vector<double>& ranks, double w) {
  const auto n = static_cast<double>(ranks.size());
  const double mean = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  std::vector<double> sorted = abs_diffs;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (!(var > 0.0)) return 1.0;
  const double z = (w - mean + 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * normal_cdf(z));
}

}  // namespace

TTestResult paired_t_test(std::span<const double> x, std::span<const double> y) {
  const std::vector<double> d = differences(x, y);
  if (d.size() < 2) throw Error("paired t-test needs at least 2 pairs, got " + std::to_string(d.size()));
  const auto n = static_cast<double>(d.size());
  TTestResult result;
  result.df = d.size() - 1;
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= n;
  result.mean_difference = mean;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);

  if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) {
    result.status = TestStatus::kIdentical;
    result.p = 1.0;
    return result;
  }
  if (ss == 0.0) {
    result.status = TestStatus::kZeroVariance;
    result.p = 0.0;
    return result;
  }
  const double se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  result.t = mean / se;
  result.p = student_t_two_sided_p(*result.t, static_cast<double>(result.df));
  return result;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, WilcoxonMethod method) {
  std::vector<double> nonzero;
  for (double v : differences(x, y))
    if (v != 0.0) nonzero.push_back(v);
  if (nonzero.empty()) throw Error("wilcoxon: all differences are zero");

  std::vector<double> abs_diffs(nonzero.size());
  std::transform(nonzero.begin(), nonzero.end(), abs_diffs.begin(), [](double v) { return std::abs(v); });
  const std::vector<double> ranks = ascending_ranks(abs_diffs);
  double plus = 0.0;
  double minus = 0.0;
  for (std::size_t i = 0; i < nonzero.size(); ++i) (nonzero[i] > 0.0 ? plus : minus) += ranks[i];

  WilcoxonResult result;
  result.n = nonzero.size();
  result.w = std::min(plus, minus);
  if (method == WilcoxonMethod::kAuto)
    method = result.n <= kWilcoxonExactMaxN ? WilcoxonMethod::kExact : WilcoxonMethod::kNormal;
  result.method = method;
  result.p = method == WilcoxonMethod::kExact ? wilcoxon_exact_p(ranks, result.w)
                                              : wilcoxon_normal_p(abs_diffs, ranks, result.w);
  return result;
}

std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("holm: alpha must lie in (0, 1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw Error("holm: p-value outside [0, 1]");
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    const double threshold = alpha / static_cast<double>(m - i);
    if (p_values[order[i]] > threshold) break;
    reject[order[i]] = true;
  }
  return reject;
}

double gap_closure(double baseline_mean, double system_mean, double topline_mean) {
  const double gap = topline_mean - baseline_mean;
  if (gap == 0.0) throw Error("gap closure: topline and baseline means are equal");
  return 100.0 * (system_mean - baseline_mean) / gap;
}

}  // namespace prosody_eval
