#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prosody_eval/common.hpp"

namespace prosody_eval {

// ---------------------------------------------------------------------------
// Distributions

/// I_x(a, b) by Lentz's continued fraction, relative tolerance 1e-10.
double regularized_incomplete_beta(double a, double b, double x);
/// P(|T| >= |t|) for Student-t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);
double normal_cdf(double z);
/// P(X >= k) for X ~ Binomial(n, 1/2).
double binomial_upper_tail(std::size_t k, std::size_t n);

// ---------------------------------------------------------------------------
// Tests

enum class TestStatus {
  kOk,
  /// every paired difference is zero
  kIdentical,
  /// differences are constant and non-zero; the statistic is unbounded
  kZeroVariance,
  /// fewer paired observations than the test needs
  kInsufficientData,
};

const char* to_string(TestStatus status);

struct TTestResult {
  std::optional<double> t;  // unset when the statistic is undefined or infinite
  std::size_t df = 0;
  double p = 1.0;
  double mean_difference = 0.0;
  TestStatus status = TestStatus::kOk;
};

/// Paired two-sided t-test on x - y. Throws when n < 2.
TTestResult paired_t_test(std::span<const double> x, std::span<const double> y);

enum class WilcoxonMethod { kAuto, kExact, kNormal };

const char* to_string(WilcoxonMethod method);

struct WilcoxonResult {
  double w = 0.0;  // smaller of the signed-rank sums
  double p = 1.0;  // two-sided
  std::size_t n = 0;  // non-zero differences
  WilcoxonMethod method = WilcoxonMethod::kExact;
};

/// Largest n for which kAuto uses the exact null distribution.
inline constexpr std::size_t kWilcoxonExactMaxN = 12;

/// Signed-rank test on x - y with zeros discarded and average ranks for ties.
/// Throws when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMethod method = WilcoxonMethod::kAuto);

/// Step-down Holm correction; decisions in the input order.
std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha);

double gap_closure(double baseline_mean, double system_mean, double topline_mean);

// ---------------------------------------------------------------------------
// MUSHRA ratings

struct Rating {
  std::string listener_id;
  std::string screen_id;
  std::string system_id;
  int score = 0;
};

struct RatingsTable {
  std::vector<Rating> rows;

  /// Scores in [0, 100] and at most one score per (listener, screen, system).
  void validate() const;
  std::vector<std::string> systems() const;

  static RatingsTable read_csv(const std::filesystem::path& path);
  static RatingsTable parse_csv(std::istream& in, const std::string& source = "<ratings>");
  void write_csv(std::ostream& out) const;
};

struct SystemSummary {
  std::string system_id;
  std::size_t n_scores = 0;
  double mean_score = 0.0;
  double median_score = 0.0;
  double mean_rank = 0.0;
  double median_rank = 0.0;
};

/// Ranks 1 = highest score, ties share the mean of the positions they span.
std::vector<double> descending_ranks(std::span<const double> scores);

using CellKey = std::pair<std::string, std::string>;  // (listener, screen)
using CellRanks = std::map<CellKey, std::map<std::string, double>>;

CellRanks cell_ranks(const RatingsTable& table);

/// Per-system summaries sorted by system id.
std::vector<SystemSummary> summarize(const RatingsTable& table);

enum class Pairing {
  /// one observation per (listener, screen)
  kCell,
  /// one observation per listener: mean over that listener's common screens
  kListenerMean,
};

const char* to_string(Pairing pairing);

struct PairwiseTest {
  std::string system_a;
  std::string system_b;
  std::size_t n = 0;
  TTestResult score_test;
  bool score_reject_raw = false;
  bool score_reject = false;
  std::optional<WilcoxonResult> rank_test;
  TestStatus rank_status = TestStatus::kOk;
  bool rank_reject_raw = false;
  bool rank_reject = false;
};

struct SignificanceReport {
  double alpha = 0.01;
  Pairing pairing = Pairing::kCell;
  std::vector<PairwiseTest> pairs;  // lexicographic by (system_a, system_b)
};

SignificanceReport pairwise_significance(const RatingsTable& table, double alpha,
                                         Pairing pairing = Pairing::kCell);

/// Tukey box: quartiles by linear interpolation, whiskers at the most extreme
/// data within 1.5 IQR of the box.
struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

BoxStats box_stats(std::vector<double> values);
double median(std::vector<double> values);

/// system -> rank value -> number of cells awarding it.
std::map<std::string, std::map<double, std::size_t>> rank_histogram(const RatingsTable& table);

// ---------------------------------------------------------------------------
// Preference tests

enum class Vote { kA, kB, kNoPreference };

Vote parse_vote(const std::string& text);
const char* to_string(Vote vote);

struct PreferenceVote {
  std::string listener_id;
  std::string item_id;
  Vote vote = Vote::kNoPreference;
};

struct PreferenceTable {
  std::vector<PreferenceVote> rows;

  /// One vote per (listener, item).
  void validate() const;

  static PreferenceTable read_csv(const std::filesystem::path& path);
  static PreferenceTable parse_csv(std::istream& in, const std::string& source = "<preferences>");
  void write_csv(std::ostream& out) const;
};

struct PreferenceResult {
  std::size_t votes_a = 0;
  std::size_t votes_b = 0;
  std::size_t votes_np = 0;
  double share_a = 0.0;  // percent of all votes, NP included
  double share_b = 0.0;
  double share_np = 0.0;
  double p = 1.0;  // one-sided exact binomial on A among non-NP votes
};

PreferenceResult binomial_preference_test(const PreferenceTable& table);

}  // namespace prosody_eval
