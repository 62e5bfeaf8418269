#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "prosody_eval/csv.hpp"
#include "prosody_eval/stats.hpp"

namespace prosody_eval {

void RatingsTable::validate() const {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Rating& r = rows[i];
    const std::string where = "row " + std::to_string(i + 1) + " (" + r.listener_id + ", " + r.screen_id +
                              ", " + r.system_id + ")";
    if (r.score < 0 || r.score > 100) throw Error(where + ": score " + std::to_string(r.score) + " outside [0, 100]");
    if (r.listener_id.empty() || r.screen_id.empty() || r.system_id.empty())
      throw Error(where + ": empty identifier");
    if (!seen.emplace(r.listener_id, r.screen_id, r.system_id).second)
      throw Error(where + ": duplicate score for this listener, screen and system");
  }
}

std::vector<std::string> RatingsTable::systems() const {
  std::set<std::string> ids;
  for (const Rating& r : rows) ids.insert(r.system_id);
  return {ids.begin(), ids.end()};
}

RatingsTable RatingsTable::parse_csv(std::istream& in, const std::string& source) {
  const CsvTable csv = prosody_eval::parse_csv(in, {"listener_id", "screen_id", "system_id", "score"}, source);
  RatingsTable table;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    Rating rating{csv.get(r, "listener_id"), csv.get(r, "screen_id"), csv.get(r, "system_id"), 0};
    const long long score = csv.get_int(r, "score");
    if (score < 0 || score > 100) throw csv.error(r, "score", "score outside [0, 100]");
    rating.score = static_cast<int>(score);
    table.rows.push_back(std::move(rating));
  }
  table.validate();
  return table;
}

RatingsTable RatingsTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_csv(in, path.string());
}

void RatingsTable::write_csv(std::ostream& out) const {
  out << "listener_id,screen_id,system_id,score\n";
  for (const Rating& r : rows) out << r.listener_id << ',' << r.screen_id << ',' << r.system_id << ',' << r.score << '\n';
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::vector<double> descending_ranks(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> ranks(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = static_cast<double>(i + j + 2) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

CellRanks cell_ranks(const RatingsTable& table) {
  std::map<CellKey, std::vector<const Rating*>> cells;
  for (const Rating& r : table.rows) cells[{r.listener_id, r.screen_id}].push_back(&r);
  CellRanks out;
  for (const auto& [key, ratings] : cells) {
    std::vector<double> scores;
    for (const Rating* r : ratings) scores.push_back(r->score);
    const auto ranks = descending_ranks(scores);
    auto& slot = out[key];
    for (std::size_t i = 0; i < ratings.size(); ++i) slot[ratings[i]->system_id] = ranks[i];
  }
  return out;
}

std::vector<SystemSummary> summarize(const RatingsTable& table) {
  table.validate();
  if (table.rows.empty()) throw Error("summarize: ratings table is empty");
  std::map<std::string, std::vector<double>> scores;
  std::map<std::string, std::vector<double>> ranks;
  for (const Rating& r : table.rows) scores[r.system_id].push_back(r.score);
  for (const auto& [cell, by_system] : cell_ranks(table))
    for (const auto& [system, rank] : by_system) ranks[system].push_back(rank);

  std::vector<SystemSummary> out;
  for (const auto& [system, s] : scores) {
    SystemSummary summary;
    summary.system_id = system;
    summary.n_scores = s.size();
    summary.mean_score = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    summary.median_score = median(s);
    const auto& rk = ranks[system];
    summary.mean_rank = std::accumulate(rk.begin(), rk.end(), 0.0) / static_cast<double>(rk.size());
    summary.median_rank = median(rk);
    out.push_back(std::move(summary));
  }
  return out;
}

const char* to_string(Pairing pairing) {
  return pairing == Pairing::kCell ? "cell" : "listener_mean";
}

namespace {

struct PairedSamples {
  std::vector<double> score_a, score_b, rank_a, rank_b;
};

PairedSamples paired_samples(const RatingsTable& table, const CellRanks& ranks, const std::string& a,
                             const std::string& b, Pairing pairing) {
  std::map<CellKey, std::pair<double, double>> common_scores;
  {
    std::map<CellKey, std::map<std::string, double>> by_cell;
    for (const Rating& r : table.rows)
      if (r.system_id == a || r.system_id == b) by_cell[{r.listener_id, r.screen_id}][r.system_id] = r.score;
    for (const auto& [key, m] : by_cell)
      if (m.size() == 2) common_scores[key] = {m.at(a), m.at(b)};
  }

  PairedSamples out;
  if (pairing == Pairing::kCell) {
    for (const auto& [key, s] : common_scores) {
      const auto& cell = ranks.at(key);
      out.score_a.push_back(s.first);
      out.score_b.push_back(s.second);
      out.rank_a.push_back(cell.at(a));
      out.rank_b.push_back(cell.at(b));
    }
    return out;
  }

  struct Acc {
    double sa = 0, sb = 0, ra = 0, rb = 0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> per_listener;
  for (const auto& [key, s] : common_scores) {
    const auto& cell = ranks.at(key);
    Acc& acc = per_listener[key.first];
    acc.sa += s.first;
    acc.sb += s.second;
    acc.ra += cell.at(a);
    acc.rb += cell.at(b);
    ++acc.n;
  }
  for (const auto& [listener, acc] : per_listener) {
    const auto n = static_cast<double>(acc.n);
    out.score_a.push_back(acc.sa / n);
    out.score_b.push_back(acc.sb / n);
    out.rank_a.push_back(acc.ra / n);
    out.rank_b.push_back(acc.rb / n);
  }
  return out;
}

}  // namespace

SignificanceReport pairwise_significance(const RatingsTable& table, double alpha, Pairing pairing) {
  table.validate();
  const auto systems = table.systems();
  if (systems.size() < 2) throw Error("pairwise significance needs at least 2 systems");
  const CellRanks ranks = cell_ranks(table);

  SignificanceReport report;
  report.alpha = alpha;
  report.pairing = pairing;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    for (std::size_t j = i + 1; j < systems.size(); ++j) {
      PairwiseTest test;
      test.system_a = systems[i];
      test.system_b = systems[j];
      const PairedSamples s = paired_samples(table, ranks, test.system_a, test.system_b, pairing);
      if (s.score_a.empty())
        throw Error("systems " + test.system_a + " and " + test.system_b + " share no rated cells");
      test.n = s.score_a.size();

      if (test.n < 2) {
        test.score_test.status = TestStatus::kInsufficientData;
      } else {
        test.score_test = paired_t_test(s.score_a, s.score_b);
      }
      const bool ranks_identical = s.rank_a == s.rank_b;
      if (ranks_identical) {
        test.rank_status = TestStatus::kIdentical;
      } else if (test.n < 2) {
        test.rank_status = TestStatus::kInsufficientData;
      } else {
        test.rank_test = wilcoxon_signed_rank(s.rank_a, s.rank_b);
      }
      report.pairs.push_back(std::move(test));
    }
  }

  // Each family is corrected over the pairs that produced a p-value.
  std::vector<double> score_p;
  std::vector<std::size_t> score_idx;
  std::vector<double> rank_p;
  std::vector<std::size_t> rank_idx;
  for (std::size_t k = 0; k < report.pairs.size(); ++k) {
    PairwiseTest& t = report.pairs[k];
    if (t.score_test.status != TestStatus::kInsufficientData) {
      score_p.push_back(t.score_test.p);
      score_idx.push_back(k);
      t.score_reject_raw = t.score_test.p <= alpha;
    }
    if (t.rank_status != TestStatus::kInsufficientData) {
      const double p = t.rank_test ? t.rank_test->p : 1.0;
      rank_p.push_back(p);
      rank_idx.push_back(k);
      t.rank_reject_raw = p <= alpha;
    }
  }
  const auto score_reject = holm_bonferroni(score_p, alpha);
  for (std::size_t k = 0; k < score_idx.size(); ++k) report.pairs[score_idx[k]].score_reject = score_reject[k];
  const auto rank_reject = holm_bonferroni(rank_p, alpha);
  for (std::size_t k = 0; k < rank_idx.size(); ++k) report.pairs[rank_idx[k]].rank_reject = rank_reject[k];
  return report;
}

namespace {

double quantile_linear(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw Error("box statistics of empty sample");
  std::sort(values.begin(), values.end());
  BoxStats box;
  box.min = values.front();
  box.max = values.back();
  box.q1 = quantile_linear(values, 0.25);
  box.median = quantile_linear(values, 0.5);
  box.q3 = quantile_linear(values, 0.75);
  const double iqr = box.q3 - box.q1;
  const double lo_fence = box.q1 - 1.5 * iqr;
  const double hi_fence = box.q3 + 1.5 * iqr;
  box.whisker_low = box.q1;
  box.whisker_high = box.q3;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      box.outliers.push_back(v);
      continue;
    }
    box.whisker_low = std::min(box.whisker_low, v);
    box.whisker_high = std::max(box.whisker_high, v);
  }
  return box;
}

std::map<std::string, std::map<double, std::size_t>> rank_histogram(const RatingsTable& table) {
  std::map<std::string, std::map<double, std::size_t>> hist;
  for (const auto& [cell, by_system] : cell_ranks(table))
    for (const auto& [system, rank] : by_system) ++hist[system][rank];
  return hist;
}

// ---------------------------------------------------------------------------

Vote parse_vote(const std::string& text) {
  if (text == "A") return Vote::kA;
  if (text == "B") return Vote::kB;
  if (text == "NP") return Vote::kNoPreference;
  throw Error("invalid vote '" + text + "': expected A, B or NP");
}

const char* to_string(Vote vote) {
  switch (vote) {
    case Vote::kA: return "A";
    case Vote::kB: return "B";
    case Vote::kNoPreference: return "NP";
  }
  return "?";
}

void PreferenceTable::validate() const {
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!seen.emplace(rows[i].listener_id, rows[i].item_id).second)
      throw Error("row " + std::to_string(i + 1) + " (" + rows[i].listener_id + ", " + rows[i].item_id +
                  "): duplicate vote for this listener and item");
}

PreferenceTable PreferenceTable::parse_csv(std::istream& in, const std::string& source) {
  const CsvTable csv = prosody_eval::parse_csv(in, {"listener_id", "item_id", "vote"}, source);
  PreferenceTable table;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    PreferenceVote v{csv.get(r, "listener_id"), csv.get(r, "item_id"), Vote::kNoPreference};
    try {
      v.vote = parse_vote(csv.get(r, "vote"));
    } catch (const Error& e) {
      throw csv.error(r, "vote", e.what());
    }
    table.rows.push_back(std::move(v));
  }
  table.validate();
  return table;
}

PreferenceTable PreferenceTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_csv(in, path.string());
}

void PreferenceTable::write_csv(std::ostream& out) const {
  out << "listener_id,item_id,vote\n";
  for (const auto& v : rows) out << v.listener_id << ',' << v.item_id << ',' << to_string(v.vote) << '\n';
}

PreferenceResult binomial_preference_test(const PreferenceTable& table) {
  table.validate();
  PreferenceResult r;
  for (const auto& v : table.rows) {
    switch (v.vote) {
      case Vote::kA: ++r.votes_a; break;
      case Vote::kB: ++r.votes_b; break;
      case Vote::kNoPreference: ++r.votes_np; break;
    }
  }
  const std::size_t decided = r.votes_a + r.votes_b;
  if (decided == 0) throw Error("preference test: every vote is NP");
  const auto total = static_cast<double>(table.rows.size());
  r.share_a = 100.0 * static_cast<double>(r.votes_a) / total;
  r.share_b = 100.0 * static_cast<double>(r.votes_b) / total;
  r.share_np = 100.0 * static_cast<double>(r.votes_np) / total;
  r.p = binomial_upper_tail(r.votes_a, decided);
  return r;
}

}  // namespace prosody_eval
