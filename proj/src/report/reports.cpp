#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "prosody_eval/report.hpp"

namespace prosody_eval {
namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string fmt(const Json& v, const char* spec = "%.2f") {
  if (v.is_null()) return "-";
  if (v.is_number_integer() || v.is_number_unsigned()) return std::to_string(v.get<long long>());
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_string()) return v.get<std::string>();
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v.get<double>());
  return buf;
}

std::string rank_key(double rank) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", rank);
  return buf;
}

// Weighted mean of a metric over reports that carry it.
std::optional<double> weighted(std::span<const MetricsReport> reports,
                               std::optional<double> MetricsReport::*field) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : reports) {
    if (!(r.*field) || r.n_voiced_pairs == 0) continue;
    num += *(r.*field) * static_cast<double>(r.n_voiced_pairs);
    den += static_cast<double>(r.n_voiced_pairs);
  }
  if (den == 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

Json to_json(const MetricsReport& r) {
  return Json{{"msd_db", r.msd_db},
              {"frmse_hz", opt(r.frmse_hz)},
              {"frmse_lf0", opt(r.frmse_lf0)},
              {"fcorr", opt(r.fcorr)},
              {"gpe_percent", opt(r.gpe_percent)},
              {"fpe_cents", opt(r.fpe_cents)},
              {"fpe_percent", opt(r.fpe_percent)},
              {"n_aligned_frames", r.n_aligned_frames},
              {"n_voiced_pairs", r.n_voiced_pairs}};
}

MetricsReport aggregate_metrics(std::span<const MetricsReport> reports) {
  MetricsReport agg;
  double msd_num = 0.0;
  for (const auto& r : reports) {
    msd_num += r.msd_db * static_cast<double>(r.n_aligned_frames);
    agg.n_aligned_frames += r.n_aligned_frames;
    agg.n_voiced_pairs += r.n_voiced_pairs;
  }
  if (agg.n_aligned_frames > 0) agg.msd_db = msd_num / static_cast<double>(agg.n_aligned_frames);
  agg.frmse_hz = weighted(reports, &MetricsReport::frmse_hz);
  agg.frmse_lf0 = weighted(reports, &MetricsReport::frmse_lf0);
  agg.fcorr = weighted(reports, &MetricsReport::fcorr);
  agg.gpe_percent = weighted(reports, &MetricsReport::gpe_percent);
  agg.fpe_cents = weighted(reports, &MetricsReport::fpe_cents);
  agg.fpe_percent = weighted(reports, &MetricsReport::fpe_percent);
  return agg;
}

Json compare_report_json(std::vector<UtteranceOutcome> outcomes) {
  std::sort(outcomes.begin(), outcomes.end(),
            [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });
  Json utterances = Json::array();
  Json errors = Json::array();
  std::vector<MetricsReport> ok;
  for (const auto& o : outcomes) {
    if (o.report) {
      Json row = to_json(*o.report);
      row["utterance_id"] = o.utterance_id;
      utterances.push_back(std::move(row));
      ok.push_back(*o.report);
    } else {
      errors.push_back(Json{{"utterance_id", o.utterance_id}, {"error", o.error}});
    }
  }
  Json doc;
  doc["utterances"] = std::move(utterances);
  doc["errors"] = std::move(errors);
  doc["aggregate"] = ok.empty() ? Json(nullptr) : to_json(aggregate_metrics(ok));
  doc["n_utterances"] = ok.size();
  doc["n_errors"] = outcomes.size() - ok.size();
  return doc;
}

std::string compare_report_table(const Json& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %9s %11s %7s %8s %10s %8s\n", "utterance", "MSD (dB)", "FRMSE (Hz)",
                "FCORR", "GPE (%)", "FPE (cent)", "frames");
  out << line;
  auto row = [&](const std::string& id, const Json& r) {
    std::snprintf(line, sizeof line, "%-24s %9s %11s %7s %8s %10s %8s\n", id.c_str(), fmt(r["msd_db"]).c_str(),
                  fmt(r["frmse_hz"]).c_str(), fmt(r["fcorr"]).c_str(), fmt(r["gpe_percent"]).c_str(),
                  fmt(r["fpe_cents"]).c_str(), fmt(r["n_aligned_frames"]).c_str());
    out << line;
  };
  for (const auto& r : report["utterances"]) row(r["utterance_id"].get<std::string>(), r);
  if (!report["aggregate"].is_null()) row("[aggregate]", report["aggregate"]);
  for (const auto& e : report["errors"])
    out << "error " << e["utterance_id"].get<std::string>() << ": " << e["error"].get<std::string>() << '\n';
  return out.str();
}

Json corpus_stats_json(const CorpusProsodyStats& s) {
  return Json{{"mean_lf0_variance", s.mean_lf0_variance},
              {"mean_lf0_range", s.mean_lf0_range},
              {"n_utterances", s.n_utterances},
              {"n_skipped", s.n_skipped}};
}

Json tempo_json(std::span<const TempoRecord> records) {
  Json rows = Json::array();
  std::vector<TempoRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });
  for (const auto& r : sorted)
    rows.push_back(Json{{"utterance_id", r.utterance_id},
                        {"phoneme_count", r.phoneme_count},
                        {"duration_s", r.duration_s},
                        {"phonemes_per_second", static_cast<double>(r.phoneme_count) / r.duration_s}});
  return Json{{"speech_tempo", speech_tempo(records)}, {"n_records", records.size()}, {"records", std::move(rows)}};
}

Json mushra_report_json(const RatingsTable& table, const MushraReportOptions& options) {
  table.validate();
  if (table.rows.empty()) throw Error("no responses");
  const auto summaries = summarize(table);

  Json doc;
  {
    std::set<std::string> listeners;
    std::set<std::pair<std::string, std::string>> cells;
    for (const auto& r : table.rows) {
      listeners.insert(r.listener_id);
      cells.emplace(r.listener_id, r.screen_id);
    }
    doc["n_ratings"] = table.rows.size();
    doc["n_listeners"] = listeners.size();
    doc["n_cells"] = cells.size();
  }

  Json systems = Json::array();
  std::map<std::string, double> means;
  for (const auto& s : summaries) {
    means[s.system_id] = s.mean_score;
    systems.push_back(Json{{"system_id", s.system_id},
                           {"n_scores", s.n_scores},
                           {"mean_score", s.mean_score},
                           {"median_score", s.median_score},
                           {"mean_rank", s.mean_rank},
                           {"median_rank", s.median_rank}});
  }
  doc["systems"] = std::move(systems);

  Json sig;
  sig["alpha"] = options.alpha;
  sig["pairing"] = to_string(options.pairing);
  Json score_tests = Json::array();
  Json rank_tests = Json::array();
  if (summaries.size() >= 2) {
    const SignificanceReport report = pairwise_significance(table, options.alpha, options.pairing);
    for (const auto& p : report.pairs) {
      const auto& t = p.score_test;
      score_tests.push_back(Json{{"system_a", p.system_a},
                                 {"system_b", p.system_b},
                                 {"n", p.n},
                                 {"status", to_string(t.status)},
                                 {"t", opt(t.t)},
                                 {"df", t.df},
                                 {"mean_difference", t.mean_difference},
                                 {"p", t.status == TestStatus::kInsufficientData ? Json(nullptr) : Json(t.p)},
                                 {"reject_raw", p.score_reject_raw},
                                 {"reject_holm", p.score_reject}});
      Json rank{{"system_a", p.system_a},
                {"system_b", p.system_b},
                {"n", p.n},
                {"status", to_string(p.rank_status)},
                {"reject_raw", p.rank_reject_raw},
                {"reject_holm", p.rank_reject}};
      if (p.rank_test) {
        rank["w"] = p.rank_test->w;
        rank["p"] = p.rank_test->p;
        rank["n_nonzero"] = p.rank_test->n;
        rank["method"] = to_string(p.rank_test->method);
      } else {
        rank["w"] = nullptr;
        rank["p"] = p.rank_status == TestStatus::kIdentical ? Json(1.0) : Json(nullptr);
        rank["n_nonzero"] = 0;
        rank["method"] = nullptr;
      }
      rank_tests.push_back(std::move(rank));
    }
  }
  sig["score_t_test"] = std::move(score_tests);
  sig["rank_wilcoxon"] = std::move(rank_tests);
  doc["significance"] = std::move(sig);

  if (options.topline) {
    if (!means.contains(*options.topline)) throw Error("topline system not in ratings: " + *options.topline);
    std::vector<std::string> baselines = options.baselines;
    if (baselines.empty())
      for (const auto& [id, m] : means)
        if (id != *options.topline) baselines.push_back(id);
    Json entries = Json::array();
    for (const auto& base : baselines) {
      if (!means.contains(base)) throw Error("baseline system not in ratings: " + base);
      for (const auto& [id, m] : means) {
        if (id == base || id == *options.topline) continue;
        const double top = means.at(*options.topline);
        const double bottom = means.at(base);
        entries.push_back(Json{{"baseline", base},
                               {"system", id},
                               {"percent", top == bottom ? Json(nullptr) : Json(gap_closure(bottom, m, top))}});
      }
    }
    doc["gap_closure"] = Json{{"topline", *options.topline}, {"entries", std::move(entries)}};
  } else {
    doc["gap_closure"] = nullptr;
  }

  Json boxes = Json::array();
  std::map<std::string, std::vector<double>> scores;
  for (const auto& r : table.rows) scores[r.system_id].push_back(r.score);
  for (const auto& [id, s] : scores) {
    const BoxStats b = box_stats(s);
    boxes.push_back(Json{{"system_id", id},
                         {"min", b.min},
                         {"q1", b.q1},
                         {"median", b.median},
                         {"q3", b.q3},
                         {"max", b.max},
                         {"whisker_low", b.whisker_low},
                         {"whisker_high", b.whisker_high},
                         {"outliers", b.outliers}});
  }
  doc["boxplot"] = std::move(boxes);

  Json hist = Json::array();
  for (const auto& [id, counts] : rank_histogram(table)) {
    Json c = Json::object();
    for (const auto& [rank, n] : counts) c[rank_key(rank)] = n;
    hist.push_back(Json{{"system_id", id}, {"counts", std::move(c)}});
  }
  doc["rank_histogram"] = std::move(hist);
  return doc;
}

std::string mushra_report_table(const Json& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %10s %12s %10s %12s\n", "System", "Mean score", "Median score",
                "Mean rank", "Median rank");
  out << line;
  for (const auto& s : report["systems"]) {
    std::snprintf(line, sizeof line, "%-20s %10s %12s %10s %12s\n", s["system_id"].get<std::string>().c_str(),
                  fmt(s["mean_score"]).c_str(), fmt(s["median_score"], "%.1f").c_str(),
                  fmt(s["mean_rank"]).c_str(), fmt(s["median_rank"], "%g").c_str());
    out << line;
  }
  const auto& sig = report["significance"];
  out << "\nPairwise tests (alpha " << fmt(sig["alpha"], "%g") << ", Holm-corrected)\n";
  std::snprintf(line, sizeof line, "%-20s %-20s %10s %8s %10s %8s\n", "A", "B", "t-test p", "reject", "wilcox p",
                "reject");
  out << line;
  for (std::size_t k = 0; k < sig["score_t_test"].size(); ++k) {
    const auto& t = sig["score_t_test"][k];
    const auto& w = sig["rank_wilcoxon"][k];
    std::snprintf(line, sizeof line, "%-20s %-20s %10s %8s %10s %8s\n", t["system_a"].get<std::string>().c_str(),
                  t["system_b"].get<std::string>().c_str(), fmt(t["p"], "%.3g").c_str(),
                  fmt(t["reject_holm"]).c_str(), fmt(w["p"], "%.3g").c_str(), fmt(w["reject_holm"]).c_str());
    out << line;
  }
  if (!report["gap_closure"].is_null()) {
    out << "\nGap closure towards " << report["gap_closure"]["topline"].get<std::string>() << '\n';
    for (const auto& e : report["gap_closure"]["entries"])
      out << "  " << e["system"].get<std::string>() << " vs " << e["baseline"].get<std::string>() << ": "
          << fmt(e["percent"], "%.1f") << "%\n";
  }
  return out.str();
}

Json preference_report_json(const PreferenceTable& table, const PreferenceLabels& labels) {
  const PreferenceResult r = binomial_preference_test(table);
  return Json{{"labels", Json{{"A", labels.a}, {"B", labels.b}}},
              {"votes", Json{{"A", r.votes_a}, {"B", r.votes_b}, {"NP", r.votes_np}}},
              {"shares_percent", Json{{"A", r.share_a}, {"B", r.share_b}, {"NP", r.share_np}}},
              {"n_votes", table.rows.size()},
              {"n_decided", r.votes_a + r.votes_b},
              {"p_one_sided", r.p}};
}

std::string preference_report_table(const Json& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %8s %8s\n", "Preference", "Votes", "Share");
  out << line;
  const std::pair<const char*, std::string> rows[] = {{"A", report["labels"]["A"].get<std::string>()},
                                                      {"B", report["labels"]["B"].get<std::string>()},
                                                      {"NP", "No Preference"}};
  for (const auto& [key, label] : rows) {
    std::snprintf(line, sizeof line, "%-24s %8s %7s%%\n", label.c_str(), fmt(report["votes"][key]).c_str(),
                  fmt(report["shares_percent"][key], "%.1f").c_str());
    out << line;
  }
  out << "binomial p (one-sided, NP excluded): " << fmt(report["p_one_sided"], "%.6f") << '\n';
  return out.str();
}

}  // namespace prosody_eval
