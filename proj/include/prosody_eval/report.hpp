#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosody_eval/metrics.hpp"
#include "prosody_eval/stats.hpp"

namespace prosody_eval {

using Json = nlohmann::json;

/// Sorted keys, two-space indent, every floating-point number printed with
/// exactly six decimals, non-finite values as null, trailing newline.
std::string canonical_json(const Json& doc);

Json to_json(const MetricsReport& report);

struct UtteranceOutcome {
  std::string utterance_id;
  std::optional<MetricsReport> report;
  std::string error;  // set when report is empty
};

/// Corpus means: MSD weighted by aligned frames, f0 metrics by voiced pairs.
MetricsReport aggregate_metrics(std::span<const MetricsReport> reports);

/// Per-utterance reports (sorted by id), error records and the aggregate.
Json compare_report_json(std::vector<UtteranceOutcome> outcomes);
std::string compare_report_table(const Json& report);

Json corpus_stats_json(const CorpusProsodyStats& stats);
Json tempo_json(std::span<const TempoRecord> records);

struct MushraReportOptions {
  double alpha = 0.01;
  Pairing pairing = Pairing::kCell;
  /// System whose mean is the 100% end of gap closure (normally the recordings).
  std::optional<std::string> topline;
  /// Baselines for gap closure; empty means every system except the topline.
  std::vector<std::string> baselines;
};

Json mushra_report_json(const RatingsTable& table, const MushraReportOptions& options);
std::string mushra_report_table(const Json& report);

struct PreferenceLabels {
  std::string a = "A";
  std::string b = "B";
};

Json preference_report_json(const PreferenceTable& table, const PreferenceLabels& labels = {});
std::string preference_report_table(const Json& report);

}  // namespace prosody_eval
