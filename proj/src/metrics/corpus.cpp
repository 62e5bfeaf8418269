#include <algorithm>
#include <cmath>

#include "prosody_eval/csv.hpp"
#include "prosody_eval/metrics.hpp"

namespace prosody_eval {

Lf0Stats utterance_lf0_stats(const PitchTrack& track) {
  const auto points = lf0_of(track);
  if (points.size() < 2)
    throw Error("lf0 statistics need at least 2 voiced frames, got " + std::to_string(points.size()));
  double mean = 0.0;
  double lo = points.front().lf0;
  double hi = lo;
  for (const auto& p : points) {
    mean += p.lf0;
    lo = std::min(lo, p.lf0);
    hi = std::max(hi, p.lf0);
  }
  mean /= static_cast<double>(points.size());
  double var = 0.0;
  for (const auto& p : points) var += (p.lf0 - mean) * (p.lf0 - mean);
  return {var / static_cast<double>(points.size()), hi - lo};
}

CorpusProsodyStats corpus_prosody_stats(std::span<const PitchTrack> tracks) {
  CorpusProsodyStats out;
  double var_sum = 0.0;
  double range_sum = 0.0;
  for (const PitchTrack& track : tracks) {
    if (track.voiced_count() < 2) {
      ++out.n_skipped;
      continue;
    }
    const Lf0Stats s = utterance_lf0_stats(track);
    var_sum += s.variance;
    range_sum += s.range;
    ++out.n_utterances;
  }
  if (out.n_utterances == 0) throw Error("no utterance has at least 2 voiced frames");
  out.mean_lf0_variance = var_sum / static_cast<double>(out.n_utterances);
  out.mean_lf0_range = range_sum / static_cast<double>(out.n_utterances);
  return out;
}

double speech_tempo(std::span<const TempoRecord> records) {
  if (records.empty()) throw Error("speech tempo: no records");
  double sum = 0.0;
  for (const TempoRecord& r : records) {
    if (!(r.duration_s > 0.0)) throw Error("speech tempo: non-positive duration for " + r.utterance_id);
    if (r.phoneme_count < 1) throw Error("speech tempo: zero phonemes for " + r.utterance_id);
    sum += static_cast<double>(r.phoneme_count) / r.duration_s;
  }
  return sum / static_cast<double>(records.size());
}

std::vector<TempoRecord> read_tempo_manifest(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, {"utterance_id", "phoneme_count", "duration_s"});
  std::vector<TempoRecord> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    TempoRecord rec;
    rec.utterance_id = table.get(r, "utterance_id");
    const long long count = table.get_int(r, "phoneme_count");
    if (count < 1) throw table.error(r, "phoneme_count", "must be at least 1");
    rec.phoneme_count = static_cast<std::size_t>(count);
    rec.duration_s = table.get_double(r, "duration_s");
    if (!(rec.duration_s > 0.0)) throw table.error(r, "duration_s", "must be positive");
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace prosody_eval
