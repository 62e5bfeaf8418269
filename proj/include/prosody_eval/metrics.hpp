#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prosody_eval/align.hpp"
#include "prosody_eval/pitch.hpp"
#include "prosody_eval/signal.hpp"

namespace prosody_eval {

/// 10*sqrt(2)/ln(10): converts natural-log mel differences to dB.
inline constexpr double kMsdAlpha = 6.141851463713754;

/// Relative f0 error (percent) above which a frame counts as a gross error.
inline constexpr double kGrossErrorPercent = 20.0;

/// (reference Hz, predicted Hz) on a frame voiced in both tracks.
using F0Pair = std::pair<double, double>;

struct MetricsReport {
  double msd_db = 0.0;
  std::optional<double> frmse_hz;
  std::optional<double> frmse_lf0;
  std::optional<double> fcorr;
  std::optional<double> gpe_percent;
  std::optional<double> fpe_cents;
  std::optional<double> fpe_percent;
  std::size_t n_aligned_frames = 0;
  std::size_t n_voiced_pairs = 0;
};

/// Mel-spectrogram distortion in dB over already aligned frames. Band 0 is excluded.
double msd(const Matrix& ref, const Matrix& pred);

std::optional<double> frmse(std::span<const F0Pair> pairs);
/// RMSE on ln(f0), reported alongside the Hz figure.
std::optional<double> frmse_lf0(std::span<const F0Pair> pairs);
/// Pearson correlation of the paired values (compare_utterances passes lf0).
/// nullopt when either side is constant or n < 2.
std::optional<double> fcorr(std::span<const F0Pair> pairs);
double relative_f0_error(double ref_hz, double pred_hz);
std::optional<double> gpe(std::span<const F0Pair> pairs);
/// Population std-dev, in cents, of errors on fine pairs (relative error < 20%).
std::optional<double> fpe(std::span<const F0Pair> pairs);
/// Same selection as fpe, spread of the relative percent errors instead of cents.
std::optional<double> fpe_percent(std::span<const F0Pair> pairs);

/// Pairs voiced in both tracks along the warp path.
std::vector<F0Pair> voiced_pairs(const WarpPath& path, const PitchTrack& ref, const PitchTrack& pred);

struct CompareOptions {
  SpectroConfig spectro;
  PitchConfig pitch;
  DtwOptions dtw;
  /// Resample the prediction to the reference rate instead of failing on mismatch.
  bool resample = false;
};

MetricsReport compare_utterances(const AudioBuffer& ref_audio, const AudioBuffer& pred_audio,
                                 const CompareOptions& options);

struct Lf0Stats {
  double variance;
  double range;
};

Lf0Stats utterance_lf0_stats(const PitchTrack& track);

struct CorpusProsodyStats {
  double mean_lf0_variance = 0.0;
  double mean_lf0_range = 0.0;
  std::size_t n_utterances = 0;
  std::size_t n_skipped = 0;
};

CorpusProsodyStats corpus_prosody_stats(std::span<const PitchTrack> tracks);

struct TempoRecord {
  std::string utterance_id;
  std::size_t phoneme_count = 0;
  double duration_s = 0.0;
};

/// Mean over records of phonemes per second.
double speech_tempo(std::span<const TempoRecord> records);

/// CSV with header utterance_id,phoneme_count,duration_s.
std::vector<TempoRecord> read_tempo_manifest(const std::filesystem::path& path);

}  // namespace prosody_eval
