#include <algorithm>
#include <cmath>

#include "prosody_eval/metrics.hpp"

namespace prosody_eval {

double msd(const Matrix& ref, const Matrix& pred) {
  if (ref.empty() || pred.empty()) throw Error("msd: empty input");
  if (ref.rows() != pred.rows() || ref.cols() != pred.cols())
    throw Error("msd: aligned matrices must have equal shape");
  if (ref.cols() < 2) throw Error("msd: need at least 2 mel bands");
  double total = 0.0;
  for (std::size_t t = 0; t < ref.rows(); ++t) {
    double sq = 0.0;
    for (std::size_t d = 1; d < ref.cols(); ++d) {
      const double diff = ref(t, d) - pred(t, d);
      sq += diff * diff;
    }
    total += std::sqrt(sq);
  }
  return kMsdAlpha * total / static_cast<double>(ref.rows());
}

std::optional<double> frmse(std::span<const F0Pair> pairs) {
  if (pairs.empty()) return std::nullopt;
  double sq = 0.0;
  for (const auto& [r, p] : pairs) sq += (r - p) * (r - p);
  return std::sqrt(sq / static_cast<double>(pairs.size()));
}

std::optional<double> frmse_lf0(std::span<const F0Pair> pairs) {
  if (pairs.empty()) return std::nullopt;
  double sq = 0.0;
  for (const auto& [r, p] : pairs) {
    const double diff = std::log(r) - std::log(p);
    sq += diff * diff;
  }
  return std::sqrt(sq / static_cast<double>(pairs.size()));
}

std::optional<double> fcorr(std::span<const F0Pair> pairs) {
  if (pairs.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(pairs.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [r, p] : pairs) {
    mx += r;
    my += p;
  }
  mx /= n;
  my /= n;
  // centred sums; algebraically equal to the raw-moment form and better conditioned
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (const auto& [r, p] : pairs) {
    const double x = r - mx;
    const double y = p - my;
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double relative_f0_error(double ref_hz, double pred_hz) {
  if (!(ref_hz > 0.0)) throw Error("relative f0 error: reference must be positive");
  return std::abs(ref_hz - pred_hz) / ref_hz * 100.0;
}

std::optional<double> gpe(std::span<const F0Pair> pairs) {
  if (pairs.empty()) return std::nullopt;
  std::size_t gross = 0;
  for (const auto& [r, p] : pairs)
    if (relative_f0_error(r, p) > kGrossErrorPercent) ++gross;
  return 100.0 * static_cast<double>(gross) / static_cast<double>(pairs.size());
}

namespace {

std::optional<double> population_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

std::optional<double> fpe(std::span<const F0Pair> pairs) {
  std::vector<double> cents;
  for (const auto& [r, p] : pairs)
    if (relative_f0_error(r, p) < kGrossErrorPercent) cents.push_back(1200.0 * std::log2(p / r));
  return population_stddev(cents);
}

std::optional<double> fpe_percent(std::span<const F0Pair> pairs) {
  std::vector<double> rel;
  for (const auto& [r, p] : pairs) {
    const double e = relative_f0_error(r, p);
    if (e < kGrossErrorPercent) rel.push_back(e);
  }
  return population_stddev(rel);
}

std::vector<F0Pair> voiced_pairs(const WarpPath& path, const PitchTrack& ref, const PitchTrack& pred) {
  path.validate(ref.size(), pred.size());
  std::vector<F0Pair> out;
  for (const WarpStep& s : path.pairs)
    if (ref.voiced[s.ref] && pred.voiced[s.pred]) out.emplace_back(ref.f0_hz[s.ref], pred.f0_hz[s.pred]);
  return out;
}

MetricsReport compare_utterances(const AudioBuffer& ref_audio, const AudioBuffer& pred_audio,
                                 const CompareOptions& options) {
  ref_audio.validate();
  pred_audio.validate();
  AudioBuffer resampled;
  const AudioBuffer* pred = &pred_audio;
  if (ref_audio.sample_rate != pred_audio.sample_rate) {
    if (!options.resample)
      throw Error("sample-rate mismatch: " + std::to_string(ref_audio.sample_rate) + " Hz vs " +
                  std::to_string(pred_audio.sample_rate) + " Hz (use --resample)");
    resampled = resample_linear(pred_audio, ref_audio.sample_rate);
    pred = &resampled;
  }

  const MelSpectrogram ref_mel = extract_mel_spectrogram(ref_audio, options.spectro);
  const MelSpectrogram pred_mel = extract_mel_spectrogram(*pred, options.spectro);
  const PitchTrack ref_f0 = extract_pitch(ref_audio, options.spectro, options.pitch);
  const PitchTrack pred_f0 = extract_pitch(*pred, options.spectro, options.pitch);

  const DtwResult aligned = dtw(ref_mel.frames, pred_mel.frames, options.dtw);
  const WarpPath& path = aligned.path;

  Matrix ref_frames(path.size(), ref_mel.num_bands());
  Matrix pred_frames(path.size(), pred_mel.num_bands());
  for (std::size_t k = 0; k < path.size(); ++k) {
    std::ranges::copy(ref_mel.frames.row(path.pairs[k].ref), ref_frames.row(k).begin());
    std::ranges::copy(pred_mel.frames.row(path.pairs[k].pred), pred_frames.row(k).begin());
  }

  const std::vector<F0Pair> pairs = voiced_pairs(path, ref_f0, pred_f0);

  MetricsReport report;
  report.msd_db = msd(ref_frames, pred_frames);
  report.n_aligned_frames = path.size();
  report.n_voiced_pairs = pairs.size();
  report.frmse_hz = frmse(pairs);
  report.frmse_lf0 = frmse_lf0(pairs);
  std::vector<F0Pair> lf0_pairs;
  lf0_pairs.reserve(pairs.size());
  for (const auto& [r, p] : pairs) lf0_pairs.emplace_back(std::log(r), std::log(p));
  report.fcorr = fcorr(lf0_pairs);
  report.gpe_percent = gpe(pairs);
  report.fpe_cents = fpe(pairs);
  report.fpe_percent = fpe_percent(pairs);
  return report;
}

}  // namespace prosody_eval
