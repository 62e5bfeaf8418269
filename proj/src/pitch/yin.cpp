#include <algorithm>
#include <cmath>
#include <fstream>

#include "prosody_eval/pitch.hpp"

namespace prosody_eval {
namespace {

struct LagRange {
  std::size_t min_lag;
  std::size_t max_lag;
};

// Cumulative-mean-normalised difference for lags 0..max_lag over a frame.
// The integration window is frame.size() - max_lag so every lag sees the
// same number of products.
std::vector<double> cmnd(std::span<const double> frame, std::size_t max_lag) {
  const std::size_t width = frame.size() - max_lag;
  std::vector<double> out(max_lag + 1, 1.0);
  double running = 0.0;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    double d = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double diff = frame[j] - frame[j + lag];
      d += diff * diff;
    }
    running += d;
    out[lag] = running > 0.0 ? d * static_cast<double>(lag) / running : 1.0;
  }
  return out;
}

struct LagEstimate {
  double lag;
  double score;
};

LagEstimate pick_lag(const std::vector<double>& norm, LagRange range, double threshold) {
  std::size_t best = range.min_lag;
  for (std::size_t lag = range.min_lag; lag <= range.max_lag; ++lag) {
    if (norm[lag] < threshold) {
      // walk down into the local minimum that follows the crossing
      while (lag + 1 <= range.max_lag && norm[lag + 1] < norm[lag]) ++lag;
      best = lag;
      break;
    }
    if (norm[lag] < norm[best]) best = lag;
  }

  double refined = static_cast<double>(best);
  if (best > range.min_lag && best < range.max_lag) {
    const double a = norm[best - 1];
    const double b = norm[best];
    const double c = norm[best + 1];
    const double denom = a - 2.0 * b + c;
    if (denom > 0.0) {
      const double shift = 0.5 * (a - c) / denom;
      if (std::abs(shift) < 1.0) refined += shift;
    }
  }
  return {refined, norm[best]};
}

}  // namespace

void PitchConfig::validate(int sample_rate) const {
  if (!(f0_min > 0.0) || !(f0_min < f0_max) || !(f0_max < sample_rate / 2.0))
    throw Error("invalid pitch range: require 0 < f0_min < f0_max < sample_rate/2");
  if (sample_rate / f0_max < 2.0) throw Error("f0_max period shorter than 2 samples");
  if (!(voicing_threshold > 0.0)) throw Error("voicing threshold must be positive");
}

std::size_t PitchTrack::voiced_count() const {
  return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), true));
}

PitchTrack extract_pitch(const AudioBuffer& audio, const SpectroConfig& spectro, const PitchConfig& pitch) {
  audio.validate();
  const int sr = audio.sample_rate;
  pitch.validate(sr);
  const std::size_t n_frames = frame_count(audio.samples.size(), spectro, sr);
  const std::size_t window = spectro.window_length(sr);
  const std::size_t hop = spectro.hop_length(sr);

  const LagRange range{
      static_cast<std::size_t>(std::floor(sr / pitch.f0_max)),
      static_cast<std::size_t>(std::ceil(sr / pitch.f0_min)),
  };
  if (window < 2 * range.max_lag)
    throw Error("analysis window too short for f0_min: need two periods (" +
                std::to_string(2 * range.max_lag) + " samples)");

  PitchTrack track;
  track.hop_s = static_cast<double>(hop) / sr;
  track.f0_hz.assign(n_frames, 0.0);
  track.voiced.assign(n_frames, false);

  const std::span<const double> all(audio.samples);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const auto frame = all.subspan(t * hop, window);
    const auto norm = cmnd(frame, range.max_lag);
    const LagEstimate est = pick_lag(norm, range, pitch.voicing_threshold);
    if (!(est.score < pitch.voicing_threshold) || !(est.lag > 0.0)) continue;
    const double f0 = sr / est.lag;
    if (f0 < pitch.f0_min || f0 > pitch.f0_max) continue;
    track.f0_hz[t] = f0;
    track.voiced[t] = true;
  }
  return track;
}

std::vector<Lf0Point> lf0_of(const PitchTrack& track) {
  std::vector<Lf0Point> out;
  for (std::size_t t = 0; t < track.size(); ++t)
    if (track.voiced[t]) out.push_back({t, std::log(track.f0_hz[t])});
  return out;
}

void write_pitch_csv(const std::filesystem::path& path, const PitchTrack& track) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write pitch file: " + path.string());
  out << "frame_index,time_s,f0_hz,voiced\n";
  char buf[96];
  for (std::size_t t = 0; t < track.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%d\n", t, static_cast<double>(t) * track.hop_s,
                  track.f0_hz[t], track.voiced[t] ? 1 : 0);
    out << buf;
  }
}

}  // namespace prosody_eval
