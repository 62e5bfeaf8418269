#pragma once

#include <filesystem>
#include <vector>

#include "prosody_eval/signal.hpp"

namespace prosody_eval {

struct PitchConfig {
  double f0_min = 60.0;
  double f0_max = 400.0;
  double voicing_threshold = 0.15;

  void validate(int sample_rate) const;
};

/// Per-frame f0 on the mel frame grid. Unvoiced frames carry f0 == 0.
struct PitchTrack {
  std::vector<double> f0_hz;
  std::vector<bool> voiced;
  double hop_s = 0.0;

  std::size_t size() const { return f0_hz.size(); }
  std::size_t voiced_count() const;
};

struct Lf0Point {
  std::size_t frame;
  double lf0;

  bool operator==(const Lf0Point&) const = default;
};

/// YIN-style tracker: cumulative-mean-normalised difference per frame,
/// absolute threshold, parabolic refinement of the chosen lag.
PitchTrack extract_pitch(const AudioBuffer& audio, const SpectroConfig& spectro, const PitchConfig& pitch);

/// (frame, ln f0) for voiced frames only.
std::vector<Lf0Point> lf0_of(const PitchTrack& track);

/// CSV: frame_index,time_s,f0_hz,voiced
void write_pitch_csv(const std::filesystem::path& path, const PitchTrack& track);

}  // namespace prosody_eval
