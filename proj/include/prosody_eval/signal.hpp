#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prosody_eval/common.hpp"

namespace prosody_eval {

/// Mono PCM audio, amplitudes nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  void validate() const;
};

/// Analysis grid shared by the mel and pitch front ends.
struct SpectroConfig {
  double window_ms = 50.0;
  double hop_ms = 12.5;
  int n_mels = 80;
  double fmin = 0.0;
  std::optional<double> fmax;  // Nyquist when unset
  double log_floor = 1e-10;

  std::size_t window_length(int sample_rate) const;
  std::size_t hop_length(int sample_rate) const;
  /// Next power of two >= window length.
  std::size_t fft_size(int sample_rate) const;
  double effective_fmax(int sample_rate) const;
  void validate(int sample_rate) const;

  bool operator==(const SpectroConfig&) const = default;
};

/// T x D natural-log mel energies.
struct MelSpectrogram {
  Matrix frames;
  SpectroConfig config;
  int sample_rate = 0;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t num_bands() const { return frames.cols(); }
};

AudioBuffer load_wav(const std::filesystem::path& path);
AudioBuffer parse_wav(std::span<const std::uint8_t> bytes);
/// 16-bit PCM mono encoding; samples are clipped to [-1, 1].
std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio);
void save_wav(const std::filesystem::path& path, const AudioBuffer& audio);

/// Linear-interpolation resampler used when compared files differ in rate.
AudioBuffer resample_linear(const AudioBuffer& audio, int target_rate);

std::size_t frame_count(std::size_t num_samples, const SpectroConfig& config, int sample_rate);

/// Triangular filters, one row per band, one column per rfft bin.
Matrix mel_filterbank(const SpectroConfig& config, std::size_t n_fft_bins, int sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
/// Hz centres of the filters produced by mel_filterbank.
std::vector<double> mel_band_centers(const SpectroConfig& config, int sample_rate);

MelSpectrogram extract_mel_spectrogram(const AudioBuffer& audio, const SpectroConfig& config);

// Feature dumps: "MELS" + u32 T + u32 D + 4 reserved bytes, then float32 LE row-major.
void write_mel_dump(const std::filesystem::path& path, const MelSpectrogram& mel);
Matrix read_mel_dump(const std::filesystem::path& path);
void write_mel_csv(const std::filesystem::path& path, const MelSpectrogram& mel);

}  // namespace prosody_eval
