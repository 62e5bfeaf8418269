#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "prosody_eval/signal.hpp"

namespace prosody_eval {
namespace {

// FFTW planning is not thread-safe; executing a plan on fresh arrays is.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  /// Power spectrum |X_k|^2 for k = 0..n/2.
  void power(std::span<const double> frame, std::span<double> out) const {
    double* in = fftw_alloc_real(n_);
    fftw_complex* spec = fftw_alloc_complex(n_ / 2 + 1);
    std::fill(in, in + n_, 0.0);
    std::copy(frame.begin(), frame.end(), in);
    fftw_execute_dft_r2c(plan_, in, spec);
    for (std::size_t k = 0; k <= n_ / 2; ++k)
      out[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    fftw_free(in);
    fftw_free(spec);
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

const RealFft& fft_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<RealFft>> plans;
  std::lock_guard lock(mutex);
  auto& slot = plans[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t SpectroConfig::window_length(int sample_rate) const {
  return static_cast<std::size_t>(std::llround(window_ms * sample_rate / 1000.0));
}

std::size_t SpectroConfig::hop_length(int sample_rate) const {
  return static_cast<std::size_t>(std::llround(hop_ms * sample_rate / 1000.0));
}

std::size_t SpectroConfig::fft_size(int sample_rate) const {
  std::size_t n = 1;
  while (n < window_length(sample_rate)) n <<= 1;
  return n;
}

double SpectroConfig::effective_fmax(int sample_rate) const {
  return fmax.value_or(sample_rate / 2.0);
}

void SpectroConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw Error("invalid sample rate: " + std::to_string(sample_rate));
  if (!(hop_ms > 0.0) || hop_ms > window_ms)
    throw Error("invalid frame grid: require 0 < hop_ms <= window_ms");
  if (window_length(sample_rate) < 1 || hop_length(sample_rate) < 1)
    throw Error("frame grid shorter than one sample");
  if (n_mels < 2) throw Error("n_mels must be at least 2");
  const double top = effective_fmax(sample_rate);
  if (top > sample_rate / 2.0) throw Error("fmax exceeds the Nyquist frequency");
  if (fmin < 0.0 || !(fmin < top)) throw Error("require 0 <= fmin < fmax");
  if (!(log_floor > 0.0)) throw Error("log_floor must be positive");
}

std::size_t frame_count(std::size_t num_samples, const SpectroConfig& config, int sample_rate) {
  config.validate(sample_rate);
  const std::size_t window = config.window_length(sample_rate);
  const std::size_t hop = config.hop_length(sample_rate);
  if (num_samples < window)
    throw Error("utterance too short: " + std::to_string(num_samples) + " samples < window of " +
                std::to_string(window));
  return (num_samples - window) / hop + 1;
}

std::vector<double> mel_band_centers(const SpectroConfig& config, int sample_rate) {
  config.validate(sample_rate);
  const double lo = hz_to_mel(config.fmin);
  const double hi = hz_to_mel(config.effective_fmax(sample_rate));
  const auto n = static_cast<std::size_t>(config.n_mels);
  std::vector<double> centers(n);
  for (std::size_t k = 0; k < n; ++k)
    centers[k] = mel_to_hz(lo + (hi - lo) * static_cast<double>(k + 1) / static_cast<double>(n + 1));
  return centers;
}

Matrix mel_filterbank(const SpectroConfig& config, std::size_t n_fft_bins, int sample_rate) {
  config.validate(sample_rate);
  if (n_fft_bins < 2) throw Error("filterbank needs at least two FFT bins");
  const auto n = static_cast<std::size_t>(config.n_mels);
  const double lo = hz_to_mel(config.fmin);
  const double hi = hz_to_mel(config.effective_fmax(sample_rate));
  std::vector<double> edges(n + 2);
  for (std::size_t k = 0; k < n + 2; ++k)
    edges[k] = mel_to_hz(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n + 1));

  const double bin_hz = (sample_rate / 2.0) / static_cast<double>(n_fft_bins - 1);
  Matrix bank(n, n_fft_bins);
  for (std::size_t k = 0; k < n; ++k) {
    const double left = edges[k];
    const double center = edges[k + 1];
    const double right = edges[k + 2];
    for (std::size_t b = 0; b < n_fft_bins; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      bank(k, b) = w;
    }
  }
  return bank;
}

MelSpectrogram extract_mel_spectrogram(const AudioBuffer& audio, const SpectroConfig& config) {
  audio.validate();
  const int sr = audio.sample_rate;
  const std::size_t n_frames = frame_count(audio.samples.size(), config, sr);
  const std::size_t window = config.window_length(sr);
  const std::size_t hop = config.hop_length(sr);
  const std::size_t n_fft = config.fft_size(sr);
  const std::size_t n_bins = n_fft / 2 + 1;

  const Matrix bank = mel_filterbank(config, n_bins, sr);
  const std::vector<double> taper = hann(window);
  const RealFft& fft = fft_for(n_fft);
  const double floor_log = std::log(config.log_floor);

  MelSpectrogram mel;
  mel.config = config;
  mel.sample_rate = sr;
  mel.frames = Matrix(n_frames, static_cast<std::size_t>(config.n_mels));

  std::vector<double> frame(window);
  std::vector<double> power(n_bins);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = t * hop;
    for (std::size_t i = 0; i < window; ++i) frame[i] = audio.samples[start + i] * taper[i];
    fft.power(frame, power);
    for (std::size_t k = 0; k < bank.rows(); ++k) {
      const auto weights = bank.row(k);
      double energy = 0.0;
      for (std::size_t b = 0; b < n_bins; ++b) energy += weights[b] * power[b];
      mel.frames(t, k) = energy > config.log_floor ? std::log(energy) : floor_log;
    }
  }
  return mel;
}

void write_mel_dump(const std::filesystem::path& path, const MelSpectrogram& mel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write feature file: " + path.string());
  auto put_u32 = [&out](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  out.write("MELS", 4);
  put_u32(static_cast<std::uint32_t>(mel.num_frames()));
  put_u32(static_cast<std::uint32_t>(mel.num_bands()));
  put_u32(0);
  for (double v : mel.frames.data()) {
    const auto f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  }
}

Matrix read_mel_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto u32 = [&bytes](std::size_t at) {
    return static_cast<std::uint32_t>(bytes[at]) | (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
  };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "MELS", 4) != 0)
    throw Error("not a MELS feature file: " + path.string());
  const std::size_t t = u32(4);
  const std::size_t d = u32(8);
  if (bytes.size() != 16 + 4 * t * d) throw Error("truncated MELS feature file: " + path.string());
  Matrix m(t, d);
  for (std::size_t i = 0; i < t * d; ++i) {
    const std::uint32_t bits = u32(16 + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    m(i / d, i % d) = f;
  }
  return m;
}

void write_mel_csv(const std::filesystem::path& path, const MelSpectrogram& mel) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write feature file: " + path.string());
  out << "frame_index";
  for (std::size_t d = 0; d < mel.num_bands(); ++d) out << ",mel_" << d;
  out << '\n';
  char buf[32];
  for (std::size_t t = 0; t < mel.num_frames(); ++t) {
    out << t;
    for (double v : mel.frames.row(t)) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace prosody_eval
