#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "prosody_eval/signal.hpp"

namespace testing_support {

using prosody_eval::AudioBuffer;

inline AudioBuffer sine(double hz, double seconds, int sr = 24000, double amp = 0.5) {
  AudioBuffer a;
  a.sample_rate = sr;
  const auto n = static_cast<std::size_t>(std::llround(seconds * sr));
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / sr);
  return a;
}

// Harmonic-rich tone whose f0 moves linearly from f_start to f_end.
inline AudioBuffer glide(double f_start, double f_end, double seconds, int sr = 24000, double amp = 0.4) {
  AudioBuffer a;
  a.sample_rate = sr;
  const auto n = static_cast<std::size_t>(std::llround(seconds * sr));
  a.samples.resize(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = f_start + (f_end - f_start) * static_cast<double>(i) / n;
    phase += 2.0 * std::numbers::pi * f / sr;
    a.samples[i] = amp * (std::sin(phase) + 0.5 * std::sin(2 * phase) + 0.25 * std::sin(3 * phase)) / 1.75;
  }
  return a;
}

inline AudioBuffer silence(double seconds, int sr = 24000) {
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.assign(static_cast<std::size_t>(std::llround(seconds * sr)), 0.0);
  return a;
}

inline AudioBuffer noise(double seconds, std::uint32_t seed, int sr = 24000, double amp = 0.5) {
  AudioBuffer a;
  a.sample_rate = sr;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  a.samples.resize(static_cast<std::size_t>(std::llround(seconds * sr)));
  for (auto& s : a.samples) s = u(rng);
  return a;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "prosody_eval_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
