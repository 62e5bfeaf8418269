#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "prosody_eval/signal.hpp"

namespace prosody_eval {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

}  // namespace

void AudioBuffer::validate() const {
  if (sample_rate <= 0) throw Error("invalid sample rate: " + std::to_string(sample_rate));
  if (samples.empty()) throw Error("audio buffer is empty");
}

AudioBuffer parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    throw Error("not a RIFF/WAVE file");

  std::optional<std::span<const std::uint8_t>> fmt;
  std::optional<std::span<const std::uint8_t>> data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (tag_is(bytes, pos, "fmt ")) fmt = bytes.subspan(body, avail);
    if (tag_is(bytes, pos, "data")) data = bytes.subspan(body, avail);
    pos = body + size + (size & 1u);
  }
  if (!fmt || fmt->size() < 16) throw Error("WAV file has no fmt chunk");
  if (!data) throw Error("WAV file has no data chunk");

  std::uint16_t format = read_u16(*fmt, 0);
  const std::uint16_t channels = read_u16(*fmt, 2);
  const std::uint32_t rate = read_u32(*fmt, 4);
  const std::uint16_t bits = read_u16(*fmt, 14);
  if (format == kFormatExtensible && fmt->size() >= 26) format = read_u16(*fmt, 24);

  if (format != kFormatPcm) throw Error("unsupported encoding: format tag " + std::to_string(format));
  if (channels != 1) throw Error("unsupported channel count: " + std::to_string(channels));
  if (bits != 16) throw Error("unsupported bit depth: " + std::to_string(bits));
  if (rate == 0) throw Error("unsupported sample rate: 0");

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  const std::size_t n = data->size() / 2;
  audio.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto raw = static_cast<std::int16_t>(read_u16(*data, 2 * i));
    audio.samples[i] = static_cast<double>(raw) / 32768.0;
  }
  return audio;
}

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open audio file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio) {
  if (audio.sample_rate <= 0) throw Error("invalid sample rate: " + std::to_string(audio.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void save_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  const auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write audio file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

AudioBuffer resample_linear(const AudioBuffer& audio, int target_rate) {
  audio.validate();
  if (target_rate <= 0) throw Error("invalid target sample rate");
  if (target_rate == audio.sample_rate) return audio;
  const double ratio = static_cast<double>(audio.sample_rate) / target_rate;
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(audio.samples.size() - 1) / ratio)) + 1;
  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double src = static_cast<double>(i) * ratio;
    const auto lo = static_cast<std::size_t>(src);
    const std::size_t hi = std::min(lo + 1, audio.samples.size() - 1);
    const double frac = src - static_cast<double>(lo);
    out.samples[i] = audio.samples[lo] * (1.0 - frac) + audio.samples[hi] * frac;
  }
  return out;
}

}  // namespace prosody_eval
