// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metasep/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "metasep/error.h"

namespace metasep {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

double signal_power(const AudioSignal& s) {
  if (s.samples.empty()) return 0.0;
  double acc = 0.0;
  for (double v : s.samples) acc += v * v;
  return acc / static_cast<double>(s.samples.size());
}

double signal_rms(const AudioSignal& s) { return std::sqrt(signal_power(s)); }

AudioSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MS_CHECK(in.good(), "read_wav: cannot open ", path);

  char tag[5] = {0};
  in.read(tag, 4);
  MS_CHECK(std::strncmp(tag, "RIFF", 4) == 0, "read_wav: ", path,
           ": missing RIFF chunk, found '", tag, "'");
  read_u32(in);  // riff size
  in.read(tag, 4);
  MS_CHECK(std::strncmp(tag, "WAVE", 4) == 0, "read_wav: ", path,
           ": RIFF form is '", tag, "', not WAVE");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  AudioSignal sig;
  while (in.read(tag, 4)) {
    const std::uint32_t chunk_size = read_u32(in);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      MS_CHECK(format == 1, "read_wav: ", path, ": fmt chunk has format tag ",
               format, ", only PCM (1) is supported");
      MS_CHECK(channels == 1, "read_wav: ", path, ": fmt chunk has ", channels,
               " channels, only mono is supported");
      MS_CHECK(bits == 16, "read_wav: ", path, ": fmt chunk has ", bits,
               " bits per sample, only 16 is supported");
      have_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      MS_CHECK(have_fmt, "read_wav: ", path, ": data chunk before fmt chunk");
      const std::size_t n = chunk_size / 2;
      sig.samples.resize(n);
      sig.sample_rate = static_cast<int>(rate);
      std::vector<char> raw(chunk_size);
      in.read(raw.data(), static_cast<std::streamsize>(chunk_size));
      MS_CHECK(in.good() || in.eof(), "read_wav: ", path, ": truncated data chunk");
      for (std::size_t i = 0; i < n; ++i) {
        const auto lo = static_cast<unsigned char>(raw[2 * i]);
        const auto hi = static_cast<unsigned char>(raw[2 * i + 1]);
        const auto v = static_cast<std::int16_t>(lo | (hi << 8));
        sig.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return sig;
    } else {
      // skip unknown chunk (word aligned)
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  fail(concat("read_wav: ", path, ": no data chunk found"));
}

void write_wav(const std::string& path, const AudioSignal& signal) {
  std::ofstream out(path, std::ios::binary);
  MS_CHECK(out.good(), "write_wav: cannot open ", path);
  const auto n = static_cast<std::uint32_t>(signal.samples.size());
  const std::uint32_t data_bytes = n * 2;

  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(signal.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(signal.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (double v : signal.samples) {
    // Same 1/32768 step as the reader, so a round trip stays within half a
    // quantization step; exact +1.0 loses one code to the int16 ceiling.
    const double clamped = std::clamp(v, -1.0, 1.0);
    auto q = static_cast<std::int32_t>(std::lround(clamped * 32768.0));
    q = std::clamp(q, -32768, 32767);
    write_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  MS_CHECK(out.good(), "write_wav: short write to ", path);
}

AudioSignal resample_to_8k(const AudioSignal& signal) {
  constexpr int kTarget = 8000;
  if (signal.sample_rate == kTarget) return signal;
  MS_CHECK(signal.sample_rate > kTarget && signal.sample_rate % kTarget == 0,
           "resample_to_8k: source rate ", signal.sample_rate,
           " is not an integer multiple of ", kTarget);
  const int factor = signal.sample_rate / kTarget;

  // Windowed-sinc low pass at the target Nyquist, then decimate.
  const int half = 8 * factor;
  const int taps = 2 * half + 1;
  std::vector<double> h(static_cast<std::size_t>(taps));
  const double cutoff = 0.9 / factor;  // fraction of source Nyquist
  double norm = 0.0;
  for (int i = 0; i < taps; ++i) {
    const int m = i - half;
    const double x = kPi * cutoff * m;
    const double sinc = m == 0 ? 1.0 : std::sin(x) / x;
    const double window = 0.54 + 0.46 * std::cos(kPi * m / half);
    h[static_cast<std::size_t>(i)] = cutoff * sinc * window;
    norm += h[static_cast<std::size_t>(i)];
  }
  for (double& v : h) v /= norm;

  const auto t_in = static_cast<std::int64_t>(signal.samples.size());
  const auto t_out = t_in / factor;
  AudioSignal out;
  out.sample_rate = kTarget;
  out.samples.resize(static_cast<std::size_t>(t_out));
  for (std::int64_t n = 0; n < t_out; ++n) {
    const std::int64_t center = n * factor;
    double acc = 0.0;
    for (int k = 0; k < taps; ++k) {
      const std::int64_t idx = center + k - half;
      if (idx < 0 || idx >= t_in) continue;
      acc += h[static_cast<std::size_t>(k)] *
             signal.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace metasep
