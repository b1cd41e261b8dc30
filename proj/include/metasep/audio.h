// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_AUDIO_H_
#define METASEP_AUDIO_H_

#include <string>
#include <vector>

namespace metasep {

// Mono sampled waveform, float values nominally in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 8000;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Mean squared sample value.
double signal_power(const AudioSignal& s);
double signal_rms(const AudioSignal& s);

// Mono 16-bit PCM WAV. Reading anything else reports the offending chunk;
// writing clamps to [-1, 1] before quantizing.
AudioSignal read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioSignal& signal);

// Low-pass + decimate. The source rate must be an integer multiple of 8 kHz;
// an 8 kHz input is returned unchanged.
AudioSignal resample_to_8k(const AudioSignal& signal);

}  // namespace metasep

#endif  // METASEP_AUDIO_H_
