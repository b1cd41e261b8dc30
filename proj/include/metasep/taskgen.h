// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_TASKGEN_H_
#define METASEP_TASKGEN_H_

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "metasep/audio.h"
#include "metasep/metalearn.h"

namespace metasep::taskgen {

struct Utterance {
  std::string id;
  AudioSignal audio;
};

struct Speaker {
  std::string id;
  std::vector<Utterance> utterances;
};

struct SpeakerPool {
  std::vector<Speaker> speakers;
};

// Harmonic voice stand-in: a fundamental drawn from the speaker's band with
// up to five decaying harmonics under a slow amplitude modulation. Cheap to
// generate, separable by spectrum, and deterministic per (seed, index).
struct SpeakerSpec {
  std::string id;
  double f0_lo = 0.0;
  double f0_hi = 0.0;
  std::vector<double> harmonic_amps;  // index 0 is the fundamental
  double am_rate_hz = 2.0;
  std::uint64_t seed = 0;
};

SpeakerSpec make_speaker_spec(const std::string& id, std::uint64_t seed);
// RMS-normalized to 1. Errors if the band reaches the Nyquist frequency.
AudioSignal synth_speaker_utterance(const SpeakerSpec& spec,
                                    int utterance_index, double duration_s,
                                    int sample_rate);
SpeakerPool make_synthetic_pool(int num_speakers, int utterances_each,
                                double duration_s, int sample_rate,
                                std::uint64_t seed);

// Reads a WAV file and resamples it to the 8 kHz working rate.
AudioSignal load_audio(const std::string& path);

struct MixResult {
  AudioSignal mixture;
  AudioSignal trimmed_s1;  // first source, cut to the mixture length
  AudioSignal scaled_s2;   // second source after SNR scaling
  double scale = 1.0;
};

// mixture = s1 + a * s2 with a chosen so that the s1/s2 power ratio is
// exactly snr_db. Unequal lengths are trimmed to the shorter signal.
MixResult mix_at_snr(const AudioSignal& s1, const AudioSignal& s2,
                     double snr_db);

struct Mixture {
  AudioSignal mixture;
  std::array<AudioSignal, 2> references;
  double snr_db = 0.0;
  int utt_a = 0;  // utterance index into speaker a (first source)
  int utt_b = 0;  // utterance index into speaker b (second source)
};

// All 3 x 3 = 9 utterance pairings of one speaker pair, each mixed at an
// SNR drawn uniformly from [0, 5] dB.
struct SeparationTask {
  std::string id;
  std::string speaker_a;
  std::string speaker_b;
  std::vector<Mixture> mixtures;  // row-major over (utt_a, utt_b)
  std::uint64_t seed = 0;
};

SeparationTask build_task(const Speaker& a, const Speaker& b,
                          std::uint64_t seed);

struct TaskSplit {
  Mixture support;
  std::vector<Mixture> query;  // the four pairings sharing no utterance
                               // with the support mixture
  int support_a = 0;
  int support_b = 0;
};

TaskSplit split_support_query(const SeparationTask& task);

// All unordered speaker pairs, ordered by speaker id; n speakers yield
// n*(n-1)/2 pairs.
std::vector<std::pair<std::size_t, std::size_t>> enumerate_tasks(
    const SpeakerPool& pool);

struct NoiseProfile {
  std::string label;
  AudioSignal waveform;
};

NoiseProfile synth_noise_profile(const std::string& label, double duration_s,
                                 int sample_rate, std::uint64_t seed);

// Sentinel meaning "no noise".
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

// Adds the noise (tiled or trimmed to the mixture length) scaled so the
// speech-to-noise power ratio is exactly snr_db. kNoNoise is a no-op.
AudioSignal add_noise(const AudioSignal& mixture, const NoiseProfile& noise,
                      double snr_db);

// Serializable description of one stored mixture; paths are relative to the
// manifest's directory.
struct ManifestMixture {
  std::string mixture_path;
  std::vector<std::string> ref_paths;
  double snr_db = 0.0;
  double noise_snr_db = kNoNoise;
};

struct ManifestTask {
  std::string task_id;
  std::array<std::string, 2> speakers;
  std::string role;  // train | dev | test
  std::vector<ManifestMixture> support;
  std::vector<ManifestMixture> query;
  std::string noise_path;  // empty for clean tasks
  std::uint64_t seed = 0;
};

// JSON-lines manifest, one task per line.
void write_manifest(const std::string& path,
                    const std::vector<ManifestTask>& tasks);
std::vector<ManifestTask> read_manifest(const std::string& path);

// Loads audio for one manifest entry. Noise, when configured, is applied to
// the mixtures only; references stay clean.
meta::Task load_task(const ManifestTask& rec, const std::string& root);

struct GenConfig {
  int train_speakers = 12;
  int test_speakers = 6;
  double utterance_s = 1.0;
  int sample_rate = 8000;
  double dev_fraction = 0.15;  // of the training tasks
  bool noisy_test_variant = true;
  std::uint64_t seed = 7;
};

struct GenResult {
  std::string train_manifest;
  std::string test_clean_manifest;
  std::string test_noisy_manifest;  // empty if the variant is disabled
  int train_tasks = 0;
  int dev_tasks = 0;
  int test_tasks = 0;
};

// Synthesizes speakers, builds every pairwise task, writes WAVs and
// manifests under out_dir.
GenResult generate_dataset(const GenConfig& cfg, const std::string& out_dir);

}  // namespace metasep::taskgen

#endif  // METASEP_TASKGEN_H_
