// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metasep/taskgen.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "metasep/error.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace metasep::taskgen {

namespace {

// splitmix64; decorrelates derived seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double power_of(const std::vector<double>& s) {
  double acc = 0.0;
  for (double v : s) acc += v * v;
  return s.empty() ? 0.0 : acc / static_cast<double>(s.size());
}

}  // namespace

SpeakerSpec make_speaker_spec(const std::string& id, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SpeakerSpec spec;
  spec.id = id;
  spec.seed = seed;

  // Log-uniform band center keeps low and high voices equally likely.
  std::uniform_real_distribution<double> log_center(std::log(250.0),
                                                    std::log(1400.0));
  const double center = std::exp(log_center(rng));
  spec.f0_lo = 0.95 * center;
  spec.f0_hi = 1.05 * center;

  std::uniform_int_distribution<int> n_harm(3, 5);
  std::uniform_real_distribution<double> amp_jitter(0.7, 1.0);
  const int k = n_harm(rng);
  spec.harmonic_amps.push_back(1.0);
  for (int h = 1; h < k; ++h) {
    spec.harmonic_amps.push_back(0.6 / h * amp_jitter(rng));
  }

  std::uniform_real_distribution<double> am(1.5, 4.0);
  spec.am_rate_hz = am(rng);
  return spec;
}

AudioSignal synth_speaker_utterance(const SpeakerSpec& spec,
                                    int utterance_index, double duration_s,
                                    int sample_rate) {
  MS_CHECK(sample_rate > 0, "sample rate must be positive, got ", sample_rate);
  MS_CHECK(duration_s > 0.0, "duration must be positive, got ", duration_s);
  MS_CHECK(utterance_index >= 0, "utterance index must be non-negative");
  MS_CHECK(spec.f0_lo > 0.0 && spec.f0_hi > spec.f0_lo,
           "speaker \"", spec.id, "\" has an invalid band [", spec.f0_lo, ", ",
           spec.f0_hi, "]");
  const double nyquist = sample_rate / 2.0;
  MS_CHECK(spec.f0_hi < nyquist, "speaker \"", spec.id, "\" band [",
           spec.f0_lo, ", ", spec.f0_hi,
           "] Hz reaches the Nyquist frequency of ", nyquist, " Hz");
  MS_CHECK(!spec.harmonic_amps.empty() && spec.harmonic_amps[0] > 0.0,
           "speaker \"", spec.id, "\" needs a nonzero fundamental amplitude");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  MS_CHECK(n >= 16, "utterance of ", n, " samples is too short to be useful");

  std::mt19937_64 rng(
      mix_seed(spec.seed, 0x11u + static_cast<std::uint64_t>(utterance_index)));
  std::uniform_real_distribution<double> band(spec.f0_lo, spec.f0_hi);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  const double f0 = band(rng);
  struct Partial {
    double freq, amp, phase;
  };
  std::vector<Partial> partials;
  for (std::size_t h = 0; h < spec.harmonic_amps.size(); ++h) {
    const double freq = f0 * static_cast<double>(h + 1);
    const double ph = phase(rng);  // drawn even for dropped partials, so the
                                   // waveform below Nyquist is rate-stable
    if (freq >= 0.45 * sample_rate) continue;
    if (spec.harmonic_amps[h] <= 0.0) continue;
    partials.push_back({freq, spec.harmonic_amps[h], ph});
  }
  const double am_phase = phase(rng);

  AudioSignal out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < n; ++t) {
    const double ts = static_cast<double>(t) / sample_rate;
    double v = 0.0;
    for (const Partial& p : partials) {
      v += p.amp * std::sin(two_pi * p.freq * ts + p.phase);
    }
    const double env = 1.0 + 0.5 * std::sin(two_pi * spec.am_rate_hz * ts + am_phase);
    out.samples[t] = env * v;
  }

  const double rms = signal_rms(out);
  MS_CHECK(rms > 0.0, "synthesized utterance for \"", spec.id,
           "\" came out silent");
  for (double& v : out.samples) v /= rms;
  return out;
}

SpeakerPool make_synthetic_pool(int num_speakers, int utterances_each,
                                double duration_s, int sample_rate,
                                std::uint64_t seed) {
  MS_CHECK(num_speakers >= 1, "pool needs at least one speaker");
  MS_CHECK(utterances_each >= 1, "each speaker needs at least one utterance");
  int width = 2;
  for (int v = num_speakers - 1; v >= 100; v /= 10) ++width;

  SpeakerPool pool;
  pool.speakers.reserve(static_cast<std::size_t>(num_speakers));
  for (int i = 0; i < num_speakers; ++i) {
    std::string digits = std::to_string(i);
    std::string id =
        "spk" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(digits.size(), width), '0') +
        digits;
    Speaker spk;
    spk.id = id;
    SpeakerSpec spec =
        make_speaker_spec(id, mix_seed(seed, 0x5Eu + static_cast<std::uint64_t>(i)));
    for (int u = 0; u < utterances_each; ++u) {
      Utterance utt;
      utt.id = concat(id, "_u", u);
      utt.audio = synth_speaker_utterance(spec, u, duration_s, sample_rate);
      spk.utterances.push_back(std::move(utt));
    }
    pool.speakers.push_back(std::move(spk));
  }
  return pool;
}

AudioSignal load_audio(const std::string& path) {
  return resample_to_8k(read_wav(path));
}

MixResult mix_at_snr(const AudioSignal& s1, const AudioSignal& s2,
                     double snr_db) {
  MS_CHECK(std::isfinite(snr_db), "mixing SNR must be finite, got ", snr_db);
  MS_CHECK(s1.sample_rate == s2.sample_rate, "sample rate mismatch: ",
           s1.sample_rate, " vs ", s2.sample_rate);
  const std::size_t n = std::min(s1.samples.size(), s2.samples.size());
  MS_CHECK(n > 0, "cannot mix empty signals");

  MixResult out;
  out.trimmed_s1.sample_rate = s1.sample_rate;
  out.trimmed_s1.samples.assign(s1.samples.begin(),
                                s1.samples.begin() + static_cast<std::ptrdiff_t>(n));
  out.scaled_s2.sample_rate = s1.sample_rate;
  out.scaled_s2.samples.assign(s2.samples.begin(),
                               s2.samples.begin() + static_cast<std::ptrdiff_t>(n));

  const double p1 = power_of(out.trimmed_s1.samples);
  const double p2 = power_of(out.scaled_s2.samples);
  MS_CHECK(p1 > 0.0, "first source has zero power, SNR is undefined");
  MS_CHECK(p2 > 0.0, "second source has zero power, SNR is undefined");

  out.scale = std::sqrt(p1 / (p2 * std::pow(10.0, snr_db / 10.0)));
  for (double& v : out.scaled_s2.samples) v *= out.scale;

  out.mixture.sample_rate = s1.sample_rate;
  out.mixture.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.mixture.samples[i] = out.trimmed_s1.samples[i] + out.scaled_s2.samples[i];
  }
  return out;
}

SeparationTask build_task(const Speaker& a, const Speaker& b,
                          std::uint64_t seed) {
  MS_CHECK(a.utterances.size() == 3, "speaker \"", a.id,
           "\" must provide exactly 3 utterances, got ", a.utterances.size());
  MS_CHECK(b.utterances.size() == 3, "speaker \"", b.id,
           "\" must provide exactly 3 utterances, got ", b.utterances.size());
  MS_CHECK(a.id != b.id, "a task needs two distinct speakers, got \"", a.id,
           "\" twice");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> snr(0.0, 5.0);

  SeparationTask task;
  task.id = a.id + "+" + b.id;
  task.speaker_a = a.id;
  task.speaker_b = b.id;
  task.seed = seed;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double s = snr(rng);
      MixResult m = mix_at_snr(a.utterances[static_cast<std::size_t>(i)].audio,
                               b.utterances[static_cast<std::size_t>(j)].audio, s);
      Mixture mx;
      mx.mixture = std::move(m.mixture);
      mx.references = {std::move(m.trimmed_s1), std::move(m.scaled_s2)};
      mx.snr_db = s;
      mx.utt_a = i;
      mx.utt_b = j;
      task.mixtures.push_back(std::move(mx));
    }
  }
  return task;
}

TaskSplit split_support_query(const SeparationTask& task) {
  MS_CHECK(task.mixtures.size() == 9, "task \"", task.id,
           "\" must hold all 9 mixtures to be split, got ",
           task.mixtures.size());

  std::mt19937_64 rng(mix_seed(task.seed, 0x5A17));
  std::uniform_int_distribution<int> pick(0, 8);
  const int choice = pick(rng);

  TaskSplit split;
  split.support_a = choice / 3;
  split.support_b = choice % 3;
  for (const Mixture& m : task.mixtures) {
    if (m.utt_a == split.support_a && m.utt_b == split.support_b) {
      split.support = m;
    } else if (m.utt_a != split.support_a && m.utt_b != split.support_b) {
      // Queries share no source material with the support mixture.
      split.query.push_back(m);
    }
  }
  MS_CHECK(split.query.size() == 4, "expected 4 query mixtures, got ",
           split.query.size());
  return split;
}

std::vector<std::pair<std::size_t, std::size_t>> enumerate_tasks(
    const SpeakerPool& pool) {
  const std::size_t n = pool.speakers.size();
  MS_CHECK(n >= 2, "need at least 2 speakers to form a task, got ", n);

  std::set<std::string> ids;
  for (const Speaker& s : pool.speakers) {
    MS_CHECK(ids.insert(s.id).second, "duplicate speaker id \"", s.id, "\"");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return pool.speakers[x].id < pool.speakers[y].id;
  });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pairs.emplace_back(order[i], order[j]);
    }
  }
  return pairs;
}

NoiseProfile synth_noise_profile(const std::string& label, double duration_s,
                                 int sample_rate, std::uint64_t seed) {
  MS_CHECK(sample_rate > 0 && duration_s > 0.0,
           "noise profile needs a positive duration and sample rate");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  MS_CHECK(n >= 16, "noise profile of ", n, " samples is too short");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  NoiseProfile profile;
  profile.label = label;
  profile.waveform.sample_rate = sample_rate;
  profile.waveform.samples.resize(n);
  for (double& v : profile.waveform.samples) v = gauss(rng);
  const double rms = signal_rms(profile.waveform);
  for (double& v : profile.waveform.samples) v /= rms;
  return profile;
}

AudioSignal add_noise(const AudioSignal& mixture, const NoiseProfile& noise,
                      double snr_db) {
  if (snr_db == kNoNoise) return mixture;
  MS_CHECK(std::isfinite(snr_db), "noise SNR must be finite or kNoNoise, got ",
           snr_db);
  MS_CHECK(!mixture.samples.empty(), "cannot add noise to an empty mixture");
  MS_CHECK(!noise.waveform.samples.empty(), "noise profile \"", noise.label,
           "\" is empty");
  MS_CHECK(noise.waveform.sample_rate == mixture.sample_rate,
           "noise profile \"", noise.label, "\" is at ",
           noise.waveform.sample_rate, " Hz, mixture is at ",
           mixture.sample_rate, " Hz");

  const std::size_t n = mixture.samples.size();
  std::vector<double> segment(n);
  for (std::size_t i = 0; i < n; ++i) {
    segment[i] = noise.waveform.samples[i % noise.waveform.samples.size()];
  }

  const double pm = power_of(mixture.samples);
  const double pn = power_of(segment);
  MS_CHECK(pm > 0.0, "mixture has zero power, SNR is undefined");
  MS_CHECK(pn > 0.0, "noise profile \"", noise.label,
           "\" has zero power over the used segment");

  const double b = std::sqrt(pm / (pn * std::pow(10.0, snr_db / 10.0)));
  AudioSignal out;
  out.sample_rate = mixture.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = mixture.samples[i] + b * segment[i];
  }
  return out;
}

namespace {

json mixture_to_json(const ManifestMixture& m) {
  json j;
  j["mixture"] = m.mixture_path;
  j["refs"] = m.ref_paths;
  j["snr_db"] = m.snr_db;
  if (std::isfinite(m.noise_snr_db)) j["noise_snr_db"] = m.noise_snr_db;
  return j;
}

ManifestMixture mixture_from_json(const json& j) {
  ManifestMixture m;
  m.mixture_path = j.at("mixture").get<std::string>();
  m.ref_paths = j.at("refs").get<std::vector<std::string>>();
  m.snr_db = j.at("snr_db").get<double>();
  if (j.contains("noise_snr_db")) m.noise_snr_db = j.at("noise_snr_db").get<double>();
  return m;
}

json task_to_json(const ManifestTask& t) {
  json j;
  j["task_id"] = t.task_id;
  j["speakers"] = {t.speakers[0], t.speakers[1]};
  j["role"] = t.role;
  j["seed"] = t.seed;
  json support = json::array();
  for (const ManifestMixture& m : t.support) support.push_back(mixture_to_json(m));
  json query = json::array();
  for (const ManifestMixture& m : t.query) query.push_back(mixture_to_json(m));
  j["support"] = std::move(support);
  j["query"] = std::move(query);
  if (!t.noise_path.empty()) j["noise"] = {{"path", t.noise_path}};
  return j;
}

ManifestTask task_from_json(const json& j) {
  ManifestTask t;
  t.task_id = j.at("task_id").get<std::string>();
  const auto speakers = j.at("speakers").get<std::vector<std::string>>();
  MS_CHECK(speakers.size() == 2, "task \"", t.task_id, "\" lists ",
           speakers.size(), " speakers, expected 2");
  t.speakers = {speakers[0], speakers[1]};
  t.role = j.at("role").get<std::string>();
  MS_CHECK(t.role == "train" || t.role == "dev" || t.role == "test",
           "task \"", t.task_id, "\" has unknown role \"", t.role, "\"");
  t.seed = j.at("seed").get<std::uint64_t>();
  for (const json& m : j.at("support")) t.support.push_back(mixture_from_json(m));
  for (const json& m : j.at("query")) t.query.push_back(mixture_from_json(m));
  MS_CHECK(!t.support.empty(), "task \"", t.task_id, "\" has no support set");
  if (j.contains("noise")) t.noise_path = j.at("noise").at("path").get<std::string>();
  return t;
}

}  // namespace

void write_manifest(const std::string& path,
                    const std::vector<ManifestTask>& tasks) {
  std::ofstream os(path);
  MS_CHECK(os.is_open(), "cannot open manifest for writing: ", path);
  for (const ManifestTask& t : tasks) {
    os << task_to_json(t).dump() << "\n";
  }
  MS_CHECK(os.good(), "write failed for manifest: ", path);
}

std::vector<ManifestTask> read_manifest(const std::string& path) {
  std::ifstream is(path);
  MS_CHECK(is.is_open(), "cannot open manifest: ", path);
  std::vector<ManifestTask> tasks;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      tasks.push_back(task_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail("manifest ", path, ":", line_no, ": ", e.what());
    }
  }
  MS_CHECK(!tasks.empty(), "manifest ", path, " holds no tasks");
  return tasks;
}

meta::Task load_task(const ManifestTask& rec, const std::string& root) {
  const fs::path base(root);
  NoiseProfile noise;
  const bool has_noise = !rec.noise_path.empty();
  if (has_noise) {
    noise.label = rec.noise_path;
    noise.waveform = load_audio((base / rec.noise_path).string());
  }

  auto load_examples = [&](const std::vector<ManifestMixture>& records) {
    std::vector<meta::Example> examples;
    examples.reserve(records.size());
    for (const ManifestMixture& m : records) {
      meta::Example ex;
      ex.mixture = load_audio((base / m.mixture_path).string());
      if (std::isfinite(m.noise_snr_db)) {
        MS_CHECK(has_noise, "task \"", rec.task_id, "\" asks for noise at ",
                 m.noise_snr_db, " dB but carries no noise profile");
        ex.mixture = add_noise(ex.mixture, noise, m.noise_snr_db);
      }
      for (const std::string& ref : m.ref_paths) {
        ex.references.push_back(load_audio((base / ref).string()));
      }
      examples.push_back(std::move(ex));
    }
    return examples;
  };

  meta::Task task;
  task.id = rec.task_id;
  task.support = load_examples(rec.support);
  task.query = load_examples(rec.query);
  return task;
}

namespace {

// Writes mixture and reference WAVs with a shared gain chosen for 16-bit
// headroom; SNR and SI-SNR are invariant under the common scaling.
ManifestMixture store_mixture(const Mixture& m, const fs::path& out_dir,
                              const fs::path& task_dir,
                              const std::string& tag) {
  double peak = 0.0;
  for (double v : m.mixture.samples) peak = std::max(peak, std::abs(v));
  for (const AudioSignal& r : m.references) {
    for (double v : r.samples) peak = std::max(peak, std::abs(v));
  }
  MS_CHECK(peak > 0.0, "mixture \"", tag, "\" is silent");
  const double gain = 0.97 / peak;

  auto scaled = [&](const AudioSignal& s) {
    AudioSignal out = s;
    for (double& v : out.samples) v *= gain;
    return out;
  };

  fs::create_directories(out_dir / task_dir);
  ManifestMixture rec;
  rec.snr_db = m.snr_db;
  rec.mixture_path = (task_dir / concat("mix_", tag, ".wav")).string();
  write_wav((out_dir / rec.mixture_path).string(), scaled(m.mixture));
  for (std::size_t r = 0; r < m.references.size(); ++r) {
    std::string rel = (task_dir / concat("ref", r + 1, "_", tag, ".wav")).string();
    write_wav((out_dir / rel).string(), scaled(m.references[r]));
    rec.ref_paths.push_back(std::move(rel));
  }
  return rec;
}

ManifestTask store_task(const SeparationTask& task, const TaskSplit& split,
                        const std::string& role, const fs::path& out_dir) {
  ManifestTask rec;
  rec.task_id = task.id;
  rec.speakers = {task.speaker_a, task.speaker_b};
  rec.role = role;
  rec.seed = task.seed;

  const fs::path task_dir = fs::path("wav") / task.id;
  rec.support.push_back(store_mixture(
      split.support, out_dir, task_dir,
      concat("s", split.support.utt_a, split.support.utt_b)));
  for (const Mixture& q : split.query) {
    rec.query.push_back(store_mixture(q, out_dir, task_dir,
                                      concat("q", q.utt_a, q.utt_b)));
  }
  return rec;
}

}  // namespace

GenResult generate_dataset(const GenConfig& cfg, const std::string& out_dir) {
  MS_CHECK(cfg.train_speakers >= 2, "need at least 2 training speakers, got ",
           cfg.train_speakers);
  MS_CHECK(cfg.test_speakers >= 2, "need at least 2 test speakers, got ",
           cfg.test_speakers);
  MS_CHECK(cfg.dev_fraction >= 0.0 && cfg.dev_fraction < 1.0,
           "dev_fraction must be in [0, 1), got ", cfg.dev_fraction);
  MS_CHECK(cfg.sample_rate == 8000,
           "datasets are generated at the 8 kHz working rate, got ",
           cfg.sample_rate);

  const fs::path out(out_dir);
  fs::create_directories(out / "wav");
  fs::create_directories(out / "noise");

  const int total = cfg.train_speakers + cfg.test_speakers;
  SpeakerPool pool = make_synthetic_pool(total, 3, cfg.utterance_s,
                                         cfg.sample_rate, mix_seed(cfg.seed, 1));
  SpeakerPool train_pool, test_pool;
  train_pool.speakers.assign(pool.speakers.begin(),
                             pool.speakers.begin() + cfg.train_speakers);
  test_pool.speakers.assign(pool.speakers.begin() + cfg.train_speakers,
                            pool.speakers.end());

  std::vector<std::string> noise_files;
  for (int i = 0; i < 3; ++i) {
    NoiseProfile p = synth_noise_profile(concat("hiss", i), cfg.utterance_s,
                                         cfg.sample_rate, mix_seed(cfg.seed, 0x40u + static_cast<std::uint64_t>(i)));
    std::string rel = (fs::path("noise") / concat(p.label, ".wav")).string();
    write_wav((out / rel).string(), p.waveform);
    noise_files.push_back(std::move(rel));
  }

  auto build_set = [&](const SpeakerPool& subset, std::uint64_t salt) {
    std::vector<std::pair<SeparationTask, TaskSplit>> built;
    const auto pairs = enumerate_tasks(subset);
    built.reserve(pairs.size());
    std::uint64_t k = 0;
    for (const auto& [i, j] : pairs) {
      SeparationTask t = build_task(subset.speakers[i], subset.speakers[j],
                                    mix_seed(cfg.seed, salt + k));
      TaskSplit split = split_support_query(t);
      built.emplace_back(std::move(t), std::move(split));
      ++k;
    }
    return built;
  };

  GenResult result;

  // Training pairs, with a held-out dev subset for model selection.
  {
    auto built = build_set(train_pool, 0x1000);
    const auto n = built.size();
    auto n_dev = static_cast<std::size_t>(
        std::ceil(cfg.dev_fraction * static_cast<double>(n)));
    if (cfg.dev_fraction > 0.0 && n_dev == 0) n_dev = 1;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 2));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<bool> is_dev(n, false);
    for (std::size_t d = 0; d < n_dev; ++d) is_dev[order[d]] = true;

    std::vector<ManifestTask> recs;
    recs.reserve(n);
    for (std::size_t idx = 0; idx < n; ++idx) {
      const std::string role = is_dev[idx] ? "dev" : "train";
      recs.push_back(store_task(built[idx].first, built[idx].second, role, out));
      if (is_dev[idx]) {
        ++result.dev_tasks;
      } else {
        ++result.train_tasks;
      }
    }
    result.train_manifest = (out / "train.jsonl").string();
    write_manifest(result.train_manifest, recs);
  }

  // Test pairs: a clean manifest and, optionally, the same tasks with a
  // noise profile and per-mixture noise levels.
  {
    auto built = build_set(test_pool, 0x2000);
    std::vector<ManifestTask> clean;
    clean.reserve(built.size());
    for (const auto& [task, split] : built) {
      clean.push_back(store_task(task, split, "test", out));
    }
    result.test_tasks = static_cast<int>(clean.size());
    result.test_clean_manifest = (out / "test_clean.jsonl").string();
    write_manifest(result.test_clean_manifest, clean);

    if (cfg.noisy_test_variant) {
      std::vector<ManifestTask> noisy = clean;
      for (std::size_t idx = 0; idx < noisy.size(); ++idx) {
        std::mt19937_64 rng(mix_seed(noisy[idx].seed, 0xA0));
        std::uniform_real_distribution<double> snr(10.0, 15.0);
        noisy[idx].noise_path =
            noise_files[rng() % noise_files.size()];
        for (ManifestMixture& m : noisy[idx].support) m.noise_snr_db = snr(rng);
        for (ManifestMixture& m : noisy[idx].query) m.noise_snr_db = snr(rng);
      }
      result.test_noisy_manifest = (out / "test_noisy.jsonl").string();
      write_manifest(result.test_noisy_manifest, noisy);
    }
  }

  return result;
}

}  // namespace metasep::taskgen
