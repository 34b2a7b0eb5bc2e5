#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "svae/synth.hpp"

namespace svae::synth {

signal::AudioClip make_pseudo_speech(int sample_rate, double seconds,
                                     Rng& rng) {
  const int n = static_cast<int>(sample_rate * seconds);
  // nonstationary pitch: a glide between two fundamentals plus vibrato, so a
  // clip's spectrogram is not low-rank (a fixed comb would be trivially
  // absorbed by a rank-1 noise model)
  const double f0_start = rng.uniform(80.0, 300.0);
  // endpoints at least a factor 1.35 apart so every clip really moves
  const double ratio = rng.uniform(1.35, 2.2);
  const double f0_end =
      f0_start * ratio <= 300.0 ? f0_start * ratio : f0_start / ratio;
  const double vib_rate = rng.uniform(3.0, 7.0);  // Hz
  const double vib_depth = rng.uniform(0.05, 0.1);
  const double vib_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const int harmonics = 3 + static_cast<int>(rng.below(6));  // 3..8
  const double env_rate = rng.uniform(1.0, 4.0);             // Hz
  const double env_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> phases(harmonics);
  for (auto& p : phases) p = rng.uniform(0.0, 2.0 * std::numbers::pi);

  signal::AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(n);
  double peak = 0.0;
  const double dur = static_cast<double>(n) / sample_rate;
  double cycle = 0.0;  // integrated fundamental phase, in cycles
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double glide = f0_start + (f0_end - f0_start) * t / dur;
    const double f0 =
        glide * (1.0 + vib_depth *
                           std::sin(2.0 * std::numbers::pi * vib_rate * t +
                                    vib_phase));
    double v = 0.0;
    for (int k = 0; k < harmonics; ++k) {
      v += std::sin(2.0 * std::numbers::pi * (k + 1) * cycle + phases[k]) /
           (k + 1);
    }
    cycle += f0 / sample_rate;
    const double env =
        0.4 + 0.6 * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * env_rate * t +
                                          env_phase));
    clip.samples[i] = v * env;
    peak = std::max(peak, std::fabs(clip.samples[i]));
  }
  const double gain = peak > 0.0 ? 0.5 / peak : 1.0;
  for (auto& s : clip.samples) s *= gain;
  return clip;
}

signal::AudioClip make_noise(int sample_rate, double seconds, bool low_freq,
                             Rng& rng) {
  const int n = static_cast<int>(sample_rate * seconds);
  signal::AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(n);
  double prev = 0.0;
  const double pole = 0.98;
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    const double white = rng.normal();
    double v = white;
    if (low_freq) {
      prev = pole * prev + (1.0 - pole) * white;
      v = prev;
    }
    clip.samples[i] = v;
    peak = std::max(peak, std::fabs(v));
  }
  const double gain = peak > 0.0 ? 0.3 / peak : 1.0;
  for (auto& s : clip.samples) s *= gain;
  return clip;
}

namespace {

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>&
                        entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot create manifest: " + path);
  for (const auto& [role, p] : entries) out << role << "\t" << p << "\n";
}

}  // namespace

CorpusPaths synthesize_corpus(const SynthConfig& config,
                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  Rng rng(config.seed);

  CorpusPaths paths;
  using Entries = std::vector<std::pair<std::string, std::string>>;
  Entries train, valid, test;

  auto emit_speech = [&](const std::string& stem, int count, Entries& list) {
    for (int i = 0; i < count; ++i) {
      const std::string p =
          (fs::path(out_dir) / (stem + "_" + std::to_string(i) + ".wav"))
              .string();
      signal::write_wav(
          make_pseudo_speech(config.sample_rate, config.clip_seconds, rng), p);
      list.emplace_back("speech", p);
    }
  };

  emit_speech("train", config.train_clips, train);
  emit_speech("valid", config.valid_clips, valid);
  emit_speech("test", config.test_clips, test);

  Entries noise_entries;
  for (int i = 0; i < config.noise_clips; ++i) {
    const bool low_freq = (i % 2) == 1;
    const std::string p =
        (fs::path(out_dir) /
         ((low_freq ? "noise_low_" : "noise_white_") + std::to_string(i) +
          ".wav"))
            .string();
    signal::write_wav(
        make_noise(config.sample_rate, config.clip_seconds, low_freq, rng), p);
    noise_entries.emplace_back("outlier", p);
    paths.noise_clips.push_back(p);
  }

  // contaminated variant: noise items so that they form ~outlier_fraction of
  // the training list
  Entries contaminated = train;
  const int n_outliers = static_cast<int>(
      std::lround(config.outlier_fraction * static_cast<double>(train.size()) /
                  (1.0 - config.outlier_fraction)));
  for (int i = 0; i < n_outliers; ++i)
    contaminated.push_back(noise_entries[i % noise_entries.size()]);

  paths.train_manifest = (fs::path(out_dir) / "train.tsv").string();
  paths.train_outlier_manifest =
      (fs::path(out_dir) / "train_outlier.tsv").string();
  paths.valid_manifest = (fs::path(out_dir) / "valid.tsv").string();
  paths.test_manifest = (fs::path(out_dir) / "test.tsv").string();
  write_manifest(paths.train_manifest, train);
  write_manifest(paths.train_outlier_manifest, contaminated);
  write_manifest(paths.valid_manifest, valid);
  write_manifest(paths.test_manifest, test);
  for (const auto& [role, p] : test) paths.test_clips.push_back(p);
  return paths;
}

}  // namespace svae::synth
