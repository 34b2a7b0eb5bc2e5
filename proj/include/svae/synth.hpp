#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svae/rng.hpp"
#include "svae/signal.hpp"

namespace svae::synth {

struct SynthConfig {
  int sample_rate = 16000;
  double clip_seconds = 3.0;
  int train_clips = 40;
  int valid_clips = 8;
  int test_clips = 8;
  int noise_clips = 12;
  double outlier_fraction = 0.2;  // share of noise items in the contaminated
                                  // training manifest
  std::uint64_t seed = 0;
};

// Harmonic pseudo-speech: fundamental gliding between two random values in
// [80, 300] Hz with vibrato, 3-8 harmonics with 1/k amplitude decay, random
// amplitude envelope. The pitch movement keeps a clip's spectrogram from
// being low-rank.
signal::AudioClip make_pseudo_speech(int sample_rate, double seconds, Rng& rng);

// White noise, or one-pole low-passed noise when `low_freq` is set.
signal::AudioClip make_noise(int sample_rate, double seconds, bool low_freq,
                             Rng& rng);

struct CorpusPaths {
  std::string train_manifest;        // clean training set
  std::string train_outlier_manifest;  // ~20% noise items mixed in
  std::string valid_manifest;
  std::string test_manifest;
  std::vector<std::string> test_clips;
  std::vector<std::string> noise_clips;
};

CorpusPaths synthesize_corpus(const SynthConfig& config,
                              const std::string& out_dir);

}  // namespace svae::synth
