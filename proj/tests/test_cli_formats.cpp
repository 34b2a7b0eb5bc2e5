#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "svae/genmodel.hpp"
#include "svae/synth.hpp"

using namespace svae;
namespace fs = std::filesystem;

TEST_CASE("manifest parsing") {
  const auto path = fs::temp_directory_path() / "svae_manifest_test.tsv";
  {
    std::ofstream out(path);
    out << "speech\t/tmp/a.wav\n";
    out << "outlier\t/tmp/b.wav\n";
    out << "\n";
  }
  const auto entries = genmodel::read_manifest(path.string());
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].role == "speech");
  CHECK(entries[1].role == "outlier");
  CHECK(entries[1].path == "/tmp/b.wav");

  {
    std::ofstream out(path);
    out << "garbage\t/tmp/c.wav\n";
  }
  CHECK_THROWS_AS(genmodel::read_manifest(path.string()), std::runtime_error);
  {
    std::ofstream out(path);
    out << "no-tab-here\n";
  }
  CHECK_THROWS_AS(genmodel::read_manifest(path.string()), std::runtime_error);
  fs::remove(path);
  CHECK_THROWS_AS(genmodel::read_manifest(path.string()), std::runtime_error);
}

TEST_CASE("synthetic corpus layout") {
  const auto dir = fs::temp_directory_path() / "svae_synth_test";
  fs::remove_all(dir);

  synth::SynthConfig cfg;
  cfg.train_clips = 10;
  cfg.valid_clips = 2;
  cfg.test_clips = 2;
  cfg.noise_clips = 4;
  cfg.clip_seconds = 0.5;
  cfg.seed = 77;
  const synth::CorpusPaths paths = synth::synthesize_corpus(cfg, dir.string());

  const auto train = genmodel::read_manifest(paths.train_manifest);
  CHECK(train.size() == 10);
  for (const auto& e : train) CHECK(e.role == "speech");

  // contaminated variant has ~20% outlier items
  const auto contaminated =
      genmodel::read_manifest(paths.train_outlier_manifest);
  int outliers = 0;
  for (const auto& e : contaminated)
    if (e.role == "outlier") ++outliers;
  const double frac =
      static_cast<double>(outliers) / static_cast<double>(contaminated.size());
  CHECK(std::fabs(frac - 0.2) <=
        1.5 / static_cast<double>(contaminated.size()));

  // every clip long enough for STFT edges: >= 4 * window_len at the
  // default 1024-sample window
  for (const auto& e : train) {
    const auto clip = signal::read_wav(e.path);
    CHECK(clip.samples.size() >= 4 * 1024);
  }

  // same seed reproduces identical audio
  const auto dir2 = fs::temp_directory_path() / "svae_synth_test2";
  fs::remove_all(dir2);
  const synth::CorpusPaths paths2 =
      synth::synthesize_corpus(cfg, dir2.string());
  const auto a = signal::read_wav(train[0].path);
  const auto b =
      signal::read_wav(genmodel::read_manifest(paths2.train_manifest)[0].path);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK(a.samples[i] == b.samples[i]);

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("pseudo-speech generator properties") {
  Rng rng(5);
  const auto clip = synth::make_pseudo_speech(16000, 1.0, rng);
  CHECK(clip.samples.size() == 16000);
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::fabs(s));
  CHECK(peak <= 0.5 + 1e-12);
  CHECK(peak > 0.1);

  const auto noise = synth::make_noise(16000, 1.0, false, rng);
  CHECK(noise.samples.size() == 16000);
  double np = 0.0;
  for (double s : noise.samples) np = std::max(np, std::fabs(s));
  CHECK(np <= 0.3 + 1e-12);
}
