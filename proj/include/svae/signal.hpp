#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "svae/linalg.hpp"

namespace svae::signal {

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1)
  int sample_rate = 16000;
};

enum class WindowKind { Sine };

struct StftConfig {
  int window_len = 1024;
  int hop = 256;
  WindowKind window = WindowKind::Sine;

  int bins() const { return window_len / 2 + 1; }
  void validate() const;
};

// Complex STFT matrix, F rows x T columns, stored frame-contiguous
// (column-major): entry (f, t) lives at data[t*F + f].
struct Spectrogram {
  StftConfig config;
  int frames = 0;
  std::vector<std::complex<double>> data;

  int bins() const { return config.bins(); }
  std::complex<double>& at(int f, int t) { return data[t * bins() + f]; }
  std::complex<double> at(int f, int t) const { return data[t * bins() + f]; }
  std::complex<double>* frame(int t) { return data.data() + t * bins(); }
  const std::complex<double>* frame(int t) const {
    return data.data() + t * bins();
  }
};

// WAV I/O, PCM16 mono only. Integer sample v decodes to v/32768.
AudioClip read_wav(const std::string& path);
void write_wav(const AudioClip& clip, const std::string& path);

Spectrogram stft(const AudioClip& clip, const StftConfig& config);

// Weighted overlap-add synthesis. Reconstruction is exact only on the
// interior region [window_len, N - window_len); edge frames are attenuated
// because no zero-padding is applied at analysis time.
AudioClip istft(const Spectrogram& spec, int sample_rate = 16000);

// |entry|^2, same layout as Spectrogram::data.
std::vector<double> power_frames(const Spectrogram& spec);

// speech + g*noise with g set so the speech-to-scaled-noise power ratio is
// snr_db. Noise longer than speech is cropped at a seed-chosen offset
// (wrapping around).
AudioClip mix_at_snr(const AudioClip& speech, const AudioClip& noise,
                     double snr_db, std::uint64_t seed);

// In-place complex FFT/IFFT for power-of-two sizes, direct DFT otherwise.
void fft(std::vector<std::complex<double>>& buf, bool inverse);

std::vector<double> make_window(const StftConfig& config);

}  // namespace svae::signal
