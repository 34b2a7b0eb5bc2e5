#include <cmath>
#include <numbers>
#include <stdexcept>

#include "svae/kernels.hpp"
#include "svae/rng.hpp"
#include "svae/signal.hpp"

namespace svae::signal {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

void dft_direct(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  std::vector<std::complex<double>> out(n);
  const double sign = inverse ? 2.0 : -2.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      const double ang = sign * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(m) / static_cast<double>(n);
      acc += a[m] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  a = std::move(out);
}

}  // namespace

void fft(std::vector<std::complex<double>>& buf, bool inverse) {
  if (is_pow2(buf.size()))
    fft_radix2(buf, inverse);
  else
    dft_direct(buf, inverse);
}

void StftConfig::validate() const {
  if (window_len <= 0 || hop <= 0 || hop > window_len)
    throw std::invalid_argument("StftConfig: need 0 < hop <= window_len");
  if (window_len % hop != 0)
    throw std::invalid_argument("StftConfig: hop must divide window_len");
}

std::vector<double> make_window(const StftConfig& config) {
  config.validate();
  std::vector<double> w(config.window_len);
  for (int n = 0; n < config.window_len; ++n) {
    w[n] = std::sin(std::numbers::pi * (n + 0.5) / config.window_len);
  }
  return w;
}

Spectrogram stft(const AudioClip& clip, const StftConfig& config) {
  config.validate();
  const int win = config.window_len;
  const int hop = config.hop;
  const int n = static_cast<int>(clip.samples.size());
  if (n < win)
    throw std::invalid_argument("stft: clip shorter than one window");

  const std::vector<double> w = make_window(config);
  Spectrogram spec;
  spec.config = config;
  spec.frames = (n - win) / hop + 1;
  const int bins = config.bins();
  spec.data.resize(static_cast<std::size_t>(spec.frames) * bins);

  std::vector<std::complex<double>> buf(win);
  for (int t = 0; t < spec.frames; ++t) {
    const double* x = clip.samples.data() + static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < win; ++i) buf[i] = {x[i] * w[i], 0.0};
    fft(buf, false);
    std::complex<double>* frame = spec.frame(t);
    for (int f = 0; f < bins; ++f) frame[f] = buf[f];
  }
  return spec;
}

AudioClip istft(const Spectrogram& spec, int sample_rate) {
  const StftConfig& config = spec.config;
  config.validate();
  const int overlap = config.window_len / config.hop;
  if (overlap < 2)
    throw std::invalid_argument(
        "istft: window/hop does not satisfy constant overlap-add");

  const int win = config.window_len;
  const int hop = config.hop;
  const int bins = config.bins();
  const std::vector<double> w = make_window(config);

  const int n = (spec.frames - 1) * hop + win;
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(n, 0.0);
  std::vector<double> norm(n, 0.0);

  std::vector<std::complex<double>> buf(win);
  for (int t = 0; t < spec.frames; ++t) {
    const std::complex<double>* frame = spec.frame(t);
    for (int f = 0; f < bins; ++f) buf[f] = frame[f];
    for (int f = bins; f < win; ++f) buf[f] = std::conj(frame[win - f]);
    fft(buf, true);
    double* y = clip.samples.data() + static_cast<std::size_t>(t) * hop;
    double* d = norm.data() + static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < win; ++i) {
      y[i] += buf[i].real() * w[i];
      d[i] += w[i] * w[i];
    }
  }
  for (int i = 0; i < n; ++i) {
    if (norm[i] > 0.0) clip.samples[i] /= norm[i];
  }
  return clip;
}

std::vector<double> power_frames(const Spectrogram& spec) {
  std::vector<double> p(spec.data.size());
  kernels::active().complex_power(spec.data.data(), p.data(), spec.data.size());
  return p;
}

AudioClip mix_at_snr(const AudioClip& speech, const AudioClip& noise,
                     double snr_db, std::uint64_t seed) {
  const std::size_t n = speech.samples.size();
  if (noise.samples.size() < n)
    throw std::invalid_argument("mix_at_snr: noise shorter than speech");
  if (noise.sample_rate != speech.sample_rate)
    throw std::invalid_argument("mix_at_snr: sample rate mismatch");

  Rng rng(seed);
  const std::size_t offset = rng.below(noise.samples.size());

  const auto& k = kernels::active();
  const double p_speech =
      k.dot(speech.samples.data(), speech.samples.data(), n);
  if (p_speech <= 0.0)
    throw std::invalid_argument("mix_at_snr: silent speech signal");

  std::vector<double> cut(n);
  for (std::size_t i = 0; i < n; ++i)
    cut[i] = noise.samples[(offset + i) % noise.samples.size()];
  const double p_noise = k.dot(cut.data(), cut.data(), n);
  if (p_noise <= 0.0)
    throw std::invalid_argument("mix_at_snr: silent noise signal");

  const double g =
      std::sqrt(p_speech / (p_noise * std::pow(10.0, snr_db / 10.0)));
  AudioClip out;
  out.sample_rate = speech.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.samples[i] = speech.samples[i] + g * cut[i];
  return out;
}

}  // namespace svae::signal
