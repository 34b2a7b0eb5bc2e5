#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svae/diffnet.hpp"
#include "svae/signal.hpp"

namespace svae::genmodel {

enum class ModelKind { Vae, Stvae };

struct GammaPrior {
  double alpha = 100.0;
  double beta = 100.0;
};

// Full model state: encoder maps a power frame (length F) to [mu; log_var]
// (length 2L), decoder maps z (length L) to per-bin log-variances (length F).
struct Checkpoint {
  ModelKind kind = ModelKind::Stvae;
  int latent_dim = 32;
  signal::StftConfig stft;
  GammaPrior prior;
  diffnet::Mlp encoder;
  diffnet::Mlp decoder;

  int bins() const { return stft.bins(); }
};

Checkpoint make_checkpoint(ModelKind kind, const signal::StftConfig& stft,
                           int latent_dim, int hidden, GammaPrior prior,
                           Rng& rng);

struct EncoderOutput {
  Vector mu;
  Vector log_var;
};

struct DecoderOutput {
  Vector log_var_s;  // log sigma^2_theta per frequency bin
};

struct GammaPosteriorParams {
  double alpha_p = 0.0;
  double beta_p = 0.0;
};

// The encoder consumes the power frame through a fixed log1p front-end
// (phase-invariant, parameter-free).
EncoderOutput encode(const Checkpoint& ckpt, std::span<const double> power_frame,
                     diffnet::ForwardTape* tape = nullptr);

// z = mu + exp(log_var/2) .* eps, eps ~ N(0, I)
Vector reparametrize(const EncoderOutput& enc, Rng& rng);
Vector reparametrize_with(const EncoderOutput& enc, const Vector& eps);

DecoderOutput decode(const Checkpoint& ckpt, const Vector& z,
                     diffnet::ForwardTape* tape = nullptr);

// KL(q || N(0, I)) for a diagonal Gaussian q.
double kl_gauss_std(const EncoderOutput& enc);

// Variance floor applied wherever sigma^2 = exp(log_var_s) enters a
// denominator.
inline constexpr double kVarianceFloor = 1e-10;

GammaPosteriorParams gamma_posterior(const GammaPrior& prior,
                                     std::span<const double> power_frame,
                                     const DecoderOutput& dec);

struct FrameGrads {
  double loss = 0.0;
  diffnet::GradBundle encoder;
  diffnet::GradBundle decoder;
  double d_alpha = 0.0;
  double d_beta = 0.0;
};

// Negative per-frame ELBO with a single reparametrized sample driven by the
// frozen standard-normal draw `eps`. The parameter-independent F*log(pi)
// constant of the complex Gaussian density is omitted; the alpha/beta
// constants of the weighted model are retained.
double vae_frame_loss(const Checkpoint& ckpt, std::span<const double> frame,
                      Rng& rng);
double stvae_frame_loss(const Checkpoint& ckpt, std::span<const double> frame,
                        Rng& rng);
double frame_loss_with(const Checkpoint& ckpt, std::span<const double> frame,
                       const Vector& eps, FrameGrads* grads);

struct ManifestEntry {
  std::string role;  // "speech" or "outlier"
  std::string path;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);

struct TrainConfig {
  diffnet::AdamConfig adam;  // learning_rate defaults to 1e-4
  int batch_size = 128;
  int patience = 20;
  int max_epochs = 200;
  bool learn_prior = false;  // gradient updates of alpha/beta, off by default
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  bool diverged = false;
};

// Frame pool assembled from manifests; exposed so callers can feed in-memory
// data as well as files.
struct FramePool {
  int bins = 0;
  std::vector<double> frames;  // frame-contiguous, bins * count
  std::size_t count() const { return bins ? frames.size() / bins : 0; }
  std::span<const double> frame(std::size_t i) const {
    return {frames.data() + i * bins, static_cast<std::size_t>(bins)};
  }
};

FramePool load_frames(const std::vector<ManifestEntry>& manifest,
                      const signal::StftConfig& stft);

// Sets the decoder's output bias to log(mean power per bin) over the pool, so
// the log-variance head starts at the data's marginal scale instead of zero.
void warm_start_decoder_bias(Checkpoint& ckpt, const FramePool& pool);

TrainResult train(const Checkpoint& init, const FramePool& train_pool,
                  const FramePool& valid_pool, const TrainConfig& config);

// Magnitude from the decoded variance, phase copied from the input.
signal::Spectrogram autoencode(const Checkpoint& ckpt,
                               const signal::Spectrogram& spec,
                               bool sample = false, Rng* rng = nullptr);

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace svae::genmodel
