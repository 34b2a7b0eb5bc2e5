#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "svae/genmodel.hpp"

namespace svae::genmodel {

using diffnet::Activation;
using diffnet::ForwardTape;
using diffnet::GradBundle;
using diffnet::Mlp;

Checkpoint make_checkpoint(ModelKind kind, const signal::StftConfig& stft,
                           int latent_dim, int hidden, GammaPrior prior,
                           Rng& rng) {
  if (latent_dim < 1 || hidden < 1)
    throw std::invalid_argument("make_checkpoint: bad dimensions");
  if (prior.alpha <= 0.0 || prior.beta <= 0.0)
    throw std::invalid_argument("make_checkpoint: Gamma prior must be positive");
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.latent_dim = latent_dim;
  ckpt.stft = stft;
  ckpt.prior = prior;
  const std::size_t f = static_cast<std::size_t>(stft.bins());
  const std::size_t l = static_cast<std::size_t>(latent_dim);
  const std::size_t h = static_cast<std::size_t>(hidden);
  ckpt.encoder = diffnet::init_mlp({f, h, 2 * l},
                                   {Activation::Tanh, Activation::Identity},
                                   rng);
  ckpt.decoder = diffnet::init_mlp({l, h, f},
                                   {Activation::Tanh, Activation::Identity},
                                   rng);
  return ckpt;
}

EncoderOutput encode(const Checkpoint& ckpt, std::span<const double> power_frame,
                     ForwardTape* tape) {
  if (power_frame.size() != ckpt.encoder.input_dim())
    throw std::invalid_argument("encode: frame length mismatch");
  // fixed log1p front-end: compresses the wide dynamic range of power values
  // so the tanh hidden layer stays out of saturation
  Vector in(power_frame.size());
  for (std::size_t f = 0; f < in.size(); ++f)
    in[f] = std::log1p(power_frame[f]);
  Vector out = diffnet::forward(ckpt.encoder, in, tape);
  const std::size_t l = static_cast<std::size_t>(ckpt.latent_dim);
  EncoderOutput enc;
  enc.mu.assign(out.begin(), out.begin() + l);
  enc.log_var.assign(out.begin() + l, out.end());
  return enc;
}

Vector reparametrize_with(const EncoderOutput& enc, const Vector& eps) {
  if (eps.size() != enc.mu.size())
    throw std::invalid_argument("reparametrize: eps length mismatch");
  Vector z(enc.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = enc.mu[i] + std::exp(0.5 * enc.log_var[i]) * eps[i];
  return z;
}

Vector reparametrize(const EncoderOutput& enc, Rng& rng) {
  Vector eps(enc.mu.size());
  for (auto& e : eps) e = rng.normal();
  return reparametrize_with(enc, eps);
}

DecoderOutput decode(const Checkpoint& ckpt, const Vector& z,
                     ForwardTape* tape) {
  if (z.size() != ckpt.decoder.input_dim())
    throw std::invalid_argument("decode: latent dimension mismatch");
  return DecoderOutput{diffnet::forward(ckpt.decoder, z, tape)};
}

double kl_gauss_std(const EncoderOutput& enc) {
  double acc = 0.0;
  for (std::size_t i = 0; i < enc.mu.size(); ++i) {
    acc += enc.mu[i] * enc.mu[i] + std::exp(enc.log_var[i]) -
           enc.log_var[i] - 1.0;
  }
  return 0.5 * acc;
}

GammaPosteriorParams gamma_posterior(const GammaPrior& prior,
                                     std::span<const double> power_frame,
                                     const DecoderOutput& dec) {
  if (power_frame.size() != dec.log_var_s.size())
    throw std::invalid_argument("gamma_posterior: shape mismatch");
  GammaPosteriorParams post;
  post.alpha_p = prior.alpha + static_cast<double>(power_frame.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < power_frame.size(); ++f) {
    const double sigma2 =
        std::max(std::exp(dec.log_var_s[f]), kVarianceFloor);
    acc += power_frame[f] / sigma2;
  }
  post.beta_p = prior.beta + acc;
  return post;
}

double frame_loss_with(const Checkpoint& ckpt, std::span<const double> frame,
                       const Vector& eps, FrameGrads* grads) {
  const std::size_t F = frame.size();
  ForwardTape enc_tape, dec_tape;
  const EncoderOutput enc =
      encode(ckpt, frame, grads ? &enc_tape : nullptr);
  const Vector z = reparametrize_with(enc, eps);
  const DecoderOutput dec =
      decode(ckpt, z, grads ? &dec_tape : nullptr);

  // per-bin sigma^2 with floor, plus the power/variance ratios
  Vector sigma2(F), ratio(F);
  for (std::size_t f = 0; f < F; ++f) {
    sigma2[f] = std::max(std::exp(dec.log_var_s[f]), kVarianceFloor);
    ratio[f] = frame[f] / sigma2[f];
  }

  const double kl = kl_gauss_std(enc);
  double recon = 0.0;
  Vector d_cot(F);  // dLoss/d log_var_s
  double d_alpha = 0.0, d_beta = 0.0;

  if (ckpt.kind == ModelKind::Vae) {
    for (std::size_t f = 0; f < F; ++f) {
      recon += dec.log_var_s[f] + ratio[f];
      d_cot[f] = 1.0 - (sigma2[f] > kVarianceFloor ? ratio[f] : 0.0);
    }
  } else {
    const double alpha = ckpt.prior.alpha;
    const double beta = ckpt.prior.beta;
    const double ratio_sum =
        std::accumulate(ratio.begin(), ratio.end(), 0.0);
    const double beta_p = beta + ratio_sum;
    double log_const = 0.0;
    double d_alpha_const = 0.0;
    for (std::size_t l = 0; l < F; ++l) {
      log_const += std::log(alpha + static_cast<double>(l));
      d_alpha_const += 1.0 / (alpha + static_cast<double>(l));
    }
    recon = (alpha + static_cast<double>(F)) * std::log(beta_p) -
            log_const - alpha * std::log(beta);
    for (std::size_t f = 0; f < F; ++f) {
      recon += dec.log_var_s[f];
      const double scale = (alpha + static_cast<double>(F)) / beta_p;
      d_cot[f] =
          1.0 - (sigma2[f] > kVarianceFloor ? scale * ratio[f] : 0.0);
    }
    d_alpha = std::log(beta_p) - d_alpha_const - std::log(beta);
    d_beta = (alpha + static_cast<double>(F)) / beta_p - alpha / beta;
  }

  const double loss = recon + kl;
  if (!std::isfinite(loss))
    throw std::runtime_error("frame loss is non-finite");
  if (!grads) return loss;

  grads->loss = loss;
  grads->d_alpha = d_alpha;
  grads->d_beta = d_beta;
  grads->decoder = diffnet::backward(ckpt.decoder, dec_tape, d_cot);

  const std::size_t L = enc.mu.size();
  Vector enc_cot(2 * L);
  const Vector& dz = grads->decoder.d_input;
  for (std::size_t l = 0; l < L; ++l) {
    enc_cot[l] = dz[l] + enc.mu[l];  // dKL/dmu = mu
    enc_cot[L + l] = dz[l] * 0.5 * std::exp(0.5 * enc.log_var[l]) * eps[l] +
                     0.5 * (std::exp(enc.log_var[l]) - 1.0);
  }
  grads->encoder = diffnet::backward(ckpt.encoder, enc_tape, enc_cot);
  return loss;
}

double vae_frame_loss(const Checkpoint& ckpt, std::span<const double> frame,
                      Rng& rng) {
  Vector eps(ckpt.latent_dim);
  for (auto& e : eps) e = rng.normal();
  if (ckpt.kind != ModelKind::Vae)
    throw std::invalid_argument("vae_frame_loss: checkpoint is not a VAE");
  return frame_loss_with(ckpt, frame, eps, nullptr);
}

double stvae_frame_loss(const Checkpoint& ckpt, std::span<const double> frame,
                        Rng& rng) {
  Vector eps(ckpt.latent_dim);
  for (auto& e : eps) e = rng.normal();
  if (ckpt.kind != ModelKind::Stvae)
    throw std::invalid_argument("stvae_frame_loss: checkpoint is not StVAE");
  return frame_loss_with(ckpt, frame, eps, nullptr);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("malformed manifest line: " + line);
    ManifestEntry e{line.substr(0, tab), line.substr(tab + 1)};
    if (e.role != "speech" && e.role != "outlier" && e.role != "noisy" &&
        e.role != "reference")
      throw std::runtime_error("unknown manifest role: " + e.role);
    entries.push_back(std::move(e));
  }
  return entries;
}

FramePool load_frames(const std::vector<ManifestEntry>& manifest,
                      const signal::StftConfig& stft) {
  FramePool pool;
  pool.bins = stft.bins();
  for (const auto& entry : manifest) {
    const signal::AudioClip clip = signal::read_wav(entry.path);
    const signal::Spectrogram spec = signal::stft(clip, stft);
    const std::vector<double> p = signal::power_frames(spec);
    pool.frames.insert(pool.frames.end(), p.begin(), p.end());
  }
  return pool;
}

void warm_start_decoder_bias(Checkpoint& ckpt, const FramePool& pool) {
  if (pool.count() == 0 || pool.bins != ckpt.bins())
    throw std::invalid_argument("warm_start_decoder_bias: pool mismatch");
  auto& bias = ckpt.decoder.layers.back().bias;
  const std::size_t n = pool.count();
  for (int f = 0; f < pool.bins; ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += pool.frame(i)[f];
    bias[f] = std::log(std::max(acc / static_cast<double>(n), kVarianceFloor));
  }
}

namespace {

double evaluate_pool(const Checkpoint& ckpt, const FramePool& pool,
                     std::uint64_t eps_seed) {
  Rng rng(eps_seed);
  double total = 0.0;
  Vector eps(ckpt.latent_dim);
  for (std::size_t i = 0; i < pool.count(); ++i) {
    for (auto& e : eps) e = rng.normal();
    total += frame_loss_with(ckpt, pool.frame(i), eps, nullptr);
  }
  return total / static_cast<double>(pool.count());
}

}  // namespace

TrainResult train(const Checkpoint& init, const FramePool& train_pool,
                  const FramePool& valid_pool, const TrainConfig& config) {
  if (train_pool.count() == 0 || valid_pool.count() == 0)
    throw std::invalid_argument("train: empty frame pool");

  TrainResult result;
  Checkpoint ckpt = init;
  diffnet::AdamState enc_state = diffnet::make_adam_state(ckpt.encoder);
  diffnet::AdamState dec_state = diffnet::make_adam_state(ckpt.decoder);
  diffnet::FlatAdamState prior_state;

  Rng rng(config.seed);
  const std::uint64_t valid_seed = config.seed ^ 0x9e3779b97f4a7c15ULL;

  std::vector<std::size_t> order(train_pool.count());
  std::iota(order.begin(), order.end(), 0);

  double best_valid = std::numeric_limits<double>::infinity();
  result.best = ckpt;
  int stale_epochs = 0;
  Vector eps(ckpt.latent_dim);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    // Fisher-Yates with the session rng keeps epochs reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }

    double epoch_loss = 0.0;
    bool finite = true;
    FrameGrads fg;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      GradBundle enc_acc = diffnet::make_zero_grads(ckpt.encoder);
      GradBundle dec_acc = diffnet::make_zero_grads(ckpt.decoder);
      double d_alpha = 0.0, d_beta = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        for (auto& e : eps) e = rng.normal();
        double loss;
        try {
          loss = frame_loss_with(ckpt, train_pool.frame(order[i]), eps, &fg);
        } catch (const std::runtime_error&) {
          finite = false;
          break;
        }
        epoch_loss += loss;
        enc_acc.add(fg.encoder);
        dec_acc.add(fg.decoder);
        d_alpha += fg.d_alpha;
        d_beta += fg.d_beta;
      }
      if (!finite) break;
      const double inv = 1.0 / static_cast<double>(end - start);
      enc_acc.scale(inv);
      dec_acc.scale(inv);
      diffnet::adam_step(ckpt.encoder, enc_acc, enc_state, config.adam);
      diffnet::adam_step(ckpt.decoder, dec_acc, dec_state, config.adam);
      if (config.learn_prior && ckpt.kind == ModelKind::Stvae) {
        Vector prior_params{ckpt.prior.alpha, ckpt.prior.beta};
        const Vector prior_grads{d_alpha * inv, d_beta * inv};
        diffnet::adam_step_flat(prior_params, prior_grads, prior_state,
                                config.adam);
        ckpt.prior.alpha = std::max(prior_params[0], 1e-3);
        ckpt.prior.beta = std::max(prior_params[1], 1e-3);
      }
    }

    if (!finite) {
      result.diverged = true;
      return result;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    rec.valid_loss = evaluate_pool(ckpt, valid_pool, valid_seed);
    result.history.push_back(rec);

    if (!std::isfinite(rec.valid_loss)) {
      result.diverged = true;
      return result;
    }
    if (rec.valid_loss < best_valid) {
      best_valid = rec.valid_loss;
      result.best = ckpt;
      stale_epochs = 0;
    } else {
      stale_epochs += 1;
    }
    if (stale_epochs >= config.patience) break;
  }
  return result;
}

signal::Spectrogram autoencode(const Checkpoint& ckpt,
                               const signal::Spectrogram& spec, bool sample,
                               Rng* rng) {
  if (spec.bins() != ckpt.bins())
    throw std::invalid_argument("autoencode: spectrogram/checkpoint F mismatch");
  if (sample && !rng)
    throw std::invalid_argument("autoencode: sampling requires an rng");

  signal::Spectrogram out;
  out.config = spec.config;
  out.frames = spec.frames;
  out.data.resize(spec.data.size());

  const int F = spec.bins();
  std::vector<double> power(F);
  for (int t = 0; t < spec.frames; ++t) {
    const std::complex<double>* x = spec.frame(t);
    kernels::active().complex_power(x, power.data(),
                                    static_cast<std::size_t>(F));
    const EncoderOutput enc = encode(ckpt, power);
    const Vector z = sample ? reparametrize(enc, *rng) : enc.mu;
    const DecoderOutput dec = decode(ckpt, z);
    std::complex<double>* y = out.frame(t);
    for (int f = 0; f < F; ++f) {
      const double mag = std::exp(0.5 * dec.log_var_s[f]);
      const double xa = std::abs(x[f]);
      // keep the input phase; zero input gets zero phase
      y[f] = xa > 0.0 ? x[f] * (mag / xa) : std::complex<double>(mag, 0.0);
    }
  }
  return out;
}

}  // namespace svae::genmodel
