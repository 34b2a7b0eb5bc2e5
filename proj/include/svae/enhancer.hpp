#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "svae/genmodel.hpp"
#include "svae/signal.hpp"

namespace svae::enhancer {

inline constexpr double kNmfFloor = 1e-10;

struct NmfModel {
  Matrix w;  // F x K
  Matrix h;  // K x T
};

struct EStepState {
  std::vector<Vector> z;  // per frame, length L
  std::vector<double> u;  // per frame, log-weight; w = exp(u)
};

struct EnhanceOptions {
  int nmf_rank = 8;
  int em_iters = 100;
  int estep_iters = 10;
  double estep_lr = 0.005;
  bool baseline = false;  // weights frozen at 1, weight prior dropped
};

// z from the encoder mean on the noisy power frames, w from the prior mean,
// W/H uniform random scaled so mean(W*H) matches the mean noisy power.
std::pair<EStepState, NmfModel> init_enhancement(
    const genmodel::Checkpoint& ckpt, const signal::Spectrogram& noisy,
    int nmf_rank, Rng& rng);

// log N_c(x; 0, diag(v)) summed over bins with v = sigma2/w + noise_var,
// pi constants dropped.
double noisy_loglik_frame(std::span<const double> x_power,
                          std::span<const double> sigma2, double weight,
                          std::span<const double> noise_var);

// E-step objective for one frame over (z, u): noisy log-likelihood plus
// -0.5*||z||^2 plus (alpha-1)*u - beta*exp(u). In baseline mode the weight
// terms are absent and u is ignored.
double estep_objective(const genmodel::Checkpoint& ckpt,
                       std::span<const double> x_power, const Vector& z,
                       double u, std::span<const double> noise_var,
                       bool baseline, Vector* z_grad = nullptr,
                       double* u_grad = nullptr);

void estep_optimize(EStepState& state, const genmodel::Checkpoint& ckpt,
                    const std::vector<double>& noisy_power,
                    const NmfModel& nmf, const EnhanceOptions& opts);

// V with columns (1/w) * sigma2_theta(z) + W h, floored at kNmfFloor.
std::vector<double> variance_field(const genmodel::Checkpoint& ckpt,
                                   const EStepState& state,
                                   const NmfModel& nmf, int frames);

// Multiplicative updates with exponent 1/2; entries floored at kNmfFloor.
void mstep_update_h(NmfModel& nmf, const std::vector<double>& noisy_power,
                    const std::vector<double>& v, int frames);
void mstep_update_w(NmfModel& nmf, const std::vector<double>& noisy_power,
                    const std::vector<double>& v, int frames);

struct Diagnostics {
  std::vector<double> loglik_trace;  // one entry per EM iteration
  int ascent_violations = 0;
};

struct EnhanceResult {
  signal::Spectrogram estimate;
  Diagnostics diagnostics;
};

EnhanceResult em_enhance(const genmodel::Checkpoint& ckpt,
                         const signal::Spectrogram& noisy,
                         const EnhanceOptions& opts, Rng& rng);

signal::Spectrogram wiener_estimate(const genmodel::Checkpoint& ckpt,
                                    const signal::Spectrogram& noisy,
                                    const EStepState& state,
                                    const NmfModel& nmf);

// Unweighted pipeline: identical EM loop with w frozen at 1.
EnhanceResult baseline_vae_enhance(const genmodel::Checkpoint& ckpt,
                                   const signal::Spectrogram& noisy,
                                   const EnhanceOptions& opts, Rng& rng);

}  // namespace svae::enhancer
