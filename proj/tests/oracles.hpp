#pragma once

// Independent numerical oracles shared by the unit and acceptance suites.
// Everything here recomputes quantities from first principles and must not
// call into the implementation paths it is used to check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "svae/genmodel.hpp"

namespace svae::oracles {

// Posterior mean of w under p(w) * p(s|z,w) for the weighted complex
// Gaussian model, by trapezoid quadrature on a log grid. The likelihood
// contributes w^F * exp(-w * sum_f p_f / sigma2_f) up to w-free factors.
inline double gamma_posterior_mean_quadrature(double alpha, double beta,
                                              const std::vector<double>& power,
                                              const std::vector<double>& sigma2,
                                              int points = 20001) {
  double r = 0.0;
  for (std::size_t f = 0; f < power.size(); ++f) r += power[f] / sigma2[f];
  const double a = alpha + static_cast<double>(power.size());
  const double b = beta + r;

  // in u = log w the density integrand is exp(a*u - b*e^u); mode at log(a/b)
  const double u_mode = std::log(a / b);
  const double width = 40.0 / std::sqrt(a) + 2.0;
  const double lo = u_mode - width, hi = u_mode + width;
  const double h = (hi - lo) / (points - 1);

  const double g_max = a * u_mode - a;  // exponent value at the mode
  double num = 0.0, den = 0.0;
  for (int i = 0; i < points; ++i) {
    const double u = lo + h * i;
    const double g = a * u - b * std::exp(u) - g_max;
    const double fu = std::exp(g);
    const double trap = (i == 0 || i == points - 1) ? 0.5 : 1.0;
    den += trap * fu;
    num += trap * fu * std::exp(u);
  }
  return num / den;
}

// Central finite differences of a frame loss over every encoder and decoder
// parameter, against the analytic gradients from frame_loss_with.
inline double frame_loss_fd_max_rel_error(const genmodel::Checkpoint& ckpt,
                                          std::span<const double> frame,
                                          const Vector& eps,
                                          double step = 1e-4) {
  genmodel::FrameGrads grads;
  genmodel::frame_loss_with(ckpt, frame, eps, &grads);

  genmodel::Checkpoint work = ckpt;
  double max_err = 0.0;
  auto probe = [&](double& p, double analytic) {
    const double saved = p;
    p = saved + step;
    const double up = genmodel::frame_loss_with(work, frame, eps, nullptr);
    p = saved - step;
    const double dn = genmodel::frame_loss_with(work, frame, eps, nullptr);
    p = saved;
    const double fd = (up - dn) / (2.0 * step);
    const double denom = std::max({std::fabs(analytic), std::fabs(fd), 1e-12});
    max_err = std::max(max_err, std::fabs(analytic - fd) / denom);
  };

  auto sweep = [&](diffnet::Mlp& mlp, const diffnet::GradBundle& g) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      for (std::size_t i = 0; i < mlp.layers[l].weights.data.size(); ++i)
        probe(mlp.layers[l].weights.data[i], g.d_weights[l].data[i]);
      for (std::size_t i = 0; i < mlp.layers[l].bias.size(); ++i)
        probe(mlp.layers[l].bias[i], g.d_bias[l][i]);
    }
  };
  sweep(work.encoder, grads.encoder);
  sweep(work.decoder, grads.decoder);
  return max_err;
}

// Tiny model geometry used across gradient tests: F=8 (window 14, hop 7),
// L=2, hidden width 4.
inline genmodel::Checkpoint tiny_checkpoint(genmodel::ModelKind kind,
                                            std::uint64_t seed,
                                            genmodel::GammaPrior prior = {
                                                100.0, 100.0}) {
  signal::StftConfig stft;
  stft.window_len = 14;
  stft.hop = 7;
  Rng rng(seed);
  return genmodel::make_checkpoint(kind, stft, 2, 4, prior, rng);
}

}  // namespace svae::oracles
