#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svae/enhancer.hpp"

namespace svae::enhancer {

using genmodel::Checkpoint;
using genmodel::DecoderOutput;
using genmodel::EncoderOutput;

namespace {

// sigma^2_theta(z) with the genmodel floor applied
Vector decoded_variance(const Checkpoint& ckpt, const Vector& z,
                        diffnet::ForwardTape* tape = nullptr) {
  const DecoderOutput dec = genmodel::decode(ckpt, z, tape);
  Vector sigma2(dec.log_var_s.size());
  for (std::size_t f = 0; f < sigma2.size(); ++f)
    sigma2[f] = std::max(std::exp(dec.log_var_s[f]), genmodel::kVarianceFloor);
  return sigma2;
}

// noise variance column W*h_t into out[F]
void noise_column(const NmfModel& nmf, int t, Vector& out) {
  const std::size_t F = nmf.w.rows;
  const std::size_t K = nmf.w.cols;
  const std::size_t T = nmf.h.cols;
  out.assign(F, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double hk = nmf.h.data[k * T + t];
    const double* wcol = nmf.w.data.data() + k;
    for (std::size_t f = 0; f < F; ++f) out[f] += wcol[f * K] * hk;
  }
}

}  // namespace

std::pair<EStepState, NmfModel> init_enhancement(const Checkpoint& ckpt,
                                                 const signal::Spectrogram& noisy,
                                                 int nmf_rank, Rng& rng) {
  if (nmf_rank < 1) throw std::invalid_argument("init_enhancement: K < 1");
  const int F = noisy.bins();
  const int T = noisy.frames;
  if (F != ckpt.bins())
    throw std::invalid_argument("init_enhancement: F mismatch");

  const std::vector<double> power = signal::power_frames(noisy);

  EStepState state;
  state.z.resize(T);
  state.u.assign(T, std::log(ckpt.prior.alpha / ckpt.prior.beta));
  for (int t = 0; t < T; ++t) {
    const EncoderOutput enc = genmodel::encode(
        ckpt, {power.data() + static_cast<std::size_t>(t) * F,
               static_cast<std::size_t>(F)});
    state.z[t] = enc.mu;
  }

  NmfModel nmf;
  nmf.w = Matrix(F, nmf_rank);
  nmf.h = Matrix(nmf_rank, T);
  for (auto& v : nmf.w.data) v = rng.uniform(0.1, 1.0);
  for (auto& v : nmf.h.data) v = rng.uniform(0.1, 1.0);

  // scale so mean(W*H) equals the mean noisy power
  double col_sum = 0.0;
  for (int k = 0; k < nmf_rank; ++k) {
    double ws = 0.0, hs = 0.0;
    for (int f = 0; f < F; ++f) ws += nmf.w(f, k);
    for (int t = 0; t < T; ++t) hs += nmf.h(k, t);
    col_sum += ws * hs;
  }
  const double mean_wh = col_sum / (static_cast<double>(F) * T);
  const double mean_power =
      kernels::active().sum(power.data(), power.size()) /
      static_cast<double>(power.size());
  const double s = std::sqrt(std::max(mean_power, kNmfFloor) / mean_wh);
  for (auto& v : nmf.w.data) v *= s;
  for (auto& v : nmf.h.data) v *= s;
  return {std::move(state), std::move(nmf)};
}

double noisy_loglik_frame(std::span<const double> x_power,
                          std::span<const double> sigma2, double weight,
                          std::span<const double> noise_var) {
  if (x_power.size() != sigma2.size() || x_power.size() != noise_var.size())
    throw std::invalid_argument("noisy_loglik_frame: shape mismatch");
  if (!(weight > 0.0))
    throw std::invalid_argument("noisy_loglik_frame: weight must be positive");
  const double inv_w = 1.0 / weight;
  double acc = 0.0;
  for (std::size_t f = 0; f < x_power.size(); ++f) {
    const double v = std::max(inv_w * sigma2[f] + noise_var[f], kNmfFloor);
    acc -= std::log(v) + x_power[f] / v;
  }
  return acc;
}

double estep_objective(const Checkpoint& ckpt, std::span<const double> x_power,
                       const Vector& z, double u,
                       std::span<const double> noise_var, bool baseline,
                       Vector* z_grad, double* u_grad) {
  const std::size_t F = x_power.size();
  diffnet::ForwardTape tape;
  const DecoderOutput dec =
      genmodel::decode(ckpt, z, z_grad ? &tape : nullptr);

  const double w = baseline ? 1.0 : std::exp(u);
  const double inv_w = 1.0 / w;

  double obj = 0.0;
  Vector d_cot;
  if (z_grad) d_cot.assign(F, 0.0);
  double du_ll = 0.0;
  for (std::size_t f = 0; f < F; ++f) {
    const double sigma2 =
        std::max(std::exp(dec.log_var_s[f]), genmodel::kVarianceFloor);
    const double v_raw = inv_w * sigma2 + noise_var[f];
    const double v = std::max(v_raw, kNmfFloor);
    obj -= std::log(v) + x_power[f] / v;
    if (z_grad && v_raw >= kNmfFloor) {
      const double dv = -1.0 / v + x_power[f] / (v * v);
      if (std::exp(dec.log_var_s[f]) > genmodel::kVarianceFloor)
        d_cot[f] = dv * inv_w * sigma2;
      du_ll += dv * (-inv_w * sigma2);
    }
  }

  const double z_norm2 = kernels::active().dot(z.data(), z.data(), z.size());
  obj -= 0.5 * z_norm2;
  if (!baseline)
    obj += (ckpt.prior.alpha - 1.0) * u - ckpt.prior.beta * std::exp(u);

  if (z_grad) {
    diffnet::GradBundle g = diffnet::backward(ckpt.decoder, tape, d_cot);
    z_grad->resize(z.size());
    for (std::size_t l = 0; l < z.size(); ++l)
      (*z_grad)[l] = g.d_input[l] - z[l];
  }
  if (u_grad) {
    *u_grad = baseline ? 0.0
                       : du_ll + (ckpt.prior.alpha - 1.0) -
                             ckpt.prior.beta * std::exp(u);
  }
  return obj;
}

void estep_optimize(EStepState& state, const Checkpoint& ckpt,
                    const std::vector<double>& noisy_power,
                    const NmfModel& nmf, const EnhanceOptions& opts) {
  const std::size_t F = nmf.w.rows;
  const int T = static_cast<int>(state.z.size());
  const std::size_t L = static_cast<std::size_t>(ckpt.latent_dim);

  diffnet::AdamConfig adam;
  adam.learning_rate = opts.estep_lr;

  Vector nv, z_grad;
  for (int t = 0; t < T; ++t) {
    noise_column(nmf, t, nv);
    const std::span<const double> xp{
        noisy_power.data() + static_cast<std::size_t>(t) * F, F};

    Vector params(L + 1);
    std::copy(state.z[t].begin(), state.z[t].end(), params.begin());
    params[L] = state.u[t];
    diffnet::FlatAdamState adam_state;  // reset every EM iteration

    Vector grads(L + 1, 0.0);
    for (int it = 0; it < opts.estep_iters; ++it) {
      Vector z(params.begin(), params.begin() + L);
      double u_grad = 0.0;
      const double obj = estep_objective(ckpt, xp, z, params[L], nv,
                                         opts.baseline, &z_grad, &u_grad);
      if (!std::isfinite(obj))
        throw std::runtime_error("estep_optimize: non-finite objective at frame " +
                                 std::to_string(t));
      // ascent: Adam minimizes, so feed the negated gradient
      for (std::size_t l = 0; l < L; ++l) grads[l] = -z_grad[l];
      grads[L] = opts.baseline ? 0.0 : -u_grad;
      diffnet::adam_step_flat(params, grads, adam_state, adam);
    }
    state.z[t].assign(params.begin(), params.begin() + L);
    if (!opts.baseline) state.u[t] = params[L];
  }
}

std::vector<double> variance_field(const Checkpoint& ckpt,
                                   const EStepState& state, const NmfModel& nmf,
                                   int frames) {
  const std::size_t F = nmf.w.rows;
  std::vector<double> v(F * static_cast<std::size_t>(frames));
  Vector nv;
  for (int t = 0; t < frames; ++t) {
    const Vector sigma2 = decoded_variance(ckpt, state.z[t]);
    noise_column(nmf, t, nv);
    const double inv_w = std::exp(-state.u[t]);
    double* col = v.data() + static_cast<std::size_t>(t) * F;
    for (std::size_t f = 0; f < F; ++f)
      col[f] = std::max(inv_w * sigma2[f] + nv[f], kNmfFloor);
  }
  return v;
}

void mstep_update_h(NmfModel& nmf, const std::vector<double>& noisy_power,
                    const std::vector<double>& v, int frames) {
  const std::size_t F = nmf.w.rows;
  const std::size_t K = nmf.w.cols;
  const std::size_t T = static_cast<std::size_t>(frames);
  if (noisy_power.size() != F * T || v.size() != F * T)
    throw std::invalid_argument("mstep_update_h: shape mismatch");

  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t t = 0; t < T; ++t) {
      const double* p = noisy_power.data() + t * F;
      const double* vc = v.data() + t * F;
      double num = 0.0, den = 0.0;
      for (std::size_t f = 0; f < F; ++f) {
        const double wfk = nmf.w.data[f * K + k];
        const double iv = 1.0 / vc[f];
        num += wfk * p[f] * iv * iv;
        den += wfk * iv;
      }
      double& hkt = nmf.h.data[k * T + t];
      hkt = std::max(hkt * std::sqrt(num / den), kNmfFloor);
    }
  }
}

void mstep_update_w(NmfModel& nmf, const std::vector<double>& noisy_power,
                    const std::vector<double>& v, int frames) {
  const std::size_t F = nmf.w.rows;
  const std::size_t K = nmf.w.cols;
  const std::size_t T = static_cast<std::size_t>(frames);
  if (noisy_power.size() != F * T || v.size() != F * T)
    throw std::invalid_argument("mstep_update_w: shape mismatch");

  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t k = 0; k < K; ++k) {
      double num = 0.0, den = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double hkt = nmf.h.data[k * T + t];
        const double iv = 1.0 / v[t * F + f];
        num += noisy_power[t * F + f] * iv * iv * hkt;
        den += iv * hkt;
      }
      double& wfk = nmf.w.data[f * K + k];
      wfk = std::max(wfk * std::sqrt(num / den), kNmfFloor);
    }
  }
}

signal::Spectrogram wiener_estimate(const Checkpoint& ckpt,
                                    const signal::Spectrogram& noisy,
                                    const EStepState& state,
                                    const NmfModel& nmf) {
  const int F = noisy.bins();
  const int T = noisy.frames;
  signal::Spectrogram out;
  out.config = noisy.config;
  out.frames = T;
  out.data.resize(noisy.data.size());

  Vector nv;
  for (int t = 0; t < T; ++t) {
    const Vector sigma2 = decoded_variance(ckpt, state.z[t]);
    noise_column(nmf, t, nv);
    const double inv_w = std::exp(-state.u[t]);
    const std::complex<double>* x = noisy.frame(t);
    std::complex<double>* y = out.frame(t);
    for (int f = 0; f < F; ++f) {
      const double sv = inv_w * sigma2[f];
      const double total = sv + nv[f];
      const double gain = total > 0.0 ? sv / total : 0.0;
      y[f] = gain * x[f];
    }
  }
  return out;
}

EnhanceResult em_enhance(const Checkpoint& ckpt,
                         const signal::Spectrogram& noisy,
                         const EnhanceOptions& opts, Rng& rng) {
  const int T = noisy.frames;
  const std::vector<double> power = signal::power_frames(noisy);

  auto [state, nmf] = init_enhancement(ckpt, noisy, opts.nmf_rank, rng);
  if (opts.baseline) state.u.assign(T, 0.0);

  Diagnostics diag;
  diag.loglik_trace.reserve(opts.em_iters);

  const std::size_t F = static_cast<std::size_t>(noisy.bins());
  std::vector<double> speech_var(F * static_cast<std::size_t>(T));
  Vector nv;
  // V = speech_var + W*H column-wise; speech_var is fixed within the M-step
  auto compose_v = [&]() {
    std::vector<double> v(speech_var.size());
    for (int t = 0; t < T; ++t) {
      noise_column(nmf, t, nv);
      const double* sv = speech_var.data() + static_cast<std::size_t>(t) * F;
      double* col = v.data() + static_cast<std::size_t>(t) * F;
      for (std::size_t f = 0; f < F; ++f)
        col[f] = std::max(sv[f] + nv[f], kNmfFloor);
    }
    return v;
  };

  for (int iter = 0; iter < opts.em_iters; ++iter) {
    estep_optimize(state, ckpt, power, nmf, opts);
    for (int t = 0; t < T; ++t) {
      const Vector sigma2 = decoded_variance(ckpt, state.z[t]);
      const double inv_w = std::exp(-state.u[t]);
      double* sv = speech_var.data() + static_cast<std::size_t>(t) * F;
      for (std::size_t f = 0; f < F; ++f) sv[f] = inv_w * sigma2[f];
    }
    std::vector<double> v = compose_v();
    mstep_update_h(nmf, power, v, T);
    v = compose_v();
    mstep_update_w(nmf, power, v, T);
    v = compose_v();

    double ll = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      ll -= std::log(v[i]) + power[i] / v[i];
    if (!diag.loglik_trace.empty()) {
      const double prev = diag.loglik_trace.back();
      if (ll < prev - 1e-6 * std::fabs(prev)) diag.ascent_violations += 1;
    }
    diag.loglik_trace.push_back(ll);
  }

  EnhanceResult result{wiener_estimate(ckpt, noisy, state, nmf),
                       std::move(diag)};
  return result;
}

EnhanceResult baseline_vae_enhance(const Checkpoint& ckpt,
                                   const signal::Spectrogram& noisy,
                                   const EnhanceOptions& opts, Rng& rng) {
  EnhanceOptions base = opts;
  base.baseline = true;
  return em_enhance(ckpt, noisy, base, rng);
}

}  // namespace svae::enhancer
