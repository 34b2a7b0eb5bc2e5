#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "svae/enhancer.hpp"

using namespace svae;
using namespace svae::enhancer;
using genmodel::Checkpoint;
using genmodel::ModelKind;

namespace {

signal::Spectrogram random_spec(int bins, int frames, std::uint64_t seed,
                                const signal::StftConfig& cfg) {
  Rng rng(seed);
  signal::Spectrogram spec;
  spec.config = cfg;
  spec.frames = frames;
  spec.data.resize(static_cast<std::size_t>(bins) * frames);
  for (auto& v : spec.data)
    v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return spec;
}

// F=8 geometry from the shared tiny model
signal::StftConfig tiny_stft() {
  signal::StftConfig cfg;
  cfg.window_len = 14;
  cfg.hop = 7;
  return cfg;
}

}  // namespace

TEST_CASE("init_enhancement invariants") {
  const Checkpoint ckpt = oracles::tiny_checkpoint(ModelKind::Stvae, 40);
  const auto spec = random_spec(8, 6, 41, tiny_stft());

  Rng rng(42);
  auto [state, nmf] = init_enhancement(ckpt, spec, 3, rng);

  // alpha = beta means the prior mean weight is exactly 1
  for (double u : state.u) CHECK(std::exp(u) == doctest::Approx(1.0));

  // scaling construction: mean(W*H) == mean(|X|^2)
  const auto power = signal::power_frames(spec);
  const double mean_power =
      std::accumulate(power.begin(), power.end(), 0.0) / power.size();
  double mean_wh = 0.0;
  for (int f = 0; f < 8; ++f)
    for (int t = 0; t < 6; ++t) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += nmf.w(f, k) * nmf.h(k, t);
      mean_wh += acc;
    }
  mean_wh /= 48.0;
  CHECK(mean_wh == doctest::Approx(mean_power).epsilon(1e-9));

  // same seed, same init
  Rng rng2(42);
  auto [state2, nmf2] = init_enhancement(ckpt, spec, 3, rng2);
  for (std::size_t i = 0; i < nmf.w.data.size(); ++i)
    CHECK(nmf.w.data[i] == nmf2.w.data[i]);

  Rng rng3(43);
  CHECK_THROWS_AS(init_enhancement(ckpt, spec, 0, rng3),
                  std::invalid_argument);
}

TEST_CASE("noisy_loglik_frame closed forms") {
  const std::vector<double> x_zero(4, 0.0);
  const std::vector<double> sigma2(4, 0.5);
  const std::vector<double> nv(4, 0.5);
  // v = 0.5/1 + 0.5 = 1, x = 0 -> loglik 0
  CHECK(noisy_loglik_frame(x_zero, sigma2, 1.0, nv) == doctest::Approx(0.0));

  // |x|^2 = v everywhere -> -sum(log v + 1)
  std::vector<double> x_eq(4, 1.0);
  CHECK(noisy_loglik_frame(x_eq, sigma2, 1.0, nv) == doctest::Approx(-4.0));

  // halving the weight doubles the speech part of v
  const std::vector<double> zero_nv(4, 0.0);
  const std::vector<double> x(4, 0.3);
  const double l1 = noisy_loglik_frame(x, sigma2, 0.5, zero_nv);
  std::vector<double> doubled(4, 1.0);
  const double l2 = noisy_loglik_frame(x, doubled, 1.0, zero_nv);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
}

TEST_CASE("estep_objective gradients match finite differences") {
  const Checkpoint ckpt = oracles::tiny_checkpoint(ModelKind::Stvae, 44);
  Rng rng(45);
  std::vector<double> xp(8);
  for (auto& v : xp) v = rng.uniform(0.01, 1.5);
  std::vector<double> nv(8);
  for (auto& v : nv) v = rng.uniform(0.05, 0.5);
  Vector z{0.3, -0.7};
  double u = 0.2;

  Vector z_grad;
  double u_grad = 0.0;
  estep_objective(ckpt, xp, z, u, nv, false, &z_grad, &u_grad);

  const double h = 1e-5;
  for (std::size_t l = 0; l < z.size(); ++l) {
    Vector zp = z, zm = z;
    zp[l] += h;
    zm[l] -= h;
    const double fd = (estep_objective(ckpt, xp, zp, u, nv, false) -
                       estep_objective(ckpt, xp, zm, u, nv, false)) /
                      (2.0 * h);
    CHECK(z_grad[l] == doctest::Approx(fd).epsilon(1e-4));
  }
  const double fd_u = (estep_objective(ckpt, xp, z, u + h, nv, false) -
                       estep_objective(ckpt, xp, z, u - h, nv, false)) /
                      (2.0 * h);
  CHECK(u_grad == doctest::Approx(fd_u).epsilon(1e-4));
}

TEST_CASE("estep_objective prior terms") {
  const Checkpoint ckpt = oracles::tiny_checkpoint(
      ModelKind::Stvae, 46, {1.0, 2.5});  // alpha=1
  std::vector<double> xp(8, 0.1), nv(8, 0.1);
  const Vector z0(2, 0.0);

  // alpha=1: weight prior reduces to -beta*w
  const double at0 = estep_objective(ckpt, xp, z0, 0.0, nv, false);
  const double base = estep_objective(ckpt, xp, z0, 0.0, nv, true);
  // with u=0, w=1: difference must be exactly -beta
  CHECK(at0 - base == doctest::Approx(-2.5));

  // z=0 contributes nothing from the latent prior: baseline objective at z=0
  // equals the noisy log-likelihood alone
  const auto dec = genmodel::decode(ckpt, z0);
  Vector sigma2(8);
  for (int f = 0; f < 8; ++f)
    sigma2[f] = std::max(std::exp(dec.log_var_s[f]), genmodel::kVarianceFloor);
  CHECK(base == doctest::Approx(noisy_loglik_frame(xp, sigma2, 1.0, nv))
                    .epsilon(1e-12));
}

TEST_CASE("estep_optimize improves the objective and is deterministic") {
  const Checkpoint ckpt = oracles::tiny_checkpoint(ModelKind::Stvae, 47);
  const auto spec = random_spec(8, 4, 48, tiny_stft());
  const auto power = signal::power_frames(spec);

  Rng rng(49);
  auto [state, nmf] = init_enhancement(ckpt, spec, 2, rng);

  EnhanceOptions opts;
  opts.estep_iters = 10;

  auto objective_at = [&](const EStepState& s, int t) {
    Vector nv(8, 0.0);
    for (int k = 0; k < 2; ++k)
      for (int f = 0; f < 8; ++f) nv[f] += nmf.w(f, k) * nmf.h(k, t);
    const std::span<const double> xp{power.data() + t * 8, 8};
    return estep_objective(ckpt, xp, s.z[t], s.u[t], nv, false);
  };

  std::vector<double> before(4);
  for (int t = 0; t < 4; ++t) before[t] = objective_at(state, t);

  SUBCASE("iters=0 leaves the state unchanged") {
    EStepState copy = state;
    EnhanceOptions none = opts;
    none.estep_iters = 0;
    estep_optimize(copy, ckpt, power, nmf, none);
    for (int t = 0; t < 4; ++t) {
      CHECK(copy.u[t] == state.u[t]);
      for (int l = 0; l < 2; ++l) CHECK(copy.z[t][l] == state.z[t][l]);
    }
  }

  SUBCASE("objective does not get worse") {
    EStepState opt = state;
    estep_optimize(opt, ckpt, power, nmf, opts);
    for (int t = 0; t < 4; ++t)
      CHECK(objective_at(opt, t) >= before[t] - 1e-9);
  }

  SUBCASE("same inputs, same result") {
    EStepState a = state, b = state;
    estep_optimize(a, ckpt, power, nmf, opts);
    estep_optimize(b, ckpt, power, nmf, opts);
    for (int t = 0; t < 4; ++t) {
      CHECK(a.u[t] == b.u[t]);
      for (int l = 0; l < 2; ++l) CHECK(a.z[t][l] == b.z[t][l]);
    }
  }
}

TEST_CASE("mstep updates: fixed point, scalar case, nonnegativity") {
  SUBCASE("fixed point when |X|^2 equals V") {
    NmfModel nmf;
    nmf.w = Matrix(3, 2);
    nmf.h = Matrix(2, 4);
    Rng rng(50);
    for (auto& v : nmf.w.data) v = rng.uniform(0.2, 1.0);
    for (auto& v : nmf.h.data) v = rng.uniform(0.2, 1.0);
    std::vector<double> v(12);
    for (int t = 0; t < 4; ++t)
      for (int f = 0; f < 3; ++f) {
        double acc = 0.0;
        for (int k = 0; k < 2; ++k) acc += nmf.w(f, k) * nmf.h(k, t);
        v[t * 3 + f] = acc;
      }
    const std::vector<double> power = v;  // |X|^2 = V
    NmfModel before = nmf;
    mstep_update_h(nmf, power, v, 4);
    for (std::size_t i = 0; i < nmf.h.data.size(); ++i)
      CHECK(nmf.h.data[i] == doctest::Approx(before.h.data[i]).epsilon(1e-12));
    mstep_update_w(nmf, power, v, 4);
    for (std::size_t i = 0; i < nmf.w.data.size(); ++i)
      CHECK(nmf.w.data[i] == doctest::Approx(before.w.data[i]).epsilon(1e-12));
  }

  SUBCASE("scalar case: H and W go from 1 to 2") {
    NmfModel nmf;
    nmf.w = Matrix(1, 1, 1.0);
    nmf.h = Matrix(1, 1, 1.0);
    const std::vector<double> power{4.0};
    const std::vector<double> v{1.0};  // speech part zero, W*H = 1
    mstep_update_h(nmf, power, v, 1);
    CHECK(nmf.h(0, 0) == doctest::Approx(2.0));

    nmf.h = Matrix(1, 1, 1.0);
    mstep_update_w(nmf, power, v, 1);
    CHECK(nmf.w(0, 0) == doctest::Approx(2.0));
  }

  SUBCASE("nonnegativity is preserved under random updates") {
    NmfModel nmf;
    nmf.w = Matrix(4, 2);
    nmf.h = Matrix(2, 5);
    Rng rng(51);
    for (auto& v : nmf.w.data) v = rng.uniform(0.0, 1.0);
    for (auto& v : nmf.h.data) v = rng.uniform(0.0, 1.0);
    for (int round = 0; round < 50; ++round) {
      std::vector<double> power(20), v(20);
      for (auto& p : power) p = rng.uniform(0.0, 2.0);
      for (auto& x : v) x = rng.uniform(0.01, 2.0);
      mstep_update_h(nmf, power, v, 5);
      mstep_update_w(nmf, power, v, 5);
      for (double x : nmf.w.data) CHECK(x >= kNmfFloor);
      for (double x : nmf.h.data) CHECK(x >= kNmfFloor);
    }
  }
}

TEST_CASE("wiener mask limits") {
  const Checkpoint ckpt = oracles::tiny_checkpoint(ModelKind::Stvae, 52);
  const auto spec = random_spec(8, 2, 53, tiny_stft());

  EStepState state;
  state.z.assign(2, Vector(2, 0.0));
  state.u.assign(2, 0.0);

  SUBCASE("noise variance zero gives gain one") {
    NmfModel nmf;
    nmf.w = Matrix(8, 1, 0.0);
    nmf.h = Matrix(1, 2, 0.0);
    const auto out = wiener_estimate(ckpt, spec, state, nmf);
    for (std::size_t i = 0; i < spec.data.size(); ++i)
      CHECK(std::abs(out.data[i] - spec.data[i]) < 1e-12);
  }

  SUBCASE("equal variances give exactly half") {
    // make noise = speech variance per bin by construction
    NmfModel nmf;
    nmf.w = Matrix(8, 1);
    nmf.h = Matrix(1, 2, 1.0);
    for (int t = 0; t < 2; ++t) {
      const auto dec = genmodel::decode(ckpt, state.z[t]);
      for (int f = 0; f < 8; ++f)
        nmf.w(f, 0) = std::max(std::exp(dec.log_var_s[f]),
                               genmodel::kVarianceFloor);
    }
    const auto out = wiener_estimate(ckpt, spec, state, nmf);
    for (std::size_t i = 0; i < spec.data.size(); ++i)
      CHECK(std::abs(out.data[i] - 0.5 * spec.data[i]) < 1e-12);
  }

  SUBCASE("gains lie in (0,1) and never amplify") {
    NmfModel nmf;
    nmf.w = Matrix(8, 1, 0.3);
    nmf.h = Matrix(1, 2, 0.7);
    const auto out = wiener_estimate(ckpt, spec, state, nmf);
    for (std::size_t i = 0; i < spec.data.size(); ++i) {
      CHECK(std::abs(out.data[i]) <= std::abs(spec.data[i]));
      if (std::abs(spec.data[i]) > 0.0)
        CHECK(std::abs(out.data[i]) > 0.0);
    }
  }
}

TEST_CASE("em_enhance basics") {
  const Checkpoint ckpt = oracles::tiny_checkpoint(ModelKind::Stvae, 54);
  const auto spec = random_spec(8, 4, 55, tiny_stft());

  SUBCASE("zero EM iterations equals Wiener at init") {
    EnhanceOptions opts;
    opts.em_iters = 0;
    opts.nmf_rank = 2;
    Rng rng(56);
    const auto result = em_enhance(ckpt, spec, opts, rng);

    Rng rng2(56);
    auto [state, nmf] = init_enhancement(ckpt, spec, 2, rng2);
    const auto direct = wiener_estimate(ckpt, spec, state, nmf);
    for (std::size_t i = 0; i < direct.data.size(); ++i)
      CHECK(result.estimate.data[i] == direct.data[i]);
  }

  SUBCASE("fixed seed gives bitwise-identical output") {
    EnhanceOptions opts;
    opts.em_iters = 3;
    opts.nmf_rank = 2;
    Rng a(57), b(57);
    const auto r1 = em_enhance(ckpt, spec, opts, a);
    const auto r2 = em_enhance(ckpt, spec, opts, b);
    for (std::size_t i = 0; i < r1.estimate.data.size(); ++i)
      CHECK(r1.estimate.data[i] == r2.estimate.data[i]);
    for (std::size_t i = 0; i < r1.diagnostics.loglik_trace.size(); ++i)
      CHECK(r1.diagnostics.loglik_trace[i] ==
            r2.diagnostics.loglik_trace[i]);
  }

  SUBCASE("log-likelihood trace is mostly nondecreasing") {
    EnhanceOptions opts;
    opts.em_iters = 15;
    opts.nmf_rank = 2;
    Rng rng(58);
    const auto result = em_enhance(ckpt, spec, opts, rng);
    CHECK(result.diagnostics.loglik_trace.size() == 15);
    CHECK(result.diagnostics.ascent_violations <= 1);
  }
}

TEST_CASE("baseline pipeline freezes the weights at one") {
  const Checkpoint ckpt = oracles::tiny_checkpoint(ModelKind::Stvae, 59);
  const auto spec = random_spec(8, 3, 60, tiny_stft());
  EnhanceOptions opts;
  opts.em_iters = 2;
  opts.nmf_rank = 2;

  Rng rng(61);
  const auto result = baseline_vae_enhance(ckpt, spec, opts, rng);
  for (std::size_t i = 0; i < result.estimate.data.size(); ++i)
    CHECK(std::abs(result.estimate.data[i]) <= std::abs(spec.data[i]) + 1e-12);

  // determinism
  Rng rng2(61);
  const auto again = baseline_vae_enhance(ckpt, spec, opts, rng2);
  for (std::size_t i = 0; i < result.estimate.data.size(); ++i)
    CHECK(result.estimate.data[i] == again.estimate.data[i]);
}

TEST_CASE("stvae estep z-gradient approaches baseline as alpha=beta grows") {
  Rng rng(62);
  std::vector<double> xp(8), nv(8);
  for (auto& v : xp) v = rng.uniform(0.01, 1.0);
  for (auto& v : nv) v = rng.uniform(0.05, 0.5);
  const Vector z{0.4, -0.2};

  const Checkpoint base = oracles::tiny_checkpoint(ModelKind::Stvae, 63);
  Vector g_base;
  estep_objective(base, xp, z, 0.0, nv, true, &g_base);

  Checkpoint big = base;
  big.prior = {1e8, 1e8};
  Vector g_big;
  // with w at the prior mean (u = 0) the weighted model matches the baseline
  estep_objective(big, xp, z, 0.0, nv, false, &g_big);

  for (std::size_t l = 0; l < z.size(); ++l)
    CHECK(g_big[l] ==
          doctest::Approx(g_base[l]).epsilon(1e-3));
}
