#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svae/diffnet.hpp"

namespace svae::diffnet {

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.data.size() + l.bias.size();
  return n;
}

Vector forward(const Mlp& mlp, const Vector& input, ForwardTape* tape) {
  if (mlp.layers.empty()) throw std::invalid_argument("forward: empty mlp");
  if (input.size() != mlp.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");

  if (tape) {
    tape->inputs.clear();
    tape->activations.clear();
  }
  Vector x = input;
  Vector y;
  for (const auto& layer : mlp.layers) {
    if (tape) tape->inputs.push_back(x);
    matvec(layer.weights, x, layer.bias, y);
    if (layer.act == Activation::Tanh) {
      for (auto& v : y) v = std::tanh(v);
    }
    if (tape) tape->activations.push_back(y);
    x = y;
  }
  return x;
}

void GradBundle::add(const GradBundle& other) {
  const auto& k = kernels::active();
  for (std::size_t l = 0; l < d_weights.size(); ++l) {
    k.axpy(1.0, other.d_weights[l].data.data(), d_weights[l].data.data(),
           d_weights[l].data.size());
    k.axpy(1.0, other.d_bias[l].data(), d_bias[l].data(), d_bias[l].size());
  }
}

void GradBundle::scale(double s) {
  for (auto& m : d_weights)
    for (auto& v : m.data) v *= s;
  for (auto& b : d_bias)
    for (auto& v : b) v *= s;
}

bool GradBundle::finite() const {
  for (const auto& m : d_weights)
    for (double v : m.data)
      if (!std::isfinite(v)) return false;
  for (const auto& b : d_bias)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

GradBundle make_zero_grads(const Mlp& mlp) {
  GradBundle g;
  for (const auto& l : mlp.layers) {
    g.d_weights.emplace_back(l.weights.rows, l.weights.cols);
    g.d_bias.emplace_back(l.bias.size(), 0.0);
  }
  g.d_input.assign(mlp.input_dim(), 0.0);
  return g;
}

GradBundle backward(const Mlp& mlp, const ForwardTape& tape,
                    const Vector& cotangent) {
  if (tape.inputs.size() != mlp.layers.size())
    throw std::invalid_argument("backward: tape does not match mlp");
  if (cotangent.size() != mlp.output_dim())
    throw std::invalid_argument("backward: cotangent dimension mismatch");

  GradBundle g = make_zero_grads(mlp);
  Vector u = cotangent;
  for (std::size_t li = mlp.layers.size(); li-- > 0;) {
    const DenseLayer& layer = mlp.layers[li];
    if (tape.activations[li].size() != layer.bias.size())
      throw std::invalid_argument("backward: stale tape");
    if (layer.act == Activation::Tanh) {
      const Vector& a = tape.activations[li];
      for (std::size_t i = 0; i < u.size(); ++i) u[i] *= 1.0 - a[i] * a[i];
    }
    outer_acc(u, tape.inputs[li], g.d_weights[li]);
    const auto& k = kernels::active();
    k.axpy(1.0, u.data(), g.d_bias[li].data(), u.size());
    Vector down(layer.weights.cols, 0.0);
    matvec_transpose_acc(layer.weights, u, down);
    u = std::move(down);
  }
  g.d_input = std::move(u);
  return g;
}

AdamState make_adam_state(const Mlp& mlp) {
  AdamState s;
  for (const auto& l : mlp.layers) {
    s.m_weights.emplace_back(l.weights.rows, l.weights.cols);
    s.v_weights.emplace_back(l.weights.rows, l.weights.cols);
    s.m_bias.emplace_back(l.bias.size(), 0.0);
    s.v_bias.emplace_back(l.bias.size(), 0.0);
  }
  return s;
}

namespace {

void adam_update_block(double* p, const double* g, double* m, double* v,
                       std::size_t n, const AdamConfig& c, double bc1,
                       double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.eps);
  }
}

}  // namespace

void adam_step(Mlp& mlp, const GradBundle& grads, AdamState& state,
               const AdamConfig& config) {
  if (!grads.finite())
    throw std::runtime_error("adam_step: non-finite gradient");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, state.step);
  const double bc2 = 1.0 - std::pow(config.beta2, state.step);
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    adam_update_block(mlp.layers[l].weights.data.data(),
                      grads.d_weights[l].data.data(),
                      state.m_weights[l].data.data(),
                      state.v_weights[l].data.data(),
                      mlp.layers[l].weights.data.size(), config, bc1, bc2);
    adam_update_block(mlp.layers[l].bias.data(), grads.d_bias[l].data(),
                      state.m_bias[l].data(), state.v_bias[l].data(),
                      mlp.layers[l].bias.size(), config, bc1, bc2);
  }
}

void adam_step_flat(Vector& params, const Vector& grads, FlatAdamState& state,
                    const AdamConfig& config) {
  for (double g : grads)
    if (!std::isfinite(g))
      throw std::runtime_error("adam_step_flat: non-finite gradient");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, state.step);
  const double bc2 = 1.0 - std::pow(config.beta2, state.step);
  adam_update_block(params.data(), grads.data(), state.m.data(),
                    state.v.data(), params.size(), config, bc1, bc2);
}

double grad_check(const Objective& objective, Mlp& mlp, double step) {
  GradBundle analytic = make_zero_grads(mlp);
  objective(mlp, &analytic);

  double max_err = 0.0;
  auto check_param = [&](double& p, double a) {
    const double saved = p;
    p = saved + step;
    const double up = objective(mlp, nullptr);
    p = saved - step;
    const double dn = objective(mlp, nullptr);
    p = saved;
    const double fd = (up - dn) / (2.0 * step);
    const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-12});
    max_err = std::max(max_err, std::fabs(a - fd) / denom);
  };

  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    auto& layer = mlp.layers[l];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
      check_param(layer.weights.data[i], analytic.d_weights[l].data[i]);
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
      check_param(layer.bias[i], analytic.d_bias[l][i]);
  }
  return max_err;
}

Mlp init_mlp(const std::vector<std::size_t>& dims,
             const std::vector<Activation>& acts, Rng& rng) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1)
    throw std::invalid_argument("init_mlp: dims/acts mismatch");
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.weights = Matrix(dims[l + 1], dims[l]);
    layer.bias.assign(dims[l + 1], 0.0);
    layer.act = acts[l];
    const double bound =
        std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (auto& w : layer.weights.data) w = rng.uniform(-bound, bound);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace svae::diffnet
