#pragma once

#include <functional>
#include <vector>

#include "svae/linalg.hpp"
#include "svae/rng.hpp"

namespace svae::diffnet {

enum class Activation { Tanh, Identity };

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation act = Activation::Identity;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().weights.cols; }
  std::size_t output_dim() const { return layers.back().weights.rows; }
  std::size_t param_count() const;
};

// Per-layer state retained by forward() for the reverse pass.
struct ForwardTape {
  std::vector<Vector> inputs;       // input to each layer
  std::vector<Vector> activations;  // post-activation output of each layer
};

Vector forward(const Mlp& mlp, const Vector& input,
               ForwardTape* tape = nullptr);

struct GradBundle {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_bias;
  Vector d_input;  // cotangent pulled back to the network input

  void add(const GradBundle& other);
  void scale(double s);
  bool finite() const;
};

GradBundle make_zero_grads(const Mlp& mlp);

// Reverse pass. `tape` must come from a forward() call on the same mlp and
// input; `cotangent` is dLoss/dOutput.
GradBundle backward(const Mlp& mlp, const ForwardTape& tape,
                    const Vector& cotangent);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_bias, v_bias;
  long step = 0;
};

AdamState make_adam_state(const Mlp& mlp);

// Standard Adam descent step with bias correction. Throws on non-finite
// gradients.
void adam_step(Mlp& mlp, const GradBundle& grads, AdamState& state,
               const AdamConfig& config);

// Flat-vector Adam for small auxiliary parameter blocks.
struct FlatAdamState {
  Vector m, v;
  long step = 0;
};

void adam_step_flat(Vector& params, const Vector& grads, FlatAdamState& state,
                    const AdamConfig& config);

// Objective evaluates the scalar loss and (optionally) fills analytic
// gradients. Returns the max relative error between analytic gradients and
// central finite differences.
using Objective = std::function<double(const Mlp& mlp, GradBundle* grads)>;

double grad_check(const Objective& objective, Mlp& mlp, double step);

// Uniform +-sqrt(6/(fan_in+fan_out)) initialization.
Mlp init_mlp(const std::vector<std::size_t>& dims,
             const std::vector<Activation>& acts, Rng& rng);

}  // namespace svae::diffnet
