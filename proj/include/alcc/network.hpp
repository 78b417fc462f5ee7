#ifndef ALCC_NETWORK_HPP
#define ALCC_NETWORK_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace alcc {

enum class OutputActivation { tanh, identity };

/// Dense ReLU stack; widths include input and output layers.
struct NetworkSpec {
  std::vector<int> widths;
  OutputActivation output = OutputActivation::tanh;
  std::uint64_t init_seed = 0;

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  void validate() const;
};

struct LayerParams {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // row-major, out x in
  std::vector<double> b;
};

using ParamSet = std::vector<LayerParams>;

struct Network {
  NetworkSpec spec;
  ParamSet layers;
};

/// Glorot-uniform weights, zero biases; reproducible from spec.init_seed.
Network make_network(const NetworkSpec& spec);

std::vector<double> forward(const Network& net, std::span<const double> input);

struct ForwardCache {
  std::vector<std::vector<double>> activations;  // activations[0] = input

  double scalar() const { return activations.back().front(); }
};

std::vector<double> forward(const Network& net, std::span<const double> input,
                            ForwardCache& cache);

/// Allocation-free once the cache has warmed up; read via cache.scalar()
/// or cache.activations.back().
void forward_into(const Network& net, std::span<const double> input,
                  ForwardCache& cache);

ParamSet zero_gradients(const Network& net);

/// Accumulates exact reverse-mode gradients of (upstream . output) into
/// grads; when input_grad is non-null it receives d/d(input).
void backward(const Network& net, const ForwardCache& cache,
              std::span<const double> upstream, ParamSet& grads,
              std::vector<double>* input_grad = nullptr);

/// Input gradient alone, skipping the parameter-gradient accumulation.
std::vector<double> backward_input(const Network& net,
                                   const ForwardCache& cache,
                                   std::span<const double> upstream);

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  ParamSet m;
  ParamSet v;
  long long step = 0;
};

OptimizerState make_optimizer_state(const Network& net);

/// One bias-corrected adaptive-moment (or plain SGD) update in place.
void optimizer_step(Network& net, const ParamSet& grads, OptimizerState& state,
                    const OptimizerConfig& cfg);

/// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(Network& target, const Network& online, double tau);

}  // namespace alcc

#endif
