#include "alcc/network.hpp"

#include <cmath>
#include <stdexcept>

#include "alcc/rng.hpp"

namespace alcc {

void NetworkSpec::validate() const {
  if (widths.size() < 3)
    throw std::invalid_argument("network needs at least one hidden layer");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("layer widths must be positive");
}

Network make_network(const NetworkSpec& spec) {
  spec.validate();
  Network net;
  net.spec = spec;
  auto rng = make_rng(derive_seed(spec.init_seed, {stream::init}));
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    LayerParams layer;
    layer.in = spec.widths[l];
    layer.out = spec.widths[l + 1];
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.b.assign(layer.out, 0.0);
    const double limit = std::sqrt(6.0 / (layer.in + layer.out));
    for (double& w : layer.w) w = uniform(rng, -limit, limit);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace {

void affine(const LayerParams& layer, const std::vector<double>& x,
            std::vector<double>& out) {
  out.resize(layer.out);
  const double* xs = x.data();
  for (int o = 0; o < layer.out; ++o) {
    const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < layer.in; ++i) acc += row[i] * xs[i];
    out[o] = acc + layer.b[o];
  }
}

}  // namespace

void forward_into(const Network& net, std::span<const double> input,
                  ForwardCache& cache) {
  if (static_cast<int>(input.size()) != net.spec.input_width())
    throw std::invalid_argument("input width mismatch");
  // resize keeps the inner vectors' capacity across calls
  cache.activations.resize(net.layers.size() + 1);
  cache.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& act = cache.activations[l + 1];
    affine(net.layers[l], cache.activations[l], act);
    const bool last = l + 1 == net.layers.size();
    if (!last) {
      for (double& v : act) v = std::max(0.0, v);
    } else if (net.spec.output == OutputActivation::tanh) {
      for (double& v : act) v = std::tanh(v);
    }
  }
}

std::vector<double> forward(const Network& net, std::span<const double> input) {
  ForwardCache cache;
  forward_into(net, input, cache);
  return cache.activations.back();
}

std::vector<double> forward(const Network& net, std::span<const double> input,
                            ForwardCache& cache) {
  forward_into(net, input, cache);
  return cache.activations.back();
}

ParamSet zero_gradients(const Network& net) {
  ParamSet grads;
  grads.reserve(net.layers.size());
  for (const auto& layer : net.layers) {
    LayerParams g;
    g.in = layer.in;
    g.out = layer.out;
    g.w.assign(layer.w.size(), 0.0);
    g.b.assign(layer.b.size(), 0.0);
    grads.push_back(std::move(g));
  }
  return grads;
}

void backward(const Network& net, const ForwardCache& cache,
              std::span<const double> upstream, ParamSet& grads,
              std::vector<double>* input_grad) {
  if (cache.activations.size() != net.layers.size() + 1)
    throw std::invalid_argument("forward cache does not match network");
  if (static_cast<int>(upstream.size()) != net.spec.output_width())
    throw std::invalid_argument("upstream gradient width mismatch");
  if (grads.size() != net.layers.size())
    throw std::invalid_argument("gradient accumulator shape mismatch");

  // delta = d(objective)/d(pre-activation) of the current layer
  std::vector<double> delta(upstream.begin(), upstream.end());
  const auto& out_act = cache.activations.back();
  if (net.spec.output == OutputActivation::tanh) {
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta[i] *= 1.0 - out_act[i] * out_act[i];
  }

  std::vector<double> prev_delta;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    auto& g = grads[l];
    const double* xs = cache.activations[l].data();
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* grow = g.w.data() + static_cast<std::size_t>(o) * layer.in;
#pragma omp simd
      for (int i = 0; i < layer.in; ++i) grow[i] += d * xs[i];
      g.b[o] += d;
    }
    const bool need_input = l > 0 || input_grad != nullptr;
    if (!need_input) break;
    prev_delta.assign(layer.in, 0.0);
    double* pd = prev_delta.data();
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
#pragma omp simd
      for (int i = 0; i < layer.in; ++i) pd[i] += d * row[i];
    }
    if (l > 0) {
      // ReLU mask of the layer below
      const auto& act = cache.activations[l];
      for (int i = 0; i < layer.in; ++i)
        if (act[i] <= 0.0) prev_delta[i] = 0.0;
    }
    delta = prev_delta;
  }
  if (input_grad != nullptr) *input_grad = delta;
}

std::vector<double> backward_input(const Network& net,
                                   const ForwardCache& cache,
                                   std::span<const double> upstream) {
  if (cache.activations.size() != net.layers.size() + 1)
    throw std::invalid_argument("forward cache does not match network");
  std::vector<double> delta(upstream.begin(), upstream.end());
  const auto& out_act = cache.activations.back();
  if (net.spec.output == OutputActivation::tanh) {
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta[i] *= 1.0 - out_act[i] * out_act[i];
  }
  std::vector<double> prev_delta;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    prev_delta.assign(layer.in, 0.0);
    double* pd = prev_delta.data();
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
#pragma omp simd
      for (int i = 0; i < layer.in; ++i) pd[i] += d * row[i];
    }
    if (l > 0) {
      const auto& act = cache.activations[l];
      for (int i = 0; i < layer.in; ++i)
        if (act[i] <= 0.0) prev_delta[i] = 0.0;
    }
    delta = prev_delta;
  }
  return delta;
}

OptimizerState make_optimizer_state(const Network& net) {
  OptimizerState s;
  s.m = zero_gradients(net);
  s.v = zero_gradients(net);
  return s;
}

namespace {

void check_finite(const ParamSet& grads) {
  for (const auto& g : grads) {
    for (double x : g.w)
      if (!std::isfinite(x)) throw std::runtime_error("non-finite gradient");
    for (double x : g.b)
      if (!std::isfinite(x)) throw std::runtime_error("non-finite gradient");
  }
}

}  // namespace

void optimizer_step(Network& net, const ParamSet& grads, OptimizerState& state,
                    const OptimizerConfig& cfg) {
  if (grads.size() != net.layers.size())
    throw std::invalid_argument("gradient shape mismatch");
  check_finite(grads);
  if (cfg.kind == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto& layer = net.layers[l];
      for (std::size_t i = 0; i < layer.w.size(); ++i)
        layer.w[i] -= cfg.learning_rate * grads[l].w[i];
      for (std::size_t i = 0; i < layer.b.size(); ++i)
        layer.b[i] -= cfg.learning_rate * grads[l].b[i];
    }
    ++state.step;
    return;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto update = [&](double& param, double grad, double& m, double& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    param -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    for (std::size_t i = 0; i < layer.w.size(); ++i)
      update(layer.w[i], grads[l].w[i], state.m[l].w[i], state.v[l].w[i]);
    for (std::size_t i = 0; i < layer.b.size(); ++i)
      update(layer.b[i], grads[l].b[i], state.m[l].b[i], state.v[l].b[i]);
  }
}

void soft_update(Network& target, const Network& online, double tau) {
  if (target.layers.size() != online.layers.size())
    throw std::invalid_argument("network shape mismatch");
  for (std::size_t l = 0; l < target.layers.size(); ++l) {
    auto& t = target.layers[l];
    const auto& o = online.layers[l];
    if (t.w.size() != o.w.size() || t.b.size() != o.b.size())
      throw std::invalid_argument("network shape mismatch");
    for (std::size_t i = 0; i < t.w.size(); ++i)
      t.w[i] = tau * o.w[i] + (1.0 - tau) * t.w[i];
    for (std::size_t i = 0; i < t.b.size(); ++i)
      t.b[i] = tau * o.b[i] + (1.0 - tau) * t.b[i];
  }
}

}  // namespace alcc
