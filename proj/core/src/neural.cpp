#include "fedslice/neural.hpp"

#include <cmath>
#include <stdexcept>

#include "fedslice/rng.hpp"

namespace fedslice {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) {
    throw std::invalid_argument("layer_dims needs at least input and output");
  }
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("layer dimensions must be >= 1");
  }
}

}  // namespace

std::size_t param_count(const std::vector<int>& dims) {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    count += std::size_t(dims[l]) * std::size_t(dims[l + 1]) + std::size_t(dims[l + 1]);
  }
  return count;
}

std::size_t MlpParams::param_count() const { return fedslice::param_count(layer_dims); }

MlpParams MlpParams::zeros(const std::vector<int>& dims) {
  check_dims(dims);
  MlpParams p;
  p.layer_dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.emplace_back(std::size_t(dims[l]) * std::size_t(dims[l + 1]), 0.0);
    p.biases.emplace_back(std::size_t(dims[l + 1]), 0.0);
  }
  return p;
}

MlpParams init_params(const std::vector<int>& dims, std::uint64_t seed) {
  MlpParams p = MlpParams::zeros(dims);
  RngStream rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / double(dims[l] + dims[l + 1]));
    for (double& w : p.weights[l]) {
      w = (2.0 * uniform_real(rng) - 1.0) * limit;
    }
  }
  return p;
}

std::vector<double> forward(const MlpParams& params, std::span<const double> input) {
  const auto& dims = params.layer_dims;
  if (int(input.size()) != dims.front()) {
    throw std::invalid_argument("forward: input length != layer_dims[0]");
  }
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  const std::size_t layers = params.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    next.assign(std::size_t(out), 0.0);
    const double* w = params.weights[l].data();
    for (int o = 0; o < out; ++o) {
      const double* row = w + std::size_t(o) * in;
      double acc = params.biases[l][o];
      for (int i = 0; i < in; ++i) acc += row[i] * cur[i];
      next[o] = (l + 1 < layers && acc < 0.0) ? 0.0 : acc;
    }
    cur.swap(next);
  }
  return cur;
}

LossGrads loss_and_gradients(const MlpParams& params,
                             const std::vector<std::vector<double>>& inputs,
                             const std::vector<int>& action_indices,
                             const std::vector<double>& targets,
                             double clip_norm) {
  const std::size_t batch = inputs.size();
  if (batch == 0) throw std::invalid_argument("loss_and_gradients: empty batch");
  if (action_indices.size() != batch || targets.size() != batch) {
    throw std::invalid_argument("loss_and_gradients: batch shapes differ");
  }
  const auto& dims = params.layer_dims;
  const std::size_t layers = params.weights.size();
  const int out_dim = dims.back();

  LossGrads result;
  result.grads = MlpParams::zeros(dims);

  // Per-sample activations: acts[l] holds the layer-l output (acts[0] = input).
  std::vector<std::vector<double>> acts(layers + 1);
  std::vector<double> delta, delta_prev;

  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& x = inputs[b];
    if (int(x.size()) != dims.front()) {
      throw std::invalid_argument("loss_and_gradients: input length mismatch");
    }
    for (double v : x) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("loss_and_gradients: non-finite input");
      }
    }
    const int action = action_indices[b];
    if (action < 0 || action >= out_dim) {
      throw std::invalid_argument("loss_and_gradients: action index out of range");
    }

    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      const int in = dims[l];
      const int out = dims[l + 1];
      acts[l + 1].assign(std::size_t(out), 0.0);
      const double* w = params.weights[l].data();
      for (int o = 0; o < out; ++o) {
        const double* row = w + std::size_t(o) * in;
        double acc = params.biases[l][o];
        for (int i = 0; i < in; ++i) acc += row[i] * acts[l][i];
        acts[l + 1][o] = (l + 1 < layers && acc < 0.0) ? 0.0 : acc;
      }
    }

    const double q = acts[layers][action];
    const double err = q - targets[b];
    loss += err * err;

    // Backward pass; only the taken action feeds the output delta.
    delta.assign(std::size_t(out_dim), 0.0);
    delta[action] = 2.0 * err / double(batch);
    for (std::size_t l = layers; l-- > 0;) {
      const int in = dims[l];
      const int out = dims[l + 1];
      double* gw = result.grads.weights[l].data();
      for (int o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* grow = gw + std::size_t(o) * in;
        for (int i = 0; i < in; ++i) grow[i] += d * acts[l][i];
        result.grads.biases[l][o] += d;
      }
      if (l == 0) break;
      delta_prev.assign(std::size_t(in), 0.0);
      const double* w = params.weights[l].data();
      for (int o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = w + std::size_t(o) * in;
        for (int i = 0; i < in; ++i) delta_prev[i] += row[i] * d;
      }
      // Rectifier gate: units that were clamped pass no gradient.
      for (int i = 0; i < in; ++i) {
        if (acts[l][i] <= 0.0) delta_prev[i] = 0.0;
      }
      delta.swap(delta_prev);
    }
  }
  result.loss = loss / double(batch);

  double norm_sq = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    for (double g : result.grads.weights[l]) norm_sq += g * g;
    for (double g : result.grads.biases[l]) norm_sq += g * g;
  }
  const double norm = std::sqrt(norm_sq);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (std::size_t l = 0; l < layers; ++l) {
      for (double& g : result.grads.weights[l]) g *= scale;
      for (double& g : result.grads.biases[l]) g *= scale;
    }
  }
  return result;
}

OptState make_opt_state(const MlpParams& like, double learning_rate, double clip_norm) {
  OptState opt;
  opt.first_moment = MlpParams::zeros(like.layer_dims);
  opt.second_moment = MlpParams::zeros(like.layer_dims);
  opt.learning_rate = learning_rate;
  opt.clip_norm = clip_norm;
  return opt;
}

void optimizer_step(MlpParams& params, const MlpParams& grads, OptState& opt) {
  if (params.layer_dims != grads.layer_dims ||
      params.layer_dims != opt.first_moment.layer_dims) {
    throw std::invalid_argument("optimizer_step: shape mismatch");
  }
  opt.step += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, double(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, double(opt.step));

  const auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], grads.weights[l], opt.first_moment.weights[l],
           opt.second_moment.weights[l]);
    update(params.biases[l], grads.biases[l], opt.first_moment.biases[l],
           opt.second_moment.biases[l]);
  }
}

std::vector<double> flatten(const MlpParams& params) {
  std::vector<double> flat;
  flat.reserve(params.param_count());
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    flat.insert(flat.end(), params.weights[l].begin(), params.weights[l].end());
    flat.insert(flat.end(), params.biases[l].begin(), params.biases[l].end());
  }
  return flat;
}

void load_flat(MlpParams& params, std::span<const double> flat) {
  if (flat.size() != params.param_count()) {
    throw std::invalid_argument("load_flat: length does not match layer_dims");
  }
  std::size_t pos = 0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (double& w : params.weights[l]) w = flat[pos++];
    for (double& b : params.biases[l]) b = flat[pos++];
  }
}

}  // namespace fedslice
