#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fedslice {

// Flat-weight feedforward Q-network: rectified-linear hidden layers, identity
// output. Gradients are hand-derived and oracle-checked against central
// finite differences, so everything stays in double precision.
struct MlpParams {
  std::vector<int> layer_dims;                // e.g. {5, 64, 64, 11}
  std::vector<std::vector<double>> weights;   // [layer]: (out x in), row-major
  std::vector<std::vector<double>> biases;    // [layer]: (out)

  std::size_t param_count() const;
  static MlpParams zeros(const std::vector<int>& layer_dims);

  bool operator==(const MlpParams&) const = default;
};

std::size_t param_count(const std::vector<int>& layer_dims);

// Glorot-style uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
MlpParams init_params(const std::vector<int>& layer_dims, std::uint64_t seed);

std::vector<double> forward(const MlpParams& params, std::span<const double> input);

struct LossGrads {
  double loss = 0.0;
  MlpParams grads;  // shaped like the parameters
};

// Mean squared error over the taken-action outputs:
//   loss = mean_b (Q(s_b)[a_b] - y_b)^2
// Gradients flow only through the taken action and are globally norm-clipped.
LossGrads loss_and_gradients(const MlpParams& params,
                             const std::vector<std::vector<double>>& inputs,
                             const std::vector<int>& action_indices,
                             const std::vector<double>& targets,
                             double clip_norm = 10.0);

// Adaptive moment estimation with bias correction.
struct OptState {
  MlpParams first_moment;
  MlpParams second_moment;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 10.0;
};

OptState make_opt_state(const MlpParams& like, double learning_rate = 1e-3,
                        double clip_norm = 10.0);

void optimizer_step(MlpParams& params, const MlpParams& grads, OptState& opt);

// Canonical flattening: layer-major, weights (row-major) then biases per
// layer. This layout is the serialization contract for federation.
std::vector<double> flatten(const MlpParams& params);
void load_flat(MlpParams& params, std::span<const double> flat);

}  // namespace fedslice
