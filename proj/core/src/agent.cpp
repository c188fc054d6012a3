#include "fedslice/agent.hpp"

#include <algorithm>
#include <stdexcept>

namespace fedslice {

double epsilon_at(const EpsilonSchedule& schedule, long env_step) {
  if (env_step < 0) throw std::invalid_argument("epsilon_at: env_step < 0");
  if (env_step >= schedule.decay_steps) return schedule.end;
  const double frac = double(env_step) / double(schedule.decay_steps);
  return schedule.start + (schedule.end - schedule.start) * frac;
}

int argmax_index(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax_index: empty input");
  int best = 0;
  for (int i = 1; i < int(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

int select_action(std::span<const double> q_values, double epsilon, RngStream& rng) {
  if (q_values.empty()) throw std::invalid_argument("select_action: empty q_values");
  if (epsilon > 0.0 && uniform_real(rng) < epsilon) {
    return uniform_int(rng, int(q_values.size()));
  }
  return argmax_index(q_values);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be > 0");
  storage_.reserve(std::min<std::size_t>(capacity_, 4096));
}

void ReplayBuffer::push(Transition transition) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(transition));
  } else {
    storage_[inserted_ % capacity_] = std::move(transition);
  }
  ++inserted_;
}

std::size_t ReplayBuffer::size() const { return storage_.size(); }

std::vector<Transition> sample(const ReplayBuffer& buffer, std::size_t batch_size,
                               RngStream& rng) {
  const std::size_t n = buffer.size();
  if (batch_size > n) {
    throw std::invalid_argument("sample: batch_size exceeds buffer size");
  }
  // Floyd's algorithm: uniform without replacement in O(batch) draws.
  std::vector<std::size_t> picked;
  picked.reserve(batch_size);
  for (std::size_t j = n - batch_size; j < n; ++j) {
    const std::size_t t = std::size_t(uniform_int(rng, int(j + 1)));
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
      picked.push_back(t);
    } else {
      picked.push_back(j);
    }
  }
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t idx : picked) batch.push_back(buffer.at(idx));
  return batch;
}

std::vector<double> ddqn_targets(const std::vector<Transition>& batch,
                                 const MlpParams& online, const MlpParams& target,
                                 double gamma) {
  std::vector<double> targets(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Transition& tr = batch[b];
    double bootstrap = 0.0;
    if (!tr.done && gamma != 0.0) {
      const std::vector<double> q_online = forward(online, tr.s_next);
      const std::vector<double> q_target = forward(target, tr.s_next);
      bootstrap = gamma * q_target[argmax_index(q_online)];
    }
    targets[b] = tr.r + bootstrap;
  }
  return targets;
}

void AgentConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("agent.gamma must be in [0, 1)");
  if (batch_size < 1) throw ConfigError("agent.batch_size must be >= 1");
  if (target_sync_period < 1) throw ConfigError("agent.target_sync_period must be >= 1");
  if (train_every < 1) throw ConfigError("agent.train_every must be >= 1");
  if (warmup_transitions < 0) throw ConfigError("agent.warmup_transitions must be >= 0");
  if (epsilon.start < 0.0 || epsilon.start > 1.0 || epsilon.end < 0.0 ||
      epsilon.end > epsilon.start) {
    throw ConfigError("agent.epsilon must satisfy 0 <= end <= start <= 1");
  }
  if (epsilon.decay_steps < 1) throw ConfigError("agent.epsilon_decay_steps must be >= 1");
  if (hidden_dims.empty()) throw ConfigError("agent.hidden_dims must be non-empty");
  for (int d : hidden_dims) {
    if (d < 1) throw ConfigError("agent.hidden_dims entries must be >= 1");
  }
  if (learning_rate <= 0.0) throw ConfigError("agent.learning_rate must be > 0");
  if (clip_norm <= 0.0) throw ConfigError("agent.clip_norm must be > 0");
  if (replay_capacity == 0) throw ConfigError("agent.replay_capacity must be >= 1");
  if (std::size_t(batch_size) > replay_capacity) {
    throw ConfigError("agent.batch_size must not exceed replay_capacity");
  }
  if (warmup_transitions < batch_size) {
    throw ConfigError("agent.warmup_transitions must be >= batch_size");
  }
}

namespace {

std::vector<int> full_dims(int obs_dim, const std::vector<int>& hidden, int actions) {
  std::vector<int> dims;
  dims.reserve(hidden.size() + 2);
  dims.push_back(obs_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(actions);
  return dims;
}

}  // namespace

Agent::Agent(AgentConfig config, int cell_id, int slice_id, int obs_dim,
             int num_actions, std::uint64_t master_seed)
    : cfg_((config.validate(), std::move(config))),
      cell_id_(cell_id),
      slice_id_(slice_id),
      online_(init_params(full_dims(obs_dim, cfg_.hidden_dims, num_actions),
                          derive_seed(master_seed, std::uint32_t(cell_id),
                                      std::uint32_t(slice_id), StreamTag::AgentInit))),
      target_(online_),
      opt_(make_opt_state(online_, cfg_.learning_rate, cfg_.clip_norm)),
      buffer_(cfg_.replay_capacity),
      action_rng_(derive_seed(master_seed, std::uint32_t(cell_id),
                              std::uint32_t(slice_id), StreamTag::AgentAction)),
      replay_rng_(derive_seed(master_seed, std::uint32_t(cell_id),
                              std::uint32_t(slice_id), StreamTag::AgentReplay)) {}

int Agent::act(const Observation& obs) {
  const std::vector<double> q = forward(online_, obs);
  return select_action(q, current_epsilon(), action_rng_);
}

int Agent::act_greedy(const Observation& obs) const {
  return argmax_index(forward(online_, obs));
}

double Agent::current_epsilon() const { return epsilon_at(cfg_.epsilon, env_step_); }

void Agent::record(Transition transition) {
  buffer_.push(std::move(transition));
  ++env_step_;
  ++samples_since_round_;
}

std::optional<double> Agent::maybe_train() {
  if (buffer_.size() < std::size_t(cfg_.warmup_transitions)) return std::nullopt;
  if (env_step_ % cfg_.train_every != 0) return std::nullopt;

  const std::vector<Transition> batch =
      sample(buffer_, std::size_t(cfg_.batch_size), replay_rng_);
  const std::vector<double> targets = ddqn_targets(batch, online_, target_, cfg_.gamma);

  std::vector<std::vector<double>> inputs;
  std::vector<int> actions;
  inputs.reserve(batch.size());
  actions.reserve(batch.size());
  for (const Transition& tr : batch) {
    inputs.push_back(tr.s);
    actions.push_back(tr.a);
  }
  const LossGrads lg = loss_and_gradients(online_, inputs, actions, targets,
                                          cfg_.clip_norm);
  optimizer_step(online_, lg.grads, opt_);
  ++train_iterations_;
  if (train_iterations_ % cfg_.target_sync_period == 0) {
    target_ = online_;
  }
  return lg.loss;
}

ModelSnapshot Agent::snapshot() const {
  ModelSnapshot snap;
  snap.cell_id = cell_id_;
  snap.slice_id = slice_id_;
  snap.layer_dims = online_.layer_dims;
  const std::vector<double> flat = flatten(online_);
  snap.params.assign(flat.begin(), flat.end());
  snap.sample_count = samples_since_round_;
  return snap;
}

void Agent::apply_aggregate(std::span<const double> flat) {
  load_flat(online_, flat);
  target_ = online_;
  opt_ = make_opt_state(online_, cfg_.learning_rate, cfg_.clip_norm);
}

}  // namespace fedslice
