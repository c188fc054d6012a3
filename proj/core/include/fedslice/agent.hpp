#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedslice/env.hpp"
#include "fedslice/federation.hpp"
#include "fedslice/neural.hpp"
#include "fedslice/rng.hpp"

namespace fedslice {

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  long decay_steps = 20000;

  bool operator==(const EpsilonSchedule&) const = default;
};

// Linear interpolation from start to end, constant end afterwards.
double epsilon_at(const EpsilonSchedule& schedule, long env_step);

// Argmax with ties broken toward the smallest index.
int argmax_index(std::span<const double> values);

// Epsilon-greedy. epsilon <= 0 is a pure argmax and draws nothing.
int select_action(std::span<const double> q_values, double epsilon, RngStream& rng);

struct Transition {
  Observation s;
  int a = 0;
  double r = 0.0;
  Observation s_next;
  bool done = false;
};

// Fixed-capacity ring; oldest transitions evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);

  void push(Transition transition);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  const Transition& at(std::size_t index) const { return storage_[index]; }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::uint64_t inserted_ = 0;
};

// Uniform sample without replacement; order deterministic in the rng state.
std::vector<Transition> sample(const ReplayBuffer& buffer, std::size_t batch_size,
                               RngStream& rng);

// Double-estimator targets: the online network picks the next action, the
// target network evaluates it.
std::vector<double> ddqn_targets(const std::vector<Transition>& batch,
                                 const MlpParams& online, const MlpParams& target,
                                 double gamma);

struct AgentConfig {
  double gamma = 0.95;
  int batch_size = 64;
  long target_sync_period = 500;  // training iterations between hard syncs
  int train_every = 4;            // env steps between training iterations
  long warmup_transitions = 1000;
  EpsilonSchedule epsilon;
  std::vector<int> hidden_dims{64, 64};
  double learning_rate = 1e-3;
  double clip_norm = 10.0;
  std::size_t replay_capacity = 50000;

  void validate() const;

  bool operator==(const AgentConfig&) const = default;
};

// Per-slice DDQN decision agent. Single-owner; one instance per (cell, slice).
class Agent {
 public:
  Agent(AgentConfig config, int cell_id, int slice_id, int obs_dim,
        int num_actions, std::uint64_t master_seed);

  // Epsilon-greedy on the current schedule position.
  int act(const Observation& obs);
  // Pure exploitation; touches neither counters nor rng.
  int act_greedy(const Observation& obs) const;

  void record(Transition transition);

  // One training opportunity per env step: no-op until the buffer has warmed
  // up and the step counter hits the train_every grid; hard-syncs the target
  // network every target_sync_period iterations.
  std::optional<double> maybe_train();

  double current_epsilon() const;
  long env_step() const { return env_step_; }
  long train_iterations() const { return train_iterations_; }
  int cell_id() const { return cell_id_; }
  int slice_id() const { return slice_id_; }
  const MlpParams& online() const { return online_; }
  const MlpParams& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const OptState& opt_state() const { return opt_; }

  // Federation surface.
  ModelSnapshot snapshot() const;
  std::uint64_t samples_since_round() const { return samples_since_round_; }
  void reset_round_counter() { samples_since_round_ = 0; }
  // Writes flat into online and target and restarts the optimizer moments.
  void apply_aggregate(std::span<const double> flat);

 private:
  AgentConfig cfg_;
  int cell_id_;
  int slice_id_;
  MlpParams online_;
  MlpParams target_;
  OptState opt_;
  ReplayBuffer buffer_;
  long env_step_ = 0;
  long train_iterations_ = 0;
  std::uint64_t samples_since_round_ = 0;
  RngStream action_rng_;
  RngStream replay_rng_;
};

}  // namespace fedslice
