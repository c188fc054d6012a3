#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fedslice/agent.hpp"
#include "fedslice/env.hpp"
#include "fedslice/federation.hpp"

namespace fedslice {

struct FederationConfig {
  bool enabled = true;
  long period_steps = 2000;  // env steps between rounds
  WeightRule weight_rule = WeightRule::SampleCount;

  bool operator==(const FederationConfig&) const = default;
};

// Everything a run needs; run_training is a pure function of this.
struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  long train_steps = 60000;
  int eval_episodes = 5;
  long eval_horizon_steps = 1000;
  std::vector<CellConfig> cells;
  AgentConfig agent;
  FederationConfig federation;

  // Throws ConfigError, message names the offending field.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

// Cell k shifts every profile phase by k*period/3 and scales mean by
// (1 + 0.2k), so cells are statistically different but structurally alike.
CellConfig default_cell_config(int cell_id);
ExperimentConfig default_experiment_config(int num_cells = 3);

struct RoundArtifact {
  long round = 0;  // 1-based, in firing order
  ModelSnapshot aggregate;
};

struct TrainResult {
  std::vector<Agent> agents;  // cell-major: cells[c] slice s at c*num_slices+s
  std::vector<KpiRecord> kpi;
  std::vector<RoundArtifact> rounds;
};

// The canonical loop: per env step and per cell, every slice agent picks an
// action, the env advances, transitions are recorded, agents train on their
// own schedule; federation rounds fire every period_steps when enabled.
// Deterministic in config up to byte-identical KPI logs.
TrainResult run_training(const ExperimentConfig& config);

// Decision rule under evaluation; must not mutate anything it observes.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int act(const CellEnv& env, int slice_id, const Observation& obs) = 0;
};

// Greedy exploitation of trained online networks, one agent per (cell, slice).
class GreedyNetPolicy : public Policy {
 public:
  explicit GreedyNetPolicy(std::span<const Agent> agents);
  int act(const CellEnv& env, int slice_id, const Observation& obs) override;

 private:
  const Agent* find(int cell_id, int slice_id) const;
  std::span<const Agent> agents_;
};

enum class BaselineKind { Random, StaticEqual, Oracle };

// Random: uniform over the action space. StaticEqual: always requests
// floor(C/num_slices/chunk)*chunk. Oracle: reads next-step demand and
// requests its chunk ceiling (upper reference only).
std::unique_ptr<Policy> baseline_policy(BaselineKind kind,
                                        std::uint64_t master_seed = 0);

struct SliceStats {
  int cell_id = 0;
  int slice_id = 0;
  double mean_reward = 0.0;
  double mean_gap_prb = 0.0;  // signed, alloc - demand
  double mean_abs_gap_prb = 0.0;
  double over_provision_ratio = 0.0;  // fraction of steps alloc > demand
  double sla_violation_ratio = 0.0;   // fraction of steps alloc < demand
  double mean_alloc_prb = 0.0;
};

struct CellStats {
  int cell_id = 0;
  double jain_fairness = 0.0;  // over per-slice mean allocations
};

struct EvalReport {
  std::vector<SliceStats> slices;  // sorted by (cell_id, slice_id)
  std::vector<CellStats> cells;
  double mean_reward = 0.0;  // aggregates over every (cell, slice) pair
  double mean_gap_prb = 0.0;
  double mean_abs_gap_prb = 0.0;
  double over_provision_ratio = 0.0;
  double sla_violation_ratio = 0.0;
  double mean_alloc_prb = 0.0;
  int episodes = 0;
  long steps_per_episode = 0;
};

// Greedy rollouts on fresh seeds (config.eval_episodes x eval_horizon_steps
// per cell); no training, no buffer writes, policy state aside nothing moves.
EvalReport evaluate_policy(Policy& policy, const ExperimentConfig& config);

// (sum x)^2 / (n * sum x^2); throws std::invalid_argument on empty or
// all-zero input. Always in [1/n, 1] otherwise.
double jain_fairness(std::span<const double> values);

// Deterministic finite MDP, indexed [state * num_actions + action].
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  std::vector<int> next_state;
  std::vector<double> reward;
};

// Bellman optimality backups to within tolerance; returns the Q table in the
// same indexing as TabularMdp.
std::vector<double> value_iteration_oracle(const TabularMdp& mdp, double gamma,
                                           double tolerance);

// Two states, two actions: staying in B pays 2, moving A->B pays 1, the rest
// pays 0. Small enough that value iteration's fixed point is checkable by
// hand and a Q-learner must see both states to get it right.
TabularMdp toy_two_state_mdp();

// Full agent loop on a tabular MDP with one-hot state observations. Used to
// check the learner against the value-iteration fixed point.
Agent train_agent_on_mdp(const TabularMdp& mdp, const AgentConfig& config,
                         long steps, std::uint64_t seed);

}  // namespace fedslice
