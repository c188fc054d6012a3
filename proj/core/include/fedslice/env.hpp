#pragma once

#include <vector>

#include "fedslice/errors.hpp"
#include "fedslice/traffic.hpp"

namespace fedslice {

// One simulated gNB cell sharing capacity_prb PRBs among num_slices slices.
struct CellConfig {
  int cell_id = 0;
  int capacity_prb = 100;
  int chunk_prb = 10;  // must divide capacity_prb
  int num_slices = 3;
  int horizon_steps = 1000;
  double beta = 2.0;    // over-provisioning slope
  double lambda = 1.0;  // under-provisioning slope
  double kappa = 0.5;   // congestion penalty shared by all slices
  double channel_drift_prob = 0.1;
  std::vector<TrafficProfile> slices;

  int num_actions() const { return capacity_prb / chunk_prb + 1; }

  // Throws ConfigError on any invariant violation.
  void validate() const;

  bool operator==(const CellConfig&) const = default;
};

// Normalized partial view handed to one agent; every component in [0,1].
using Observation = std::vector<double>;

struct KpiRecord {
  long step = 0;
  int cell_id = 0;
  int slice_id = 0;
  int demand_prb = 0;     // effective demand the allocation was scored against
  int requested_prb = 0;  // what the agent asked for
  int alloc_prb = 0;      // what arbitration granted
  int gap_prb = 0;        // alloc - demand, signed
  int abs_gap_prb = 0;
  double reward = 0.0;
  int cqi = 0;
  double epsilon = 0.0;  // exploration rate in force when the action was taken
  bool congestion = false;
};

// Conflict resolution against cell capacity. Identity when the joint request
// fits; otherwise proportional scaling floored to chunk multiples, with the
// remainder handed out chunk-wise in ascending slice-id order to slices still
// below their request. Guarantees sum <= capacity and result[i] <= request[i].
std::vector<int> arbitrate(const std::vector<int>& requests, int capacity_prb,
                           int chunk_prb);

// Joint reward: matching demand exactly scores 1; over-provisioning decays at
// beta/C per surplus PRB; deficits score -lambda times the missing fraction;
// a congested joint request costs every slice an extra kappa.
std::vector<double> compute_rewards(const std::vector<int>& demands,
                                    const std::vector<int>& allocations,
                                    const std::vector<int>& requests,
                                    const CellConfig& config);

struct StepResult {
  std::vector<Observation> observations;
  std::vector<double> rewards;
  std::vector<KpiRecord> kpi;
  bool done = false;
};

// Per-cell slicing environment with proactive-allocation semantics: the
// action taken at step t is scored against the demand realized at t+1.
// Single-owner; distinct instances are independent.
class CellEnv {
 public:
  explicit CellEnv(CellConfig config);

  // Deterministic in (config, seed). Returns the initial observations.
  std::vector<Observation> reset(std::uint64_t seed);

  // One action index per slice, each in [0, capacity/chunk].
  StepResult step(const std::vector<int>& joint_action);

  Observation observe(int slice_id) const;

  // Effective PRB demand at t+1; this is what the next step's reward will be
  // scored against. Used by the cheating Oracle baseline.
  int peek_next_demand(int slice_id) const;

  const CellConfig& config() const { return cfg_; }
  long t() const { return t_; }
  int demand(int slice_id) const { return eff_demand_.at(slice_id); }
  int prev_alloc(int slice_id) const { return prev_alloc_.at(slice_id); }
  int cqi(int slice_id) const { return channels_.at(slice_id).cqi; }

 private:
  void draw_next();

  CellConfig cfg_;
  long t_ = 0;
  std::vector<int> eff_demand_;          // d(t)
  std::vector<ChannelState> channels_;   // at t
  std::vector<int> prev_alloc_;          // a(t-1)
  std::vector<int> next_eff_demand_;     // d(t+1), pre-drawn
  std::vector<ChannelState> next_channels_;
  std::vector<RngStream> demand_rng_;
  std::vector<RngStream> channel_rng_;
};

}  // namespace fedslice
