#pragma once

#include "fedslice/rng.hpp"

namespace fedslice {

enum class TrafficShape { Sinusoid, SquareWave, BurstPoisson };

// Parametric per-slice offered load over discrete time, in PRBs.
struct TrafficProfile {
  TrafficShape shape = TrafficShape::Sinusoid;
  double mean_prb = 30.0;
  double amplitude_prb = 0.0;
  int period_steps = 250;
  int phase_steps = 0;
  double noise_std_prb = 0.0;
  double burst_rate = 0.0;      // expected bursts/step, BurstPoisson only
  double burst_size_prb = 0.0;  // PRBs added per burst

  bool operator==(const TrafficProfile&) const = default;
};

// Base offered load b(t) >= 0. Pure in (profile, t) when noise_std_prb == 0
// and no Poisson bursts are drawn; the rng is untouched in that case.
double demand_at(const TrafficProfile& profile, long t, RngStream& rng);

// Bounded random walk standing in for radio channel dynamics.
struct ChannelState {
  int cqi = 8;  // always in [1, 15]
  double drift_prob = 0.1;

  bool operator==(const ChannelState&) const = default;
};

ChannelState cqi_step(ChannelState state, RngStream& rng);

// Linear spectral efficiency from 0.3 (cqi 1) to 1.0 (cqi 15).
double spectral_efficiency(int cqi);

// PRBs consumed to carry base_prb worth of traffic at the given channel
// quality, ceiled to whole PRBs and clamped to [0, capacity_prb].
int effective_prb_demand(double base_prb, int cqi, int capacity_prb);

}  // namespace fedslice
