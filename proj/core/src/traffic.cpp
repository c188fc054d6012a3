#include "fedslice/traffic.hpp"

#include <algorithm>
#include <cmath>

namespace fedslice {

double demand_at(const TrafficProfile& profile, long t, RngStream& rng) {
  double base = profile.mean_prb;
  switch (profile.shape) {
    case TrafficShape::Sinusoid: {
      const double angle =
          2.0 * M_PI * double(t + profile.phase_steps) / double(profile.period_steps);
      base += profile.amplitude_prb * std::sin(angle);
      break;
    }
    case TrafficShape::SquareWave: {
      const long pos = (t + profile.phase_steps) % profile.period_steps;
      base += (2 * pos < profile.period_steps) ? profile.amplitude_prb
                                               : -profile.amplitude_prb;
      break;
    }
    case TrafficShape::BurstPoisson: {
      if (profile.burst_rate > 0.0) {
        base += double(poisson(rng, profile.burst_rate)) * profile.burst_size_prb;
      }
      break;
    }
  }
  if (profile.noise_std_prb > 0.0) {
    base += normal(rng, 0.0, profile.noise_std_prb);
  }
  return std::max(base, 0.0);
}

ChannelState cqi_step(ChannelState state, RngStream& rng) {
  if (state.drift_prob > 0.0 && uniform_real(rng) < state.drift_prob) {
    const int direction = uniform_real(rng) < 0.5 ? -1 : +1;
    state.cqi = std::clamp(state.cqi + direction, 1, 15);
  }
  return state;
}

double spectral_efficiency(int cqi) {
  // 0.3 + 0.7*(cqi-1)/14 reduces to the exact rational (cqi+5)/20.
  return double(cqi + 5) / 20.0;
}

int effective_prb_demand(double base_prb, int cqi, int capacity_prb) {
  const int prbs = int(std::ceil(base_prb * 20.0 / double(cqi + 5)));
  return std::clamp(prbs, 0, capacity_prb);
}

}  // namespace fedslice
