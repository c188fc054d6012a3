#include "fedslice/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedslice {

void CellConfig::validate() const {
  if (cell_id < 0 || cell_id > 0xFFFE) {
    throw ConfigError("cell_id must be in [0, 65534], got " + std::to_string(cell_id));
  }
  if (capacity_prb <= 0) {
    throw ConfigError("capacity_prb must be > 0, got " + std::to_string(capacity_prb));
  }
  if (chunk_prb <= 0 || capacity_prb % chunk_prb != 0) {
    throw ConfigError("chunk_prb must divide capacity_prb (" +
                      std::to_string(chunk_prb) + " vs " +
                      std::to_string(capacity_prb) + ")");
  }
  if (num_slices < 1) {
    throw ConfigError("num_slices must be >= 1, got " + std::to_string(num_slices));
  }
  if (horizon_steps < 1) {
    throw ConfigError("horizon_steps must be >= 1, got " + std::to_string(horizon_steps));
  }
  if (beta < 0.0 || lambda < 0.0 || kappa < 0.0) {
    throw ConfigError("reward weights beta, lambda, kappa must be >= 0");
  }
  if (channel_drift_prob < 0.0 || channel_drift_prob > 1.0) {
    throw ConfigError("channel_drift_prob must be in [0, 1]");
  }
  if (int(slices.size()) != num_slices) {
    throw ConfigError("expected " + std::to_string(num_slices) +
                      " slice profiles, got " + std::to_string(slices.size()));
  }
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const auto& p = slices[i];
    const std::string at = "slices[" + std::to_string(i) + "].";
    if (p.mean_prb < 0.0 || p.amplitude_prb < 0.0 || p.noise_std_prb < 0.0 ||
        p.burst_rate < 0.0 || p.burst_size_prb < 0.0) {
      throw ConfigError(at + "rates and sizes must be >= 0");
    }
    if (p.period_steps < 1) {
      throw ConfigError(at + "period_steps must be >= 1");
    }
    if (p.phase_steps < 0) {
      throw ConfigError(at + "phase_steps must be >= 0");
    }
    if (p.mean_prb + p.amplitude_prb > double(capacity_prb)) {
      throw ConfigError(at + "mean_prb + amplitude_prb exceeds cell capacity");
    }
  }
}

std::vector<int> arbitrate(const std::vector<int>& requests, int capacity_prb,
                           int chunk_prb) {
  long total = 0;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const int r = requests[i];
    if (r < 0 || r > capacity_prb || r % chunk_prb != 0) {
      throw std::invalid_argument("request " + std::to_string(i) +
                                  " is not a chunk multiple in [0, capacity]");
    }
    total += r;
  }
  if (total <= capacity_prb) {
    return requests;
  }

  std::vector<int> granted(requests.size());
  long granted_sum = 0;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const double scaled = double(requests[i]) * double(capacity_prb) / double(total);
    granted[i] = int(std::floor(scaled / chunk_prb)) * chunk_prb;
    granted_sum += granted[i];
  }

  // Leftover chunks go round-robin in ascending slice id, never inflating a
  // slice past its original request.
  long leftover = capacity_prb - granted_sum;
  while (leftover >= chunk_prb) {
    bool placed = false;
    for (std::size_t i = 0; i < granted.size() && leftover >= chunk_prb; ++i) {
      if (granted[i] + chunk_prb <= requests[i]) {
        granted[i] += chunk_prb;
        leftover -= chunk_prb;
        placed = true;
      }
    }
    if (!placed) break;
  }
  return granted;
}

std::vector<double> compute_rewards(const std::vector<int>& demands,
                                    const std::vector<int>& allocations,
                                    const std::vector<int>& requests,
                                    const CellConfig& config) {
  if (demands.size() != allocations.size() || demands.size() != requests.size()) {
    throw std::invalid_argument("compute_rewards: list lengths differ");
  }
  const long requested_total = std::accumulate(requests.begin(), requests.end(), 0L);
  const bool congestion = requested_total > config.capacity_prb;

  std::vector<double> rewards(demands.size());
  for (std::size_t i = 0; i < demands.size(); ++i) {
    const int d = demands[i];
    const int a = allocations[i];
    double r;
    if (a >= d) {
      r = 1.0 - config.beta * double(a - d) / double(config.capacity_prb);
    } else {
      r = -config.lambda * double(d - a) / double(std::max(d, 1));
    }
    if (congestion) r -= config.kappa;
    rewards[i] = r;
  }
  return rewards;
}

CellEnv::CellEnv(CellConfig config) : cfg_(std::move(config)) {
  cfg_.validate();
  const int n = cfg_.num_slices;
  eff_demand_.resize(n);
  channels_.resize(n);
  prev_alloc_.resize(n);
  next_eff_demand_.resize(n);
  next_channels_.resize(n);
  demand_rng_.resize(n);
  channel_rng_.resize(n);
}

std::vector<Observation> CellEnv::reset(std::uint64_t seed) {
  const int n = cfg_.num_slices;
  t_ = 0;
  const int equal_split =
      (cfg_.capacity_prb / n) / cfg_.chunk_prb * cfg_.chunk_prb;
  for (int i = 0; i < n; ++i) {
    demand_rng_[i].seed(derive_seed(seed, std::uint32_t(cfg_.cell_id),
                                    std::uint32_t(i), StreamTag::Demand));
    channel_rng_[i].seed(derive_seed(seed, std::uint32_t(cfg_.cell_id),
                                     std::uint32_t(i), StreamTag::Channel));
    prev_alloc_[i] = equal_split;
    channels_[i] = ChannelState{8, cfg_.channel_drift_prob};
    const double base = demand_at(cfg_.slices[i], 0, demand_rng_[i]);
    eff_demand_[i] =
        effective_prb_demand(base, channels_[i].cqi, cfg_.capacity_prb);
  }
  draw_next();

  std::vector<Observation> obs(n);
  for (int i = 0; i < n; ++i) obs[i] = observe(i);
  return obs;
}

void CellEnv::draw_next() {
  for (int i = 0; i < cfg_.num_slices; ++i) {
    next_channels_[i] = cqi_step(channels_[i], channel_rng_[i]);
    const double base = demand_at(cfg_.slices[i], t_ + 1, demand_rng_[i]);
    next_eff_demand_[i] =
        effective_prb_demand(base, next_channels_[i].cqi, cfg_.capacity_prb);
  }
}

Observation CellEnv::observe(int slice_id) const {
  if (slice_id < 0 || slice_id >= cfg_.num_slices) {
    throw std::out_of_range("observe: unknown slice " + std::to_string(slice_id));
  }
  const double C = double(cfg_.capacity_prb);
  long others = 0;
  for (int j = 0; j < cfg_.num_slices; ++j) {
    if (j != slice_id) others += prev_alloc_[j];
  }
  const auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return Observation{
      clamp01(double(eff_demand_[slice_id]) / C),
      clamp01(double(prev_alloc_[slice_id]) / C),
      clamp01((double(prev_alloc_[slice_id]) - double(eff_demand_[slice_id]) + C) /
              (2.0 * C)),
      clamp01(double(channels_[slice_id].cqi - 1) / 14.0),
      clamp01((C - double(others)) / C),
  };
}

int CellEnv::peek_next_demand(int slice_id) const {
  if (slice_id < 0 || slice_id >= cfg_.num_slices) {
    throw std::out_of_range("peek_next_demand: unknown slice " +
                            std::to_string(slice_id));
  }
  return next_eff_demand_[slice_id];
}

StepResult CellEnv::step(const std::vector<int>& joint_action) {
  const int n = cfg_.num_slices;
  if (int(joint_action.size()) != n) {
    throw std::invalid_argument("step: expected one action per slice");
  }
  std::vector<int> requests(n);
  for (int i = 0; i < n; ++i) {
    const int k = joint_action[i];
    if (k < 0 || k >= cfg_.num_actions()) {
      throw std::invalid_argument("step: action index " + std::to_string(k) +
                                  " out of range for slice " + std::to_string(i));
    }
    requests[i] = k * cfg_.chunk_prb;
  }
  const std::vector<int> allocations = arbitrate(requests, cfg_.capacity_prb, cfg_.chunk_prb);
  const long requested_total = std::accumulate(requests.begin(), requests.end(), 0L);
  const bool congestion = requested_total > cfg_.capacity_prb;

  const long decision_step = t_;

  // Advance to t+1: the pre-drawn next state becomes current, the granted
  // allocation is scored against the demand it was meant to anticipate.
  t_ += 1;
  channels_ = next_channels_;
  eff_demand_ = next_eff_demand_;
  const std::vector<double> rewards =
      compute_rewards(eff_demand_, allocations, requests, cfg_);
  prev_alloc_ = allocations;
  draw_next();

  StepResult result;
  result.rewards = rewards;
  result.done = t_ >= cfg_.horizon_steps;
  result.observations.resize(n);
  result.kpi.resize(n);
  for (int i = 0; i < n; ++i) {
    result.observations[i] = observe(i);
    KpiRecord& rec = result.kpi[i];
    rec.step = decision_step;
    rec.cell_id = cfg_.cell_id;
    rec.slice_id = i;
    rec.demand_prb = eff_demand_[i];
    rec.requested_prb = requests[i];
    rec.alloc_prb = allocations[i];
    rec.gap_prb = allocations[i] - eff_demand_[i];
    rec.abs_gap_prb = std::abs(rec.gap_prb);
    rec.reward = rewards[i];
    rec.cqi = channels_[i].cqi;
    rec.congestion = congestion;
  }
  return result;
}

}  // namespace fedslice
