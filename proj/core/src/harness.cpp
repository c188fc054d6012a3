#include "fedslice/harness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace fedslice {

void ExperimentConfig::validate() const {
  if (cells.empty()) throw ConfigError("cells must contain at least one cell");
  std::set<int> ids;
  for (const CellConfig& cell : cells) {
    cell.validate();
    if (!ids.insert(cell.cell_id).second) {
      throw ConfigError("cells: duplicate cell_id " + std::to_string(cell.cell_id));
    }
  }
  agent.validate();
  if (train_steps < 0) throw ConfigError("train_steps must be >= 0");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (eval_horizon_steps < 1) throw ConfigError("eval_horizon_steps must be >= 1");
  if (federation.period_steps < 1) {
    throw ConfigError("federation.period_steps must be >= 1");
  }
  if (federation.enabled) {
    for (const CellConfig& cell : cells) {
      if (cell.num_slices != cells.front().num_slices) {
        throw ConfigError("federation requires equal num_slices across cells");
      }
      if (cell.num_actions() != cells.front().num_actions()) {
        throw ConfigError("federation requires equal action spaces across cells");
      }
    }
  }
}

CellConfig default_cell_config(int cell_id) {
  // Base loads are sized so joint effective demand stays under capacity even
  // when the channel degrades: low CQI can triple the PRB cost of a slice.
  TrafficProfile wave;
  wave.shape = TrafficShape::Sinusoid;
  wave.mean_prb = 7.0;
  wave.amplitude_prb = 5.0;
  wave.period_steps = 250;
  wave.noise_std_prb = 0.4;

  TrafficProfile duty;
  duty.shape = TrafficShape::SquareWave;
  duty.mean_prb = 5.0;
  duty.amplitude_prb = 3.0;
  duty.period_steps = 200;
  duty.noise_std_prb = 0.4;

  TrafficProfile bursty;
  bursty.shape = TrafficShape::BurstPoisson;
  bursty.mean_prb = 3.0;
  bursty.burst_rate = 0.04;
  bursty.burst_size_prb = 8.0;
  bursty.noise_std_prb = 0.4;

  CellConfig cfg;
  cfg.cell_id = cell_id;
  cfg.slices = {wave, duty, bursty};
  for (TrafficProfile& p : cfg.slices) {
    p.phase_steps += cell_id * p.period_steps / 3;
    p.mean_prb *= 1.0 + 0.2 * cell_id;
  }
  return cfg;
}

ExperimentConfig default_experiment_config(int num_cells) {
  if (num_cells < 1) throw ConfigError("num_cells must be >= 1");
  ExperimentConfig cfg;
  cfg.cells.reserve(std::size_t(num_cells));
  for (int c = 0; c < num_cells; ++c) cfg.cells.push_back(default_cell_config(c));
  return cfg;
}

TrainResult run_training(const ExperimentConfig& config) {
  config.validate();
  const std::size_t num_cells = config.cells.size();

  TrainResult result;
  std::vector<CellEnv> envs;
  std::vector<std::vector<Observation>> obs(num_cells);
  std::vector<long> episode(num_cells, 0);
  std::vector<std::size_t> agent_offset(num_cells, 0);

  envs.reserve(num_cells);
  std::size_t total_agents = 0;
  for (const CellConfig& cell : config.cells) total_agents += std::size_t(cell.num_slices);
  result.agents.reserve(total_agents);  // pointers into this vector must stay valid

  for (std::size_t c = 0; c < num_cells; ++c) {
    const CellConfig& cell = config.cells[c];
    envs.emplace_back(cell);
    obs[c] = envs[c].reset(derive_seed(config.master_seed, std::uint32_t(cell.cell_id),
                                       0, StreamTag::EnvEpisode, 0));
    agent_offset[c] = result.agents.size();
    const int obs_dim = int(obs[c].front().size());
    for (int s = 0; s < cell.num_slices; ++s) {
      result.agents.emplace_back(config.agent, cell.cell_id, s, obs_dim,
                                 cell.num_actions(), config.master_seed);
    }
  }

  std::vector<FederationGroup> groups;
  if (config.federation.enabled) {
    const int num_slices = config.cells.front().num_slices;
    for (int s = 0; s < num_slices; ++s) {
      FederationGroup group;
      group.slice_id = s;
      group.period_steps = config.federation.period_steps;
      for (const CellConfig& cell : config.cells) {
        group.members.emplace_back(cell.cell_id, s);
      }
      groups.push_back(std::move(group));
    }
  }

  for (long step = 0; step < config.train_steps; ++step) {
    for (std::size_t c = 0; c < num_cells; ++c) {
      CellEnv& env = envs[c];
      const std::size_t num_slices = std::size_t(env.config().num_slices);
      Agent* cell_agents = result.agents.data() + agent_offset[c];

      std::vector<int> joint(num_slices);
      std::vector<double> eps(num_slices);
      for (std::size_t s = 0; s < num_slices; ++s) {
        eps[s] = cell_agents[s].current_epsilon();
        joint[s] = cell_agents[s].act(obs[c][s]);
      }

      StepResult res;
      try {
        res = env.step(joint);
        for (std::size_t s = 0; s < num_slices; ++s) {
          cell_agents[s].record({obs[c][s], joint[s], res.rewards[s],
                                 res.observations[s], false});
          cell_agents[s].maybe_train();
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("training failed at step " + std::to_string(step) +
                                 ", cell " + std::to_string(env.config().cell_id) +
                                 ": " + e.what());
      }

      for (std::size_t s = 0; s < num_slices; ++s) {
        res.kpi[s].epsilon = eps[s];
        result.kpi.push_back(res.kpi[s]);
      }
      obs[c] = std::move(res.observations);
      if (res.done) {
        ++episode[c];
        obs[c] = envs[c].reset(derive_seed(config.master_seed,
                                           std::uint32_t(env.config().cell_id), 0,
                                           StreamTag::EnvEpisode,
                                           std::uint64_t(episode[c])));
      }
    }

    if (!groups.empty() && (step + 1) % config.federation.period_steps == 0) {
      for (FederationGroup& group : groups) {
        std::vector<Agent*> members;
        members.reserve(group.members.size());
        for (const auto& [cell_id, slice_id] : group.members) {
          for (Agent& agent : result.agents) {
            if (agent.cell_id() == cell_id && agent.slice_id() == slice_id) {
              members.push_back(&agent);
              break;
            }
          }
        }
        ModelSnapshot aggregate =
            run_round(group, members, config.federation.weight_rule);
        result.rounds.push_back({group.round, std::move(aggregate)});
      }
    }
  }
  return result;
}

GreedyNetPolicy::GreedyNetPolicy(std::span<const Agent> agents) : agents_(agents) {}

const Agent* GreedyNetPolicy::find(int cell_id, int slice_id) const {
  for (const Agent& agent : agents_) {
    if (agent.cell_id() == cell_id && agent.slice_id() == slice_id) return &agent;
  }
  return nullptr;
}

int GreedyNetPolicy::act(const CellEnv& env, int slice_id, const Observation& obs) {
  const Agent* agent = find(env.config().cell_id, slice_id);
  if (agent == nullptr) {
    throw std::invalid_argument("no trained agent for cell " +
                                std::to_string(env.config().cell_id) + ", slice " +
                                std::to_string(slice_id));
  }
  return agent->act_greedy(obs);
}

namespace {

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t master_seed)
      : rng_(derive_seed(master_seed, 0xFFFF, 0xFFFF, StreamTag::Eval)) {}

  int act(const CellEnv& env, int, const Observation&) override {
    return uniform_int(rng_, env.config().num_actions());
  }

 private:
  RngStream rng_;
};

class StaticEqualPolicy final : public Policy {
 public:
  int act(const CellEnv& env, int, const Observation&) override {
    const CellConfig& cfg = env.config();
    return cfg.capacity_prb / cfg.num_slices / cfg.chunk_prb;
  }
};

class OraclePolicy final : public Policy {
 public:
  int act(const CellEnv& env, int slice_id, const Observation&) override {
    const int chunk = env.config().chunk_prb;
    return (env.peek_next_demand(slice_id) + chunk - 1) / chunk;
  }
};

}  // namespace

std::unique_ptr<Policy> baseline_policy(BaselineKind kind, std::uint64_t master_seed) {
  switch (kind) {
    case BaselineKind::Random:
      return std::make_unique<RandomPolicy>(master_seed);
    case BaselineKind::StaticEqual:
      return std::make_unique<StaticEqualPolicy>();
    case BaselineKind::Oracle:
      return std::make_unique<OraclePolicy>();
  }
  throw std::invalid_argument("unknown baseline kind");
}

EvalReport evaluate_policy(Policy& policy, const ExperimentConfig& config) {
  config.validate();

  EvalReport report;
  report.episodes = config.eval_episodes;
  report.steps_per_episode = config.eval_horizon_steps;

  for (const CellConfig& cell_in : config.cells) {
    CellConfig cell = cell_in;
    cell.horizon_steps = int(config.eval_horizon_steps);
    const std::size_t num_slices = std::size_t(cell.num_slices);

    struct Accum {
      double reward = 0, gap = 0, abs_gap = 0, alloc = 0;
      long over = 0, under = 0, n = 0;
    };
    std::vector<Accum> acc(num_slices);

    CellEnv env(cell);
    for (int ep = 0; ep < config.eval_episodes; ++ep) {
      std::vector<Observation> obs =
          env.reset(derive_seed(config.master_seed, std::uint32_t(cell.cell_id), 0,
                                StreamTag::Eval, std::uint64_t(ep)));
      for (long t = 0; t < config.eval_horizon_steps; ++t) {
        std::vector<int> joint(num_slices);
        for (std::size_t s = 0; s < num_slices; ++s) {
          joint[s] = policy.act(env, int(s), obs[s]);
        }
        StepResult res = env.step(joint);
        for (std::size_t s = 0; s < num_slices; ++s) {
          const KpiRecord& k = res.kpi[s];
          Accum& a = acc[s];
          a.reward += k.reward;
          a.gap += k.gap_prb;
          a.abs_gap += k.abs_gap_prb;
          a.alloc += k.alloc_prb;
          if (k.gap_prb > 0) ++a.over;
          if (k.gap_prb < 0) ++a.under;
          ++a.n;
        }
        obs = std::move(res.observations);
        if (res.done) break;  // fires exactly at the eval horizon
      }
    }

    std::vector<double> mean_allocs(num_slices);
    for (std::size_t s = 0; s < num_slices; ++s) {
      const Accum& a = acc[s];
      const double n = double(a.n);
      SliceStats st;
      st.cell_id = cell.cell_id;
      st.slice_id = int(s);
      st.mean_reward = a.reward / n;
      st.mean_gap_prb = a.gap / n;
      st.mean_abs_gap_prb = a.abs_gap / n;
      st.over_provision_ratio = double(a.over) / n;
      st.sla_violation_ratio = double(a.under) / n;
      st.mean_alloc_prb = a.alloc / n;
      mean_allocs[s] = st.mean_alloc_prb;
      report.slices.push_back(st);
    }

    CellStats cs;
    cs.cell_id = cell.cell_id;
    const bool all_zero =
        std::all_of(mean_allocs.begin(), mean_allocs.end(),
                    [](double v) { return v == 0.0; });
    cs.jain_fairness = all_zero ? 1.0 : jain_fairness(mean_allocs);
    report.cells.push_back(cs);
  }

  const double n = double(report.slices.size());
  for (const SliceStats& st : report.slices) {
    report.mean_reward += st.mean_reward / n;
    report.mean_gap_prb += st.mean_gap_prb / n;
    report.mean_abs_gap_prb += st.mean_abs_gap_prb / n;
    report.over_provision_ratio += st.over_provision_ratio / n;
    report.sla_violation_ratio += st.sla_violation_ratio / n;
    report.mean_alloc_prb += st.mean_alloc_prb / n;
  }
  return report;
}

double jain_fairness(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("jain_fairness: empty input");
  double sum = 0.0, sum_sq = 0.0;
  for (double v : values) {
    if (v < 0.0) throw std::invalid_argument("jain_fairness: negative value");
    sum += v;
    sum_sq += v * v;
  }
  if (sum_sq == 0.0) throw std::invalid_argument("jain_fairness: all-zero input");
  return sum * sum / (double(values.size()) * sum_sq);
}

namespace {

void check_mdp(const TabularMdp& mdp) {
  if (mdp.num_states < 1 || mdp.num_actions < 1) {
    throw std::invalid_argument("tabular MDP needs at least one state and action");
  }
  const std::size_t n = std::size_t(mdp.num_states) * std::size_t(mdp.num_actions);
  if (mdp.next_state.size() != n || mdp.reward.size() != n) {
    throw std::invalid_argument("tabular MDP tables must be num_states*num_actions");
  }
  for (int s : mdp.next_state) {
    if (s < 0 || s >= mdp.num_states) {
      throw std::invalid_argument("tabular MDP next_state out of range");
    }
  }
  for (double r : mdp.reward) {
    if (!std::isfinite(r)) throw std::invalid_argument("tabular MDP reward not finite");
  }
}

}  // namespace

std::vector<double> value_iteration_oracle(const TabularMdp& mdp, double gamma,
                                           double tolerance) {
  check_mdp(mdp);
  if (gamma < 0.0 || gamma >= 1.0) {
    throw std::invalid_argument("value iteration needs gamma in [0, 1)");
  }
  if (tolerance <= 0.0) throw std::invalid_argument("tolerance must be > 0");

  const int A = mdp.num_actions;
  std::vector<double> q(mdp.next_state.size(), 0.0);
  std::vector<double> next_q(q.size());
  for (long iter = 0; iter < 10'000'000; ++iter) {
    double delta = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) {
      for (int a = 0; a < A; ++a) {
        const std::size_t idx = std::size_t(s) * std::size_t(A) + std::size_t(a);
        const int ns = mdp.next_state[idx];
        double best = q[std::size_t(ns) * std::size_t(A)];
        for (int a2 = 1; a2 < A; ++a2) {
          best = std::max(best, q[std::size_t(ns) * std::size_t(A) + std::size_t(a2)]);
        }
        next_q[idx] = mdp.reward[idx] + gamma * best;
        delta = std::max(delta, std::abs(next_q[idx] - q[idx]));
      }
    }
    q.swap(next_q);
    if (delta < tolerance) return q;
  }
  throw std::runtime_error("value iteration did not converge");
}

TabularMdp toy_two_state_mdp() {
  TabularMdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 2;
  // state 0: action 0 stays (r=0), action 1 moves to 1 (r=1)
  // state 1: action 0 stays (r=2), action 1 moves to 0 (r=0)
  mdp.next_state = {0, 1, 1, 0};
  mdp.reward = {0.0, 1.0, 2.0, 0.0};
  return mdp;
}

Agent train_agent_on_mdp(const TabularMdp& mdp, const AgentConfig& config,
                         long steps, std::uint64_t seed) {
  check_mdp(mdp);
  Agent agent(config, 0, 0, mdp.num_states, mdp.num_actions, seed);

  const auto one_hot = [&](int s) {
    Observation o(std::size_t(mdp.num_states), 0.0);
    o[std::size_t(s)] = 1.0;
    return o;
  };

  int state = 0;
  Observation obs = one_hot(state);
  for (long t = 0; t < steps; ++t) {
    const int a = agent.act(obs);
    const std::size_t idx =
        std::size_t(state) * std::size_t(mdp.num_actions) + std::size_t(a);
    const int next = mdp.next_state[idx];
    Observation next_obs = one_hot(next);
    agent.record({obs, a, mdp.reward[idx], next_obs, false});
    agent.maybe_train();
    state = next;
    obs = std::move(next_obs);
  }
  return agent;
}

}  // namespace fedslice
