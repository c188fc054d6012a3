// Microbenchmarks for the hot paths: network forward/backward/update (the
// bulk of training time) and the per-step environment machinery.

#include <benchmark/benchmark.h>

#include "fedslice/agent.hpp"
#include "fedslice/env.hpp"
#include "fedslice/harness.hpp"
#include "fedslice/neural.hpp"
#include "fedslice/rng.hpp"

using namespace fedslice;

namespace {

std::vector<double> random_obs(RngStream& rng, int n) {
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  for (double& v : x) v = uniform_real(rng);
  return x;
}

void BM_forward(benchmark::State& state) {
  const MlpParams p = init_params({5, 64, 64, 11}, 1);
  RngStream rng(2);
  const auto x = random_obs(rng, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(p, x));
  }
}
BENCHMARK(BM_forward);

void BM_loss_and_gradients_batch64(benchmark::State& state) {
  const MlpParams p = init_params({5, 64, 64, 11}, 1);
  RngStream rng(2);
  std::vector<std::vector<double>> xs;
  std::vector<int> actions;
  std::vector<double> targets;
  for (int b = 0; b < 64; ++b) {
    xs.push_back(random_obs(rng, 5));
    actions.push_back(uniform_int(rng, 11));
    targets.push_back(uniform_real(rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_gradients(p, xs, actions, targets));
  }
}
BENCHMARK(BM_loss_and_gradients_batch64);

void BM_optimizer_step(benchmark::State& state) {
  MlpParams p = init_params({5, 64, 64, 11}, 1);
  const MlpParams g = init_params({5, 64, 64, 11}, 2);
  OptState opt = make_opt_state(p);
  for (auto _ : state) {
    optimizer_step(p, g, opt);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_optimizer_step);

void BM_agent_train_iteration(benchmark::State& state) {
  AgentConfig cfg;
  cfg.warmup_transitions = 64;
  cfg.train_every = 1;
  Agent agent(cfg, 0, 0, 5, 11, 3);
  RngStream rng(4);
  for (int i = 0; i < 256; ++i) {
    agent.record({random_obs(rng, 5), uniform_int(rng, 11), uniform_real(rng),
                  random_obs(rng, 5), false});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(agent.maybe_train());
  }
}
BENCHMARK(BM_agent_train_iteration);

void BM_env_step(benchmark::State& state) {
  CellEnv env(default_cell_config(0));
  env.reset(1);
  RngStream rng(5);
  std::vector<int> joint(3);
  for (auto _ : state) {
    for (int& a : joint) a = uniform_int(rng, 11);
    benchmark::DoNotOptimize(env.step(joint));
  }
}
BENCHMARK(BM_env_step);

void BM_arbitrate_conflict(benchmark::State& state) {
  const std::vector<int> requests{100, 100, 100, 50, 30};
  for (auto _ : state) {
    benchmark::DoNotOptimize(arbitrate(requests, 100, 10));
  }
}
BENCHMARK(BM_arbitrate_conflict);

}  // namespace

BENCHMARK_MAIN();
