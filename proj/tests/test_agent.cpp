#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <set>

#include "fedslice/agent.hpp"

using namespace fedslice;

namespace {

AgentConfig tiny_config() {
  AgentConfig cfg;
  cfg.hidden_dims = {8};
  cfg.batch_size = 4;
  cfg.warmup_transitions = 4;
  cfg.train_every = 1;
  cfg.target_sync_period = 3;
  cfg.replay_capacity = 64;
  return cfg;
}

Transition make_transition(int a, double r) {
  Transition t;
  t.s = {0.1, 0.2, 0.3, 0.4, 0.5};
  t.a = a;
  t.r = r;
  t.s_next = {0.5, 0.4, 0.3, 0.2, 0.1};
  return t;
}

}  // namespace

TEST_CASE("epsilon schedule interpolates linearly and then holds") {
  const EpsilonSchedule s{1.0, 0.05, 20000};
  CHECK(epsilon_at(s, 0) == 1.0);
  CHECK(epsilon_at(s, 10000) == doctest::Approx(0.525));
  CHECK(epsilon_at(s, 20000) == 0.05);
  CHECK(epsilon_at(s, 1000000) == 0.05);
  CHECK_THROWS_AS(epsilon_at(s, -1), std::invalid_argument);
}

TEST_CASE("argmax breaks ties toward the smallest index") {
  CHECK(argmax_index(std::array{1.0, 3.0, 2.0}) == 1);
  CHECK(argmax_index(std::array{2.0, 2.0, 2.0}) == 0);
  CHECK(argmax_index(std::array{-5.0}) == 0);
  CHECK(argmax_index(std::array{1.0, 2.0, 2.0}) == 1);
  CHECK_THROWS_AS(argmax_index(std::span<const double>{}), std::invalid_argument);
}

TEST_CASE("greedy selection draws nothing from the stream") {
  RngStream used(7), twin(7);
  const std::array q{0.2, 0.9, 0.1};
  CHECK(select_action(q, 0.0, used) == 1);
  CHECK(select_action(q, -1.0, used) == 1);
  // The stream state is untouched, so the next draws agree with the twin.
  CHECK(uniform_real(used) == uniform_real(twin));
}

TEST_CASE("full exploration is uniform over the action set") {
  RngStream rng(123);
  const std::array q{5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  std::array<int, 11> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[std::size_t(select_action(q, 1.0, rng))]++;
  // Each bin expects n/11 with sigma ~91; allow five sigmas.
  for (int c : counts) {
    CHECK(c > 9091 - 500);
    CHECK(c < 9091 + 500);
  }
}

TEST_CASE("intermediate epsilon mixes argmax with uniform exploration") {
  RngStream rng(9);
  const std::array q{0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  int argmax_picks = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (select_action(q, 0.5, rng) == 3) ++argmax_picks;
  }
  // P(argmax) = 0.5 + 0.5/11 ~ 0.5455; five sigmas is ~800.
  CHECK(argmax_picks > 54545 - 800);
  CHECK(argmax_picks < 54545 + 800);
}

TEST_CASE("replay buffer evicts oldest first at capacity") {
  ReplayBuffer buf(2);
  buf.push(make_transition(1, 0.0));
  buf.push(make_transition(2, 0.0));
  buf.push(make_transition(3, 0.0));
  CHECK(buf.size() == 2);
  CHECK(buf.inserted() == 3);
  std::set<int> kept{buf.at(0).a, buf.at(1).a};
  CHECK(kept == std::set<int>{2, 3});
  CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
}

TEST_CASE("replay sampling is uniform without replacement") {
  ReplayBuffer buf(100);
  for (int i = 0; i < 50; ++i) buf.push(make_transition(i, 0.0));

  RngStream rng(4);
  SUBCASE("indices are distinct") {
    for (int trial = 0; trial < 200; ++trial) {
      const auto batch = sample(buf, 10, rng);
      std::set<int> seen;
      for (const auto& t : batch) seen.insert(t.a);
      REQUIRE(seen.size() == 10);
    }
  }
  SUBCASE("a full-size batch covers the whole buffer") {
    const auto batch = sample(buf, 50, rng);
    std::set<int> seen;
    for (const auto& t : batch) seen.insert(t.a);
    CHECK(seen.size() == 50);
  }
  SUBCASE("identical stream states give identical batches") {
    RngStream a(11), b(11);
    const auto ba = sample(buf, 10, a);
    const auto bb = sample(buf, 10, b);
    for (std::size_t i = 0; i < 10; ++i) CHECK(ba[i].a == bb[i].a);
  }
  SUBCASE("batch larger than the buffer is rejected") {
    CHECK_THROWS_AS(sample(buf, 51, rng), std::invalid_argument);
  }
}

TEST_CASE("the online network picks and the target network evaluates") {
  // Bias-only nets so the next-state values are known constants.
  MlpParams online = MlpParams::zeros({5, 3});
  online.biases[0] = {0.1, 0.9, 0.2};  // argmax -> action 1
  MlpParams target = MlpParams::zeros({5, 3});
  target.biases[0] = {0.9, 0.2, 0.1};  // its own max would be action 0

  std::vector<Transition> batch{make_transition(0, 0.5)};
  const auto y = ddqn_targets(batch, online, target, 0.9);
  REQUIRE(y.size() == 1);
  // Evaluates the online pick (action 1) under the target net: 0.5 + 0.9*0.2.
  CHECK(y[0] == doctest::Approx(0.68));

  SUBCASE("terminal transitions do not bootstrap") {
    batch[0].done = true;
    CHECK(ddqn_targets(batch, online, target, 0.9)[0] == 0.5);
  }
  SUBCASE("gamma zero reduces to the immediate reward") {
    CHECK(ddqn_targets(batch, online, target, 0.0)[0] == 0.5);
  }
}

TEST_CASE("agent construction is deterministic and seed-separated") {
  const AgentConfig cfg = tiny_config();
  Agent a(cfg, 0, 1, 5, 11, 42);
  Agent b(cfg, 0, 1, 5, 11, 42);
  Agent other_slice(cfg, 0, 2, 5, 11, 42);
  Agent other_seed(cfg, 0, 1, 5, 11, 43);

  CHECK(a.online() == b.online());
  CHECK(a.online() == a.target());
  CHECK(a.online() != other_slice.online());
  CHECK(a.online() != other_seed.online());
  CHECK(a.online().layer_dims == std::vector<int>{5, 8, 11});
  CHECK(a.env_step() == 0);
  CHECK(a.buffer().size() == 0);
}

TEST_CASE("agent config validation") {
  AgentConfig cfg = tiny_config();
  SUBCASE("gamma outside [0,1)") {
    cfg.gamma = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("warmup below batch size") {
    cfg.warmup_transitions = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("epsilon end above start") {
    cfg.epsilon = {0.1, 0.5, 100};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("batch above capacity") {
    cfg.replay_capacity = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("defaults are valid") {
    CHECK_NOTHROW(AgentConfig{}.validate());
  }
}

TEST_CASE("greedy action matches the online argmax and mutates nothing") {
  Agent agent(tiny_config(), 0, 0, 5, 11, 7);
  const Observation obs{0.3, 0.1, 0.5, 0.7, 0.2};
  const int greedy = agent.act_greedy(obs);
  CHECK(greedy == argmax_index(forward(agent.online(), obs)));
  CHECK(agent.env_step() == 0);
  CHECK(agent.train_iterations() == 0);
}

TEST_CASE("training waits for warmup and syncs on the hard schedule") {
  AgentConfig cfg = tiny_config();  // warmup 4, train_every 1, sync 3
  Agent agent(cfg, 0, 0, 5, 11, 21);
  const MlpParams initial = agent.online();

  int trained = 0;
  for (int i = 0; i < 3; ++i) {
    agent.record(make_transition(i % 11, 0.5));
    if (agent.maybe_train()) ++trained;
  }
  CHECK(trained == 0);
  CHECK(agent.online() == initial);  // nothing moved before warmup

  agent.record(make_transition(3, 0.5));
  REQUIRE(agent.maybe_train().has_value());
  CHECK(agent.train_iterations() == 1);
  CHECK(agent.online() != initial);
  CHECK(agent.target() == initial);  // no sync yet

  agent.record(make_transition(4, 0.5));
  REQUIRE(agent.maybe_train().has_value());
  CHECK(agent.target() == initial);

  agent.record(make_transition(5, 0.5));
  REQUIRE(agent.maybe_train().has_value());
  CHECK(agent.train_iterations() == 3);
  CHECK(agent.target() == agent.online());  // hard sync is a bit-exact copy
}

TEST_CASE("train_every thins the training grid") {
  AgentConfig cfg = tiny_config();
  cfg.train_every = 4;
  Agent agent(cfg, 0, 0, 5, 11, 33);
  int trained = 0;
  for (int i = 0; i < 16; ++i) {
    agent.record(make_transition(i % 11, 0.1));
    if (agent.maybe_train()) ++trained;
  }
  CHECK(trained == 4);  // env steps 4, 8, 12, 16
}

TEST_CASE("identical agents stay bit-identical through training") {
  const AgentConfig cfg = tiny_config();
  Agent a(cfg, 1, 2, 5, 11, 99);
  Agent b(cfg, 1, 2, 5, 11, 99);
  RngStream env_rng(5);
  for (int i = 0; i < 40; ++i) {
    Transition t = make_transition(uniform_int(env_rng, 11), uniform_real(env_rng));
    const Observation obs = t.s;
    CHECK(a.act(obs) == b.act(obs));
    a.record(t);
    b.record(t);
    const auto la = a.maybe_train();
    const auto lb = b.maybe_train();
    CHECK(la == lb);
  }
  CHECK(a.online() == b.online());
  CHECK(a.target() == b.target());
}

TEST_CASE("snapshot exposes identity, shape, and the round sample counter") {
  Agent agent(tiny_config(), 3, 1, 5, 11, 17);
  for (int i = 0; i < 6; ++i) agent.record(make_transition(0, 0.0));

  const ModelSnapshot snap = agent.snapshot();
  CHECK(snap.cell_id == 3);
  CHECK(snap.slice_id == 1);
  CHECK(snap.layer_dims == std::vector<int>{5, 8, 11});
  CHECK(snap.sample_count == 6);
  const std::vector<double> flat = flatten(agent.online());
  REQUIRE(snap.params.size() == flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    CHECK(snap.params[i] == float(flat[i]));  // wire precision is binary32
  }

  agent.reset_round_counter();
  CHECK(agent.samples_since_round() == 0);
  CHECK(agent.env_step() == 6);  // the env step counter is not round-scoped
}

TEST_CASE("applying an aggregate rewrites both nets and restarts the optimizer") {
  AgentConfig cfg = tiny_config();
  Agent agent(cfg, 0, 0, 5, 11, 55);
  for (int i = 0; i < 10; ++i) {
    agent.record(make_transition(i % 11, 0.3));
    agent.maybe_train();
  }
  REQUIRE(agent.opt_state().step > 0);
  const long iters = agent.train_iterations();

  const std::vector<double> flat(agent.online().param_count(), 0.25);
  agent.apply_aggregate(flat);

  CHECK(agent.online().weights[0][0] == 0.25);
  CHECK(agent.online() == agent.target());
  CHECK(agent.opt_state().step == 0);
  for (double m : agent.opt_state().first_moment.weights[0]) CHECK(m == 0.0);
  CHECK(agent.train_iterations() == iters);  // training history survives
  CHECK(agent.buffer().size() == 10);        // replay memory survives
}
