#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fedslice/agent.hpp"
#include "fedslice/federation.hpp"
#include "fedslice/rng.hpp"

using namespace fedslice;

namespace {

ModelSnapshot make_snapshot(std::vector<float> params, std::uint64_t count,
                            int cell = 0, int slice = 0) {
  ModelSnapshot s;
  s.cell_id = cell;
  s.slice_id = slice;
  s.layer_dims = {1, 2};  // 4 parameters
  s.params = std::move(params);
  s.sample_count = count;
  return s;
}

AgentConfig tiny_config() {
  AgentConfig cfg;
  cfg.hidden_dims = {6};
  cfg.batch_size = 4;
  cfg.warmup_transitions = 4;
  cfg.train_every = 1;
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

TEST_CASE("fedavg numeric examples") {
  const auto a = make_snapshot({1.0f, 1.0f, 3.0f, 3.0f}, 1);
  const auto b = make_snapshot({3.0f, 3.0f, 5.0f, 5.0f}, 1);

  SUBCASE("equal counts take the plain mean") {
    const auto mean = fedavg({a, b});
    CHECK(mean == std::vector<double>{2.0, 2.0, 4.0, 4.0});
  }
  SUBCASE("counts weight the contribution") {
    auto heavy = b;
    heavy.sample_count = 3;
    const auto mean = fedavg({a, heavy});
    CHECK(mean == std::vector<double>{2.5, 2.5, 4.5, 4.5});
  }
  SUBCASE("the equal rule ignores counts") {
    auto heavy = b;
    heavy.sample_count = 1000;
    const auto mean = fedavg({a, heavy}, WeightRule::Equal);
    CHECK(mean == std::vector<double>{2.0, 2.0, 4.0, 4.0});
  }
  SUBCASE("all-zero counts fall back to equal weights") {
    auto za = a;
    auto zb = b;
    za.sample_count = 0;
    zb.sample_count = 0;
    CHECK(fedavg({za, zb}) == std::vector<double>{2.0, 2.0, 4.0, 4.0});
  }
  SUBCASE("a zero-count member contributes nothing when others report") {
    auto silent = a;
    silent.sample_count = 0;
    auto mean = fedavg({silent, b});
    CHECK(mean == std::vector<double>{3.0, 3.0, 5.0, 5.0});
  }
}

TEST_CASE("averaging identical snapshots reproduces them exactly") {
  RngStream rng(77);
  std::vector<float> params(4);
  for (float& p : params) p = float(2.0 * uniform_real(rng) - 1.0);

  std::vector<ModelSnapshot> copies;
  for (int k = 0; k < 7; ++k) {
    copies.push_back(make_snapshot(params, 12345 + std::uint64_t(k) * 999));
  }
  const auto mean = fedavg(copies);
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(mean[i] == double(params[i]));  // bit-exact, not just close
  }
}

TEST_CASE("fedavg is invariant to member order") {
  RngStream rng(5);
  std::vector<ModelSnapshot> snaps;
  for (int k = 0; k < 6; ++k) {
    std::vector<float> p(4);
    for (float& v : p) v = float(uniform_real(rng) * 4.0 - 2.0);
    snaps.push_back(make_snapshot(std::move(p), 100 + std::uint64_t(k * 37)));
  }
  const auto base = fedavg(snaps);
  std::reverse(snaps.begin(), snaps.end());
  const auto reversed = fedavg(snaps);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(reversed[i] == doctest::Approx(base[i]).epsilon(1e-12));
  }
}

TEST_CASE("fedavg commutes with affine maps of the parameters") {
  // Dyadic values keep the float transform exact, so equality is sharp.
  std::vector<ModelSnapshot> snaps{
      make_snapshot({0.25f, -0.5f, 1.0f, 0.125f}, 10),
      make_snapshot({0.75f, 0.5f, -1.0f, 0.375f}, 30),
  };
  const auto base = fedavg(snaps);
  const double scale = 2.0, shift = 0.25;
  for (auto& s : snaps) {
    for (float& p : s.params) p = float(scale * double(p) + shift);
  }
  const auto mapped = fedavg(snaps);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(mapped[i] == doctest::Approx(scale * base[i] + shift).epsilon(1e-12));
  }
}

TEST_CASE("fedavg rejects incompatible snapshots") {
  CHECK_THROWS_AS(fedavg({}), std::invalid_argument);

  auto a = make_snapshot({1.0f, 2.0f, 3.0f, 4.0f}, 1);
  auto b = a;
  b.layer_dims = {2, 2};
  b.params = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  CHECK_THROWS_AS(fedavg({a, b}), std::invalid_argument);

  auto short_params = a;
  short_params.params.pop_back();
  CHECK_THROWS_AS(fedavg({a, short_params}), std::invalid_argument);
}

TEST_CASE("a federation round aligns every member on the weighted mean") {
  const AgentConfig cfg = tiny_config();
  Agent a0(cfg, 0, 1, 5, 11, 7);
  Agent a1(cfg, 1, 1, 5, 11, 7);
  Agent a2(cfg, 2, 1, 5, 11, 7);
  for (int i = 0; i < 3; ++i) a0.record(make_transition(i, 0.1));
  for (int i = 0; i < 5; ++i) a1.record(make_transition(i, 0.2));
  for (int i = 0; i < 2; ++i) a2.record(make_transition(i, 0.3));

  const std::vector<ModelSnapshot> before{a0.snapshot(), a1.snapshot(), a2.snapshot()};
  const std::vector<double> expected = fedavg(before);

  FederationGroup group;
  group.slice_id = 1;
  group.members = {{0, 1}, {1, 1}, {2, 1}};
  std::vector<Agent*> members{&a0, &a1, &a2};
  const ModelSnapshot agg = run_round(group, members);

  CHECK(agg.cell_id == kAggregateCellId);
  CHECK(agg.slice_id == 1);
  CHECK(agg.sample_count == 10);
  CHECK(group.round == 1);

  const std::vector<double> flat0 = flatten(a0.online());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    REQUIRE(flat0[i] == expected[i]);
    REQUIRE(agg.params[i] == float(expected[i]));
  }
  CHECK(a0.online() == a1.online());
  CHECK(a1.online() == a2.online());
  CHECK(a0.target() == a0.online());
  CHECK(a0.opt_state().step == 0);
  CHECK(a0.samples_since_round() == 0);
  CHECK(a1.samples_since_round() == 0);

  SUBCASE("an immediate second round is an exact no-op on state") {
    // Give the members fresh optimizer history so a write-back would show.
    for (int i = 0; i < 6; ++i) {
      a0.record(make_transition(i % 11, 0.1));
      a0.maybe_train();
    }
    const MlpParams held = a0.online();
    const long opt_step = a0.opt_state().step;
    REQUIRE(opt_step > 0);

    // Hold every member at the same parameters (a0 trained, so re-align).
    a1.apply_aggregate(flatten(held));
    a2.apply_aggregate(flatten(held));
    const long a1_opt = a1.opt_state().step;

    const ModelSnapshot again = run_round(group, members);
    CHECK(group.round == 2);
    CHECK(a0.online() == held);              // untouched, not rewritten
    CHECK(a0.opt_state().step == opt_step);  // optimizer history survives
    CHECK(a1.opt_state().step == a1_opt);
    CHECK(a0.samples_since_round() == 0);
    for (std::size_t i = 0; i < again.params.size(); ++i) {
      CHECK(again.params[i] == float(flatten(held)[i]));
    }
  }
}

TEST_CASE("a single-member round only bumps the counter") {
  Agent solo(tiny_config(), 0, 0, 5, 11, 3);
  for (int i = 0; i < 8; ++i) {
    solo.record(make_transition(i % 11, 0.2));
    solo.maybe_train();
  }
  const MlpParams held = solo.online();
  const long opt_step = solo.opt_state().step;

  FederationGroup group;
  group.members = {{0, 0}};
  std::vector<Agent*> members{&solo};
  run_round(group, members);

  CHECK(group.round == 1);
  CHECK(solo.online() == held);
  CHECK(solo.opt_state().step == opt_step);
  CHECK(solo.samples_since_round() == 0);
}

TEST_CASE("a shape mismatch aborts the round before touching anyone") {
  AgentConfig cfg = tiny_config();
  Agent a(cfg, 0, 0, 5, 11, 1);
  AgentConfig wide = cfg;
  wide.hidden_dims = {7};
  Agent b(wide, 1, 0, 5, 11, 1);
  a.record(make_transition(0, 0.5));

  const MlpParams held_a = a.online();
  const MlpParams held_b = b.online();

  FederationGroup group;
  group.members = {{0, 0}, {1, 0}};
  std::vector<Agent*> members{&a, &b};
  CHECK_THROWS_AS(run_round(group, members), std::invalid_argument);
  CHECK(group.round == 0);
  CHECK(a.online() == held_a);
  CHECK(b.online() == held_b);
  CHECK(a.samples_since_round() == 1);  // not reset either

  SUBCASE("member list must match the group roster") {
    FederationGroup wrong;
    wrong.members = {{0, 0}};
    CHECK_THROWS_AS(run_round(wrong, members), std::invalid_argument);
  }
}

TEST_CASE("serialization layout for a two-layer snapshot is 52 bytes") {
  ModelSnapshot s;
  s.cell_id = 2;
  s.slice_id = 1;
  s.layer_dims = {2, 2};
  s.params = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  s.sample_count = 0x0102030405060708ULL;

  const auto bytes = serialize_model(s);
  REQUIRE(bytes.size() == 52);
  CHECK(bytes[0] == 'F');
  CHECK(bytes[1] == 'D');
  CHECK(bytes[2] == 'R');
  CHECK(bytes[3] == 'L');
  CHECK(bytes[4] == 1);  // version, little-endian
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);  // cell id
  CHECK(bytes[8] == 1);  // slice id
  CHECK(bytes[10] == 2);  // layer count
  CHECK(bytes[12] == 2);  // dim 0
  CHECK(bytes[16] == 2);  // dim 1
  CHECK(bytes[20] == 0x08);  // sample count low byte first
  CHECK(bytes[27] == 0x01);
  CHECK(deserialize_model(bytes) == s);
}

TEST_CASE("serialization round-trips arbitrary snapshots bit-exactly") {
  RngStream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    ModelSnapshot s;
    s.cell_id = uniform_int(rng, 0x10000);
    s.slice_id = uniform_int(rng, 0x10000);
    const int hidden = 1 + uniform_int(rng, 6);
    s.layer_dims = {1 + uniform_int(rng, 5), hidden, 1 + uniform_int(rng, 4)};
    s.params.resize(param_count(s.layer_dims));
    for (float& p : s.params) p = float(normal(rng, 0.0, 3.0));
    s.sample_count = rng();
    REQUIRE(deserialize_model(serialize_model(s)) == s);
  }
}

TEST_CASE("serializer rejects malformed snapshots") {
  ModelSnapshot s;
  s.layer_dims = {2};
  s.params = {1.0f, 2.0f};
  CHECK_THROWS_AS(serialize_model(s), std::invalid_argument);

  s.layer_dims = {2, 2};
  s.params = {1.0f};  // wrong count
  CHECK_THROWS_AS(serialize_model(s), std::invalid_argument);

  s.params = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  s.cell_id = 0x10000;
  CHECK_THROWS_AS(serialize_model(s), std::invalid_argument);
}

TEST_CASE("decoder failure taxonomy") {
  ModelSnapshot s;
  s.layer_dims = {2, 2};
  s.params = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  const auto good = serialize_model(s);

  SUBCASE("wrong magic") {
    auto bytes = good;
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(deserialize_model(bytes), "payload does not start with FDRL",
                         DeserializeError);
    try {
      deserialize_model(bytes);
    } catch (const DeserializeError& e) {
      CHECK(e.kind() == DeserializeError::Kind::BadMagic);
    }
  }
  SUBCASE("future version") {
    auto bytes = good;
    bytes[4] = 2;
    try {
      deserialize_model(bytes);
      FAIL("expected a version error");
    } catch (const DeserializeError& e) {
      CHECK(e.kind() == DeserializeError::Kind::BadVersion);
    }
  }
  SUBCASE("every truncation is caught") {
    for (std::size_t len = 0; len < good.size(); ++len) {
      std::vector<std::uint8_t> cut(good.begin(), good.begin() + long(len));
      CHECK_THROWS_AS(deserialize_model(cut), DeserializeError);
    }
  }
  SUBCASE("trailing junk is rejected") {
    auto bytes = good;
    bytes.push_back(0);
    try {
      deserialize_model(bytes);
      FAIL("expected an inconsistency error");
    } catch (const DeserializeError& e) {
      CHECK(e.kind() == DeserializeError::Kind::Inconsistent);
    }
  }
  SUBCASE("zero layer dim is rejected") {
    auto bytes = good;
    bytes[12] = 0;  // dim 0 -> 0
    try {
      deserialize_model(bytes);
      FAIL("expected an inconsistency error");
    } catch (const DeserializeError& e) {
      CHECK(e.kind() == DeserializeError::Kind::Inconsistent);
    }
  }
  SUBCASE("random noise never crashes the decoder") {
    RngStream rng(113);
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<std::uint8_t> noise(std::size_t(uniform_int(rng, 96)));
      for (auto& b : noise) b = std::uint8_t(uniform_int(rng, 256));
      try {
        (void)deserialize_model(noise);
      } catch (const DeserializeError&) {
        // structured rejection is the contract
      }
    }
  }
}
