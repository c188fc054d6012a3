#include "fedslice/config.hpp"

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <type_traits>

#include "json.hpp"

namespace fedslice {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path.empty() ? message : path + ": " + message);
}

void require_object(const json& value, const std::string& path) {
  if (!value.is_object()) fail(path, "expected an object");
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) fail(path, "unknown key '" + it.key() + "'");
  }
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

void get_double(const json& obj, const std::string& path, const char* key,
                double& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  out = v.get<double>();
}

template <typename T>
void get_integer(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    fail(join(path, key), "expected an integer");
  }
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > std::uint64_t(std::numeric_limits<T>::max())) {
      fail(join(path, key), "value out of range");
    }
  } else {
    const auto s = v.get<std::int64_t>();
    if constexpr (std::is_unsigned_v<T>) {
      if (s < 0) fail(join(path, key), "must be non-negative");
    } else {
      if (s < std::int64_t(std::numeric_limits<T>::min()) ||
          s > std::int64_t(std::numeric_limits<T>::max())) {
        fail(join(path, key), "value out of range");
      }
    }
  }
  out = v.get<T>();
}

void get_bool(const json& obj, const std::string& path, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_boolean()) fail(join(path, key), "expected a boolean");
  out = v.get<bool>();
}

constexpr const char* kShapeNames[] = {"sinusoid", "square_wave", "burst_poisson"};

TrafficShape shape_from_string(const std::string& name, const std::string& path) {
  if (name == kShapeNames[0]) return TrafficShape::Sinusoid;
  if (name == kShapeNames[1]) return TrafficShape::SquareWave;
  if (name == kShapeNames[2]) return TrafficShape::BurstPoisson;
  fail(path, "unknown shape '" + name +
                 "' (expected sinusoid, square_wave, or burst_poisson)");
}

const char* shape_to_string(TrafficShape shape) {
  return kShapeNames[int(shape)];
}

TrafficProfile parse_profile(const json& obj, const std::string& path) {
  require_object(obj, path);
  check_keys(obj, path,
             {"shape", "mean_prb", "amplitude_prb", "period_steps", "phase_steps",
              "noise_std_prb", "burst_rate", "burst_size_prb"});
  TrafficProfile p;
  if (obj.contains("shape")) {
    const json& v = obj.at("shape");
    if (!v.is_string()) fail(join(path, "shape"), "expected a string");
    p.shape = shape_from_string(v.get<std::string>(), join(path, "shape"));
  }
  get_double(obj, path, "mean_prb", p.mean_prb);
  get_double(obj, path, "amplitude_prb", p.amplitude_prb);
  get_integer(obj, path, "period_steps", p.period_steps);
  get_integer(obj, path, "phase_steps", p.phase_steps);
  get_double(obj, path, "noise_std_prb", p.noise_std_prb);
  get_double(obj, path, "burst_rate", p.burst_rate);
  get_double(obj, path, "burst_size_prb", p.burst_size_prb);
  return p;
}

CellConfig parse_cell(const json& obj, int index, const std::string& path) {
  require_object(obj, path);
  check_keys(obj, path,
             {"cell_id", "capacity_prb", "chunk_prb", "num_slices", "horizon_steps",
              "beta", "lambda", "kappa", "channel_drift_prob", "slices"});
  int cell_id = index;
  get_integer(obj, path, "cell_id", cell_id);

  // Defaults are the shifted per-cell profiles, so {} rows give the standard
  // heterogeneous experiment.
  CellConfig cell = default_cell_config(cell_id);
  get_integer(obj, path, "capacity_prb", cell.capacity_prb);
  get_integer(obj, path, "chunk_prb", cell.chunk_prb);
  get_integer(obj, path, "num_slices", cell.num_slices);
  get_integer(obj, path, "horizon_steps", cell.horizon_steps);
  get_double(obj, path, "beta", cell.beta);
  get_double(obj, path, "lambda", cell.lambda);
  get_double(obj, path, "kappa", cell.kappa);
  get_double(obj, path, "channel_drift_prob", cell.channel_drift_prob);
  if (obj.contains("slices")) {
    const json& arr = obj.at("slices");
    if (!arr.is_array()) fail(join(path, "slices"), "expected an array");
    cell.slices.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cell.slices.push_back(parse_profile(
          arr[i], join(path, "slices") + "[" + std::to_string(i) + "]"));
    }
  } else if (cell.num_slices != int(cell.slices.size())) {
    // num_slices was overridden without giving profiles; repeat the first
    // default profile so the config stays self-consistent.
    cell.slices.resize(std::size_t(std::max(cell.num_slices, 0)),
                       cell.slices.empty() ? TrafficProfile{} : cell.slices.front());
  }
  return cell;
}

AgentConfig parse_agent(const json& obj, const std::string& path) {
  require_object(obj, path);
  check_keys(obj, path,
             {"gamma", "batch_size", "target_sync_period", "train_every",
              "warmup_transitions", "epsilon", "hidden_dims", "learning_rate",
              "clip_norm", "replay_capacity"});
  AgentConfig agent;
  get_double(obj, path, "gamma", agent.gamma);
  get_integer(obj, path, "batch_size", agent.batch_size);
  get_integer(obj, path, "target_sync_period", agent.target_sync_period);
  get_integer(obj, path, "train_every", agent.train_every);
  get_integer(obj, path, "warmup_transitions", agent.warmup_transitions);
  if (obj.contains("epsilon")) {
    const json& eps = obj.at("epsilon");
    const std::string eps_path = join(path, "epsilon");
    require_object(eps, eps_path);
    check_keys(eps, eps_path, {"start", "end", "decay_steps"});
    get_double(eps, eps_path, "start", agent.epsilon.start);
    get_double(eps, eps_path, "end", agent.epsilon.end);
    get_integer(eps, eps_path, "decay_steps", agent.epsilon.decay_steps);
  }
  if (obj.contains("hidden_dims")) {
    const json& arr = obj.at("hidden_dims");
    if (!arr.is_array()) fail(join(path, "hidden_dims"), "expected an array");
    agent.hidden_dims.clear();
    for (const json& v : arr) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) {
        fail(join(path, "hidden_dims"), "expected integers");
      }
      agent.hidden_dims.push_back(v.get<int>());
    }
  }
  get_double(obj, path, "learning_rate", agent.learning_rate);
  get_double(obj, path, "clip_norm", agent.clip_norm);
  get_integer(obj, path, "replay_capacity", agent.replay_capacity);
  return agent;
}

FederationConfig parse_federation(const json& obj, const std::string& path) {
  require_object(obj, path);
  check_keys(obj, path, {"enabled", "period_steps", "weight_rule"});
  FederationConfig fed;
  get_bool(obj, path, "enabled", fed.enabled);
  get_integer(obj, path, "period_steps", fed.period_steps);
  if (obj.contains("weight_rule")) {
    const json& v = obj.at("weight_rule");
    if (!v.is_string()) fail(join(path, "weight_rule"), "expected a string");
    const std::string rule = v.get<std::string>();
    if (rule == "sample_count") {
      fed.weight_rule = WeightRule::SampleCount;
    } else if (rule == "equal") {
      fed.weight_rule = WeightRule::Equal;
    } else {
      fail(join(path, "weight_rule"),
           "unknown rule '" + rule + "' (expected sample_count or equal)");
    }
  }
  return fed;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, json_text.size());
    const long line =
        1 + std::count(json_text.begin(), json_text.begin() + long(byte), '\n');
    throw ConfigError("syntax error at line " + std::to_string(line) + ": " +
                      e.what());
  }
  require_object(doc, "");
  check_keys(doc, "",
             {"master_seed", "train_steps", "eval_episodes", "eval_horizon_steps",
              "cells", "agent", "federation"});

  ExperimentConfig cfg = default_experiment_config(3);
  get_integer(doc, "", "master_seed", cfg.master_seed);
  get_integer(doc, "", "train_steps", cfg.train_steps);
  get_integer(doc, "", "eval_episodes", cfg.eval_episodes);
  get_integer(doc, "", "eval_horizon_steps", cfg.eval_horizon_steps);
  if (doc.contains("cells")) {
    const json& arr = doc.at("cells");
    if (!arr.is_array()) fail("cells", "expected an array");
    cfg.cells.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.cells.push_back(
          parse_cell(arr[i], int(i), "cells[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("agent")) cfg.agent = parse_agent(doc.at("agent"), "agent");
  if (doc.contains("federation")) {
    cfg.federation = parse_federation(doc.at("federation"), "federation");
  }
  cfg.validate();
  return cfg;
}

std::string emit_config(const ExperimentConfig& config) {
  json doc;
  doc["master_seed"] = config.master_seed;
  doc["train_steps"] = config.train_steps;
  doc["eval_episodes"] = config.eval_episodes;
  doc["eval_horizon_steps"] = config.eval_horizon_steps;

  doc["cells"] = json::array();
  for (const CellConfig& cell : config.cells) {
    json jc;
    jc["cell_id"] = cell.cell_id;
    jc["capacity_prb"] = cell.capacity_prb;
    jc["chunk_prb"] = cell.chunk_prb;
    jc["num_slices"] = cell.num_slices;
    jc["horizon_steps"] = cell.horizon_steps;
    jc["beta"] = cell.beta;
    jc["lambda"] = cell.lambda;
    jc["kappa"] = cell.kappa;
    jc["channel_drift_prob"] = cell.channel_drift_prob;
    jc["slices"] = json::array();
    for (const TrafficProfile& p : cell.slices) {
      json jp;
      jp["shape"] = shape_to_string(p.shape);
      jp["mean_prb"] = p.mean_prb;
      jp["amplitude_prb"] = p.amplitude_prb;
      jp["period_steps"] = p.period_steps;
      jp["phase_steps"] = p.phase_steps;
      jp["noise_std_prb"] = p.noise_std_prb;
      jp["burst_rate"] = p.burst_rate;
      jp["burst_size_prb"] = p.burst_size_prb;
      jc["slices"].push_back(std::move(jp));
    }
    doc["cells"].push_back(std::move(jc));
  }

  json ja;
  ja["gamma"] = config.agent.gamma;
  ja["batch_size"] = config.agent.batch_size;
  ja["target_sync_period"] = config.agent.target_sync_period;
  ja["train_every"] = config.agent.train_every;
  ja["warmup_transitions"] = config.agent.warmup_transitions;
  ja["epsilon"] = {{"start", config.agent.epsilon.start},
                   {"end", config.agent.epsilon.end},
                   {"decay_steps", config.agent.epsilon.decay_steps}};
  ja["hidden_dims"] = config.agent.hidden_dims;
  ja["learning_rate"] = config.agent.learning_rate;
  ja["clip_norm"] = config.agent.clip_norm;
  ja["replay_capacity"] = config.agent.replay_capacity;
  doc["agent"] = std::move(ja);

  doc["federation"] = {
      {"enabled", config.federation.enabled},
      {"period_steps", config.federation.period_steps},
      {"weight_rule", config.federation.weight_rule == WeightRule::SampleCount
                          ? "sample_count"
                          : "equal"}};
  return doc.dump(2) + "\n";
}

}  // namespace fedslice
