// Command-line front end: runs experiments, evaluates policies, and exports
// every artifact (KPI CSV, model files, reports, manifest) to disk.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedslice/config.hpp"
#include "fedslice/errors.hpp"
#include "fedslice/federation.hpp"
#include "fedslice/harness.hpp"
#include "fedslice/neural.hpp"
#include "fedslice/telemetry.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw fedslice::ConfigError("cannot read file: " + path.string());
  return std::string(std::istreambuf_iterator<char>(file),
                     std::istreambuf_iterator<char>());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot read file: " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(file),
                                  std::istreambuf_iterator<char>()};
  return bytes;
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open for writing: " + path.string());
  file.write(text.data(), long(text.size()));
  if (!file) throw std::runtime_error("write failed: " + path.string());
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open for writing: " + path.string());
  file.write(reinterpret_cast<const char*>(bytes.data()), long(bytes.size()));
  if (!file) throw std::runtime_error("write failed: " + path.string());
}

std::string iso_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Output directories appear atomically: everything is staged in a sibling
// temp dir, renamed into place on commit, removed on failure.
class AtomicDir {
 public:
  explicit AtomicDir(fs::path target) : final_(std::move(target)) {
    if (final_.empty()) throw fedslice::ConfigError("output path must not be empty");
    if (fs::exists(final_)) {
      throw std::runtime_error("output path already exists: " + final_.string());
    }
    tmp_ = final_;
    tmp_ += ".tmp-" + std::to_string(long(::getpid()));
    fs::create_directories(tmp_);
  }

  AtomicDir(const AtomicDir&) = delete;
  AtomicDir& operator=(const AtomicDir&) = delete;

  ~AtomicDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  const fs::path& staging() const { return tmp_; }

  void commit() {
    fs::rename(tmp_, final_);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path tmp_;
  bool committed_ = false;
};

fedslice::ExperimentConfig load_config(const std::string& config_path,
                                       std::optional<std::uint64_t> seed) {
  fedslice::ExperimentConfig cfg = config_path.empty()
                                       ? fedslice::default_experiment_config(3)
                                       : fedslice::parse_config(read_file(config_path));
  if (seed) cfg.master_seed = *seed;
  return cfg;
}

json slice_summaries(const std::vector<fedslice::KpiRecord>& log) {
  struct Acc {
    double reward = 0, abs_gap = 0;
    long n = 0;
  };
  std::map<std::pair<int, int>, Acc> acc;
  for (const fedslice::KpiRecord& r : log) {
    Acc& a = acc[{r.cell_id, r.slice_id}];
    a.reward += r.reward;
    a.abs_gap += r.abs_gap_prb;
    ++a.n;
  }
  json out = json::array();
  for (const auto& [key, a] : acc) {
    out.push_back({{"cell_id", key.first},
                   {"slice_id", key.second},
                   {"mean_reward", a.reward / double(a.n)},
                   {"mean_abs_gap_prb", a.abs_gap / double(a.n)}});
  }
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const fedslice::ExperimentConfig& cfg,
                    const std::string& started, std::vector<std::string> artifacts,
                    json summary) {
  artifacts.push_back("manifest.json");
  json manifest;
  manifest["command"] = command;
  manifest["master_seed"] = cfg.master_seed;
  manifest["started_utc"] = started;
  manifest["finished_utc"] = iso_utc_now();
  manifest["config"] = json::parse(fedslice::emit_config(cfg));
  manifest["artifacts"] = artifacts;
  manifest["summary"] = std::move(summary);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string model_file_name(int cell_id, int slice_id) {
  return "model_cell" + std::to_string(cell_id) + "_slice" +
         std::to_string(slice_id) + ".fdrl";
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
  const std::string started = iso_utc_now();
  const fedslice::ExperimentConfig cfg = load_config(config_path, seed);
  fedslice::TrainResult result = fedslice::run_training(cfg);

  AtomicDir out(out_dir);
  std::vector<std::string> artifacts;

  fedslice::export_kpi_csv(result.kpi, (out.staging() / "kpi.csv").string());
  artifacts.push_back("kpi.csv");

  for (const fedslice::Agent& agent : result.agents) {
    const std::string name = model_file_name(agent.cell_id(), agent.slice_id());
    write_file(out.staging() / name, fedslice::serialize_model(agent.snapshot()));
    artifacts.push_back(name);
  }
  for (const fedslice::RoundArtifact& round : result.rounds) {
    const std::string name = "round_" + std::to_string(round.aggregate.slice_id) +
                             "_" + std::to_string(round.round) + ".fdrl";
    write_file(out.staging() / name, fedslice::serialize_model(round.aggregate));
    artifacts.push_back(name);
  }

  write_manifest(out.staging(), "train", cfg, started, artifacts,
                 {{"slices", slice_summaries(result.kpi)}});
  out.commit();

  std::cout << "trained " << result.agents.size() << " agents for "
            << cfg.train_steps << " steps; " << result.rounds.size()
            << " federation artifacts; output in " << out_dir << "\n";
  return 0;
}

// Greedy exploitation of serialized networks; no Agent state needed.
class SnapshotPolicy final : public fedslice::Policy {
 public:
  void add(const fedslice::ModelSnapshot& snap) {
    fedslice::MlpParams params = fedslice::MlpParams::zeros(snap.layer_dims);
    std::vector<double> flat(snap.params.begin(), snap.params.end());
    fedslice::load_flat(params, flat);
    nets_[{snap.cell_id, snap.slice_id}] = std::move(params);
  }

  bool empty() const { return nets_.empty(); }

  int act(const fedslice::CellEnv& env, int slice_id,
          const fedslice::Observation& obs) override {
    const auto it = nets_.find({env.config().cell_id, slice_id});
    if (it == nets_.end()) {
      throw std::runtime_error("no model for cell " +
                               std::to_string(env.config().cell_id) + ", slice " +
                               std::to_string(slice_id));
    }
    return fedslice::argmax_index(fedslice::forward(it->second, obs));
  }

 private:
  std::map<std::pair<int, int>, fedslice::MlpParams> nets_;
};

void write_report(const fs::path& dir, const fedslice::EvalReport& report,
                  std::vector<std::string>& artifacts) {
  write_file(dir / "report.json", fedslice::eval_report_json(report));
  write_file(dir / "report.csv", fedslice::eval_report_csv(report));
  artifacts.push_back("report.json");
  artifacts.push_back("report.csv");
}

int cmd_eval(const std::string& models_dir, const std::string& config_path,
             std::optional<std::uint64_t> seed, const std::string& out_dir) {
  const std::string started = iso_utc_now();
  const fedslice::ExperimentConfig cfg = load_config(config_path, seed);

  SnapshotPolicy policy;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(models_dir)) {
    if (entry.is_regular_file() &&
        entry.path().filename().string().starts_with("model_") &&
        entry.path().extension() == ".fdrl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& file : files) {
    policy.add(fedslice::deserialize_model(read_bytes(file)));
  }
  if (policy.empty()) {
    throw std::runtime_error("no model_*.fdrl files in " + models_dir);
  }

  const fedslice::EvalReport report = fedslice::evaluate_policy(policy, cfg);

  AtomicDir out(out_dir);
  std::vector<std::string> artifacts;
  write_report(out.staging(), report, artifacts);
  write_manifest(out.staging(), "eval", cfg, started, artifacts,
                 {{"mean_reward", report.mean_reward},
                  {"mean_abs_gap_prb", report.mean_abs_gap_prb}});
  out.commit();

  std::cout << "mean reward " << fedslice::format_real(report.mean_reward)
            << ", mean abs gap " << fedslice::format_real(report.mean_abs_gap_prb)
            << " PRB; report in " << out_dir << "\n";
  return 0;
}

int cmd_baseline(const std::string& kind_name, const std::string& config_path,
                 std::optional<std::uint64_t> seed, const std::string& out_dir) {
  const std::string started = iso_utc_now();
  const fedslice::ExperimentConfig cfg = load_config(config_path, seed);

  fedslice::BaselineKind kind;
  if (kind_name == "random") {
    kind = fedslice::BaselineKind::Random;
  } else if (kind_name == "static") {
    kind = fedslice::BaselineKind::StaticEqual;
  } else if (kind_name == "oracle") {
    kind = fedslice::BaselineKind::Oracle;
  } else {
    throw fedslice::ConfigError("unknown baseline kind '" + kind_name +
                                "' (expected random, static, or oracle)");
  }

  const auto policy = fedslice::baseline_policy(kind, cfg.master_seed);
  const fedslice::EvalReport report = fedslice::evaluate_policy(*policy, cfg);

  AtomicDir out(out_dir);
  std::vector<std::string> artifacts;
  write_report(out.staging(), report, artifacts);
  write_manifest(out.staging(), "baseline", cfg, started, artifacts,
                 {{"kind", kind_name},
                  {"mean_reward", report.mean_reward},
                  {"mean_abs_gap_prb", report.mean_abs_gap_prb}});
  out.commit();

  std::cout << kind_name << " baseline: mean reward "
            << fedslice::format_real(report.mean_reward) << ", mean abs gap "
            << fedslice::format_real(report.mean_abs_gap_prb) << " PRB; report in "
            << out_dir << "\n";
  return 0;
}

int cmd_fed_demo(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir) {
  const std::string started = iso_utc_now();
  fedslice::ExperimentConfig federated = load_config(config_path, seed);
  federated.federation.enabled = true;
  fedslice::ExperimentConfig isolated = federated;
  isolated.federation.enabled = false;

  fedslice::TrainResult fed_run = fedslice::run_training(federated);
  fedslice::TrainResult iso_run = fedslice::run_training(isolated);

  fedslice::GreedyNetPolicy fed_policy(fed_run.agents);
  fedslice::GreedyNetPolicy iso_policy(iso_run.agents);
  const fedslice::EvalReport fed_report =
      fedslice::evaluate_policy(fed_policy, federated);
  const fedslice::EvalReport iso_report =
      fedslice::evaluate_policy(iso_policy, isolated);

  AtomicDir out(out_dir);
  std::vector<std::string> artifacts;

  fedslice::export_kpi_csv(fed_run.kpi,
                           (out.staging() / "kpi_federated.csv").string());
  fedslice::export_kpi_csv(iso_run.kpi,
                           (out.staging() / "kpi_isolated.csv").string());
  artifacts.push_back("kpi_federated.csv");
  artifacts.push_back("kpi_isolated.csv");

  json comparison;
  comparison["federated"] = json::parse(fedslice::eval_report_json(fed_report));
  comparison["isolated"] = json::parse(fedslice::eval_report_json(iso_report));
  comparison["reward_delta"] = fed_report.mean_reward - iso_report.mean_reward;
  write_file(out.staging() / "comparison.json", comparison.dump(2) + "\n");
  artifacts.push_back("comparison.json");

  for (const fedslice::RoundArtifact& round : fed_run.rounds) {
    const std::string name = "round_" + std::to_string(round.aggregate.slice_id) +
                             "_" + std::to_string(round.round) + ".fdrl";
    write_file(out.staging() / name, fedslice::serialize_model(round.aggregate));
    artifacts.push_back(name);
  }

  write_manifest(out.staging(), "fed-demo", federated, started, artifacts,
                 {{"federated_mean_reward", fed_report.mean_reward},
                  {"isolated_mean_reward", iso_report.mean_reward}});
  out.commit();

  std::cout << "federated mean reward "
            << fedslice::format_real(fed_report.mean_reward) << " vs isolated "
            << fedslice::format_real(iso_report.mean_reward) << "; output in "
            << out_dir << "\n";
  return 0;
}

int cmd_inspect(const std::string& model_path) {
  const fedslice::ModelSnapshot snap =
      fedslice::deserialize_model(read_bytes(model_path));
  if (snap.cell_id == fedslice::kAggregateCellId) {
    std::cout << "cell_id: aggregate\n";
  } else {
    std::cout << "cell_id: " << snap.cell_id << "\n";
  }
  std::cout << "slice_id: " << snap.slice_id << "\n";
  std::cout << "layer_dims: [";
  for (std::size_t i = 0; i < snap.layer_dims.size(); ++i) {
    std::cout << (i ? ", " : "") << snap.layer_dims[i];
  }
  std::cout << "]\n";
  std::cout << "param_count: " << snap.params.size() << "\n";
  std::cout << "sample_count: " << snap.sample_count << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-slice DRL resource allocation testbed with federated averaging"};
  app.require_subcommand(1);

  std::string config_path, out_dir, models_dir, kind_name, model_path;
  std::optional<std::uint64_t> seed;

  CLI::App* train = app.add_subcommand("train", "Train agents and export artifacts");
  train->add_option("--config", config_path, "Experiment config JSON");
  train->add_option("--seed", seed, "Master seed (overrides config)");
  train->add_option("--out", out_dir, "Output directory (must not exist)")
      ->required();

  CLI::App* eval = app.add_subcommand("eval", "Evaluate serialized models");
  eval->add_option("--models", models_dir, "Directory holding model_*.fdrl files")
      ->required();
  eval->add_option("--config", config_path, "Experiment config JSON");
  eval->add_option("--seed", seed, "Master seed (overrides config)");
  eval->add_option("--out", out_dir, "Output directory (must not exist)")
      ->required();

  CLI::App* baseline = app.add_subcommand("baseline", "Evaluate a baseline policy");
  baseline->add_option("--kind", kind_name, "random | static | oracle")->required();
  baseline->add_option("--config", config_path, "Experiment config JSON");
  baseline->add_option("--seed", seed, "Master seed (overrides config)");
  baseline->add_option("--out", out_dir, "Output directory (must not exist)")
      ->required();

  CLI::App* fed_demo = app.add_subcommand(
      "fed-demo", "Train federated vs isolated and compare evaluations");
  fed_demo->add_option("--config", config_path, "Experiment config JSON");
  fed_demo->add_option("--seed", seed, "Master seed (overrides config)");
  fed_demo->add_option("--out", out_dir, "Output directory (must not exist)")
      ->required();

  CLI::App* inspect =
      app.add_subcommand("inspect-model", "Print a serialized model's header");
  inspect->add_option("file", model_path, "Path to a .fdrl file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, seed, out_dir);
    if (eval->parsed()) return cmd_eval(models_dir, config_path, seed, out_dir);
    if (baseline->parsed()) return cmd_baseline(kind_name, config_path, seed, out_dir);
    if (fed_demo->parsed()) return cmd_fed_demo(config_path, seed, out_dir);
    if (inspect->parsed()) return cmd_inspect(model_path);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const fedslice::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fedslice::DeserializeError& e) {
    switch (e.kind()) {
      case fedslice::DeserializeError::Kind::BadMagic:
        std::cerr << "bad magic: " << e.what() << "\n";
        break;
      case fedslice::DeserializeError::Kind::BadVersion:
        std::cerr << "bad version: " << e.what() << "\n";
        break;
      case fedslice::DeserializeError::Kind::Truncated:
        std::cerr << "truncated payload: " << e.what() << "\n";
        break;
      case fedslice::DeserializeError::Kind::Inconsistent:
        std::cerr << "inconsistent payload: " << e.what() << "\n";
        break;
    }
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
