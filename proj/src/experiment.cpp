#include "cbftune/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cbftune/errors.hpp"
#include "cbftune/tasks.hpp"

namespace cbftune {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

Algorithm parse_algorithm(const std::string& name, const std::string& origin) {
  if (name == "sb2o") return Algorithm::sb2o;
  if (name == "rs") return Algorithm::rs;
  if (name == "es") return Algorithm::es;
  throw ConfigError(origin + ": unknown algorithm '" + name +
                    "' (expected sb2o, rs or es)");
}

BoundMode parse_bound_mode(const std::string& name, const std::string& origin) {
  if (name == "conservative") return BoundMode::conservative;
  if (name == "literal_paper") return BoundMode::literal_paper;
  throw ConfigError(origin + ": unknown bound_mode '" + name +
                    "' (expected conservative or literal_paper)");
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& origin) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": bad value for '" + key + "': " + e.what());
  }
}

int worker_count() {
  const char* env = std::getenv("CBFTUNE_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == nullptr || *end != '\0' || n < 1 || n > 4096) {
    throw ConfigError("CBFTUNE_WORKERS must be a positive integer, got '" +
                      std::string(env) + "'");
  }
  return static_cast<int>(n);
}

json entry_to_json(const RunEntry& e) {
  json j;
  j["z_raw"] = std::vector<double>(e.z_raw.data(), e.z_raw.data() + e.z_raw.size());
  j["z_norm"] =
      std::vector<double>(e.z_norm.data(), e.z_norm.data() + e.z_norm.size());
  j["r"] = e.r;
  j["g"] = std::vector<double>(e.g.data(), e.g.data() + e.g.size());
  j["feasible"] = e.feasible;
  j["phase"] = to_string(e.phase);
  j["wall_time"] = e.wall_time;
  j["trace_id"] = e.trace_id;
  return j;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must hold numbers");
    v[static_cast<int>(i)] = j[i].get<double>();
  }
  return v;
}

RunEntry entry_from_json(const json& j, const std::string& origin) {
  RunEntry e;
  e.z_raw = vector_from_json(j.at("z_raw"), origin + ": z_raw");
  e.z_norm = vector_from_json(j.at("z_norm"), origin + ": z_norm");
  e.r = j.at("r").get<double>();
  e.g = vector_from_json(j.at("g"), origin + ": g");
  e.feasible = j.at("feasible").get<bool>();
  const std::string phase = j.at("phase").get<std::string>();
  if (phase == "init") {
    e.phase = Phase::init;
  } else if (phase == "suggest") {
    e.phase = Phase::suggest;
  } else {
    throw ConfigError(origin + ": unknown phase '" + phase + "'");
  }
  e.wall_time = j.at("wall_time").get<double>();
  e.trace_id = j.at("trace_id").get<std::string>();
  return e;
}

/// Runs the LHS init phase and hands the best feasible point to the
/// evolution strategy; the strategy's own start evaluation duplicates an
/// init entry and is dropped from the merged record.
RunRecord run_es_experiment(const OptProblem& problem,
                            const ExperimentConfig& cfg, std::uint64_t seed) {
  RunRecord record;
  record.algorithm = "es";
  record.seed = seed;
  const Eigen::MatrixXd design = lhs_init(problem.space, cfg.n_init, seed);
  Eigen::VectorXd best_z;
  double best_r = kInf;
  for (int i = 0; i < design.rows(); ++i) {
    const auto start_time = std::chrono::steady_clock::now();
    const EvalOutcome out = problem.evaluator(design.row(i).transpose(), seed);
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start_time;
    RunEntry entry;
    entry.z_raw = design.row(i).transpose();
    entry.z_norm = problem.space.to_normalized(entry.z_raw);
    entry.r = out.r;
    entry.g = out.g;
    entry.feasible = out.feasible;
    entry.phase = Phase::init;
    entry.wall_time = elapsed.count();
    entry.trace_id = out.trace_id;
    if (entry.feasible && entry.r < best_r) {
      best_r = entry.r;
      best_z = entry.z_raw;
    }
    record.push(std::move(entry));
  }
  if (best_z.size() == 0) {
    throw NoFeasibleStartError(
        "es: no feasible point in the initial design");
  }
  const RunRecord es_rec = run_one_plus_one_es(problem, best_z,
                                               cfg.sigma0, cfg.budget, seed);
  for (size_t i = 1; i < es_rec.entries.size(); ++i) {
    record.push(es_rec.entries[i]);
  }
  return record;
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::sb2o:
      return "sb2o";
    case Algorithm::rs:
      return "rs";
    case Algorithm::es:
      return "es";
  }
  return "unknown";
}

AcquisitionConfig ExperimentConfig::acquisition(int q) const {
  return AcquisitionConfig::with_uniform_betas(beta_objective, beta_constraint,
                                               q, barrier_weight, bound_mode);
}

ExperimentConfig parse_config_json(const std::string& text,
                                   const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": JSON parse error: " + e.what());
  }
  if (!j.is_object()) {
    throw ConfigError(origin + ": config root must be a JSON object");
  }

  static const std::vector<std::string> known = {
      "task",          "algorithm",       "n_init",     "budget",
      "repeats",       "base_seed",       "beta_objective",
      "beta_constraint", "barrier_weight", "bound_mode", "sigma0",
      "out_dir"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(origin + ": unknown config key '" + key + "'");
    }
  }
  if (!j.contains("task")) throw ConfigError(origin + ": missing key 'task'");
  if (!j.contains("algorithm")) {
    throw ConfigError(origin + ": missing key 'algorithm'");
  }

  ExperimentConfig cfg;
  cfg.task = get_field<std::string>(j, "task", origin);
  if (!is_known_task(cfg.task)) {
    throw ConfigError(origin + ": unknown task '" + cfg.task + "'");
  }
  cfg.algorithm =
      parse_algorithm(get_field<std::string>(j, "algorithm", origin), origin);
  if (j.contains("n_init")) cfg.n_init = get_field<int>(j, "n_init", origin);
  if (j.contains("budget")) cfg.budget = get_field<int>(j, "budget", origin);
  if (j.contains("repeats")) {
    cfg.repeats = get_field<int>(j, "repeats", origin);
  }
  if (j.contains("base_seed")) {
    cfg.base_seed = get_field<std::uint64_t>(j, "base_seed", origin);
  }
  if (j.contains("beta_objective")) {
    cfg.beta_objective = get_field<double>(j, "beta_objective", origin);
  }
  if (j.contains("beta_constraint")) {
    cfg.beta_constraint = get_field<double>(j, "beta_constraint", origin);
  }
  if (j.contains("barrier_weight")) {
    cfg.barrier_weight = get_field<double>(j, "barrier_weight", origin);
  }
  if (j.contains("bound_mode")) {
    cfg.bound_mode = parse_bound_mode(
        get_field<std::string>(j, "bound_mode", origin), origin);
  }
  if (j.contains("sigma0")) cfg.sigma0 = get_field<double>(j, "sigma0", origin);
  if (j.contains("out_dir")) {
    cfg.out_dir = get_field<std::string>(j, "out_dir", origin);
  }

  if (cfg.n_init < 1) throw ConfigError(origin + ": n_init must be >= 1");
  if (cfg.budget < 0) throw ConfigError(origin + ": budget must be >= 0");
  if (cfg.repeats < 1) throw ConfigError(origin + ": repeats must be >= 1");
  if (!(cfg.beta_objective >= 0.0)) {
    throw ConfigError(origin + ": beta_objective must be >= 0");
  }
  if (!(cfg.beta_constraint > 0.0)) {
    throw ConfigError(origin + ": beta_constraint must be > 0");
  }
  if (!(cfg.barrier_weight > 0.0)) {
    throw ConfigError(origin + ": barrier_weight must be > 0");
  }
  if (!(cfg.sigma0 > 0.0)) {
    throw ConfigError(origin + ": sigma0 must be > 0");
  }
  if (cfg.out_dir.empty()) {
    throw ConfigError(origin + ": out_dir must be nonempty");
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config file not found: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_json(buffer.str(), path);
}

void write_record(const RunRecord& record, const std::string& path) {
  json j;
  j["algorithm"] = record.algorithm;
  j["task"] = record.task;
  j["seed"] = record.seed;
  j["entries"] = json::array();
  for (const auto& e : record.entries) j["entries"].push_back(entry_to_json(e));
  // +infinity (before the first feasible entry) serializes as null
  j["best_feasible"] = json::array();
  for (const double b : record.best_feasible) {
    if (std::isfinite(b)) {
      j["best_feasible"].push_back(b);
    } else {
      j["best_feasible"].push_back(nullptr);
    }
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open record file " + path);
  out << j.dump(2) << "\n";
  if (!out.good()) throw std::runtime_error("write failed for " + path);
}

RunRecord read_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("record file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": JSON parse error: " + e.what());
  }
  RunRecord record;
  try {
    record.algorithm = j.at("algorithm").get<std::string>();
    record.task = j.at("task").get<std::string>();
    record.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& item : j.at("entries")) {
      record.entries.push_back(entry_from_json(item, path));
    }
    for (const auto& item : j.at("best_feasible")) {
      record.best_feasible.push_back(item.is_null() ? kInf
                                                    : item.get<double>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ": malformed record: " + e.what());
  }
  if (record.best_feasible.size() != record.entries.size()) {
    throw ConfigError(path + ": best_feasible length mismatch");
  }
  return record;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const TaskSpec task = make_task(cfg.task);
  const OptProblem problem = make_opt_problem(task);
  const AcquisitionConfig acq = cfg.acquisition(problem.q);
  const int workers = std::min(worker_count(), cfg.repeats);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory " + cfg.out_dir + ": " +
                      ec.message());
  }

  ExperimentResult result;
  result.record_paths.assign(cfg.repeats, "");
  result.failures.assign(cfg.repeats, "");
  std::atomic<int> next{0};
  std::atomic<int> completed{0};
  std::atomic<int> no_feasible{0};

  const auto worker = [&]() {
    for (int i = next.fetch_add(1); i < cfg.repeats; i = next.fetch_add(1)) {
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(i);
      try {
        RunRecord record;
        switch (cfg.algorithm) {
          case Algorithm::sb2o:
            record = run_safe_bo(problem, cfg.n_init, cfg.budget, acq, seed);
            break;
          case Algorithm::rs:
            record = run_random_search(problem, cfg.n_init, cfg.budget, seed);
            break;
          case Algorithm::es:
            record = run_es_experiment(problem, cfg, seed);
            break;
        }
        record.task = cfg.task;
        const fs::path path =
            fs::path(cfg.out_dir) / ("record_" + std::to_string(i) + ".json");
        write_record(record, path.string());
        result.record_paths[i] = path.string();
        completed.fetch_add(1);
      } catch (const NoFeasibleStartError& e) {
        result.failures[i] = e.what();
        no_feasible.fetch_add(1);
      } catch (const std::exception& e) {
        result.failures[i] = e.what();
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.completed = completed.load();
  result.no_feasible_start = no_feasible.load();

  json manifest;
  manifest["task"] = cfg.task;
  manifest["algorithm"] = to_string(cfg.algorithm);
  manifest["n_init"] = cfg.n_init;
  manifest["budget"] = cfg.budget;
  manifest["repeats"] = cfg.repeats;
  manifest["base_seed"] = cfg.base_seed;
  manifest["completed"] = result.completed;
  manifest["records"] = json::array();
  manifest["failures"] = json::array();
  for (int i = 0; i < cfg.repeats; ++i) {
    if (result.record_paths[i].empty()) {
      manifest["records"].push_back(nullptr);
      manifest["failures"].push_back(result.failures[i]);
    } else {
      manifest["records"].push_back(
          fs::path(result.record_paths[i]).filename().string());
      manifest["failures"].push_back(nullptr);
    }
  }
  const fs::path manifest_path = fs::path(cfg.out_dir) / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) {
    throw std::runtime_error("cannot open manifest " + manifest_path.string());
  }
  out << manifest.dump(2) << "\n";
  result.manifest_path = manifest_path.string();
  return result;
}

}  // namespace cbftune
