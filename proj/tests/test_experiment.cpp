#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbftune/errors.hpp"
#include "cbftune/experiment.hpp"
#include "cbftune/optimizer.hpp"
#include "cbftune/tasks.hpp"

namespace fs = std::filesystem;

using cbftune::Algorithm;
using cbftune::BoundMode;
using cbftune::ConfigError;
using cbftune::ExperimentConfig;
using cbftune::ExperimentResult;
using cbftune::Phase;
using cbftune::RunEntry;
using cbftune::RunRecord;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / tag;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& name) const {
    return (path / name).string();
  }
};

struct WorkersEnv {
  explicit WorkersEnv(const char* value) {
    setenv("CBFTUNE_WORKERS", value, 1);
  }
  ~WorkersEnv() { unsetenv("CBFTUNE_WORKERS"); }
};

std::string config_error_text(const std::string& json_text) {
  try {
    cbftune::parse_config_json(json_text, "test");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

/// Drops the timing fields, which legitimately differ between reruns.
nlohmann::json strip_wall_time(nlohmann::json j) {
  for (auto& e : j["entries"]) e.erase("wall_time");
  return j;
}

RunRecord sample_record() {
  RunRecord record;
  record.algorithm = "sb2o";
  record.task = "point_mass";
  record.seed = 9;
  for (int i = 0; i < 4; ++i) {
    RunEntry e;
    e.z_raw = Eigen::Vector2d(0.5 + i, 1.5);
    e.z_norm = Eigen::Vector2d(0.1 * i, 0.3);
    e.r = 10.0 - i;
    e.g = Eigen::VectorXd::Constant(1, i < 2 ? 1.0 : -1.0);
    e.feasible = i >= 2;  // first two entries leave best_feasible infinite
    e.phase = i < 3 ? Phase::init : Phase::suggest;
    e.wall_time = 0.25 * i;
    e.trace_id = i == 0 ? "" : "ep-000000000000000" + std::to_string(i);
    record.push(std::move(e));
  }
  return record;
}

}  // namespace

TEST_CASE("a minimal config picks up the documented defaults") {
  const ExperimentConfig cfg = cbftune::parse_config_json(
      R"({"task": "point_mass", "algorithm": "sb2o"})", "test");
  CHECK(cfg.task == "point_mass");
  CHECK(cfg.algorithm == Algorithm::sb2o);
  CHECK(cfg.n_init == 50);
  CHECK(cfg.budget == 100);
  CHECK(cfg.repeats == 20);
  CHECK(cfg.base_seed == 1);
  CHECK(cfg.beta_objective == 2.0);
  CHECK(cfg.beta_constraint == 3.0);
  CHECK(cfg.barrier_weight == 10.0);
  CHECK(cfg.bound_mode == BoundMode::conservative);
  CHECK(cfg.sigma0 == 1.0);
  CHECK(cfg.out_dir == "runs");
}

TEST_CASE("every field can be overridden") {
  const ExperimentConfig cfg = cbftune::parse_config_json(
      R"({"task": "acc", "algorithm": "es", "n_init": 5, "budget": 7,
          "repeats": 3, "base_seed": 42, "beta_objective": 1.5,
          "beta_constraint": 2.5, "barrier_weight": 50.0,
          "bound_mode": "literal_paper", "sigma0": 0.4, "out_dir": "x"})",
      "test");
  CHECK(cfg.task == "acc");
  CHECK(cfg.algorithm == Algorithm::es);
  CHECK(cfg.n_init == 5);
  CHECK(cfg.budget == 7);
  CHECK(cfg.repeats == 3);
  CHECK(cfg.base_seed == 42);
  CHECK(cfg.beta_objective == 1.5);
  CHECK(cfg.beta_constraint == 2.5);
  CHECK(cfg.barrier_weight == 50.0);
  CHECK(cfg.bound_mode == BoundMode::literal_paper);
  CHECK(cfg.sigma0 == 0.4);
  CHECK(cfg.out_dir == "x");

  const cbftune::AcquisitionConfig acq = cfg.acquisition(2);
  CHECK(acq.beta_objective == 1.5);
  REQUIRE(acq.beta_constraints.size() == 2);
  CHECK(acq.beta_constraints[0] == 2.5);
  CHECK(acq.beta_constraints[1] == 2.5);
  CHECK(acq.barrier_weight == 50.0);
  CHECK(acq.bound_mode == BoundMode::literal_paper);
}

TEST_CASE("unknown keys are rejected by name") {
  const std::string msg = config_error_text(
      R"({"task": "point_mass", "algorithm": "sb2o", "budgett": 5})");
  CHECK(msg.find("budgett") != std::string::npos);
}

TEST_CASE("config validation catches each bad field") {
  const char* bad[] = {
      R"({"algorithm": "sb2o"})",                                  // no task
      R"({"task": "point_mass"})",                                 // no algo
      R"({"task": "warp_drive", "algorithm": "sb2o"})",            // bad task
      R"({"task": "point_mass", "algorithm": "gradient"})",        // bad algo
      R"({"task": "point_mass", "algorithm": "sb2o", "n_init": 0})",
      R"({"task": "point_mass", "algorithm": "sb2o", "budget": -1})",
      R"({"task": "point_mass", "algorithm": "sb2o", "repeats": 0})",
      R"({"task": "point_mass", "algorithm": "sb2o", "beta_objective": -1})",
      R"({"task": "point_mass", "algorithm": "sb2o", "beta_constraint": 0})",
      R"({"task": "point_mass", "algorithm": "sb2o", "barrier_weight": 0})",
      R"({"task": "point_mass", "algorithm": "sb2o", "sigma0": 0})",
      R"({"task": "point_mass", "algorithm": "sb2o", "out_dir": ""})",
      R"({"task": "point_mass", "algorithm": "sb2o",
          "bound_mode": "hopeful"})",
      R"({"task": "point_mass", "algorithm": "sb2o", "n_init": "fifty"})",
      R"([1, 2, 3])",
      R"(not json)",
  };
  for (const char* text : bad) {
    CHECK_THROWS_AS(cbftune::parse_config_json(text, "test"), ConfigError);
  }
  // type errors name the offending key
  const std::string msg = config_error_text(
      R"({"task": "point_mass", "algorithm": "sb2o", "n_init": "fifty"})");
  CHECK(msg.find("n_init") != std::string::npos);
}

TEST_CASE("configs load from disk and missing files are config errors") {
  TempDir tmp("cbftune_experiment_cfg");
  const std::string path = tmp.str("exp.json");
  std::ofstream(path)
      << R"({"task": "double_integrator", "algorithm": "rs", "repeats": 2})";
  const ExperimentConfig cfg = cbftune::parse_config(path);
  CHECK(cfg.task == "double_integrator");
  CHECK(cfg.algorithm == Algorithm::rs);
  CHECK(cfg.repeats == 2);
  CHECK_THROWS_AS(cbftune::parse_config(tmp.str("nope.json")), ConfigError);
}

TEST_CASE("records survive a write/read round trip exactly") {
  const RunRecord record = sample_record();
  TempDir tmp("cbftune_experiment_roundtrip");
  const std::string path = tmp.str("record_0.json");
  cbftune::write_record(record, path);
  const RunRecord loaded = cbftune::read_record(path);

  CHECK(loaded.algorithm == record.algorithm);
  CHECK(loaded.task == record.task);
  CHECK(loaded.seed == record.seed);
  REQUIRE(loaded.entries.size() == record.entries.size());
  for (size_t i = 0; i < record.entries.size(); ++i) {
    const RunEntry& want = record.entries[i];
    const RunEntry& got = loaded.entries[i];
    CHECK((got.z_raw - want.z_raw).norm() == 0.0);
    CHECK((got.z_norm - want.z_norm).norm() == 0.0);
    CHECK(got.r == want.r);
    CHECK((got.g - want.g).norm() == 0.0);
    CHECK(got.feasible == want.feasible);
    CHECK(got.phase == want.phase);
    CHECK(got.wall_time == want.wall_time);
    CHECK(got.trace_id == want.trace_id);
  }
  // the infinite prefix of best_feasible round-trips through null
  REQUIRE(loaded.best_feasible.size() == 4);
  CHECK(std::isinf(loaded.best_feasible[0]));
  CHECK(std::isinf(loaded.best_feasible[1]));
  CHECK(loaded.best_feasible[2] == 8.0);
  CHECK(loaded.best_feasible[3] == 7.0);
}

TEST_CASE("malformed record files are reported as config errors") {
  TempDir tmp("cbftune_experiment_badrecord");
  CHECK_THROWS_AS(cbftune::read_record(tmp.str("missing.json")), ConfigError);

  const std::string garbled = tmp.str("garbled.json");
  std::ofstream(garbled) << "{not json";
  CHECK_THROWS_AS(cbftune::read_record(garbled), ConfigError);

  const RunRecord record = sample_record();
  const std::string path = tmp.str("record_0.json");
  cbftune::write_record(record, path);
  nlohmann::json j = load_json(path);

  nlohmann::json missing = j;
  missing.erase("seed");
  std::ofstream(tmp.str("missing_field.json")) << missing.dump();
  CHECK_THROWS_AS(cbftune::read_record(tmp.str("missing_field.json")),
                  ConfigError);

  nlohmann::json bad_phase = j;
  bad_phase["entries"][0]["phase"] = "warmup";
  std::ofstream(tmp.str("bad_phase.json")) << bad_phase.dump();
  CHECK_THROWS_AS(cbftune::read_record(tmp.str("bad_phase.json")),
                  ConfigError);

  nlohmann::json short_best = j;
  short_best["best_feasible"].erase(0);
  std::ofstream(tmp.str("short_best.json")) << short_best.dump();
  CHECK_THROWS_AS(cbftune::read_record(tmp.str("short_best.json")),
                  ConfigError);
}

TEST_CASE("an experiment writes one record per repetition plus a manifest") {
  TempDir tmp("cbftune_experiment_run");
  ExperimentConfig cfg;
  cfg.task = "double_integrator";
  cfg.algorithm = Algorithm::sb2o;
  cfg.n_init = 3;
  cfg.budget = 2;
  cfg.repeats = 2;
  cfg.base_seed = 5;
  cfg.out_dir = tmp.str("runs/deep/dir");

  const ExperimentResult result = cbftune::run_experiment(cfg);
  CHECK(result.completed == 2);
  CHECK(result.no_feasible_start == 0);
  REQUIRE(result.record_paths.size() == 2);

  for (int i = 0; i < 2; ++i) {
    const RunRecord record = cbftune::read_record(result.record_paths[i]);
    CHECK(record.task == "double_integrator");
    CHECK(record.algorithm == "sb2o");
    CHECK(record.seed == 5 + static_cast<std::uint64_t>(i));
    CHECK(record.entries.size() == 5);
  }

  const nlohmann::json manifest = load_json(result.manifest_path);
  CHECK(manifest["task"] == "double_integrator");
  CHECK(manifest["algorithm"] == "sb2o");
  CHECK(manifest["n_init"] == 3);
  CHECK(manifest["budget"] == 2);
  CHECK(manifest["repeats"] == 2);
  CHECK(manifest["base_seed"] == 5);
  CHECK(manifest["completed"] == 2);
  CHECK(manifest["records"][0] == "record_0.json");
  CHECK(manifest["records"][1] == "record_1.json");
  CHECK(manifest["failures"][0].is_null());
  CHECK(manifest["failures"][1].is_null());
}

TEST_CASE("reruns and parallel runs differ only in wall time") {
  TempDir tmp("cbftune_experiment_repro");
  ExperimentConfig cfg;
  cfg.task = "double_integrator";
  cfg.algorithm = Algorithm::sb2o;
  cfg.n_init = 3;
  cfg.budget = 2;
  cfg.repeats = 2;
  cfg.base_seed = 7;

  cfg.out_dir = tmp.str("serial");
  cbftune::run_experiment(cfg);
  cfg.out_dir = tmp.str("again");
  cbftune::run_experiment(cfg);
  {
    WorkersEnv workers("2");
    cfg.out_dir = tmp.str("parallel");
    cbftune::run_experiment(cfg);
  }

  for (const char* name : {"record_0.json", "record_1.json"}) {
    const nlohmann::json serial =
        strip_wall_time(load_json(tmp.str(std::string("serial/") + name)));
    const nlohmann::json again =
        strip_wall_time(load_json(tmp.str(std::string("again/") + name)));
    const nlohmann::json parallel =
        strip_wall_time(load_json(tmp.str(std::string("parallel/") + name)));
    CHECK(serial == again);
    CHECK(serial == parallel);
  }
}

TEST_CASE("worker counts outside 1..4096 are rejected") {
  ExperimentConfig cfg;
  cfg.task = "double_integrator";
  cfg.algorithm = Algorithm::rs;
  cfg.n_init = 1;
  cfg.budget = 0;
  cfg.repeats = 1;
  TempDir tmp("cbftune_experiment_workers");
  cfg.out_dir = tmp.str("runs");
  for (const char* value : {"0", "-3", "abc", "2x", "4097"}) {
    WorkersEnv workers(value);
    CHECK_THROWS_AS(cbftune::run_experiment(cfg), ConfigError);
  }
  {
    WorkersEnv workers("");  // empty counts as unset
    CHECK(cbftune::run_experiment(cfg).completed == 1);
  }
}

TEST_CASE("an unknown task in a hand-built config fails fast") {
  ExperimentConfig cfg;
  cfg.task = "warp_drive";
  cfg.algorithm = Algorithm::rs;
  CHECK_THROWS_AS(cbftune::run_experiment(cfg), ConfigError);
}

TEST_CASE("the evolution-strategy runner merges init and search phases") {
  TempDir tmp("cbftune_experiment_es");
  ExperimentConfig cfg;
  cfg.task = "double_integrator";
  cfg.algorithm = Algorithm::es;
  cfg.n_init = 4;
  cfg.budget = 3;
  cfg.repeats = 1;
  cfg.base_seed = 11;
  cfg.sigma0 = 0.2;
  cfg.out_dir = tmp.str("runs");

  const ExperimentResult result = cbftune::run_experiment(cfg);
  REQUIRE(result.completed == 1);
  const RunRecord record = cbftune::read_record(result.record_paths[0]);
  CHECK(record.algorithm == "es");
  REQUIRE(record.entries.size() == 7);
  for (size_t i = 0; i < record.entries.size(); ++i) {
    CHECK(record.entries[i].phase == (i < 4 ? Phase::init : Phase::suggest));
  }
  // the strategy starts from the best feasible design point, which must not
  // be double-counted in the merged record
  for (size_t i = 4; i < record.entries.size(); ++i) {
    for (size_t k = 0; k < 4; ++k) {
      CHECK((record.entries[i].z_raw - record.entries[k].z_raw).norm() > 0.0);
    }
  }
}

TEST_CASE("repetitions without a safe start fail soft and are logged") {
  // probe for adjacent seeds where a two-point design is first all
  // infeasible and then not: the tracking deadline makes slow gains unsafe
  const cbftune::TaskSpec task = cbftune::make_task("point_mass");
  const cbftune::OptProblem problem = cbftune::make_opt_problem(task);
  auto any_feasible = [&](std::uint64_t seed) {
    const Eigen::MatrixXd design = cbftune::lhs_init(problem.space, 2, seed);
    for (int i = 0; i < design.rows(); ++i) {
      if (problem.evaluator(design.row(i).transpose(), seed).feasible) {
        return true;
      }
    }
    return false;
  };
  std::uint64_t base_seed = 0;
  for (std::uint64_t s = 1; s < 60; ++s) {
    if (!any_feasible(s) && any_feasible(s + 1)) {
      base_seed = s;
      break;
    }
  }
  REQUIRE(base_seed != 0);

  TempDir tmp("cbftune_experiment_partial");
  ExperimentConfig cfg;
  cfg.task = "point_mass";
  cfg.algorithm = Algorithm::sb2o;
  cfg.n_init = 2;
  cfg.budget = 1;
  cfg.repeats = 2;
  cfg.base_seed = base_seed;
  cfg.out_dir = tmp.str("runs");

  const ExperimentResult result = cbftune::run_experiment(cfg);
  CHECK(result.completed == 1);
  CHECK(result.no_feasible_start == 1);
  CHECK(result.record_paths[0].empty());
  CHECK_FALSE(result.record_paths[1].empty());
  CHECK_FALSE(result.failures[0].empty());

  const nlohmann::json manifest = load_json(result.manifest_path);
  CHECK(manifest["completed"] == 1);
  CHECK(manifest["records"][0].is_null());
  CHECK(manifest["records"][1] == "record_1.json");
  CHECK(manifest["failures"][0].is_string());
  CHECK(manifest["failures"][1].is_null());
}
