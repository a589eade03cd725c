#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbftune/acquisition.hpp"
#include "cbftune/optimizer.hpp"

namespace cbftune {

enum class Algorithm { sb2o, rs, es };
const char* to_string(Algorithm a);

/// Validated experiment description. The JSON schema is strict: unknown keys
/// are rejected by name.
struct ExperimentConfig {
  std::string task;
  Algorithm algorithm = Algorithm::sb2o;
  int n_init = 50;
  int budget = 100;
  int repeats = 20;
  std::uint64_t base_seed = 1;
  double beta_objective = 2.0;
  double beta_constraint = 3.0;
  double barrier_weight = 10.0;
  BoundMode bound_mode = BoundMode::conservative;
  double sigma0 = 1.0;  // (1+1)-ES initial step, normalized space
  std::string out_dir = "runs";

  AcquisitionConfig acquisition(int q) const;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text,
                                   const std::string& origin);

/// Outcome of one experiment: per-repetition record files plus a manifest.
struct ExperimentResult {
  std::vector<std::string> record_paths;  // empty string for failed repetition
  std::vector<std::string> failures;      // error text per failed repetition
  std::string manifest_path;
  int completed = 0;
  int no_feasible_start = 0;  // repetitions whose init phase had no feasible point
};

/// Executes cfg.repeats independent runs with seeds base_seed + i, one
/// worker per CBFTUNE_WORKERS (default 1). Each repetition writes
/// <out_dir>/record_<i>.json; the manifest is written after all workers
/// join. Repetitions without a feasible initial point are marked failed and
/// the rest proceed.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// JSON (de)serialization of run records, stable across reruns except for
/// wall-time fields.
void write_record(const RunRecord& record, const std::string& path);
RunRecord read_record(const std::string& path);

}  // namespace cbftune
