#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cbftune/acquisition.hpp"
#include "cbftune/search_space.hpp"
#include "cbftune/tasks.hpp"

namespace cbftune {

/// Black-box tuning problem: a deterministic evaluator over a bounded,
/// possibly log-scaled search space with q continuous constraints.
struct OptProblem {
  std::function<EvalOutcome(const Eigen::VectorXd&, std::uint64_t)> evaluator;
  SearchSpace space;
  int q = 0;
};

OptProblem make_opt_problem(const TaskSpec& task);

enum class Phase { init, suggest };
const char* to_string(Phase p);

struct RunEntry {
  Eigen::VectorXd z_raw;
  Eigen::VectorXd z_norm;
  double r = 0.0;
  Eigen::VectorXd g;
  bool feasible = false;
  Phase phase = Phase::init;
  double wall_time = 0.0;  // seconds spent on this evaluation
  std::string trace_id;
};

/// One optimization run. best_feasible[i] is the cumulative minimum of r
/// over feasible entries 0..i (+infinity before the first feasible entry);
/// it is nonincreasing by construction.
struct RunRecord {
  std::string algorithm;
  std::string task;
  std::uint64_t seed = 0;
  std::vector<RunEntry> entries;
  std::vector<double> best_feasible;

  void push(RunEntry entry);
};

/// Latin hypercube design: n points stratified per dimension in normalized
/// space (log dims stratify the exponent), returned in raw coordinates as
/// rows. Deterministic given seed.
Eigen::MatrixXd lhs_init(const SearchSpace& space, int n, std::uint64_t seed);

struct SuggestResult {
  Eigen::VectorXd z_raw;
  double acquisition = 0.0;
  bool fallback = false;  // no finite-barrier start; best observed returned
};

/// Fits GPs to the objective and each constraint over the history, then
/// minimizes the barrier acquisition by multi-start projected gradient
/// descent started from the feasible evaluated points and LHS candidates
/// with finite barrier. Throws NoFeasibleStartError when the history has no
/// feasible entry. When given, `warm_io` supplies warm-start hyperparameters
/// for the 1 + q surrogate fits and receives the fitted ones back.
SuggestResult suggest(const OptProblem& problem, const RunRecord& history,
                      const AcquisitionConfig& cfg, int restarts,
                      std::uint64_t seed,
                      std::vector<KernelHyperparams>* warm_io = nullptr);

/// Barrier-acquisition loop: n_init LHS evaluations, then `budget` rounds of
/// suggest/evaluate with surrogates refit each round.
RunRecord run_safe_bo(const OptProblem& problem, int n_init, int budget,
                      const AcquisitionConfig& cfg, std::uint64_t seed);

/// Baseline: n_init + budget LHS evaluations.
RunRecord run_random_search(const OptProblem& problem, int n_init, int budget,
                            std::uint64_t seed);

/// Baseline: (1+1)-ES in normalized space with 1/5th-success step control
/// (factor 1.5^(1/4) up on success, 1.5^(-1/4) down otherwise). Infeasible
/// offspring consume budget and are never accepted. `start` must be
/// feasible.
RunRecord run_one_plus_one_es(const OptProblem& problem,
                              const Eigen::VectorXd& start, double sigma0,
                              int budget, std::uint64_t seed);

/// Fraction of entries with a true feasible flag, optionally restricted to
/// one phase. Throws std::invalid_argument when the filter leaves nothing.
double feasibility_rate(const RunRecord& record, const Phase* phase_filter);

}  // namespace cbftune
