#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cbftune/acquisition.hpp"
#include "cbftune/errors.hpp"
#include "cbftune/gp.hpp"
#include "cbftune/optimizer.hpp"
#include "cbftune/search_space.hpp"
#include "cbftune/tasks.hpp"

using cbftune::AcquisitionConfig;
using cbftune::BoundMode;
using cbftune::Dataset;
using cbftune::EvalOutcome;
using cbftune::GpPosterior;
using cbftune::KernelHyperparams;
using cbftune::OptProblem;
using cbftune::Phase;
using cbftune::RunEntry;
using cbftune::RunRecord;
using cbftune::SearchDim;
using cbftune::SearchSpace;
using cbftune::SuggestResult;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SearchSpace unit_line() {
  return SearchSpace({{"z", 0.0, 1.0, false, cbftune::ParamCategory::control}});
}

/// 1-D synthetic problem: wiggly bowl with the right half forbidden.
OptProblem wiggly_problem() {
  OptProblem problem;
  problem.space = unit_line();
  problem.q = 1;
  problem.evaluator = [](const Eigen::VectorXd& z, std::uint64_t) {
    EvalOutcome out;
    out.r = (z[0] - 0.32) * (z[0] - 0.32) + 0.3 * std::sin(6.0 * z[0]);
    out.g = Eigen::VectorXd::Constant(1, z[0] - 0.85);
    out.feasible = out.g[0] <= 1e-9;
    out.trace_id = "";
    return out;
  };
  return problem;
}

RunEntry manual_entry(const OptProblem& problem, double z_value, Phase phase) {
  Eigen::VectorXd z(1);
  z << z_value;
  const EvalOutcome out = problem.evaluator(z, 0);
  RunEntry entry;
  entry.z_raw = z;
  entry.z_norm = problem.space.to_normalized(z);
  entry.r = out.r;
  entry.g = out.g;
  entry.feasible = out.feasible;
  entry.phase = phase;
  return entry;
}

/// Rebuilds the surrogates a suggest call fitted, from the hyperparameters it
/// reported back: deduplicate the history the same way (first occurrence kept,
/// sup-norm tie 1e-9), then condition fixed-hyperparameter posteriors.
struct RebuiltSurrogates {
  GpPosterior objective;
  std::vector<GpPosterior> constraints;
};

RebuiltSurrogates rebuild(const OptProblem& problem, const RunRecord& history,
                          const std::vector<KernelHyperparams>& fitted) {
  std::vector<int> kept;
  for (int i = 0; i < static_cast<int>(history.entries.size()); ++i) {
    bool duplicate = false;
    for (const int k : kept) {
      if ((history.entries[i].z_norm - history.entries[k].z_norm)
              .cwiseAbs()
              .maxCoeff() <= 1e-9) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(i);
  }
  const int n = static_cast<int>(kept.size());
  const int p = problem.space.dim();
  Eigen::MatrixXd inputs(n, p);
  Eigen::VectorXd r(n);
  Eigen::MatrixXd g(n, problem.q);
  for (int i = 0; i < n; ++i) {
    inputs.row(i) = history.entries[kept[i]].z_norm.transpose();
    r[i] = history.entries[kept[i]].r;
    for (int j = 0; j < problem.q; ++j) {
      g(i, j) = history.entries[kept[i]].g[j];
    }
  }
  RebuiltSurrogates out{
      GpPosterior::from_hyperparams({inputs, r}, fitted[0]), {}};
  for (int j = 0; j < problem.q; ++j) {
    out.constraints.push_back(GpPosterior::from_hyperparams(
        {inputs, g.col(j)}, fitted[static_cast<size_t>(j) + 1]));
  }
  return out;
}

double grid_min_acquisition(const RebuiltSurrogates& gps,
                            const AcquisitionConfig& cfg, int points) {
  std::vector<const GpPosterior*> cons;
  for (const auto& c : gps.constraints) cons.push_back(&c);
  double best = kInf;
  for (int i = 0; i <= points; ++i) {
    Eigen::VectorXd z(1);
    z << static_cast<double>(i) / points;
    best = std::min(best, cbftune::sb2o(gps.objective, cons, z, cfg));
  }
  return best;
}

}  // namespace

TEST_CASE("latin hypercube fills one stratum per quartile") {
  const SearchSpace space(
      {{"a", 0.0, 4.0, false, cbftune::ParamCategory::control}});
  const Eigen::MatrixXd raw = cbftune::lhs_init(space, 4, 2);
  REQUIRE(raw.rows() == 4);
  std::vector<double> unit;
  for (int i = 0; i < 4; ++i) {
    CHECK(space.contains(raw.row(i).transpose()));
    unit.push_back(space.to_normalized(raw.row(i).transpose())[0]);
  }
  std::sort(unit.begin(), unit.end());
  for (int i = 0; i < 4; ++i) {
    CHECK(unit[i] >= i / 4.0);
    CHECK(unit[i] < (i + 1) / 4.0);
  }
}

TEST_CASE("latin hypercube stratifies log dimensions by exponent") {
  const SearchSpace space(
      {{"s", 0.01, 100.0, true, cbftune::ParamCategory::safety}});
  const Eigen::MatrixXd raw = cbftune::lhs_init(space, 2, 7);
  REQUIRE(raw.rows() == 2);
  const double lo = std::min(raw(0, 0), raw(1, 0));
  const double hi = std::max(raw(0, 0), raw(1, 0));
  // one point per half of the exponent range [-2, 2]
  CHECK(lo >= 0.01);
  CHECK(lo < 1.0);
  CHECK(hi >= 1.0);
  CHECK(hi < 100.0);
}

TEST_CASE("latin hypercube is deterministic and validates its inputs") {
  const SearchSpace space(
      {{"a", 0.0, 1.0, false, cbftune::ParamCategory::control},
       {"b", 0.1, 10.0, true, cbftune::ParamCategory::safety}});
  const Eigen::MatrixXd one = cbftune::lhs_init(space, 9, 42);
  const Eigen::MatrixXd two = cbftune::lhs_init(space, 9, 42);
  CHECK((one - two).norm() == 0.0);
  const Eigen::MatrixXd other = cbftune::lhs_init(space, 9, 43);
  CHECK((one - other).norm() > 0.0);
  CHECK_THROWS_AS(cbftune::lhs_init(space, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(cbftune::lhs_init(SearchSpace{}, 3, 1),
                  std::invalid_argument);
}

TEST_CASE("suggesting from an all-infeasible history is refused") {
  const OptProblem problem = wiggly_problem();
  RunRecord history;
  history.push(manual_entry(problem, 0.9, Phase::init));
  history.push(manual_entry(problem, 0.95, Phase::init));
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 1, 10.0);
  CHECK_THROWS_AS(cbftune::suggest(problem, history, cfg, 5, 1, nullptr),
                  cbftune::NoFeasibleStartError);
  RunRecord empty;
  CHECK_THROWS_AS(cbftune::suggest(problem, empty, cfg, 5, 1, nullptr),
                  cbftune::NoFeasibleStartError);
}

TEST_CASE("suggest validates restart count and beta sizing") {
  const OptProblem problem = wiggly_problem();
  RunRecord history;
  history.push(manual_entry(problem, 0.2, Phase::init));
  history.push(manual_entry(problem, 0.6, Phase::init));
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 1, 10.0);
  CHECK_THROWS_AS(cbftune::suggest(problem, history, cfg, 0, 1, nullptr),
                  std::invalid_argument);
  const AcquisitionConfig wrong_q =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 2, 10.0);
  CHECK_THROWS_AS(cbftune::suggest(problem, history, wrong_q, 5, 1, nullptr),
                  std::invalid_argument);
}

TEST_CASE("suggestions track the dense-grid optimum of the acquisition") {
  OptProblem problem = wiggly_problem();
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 1, 10.0);
  RunRecord history;
  for (const double z : {0.05, 0.2, 0.35, 0.5, 0.65, 0.8}) {
    history.push(manual_entry(problem, z, Phase::init));
  }
  for (int round = 0; round < 3; ++round) {
    std::vector<KernelHyperparams> fitted;
    const SuggestResult res =
        cbftune::suggest(problem, history, cfg, 20, 100 + round, &fitted);
    REQUIRE_FALSE(res.fallback);
    REQUIRE(fitted.size() == 2);
    CHECK(problem.space.contains(res.z_raw));

    const RebuiltSurrogates gps = rebuild(problem, history, fitted);
    const double grid_best = grid_min_acquisition(gps, cfg, 20000);
    CHECK(std::abs(res.acquisition - grid_best) <= 1e-3);

    // conservative sign convention: the suggestion itself carries a strictly
    // negative constraint bound under the surrogate
    const double bound = cbftune::pessimistic_bound(
        gps.constraints[0], problem.space.to_normalized(res.z_raw), 2.0,
        BoundMode::conservative);
    CHECK(bound < 0.0);

    history.push(
        manual_entry(problem, res.z_raw[0], Phase::suggest));
  }
}

TEST_CASE("without constraints the acquisition is the plain confidence bound") {
  OptProblem problem = wiggly_problem();
  problem.q = 0;
  problem.evaluator = [](const Eigen::VectorXd& z, std::uint64_t) {
    EvalOutcome out;
    out.r = (z[0] - 0.6) * (z[0] - 0.6);
    out.g = Eigen::VectorXd(0);
    out.feasible = true;
    return out;
  };
  RunRecord history;
  for (const double z : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    history.push(manual_entry(problem, z, Phase::init));
  }
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 0, 10.0);
  std::vector<KernelHyperparams> fitted;
  const SuggestResult res =
      cbftune::suggest(problem, history, cfg, 20, 9, &fitted);
  REQUIRE_FALSE(res.fallback);
  REQUIRE(fitted.size() == 1);
  const RebuiltSurrogates gps = rebuild(problem, history, fitted);
  // the reported acquisition is the lower confidence bound at the suggestion
  const Eigen::VectorXd z_norm = problem.space.to_normalized(res.z_raw);
  CHECK(res.acquisition ==
        doctest::Approx(cbftune::lcb(gps.objective, z_norm, 2.0))
            .epsilon(1e-6));
  double grid_best = kInf;
  for (int i = 0; i <= 20000; ++i) {
    Eigen::VectorXd z(1);
    z << i / 20000.0;
    grid_best = std::min(grid_best, cbftune::lcb(gps.objective, z, 2.0));
  }
  CHECK(std::abs(res.acquisition - grid_best) <= 1e-3);
}

TEST_CASE("an oversized exploration weight falls back to the incumbent") {
  const OptProblem problem = wiggly_problem();
  RunRecord history;
  for (const double z : {0.1, 0.4, 0.7}) {
    history.push(manual_entry(problem, z, Phase::init));
  }
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 1e6, 1, 10.0);
  const SuggestResult res = cbftune::suggest(problem, history, cfg, 10, 5,
                                             nullptr);
  CHECK(res.fallback);
  CHECK(std::isinf(res.acquisition));
  // the fallback is the best feasible observation
  const RunEntry* best = nullptr;
  for (const auto& e : history.entries) {
    if (e.feasible && (best == nullptr || e.r < best->r)) best = &e;
  }
  REQUIRE(best != nullptr);
  CHECK((res.z_raw - best->z_raw).norm() == 0.0);
}

TEST_CASE("zero budget stops after the space-filling stage") {
  const OptProblem problem = wiggly_problem();
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 1, 10.0);
  const RunRecord record = cbftune::run_safe_bo(problem, 7, 0, cfg, 11);
  CHECK(record.entries.size() == 7);
  for (const auto& e : record.entries) {
    CHECK(e.phase == Phase::init);
  }
  CHECK(record.algorithm == "sb2o");
  CHECK(record.seed == 11);
}

TEST_CASE("optimization runs keep their books straight") {
  const OptProblem problem = wiggly_problem();
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 1, 10.0);
  const RunRecord record = cbftune::run_safe_bo(problem, 6, 5, cfg, 21);
  REQUIRE(record.entries.size() == 11);
  REQUIRE(record.best_feasible.size() == 11);
  double expected = kInf;
  for (size_t i = 0; i < record.entries.size(); ++i) {
    const auto& e = record.entries[i];
    CHECK(e.phase == (i < 6 ? Phase::init : Phase::suggest));
    CHECK(problem.space.contains(e.z_raw));
    // normalized coordinates round-trip against the space definition
    CHECK((problem.space.to_normalized(e.z_raw) - e.z_norm)
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    if (e.feasible) expected = std::min(expected, e.r);
    CHECK(record.best_feasible[i] == expected);
    if (i > 0) {
      CHECK(record.best_feasible[i] <= record.best_feasible[i - 1]);
    }
    CHECK(e.wall_time >= 0.0);
  }
}

TEST_CASE("repeated runs with one seed are identical apart from timing") {
  const OptProblem problem = wiggly_problem();
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 1, 10.0);
  const RunRecord a = cbftune::run_safe_bo(problem, 5, 4, cfg, 33);
  const RunRecord b = cbftune::run_safe_bo(problem, 5, 4, cfg, 33);
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t i = 0; i < a.entries.size(); ++i) {
    CHECK((a.entries[i].z_raw - b.entries[i].z_raw).norm() == 0.0);
    CHECK(a.entries[i].r == b.entries[i].r);
    CHECK(a.entries[i].feasible == b.entries[i].feasible);
  }
  CHECK(a.best_feasible == b.best_feasible);
}

TEST_CASE("the tuner recovers the known double-integrator optimum") {
  const OptProblem problem =
      cbftune::make_opt_problem(cbftune::make_task("double_integrator"));
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 0, 10.0);
  const RunRecord record = cbftune::run_safe_bo(problem, 5, 15, cfg, 3);
  const Eigen::Vector2d optimum(-1.0, -1.7320508);
  double best_r = kInf;
  Eigen::VectorXd best_z;
  for (const auto& e : record.entries) {
    if (e.feasible && e.r < best_r) {
      best_r = e.r;
      best_z = e.z_raw;
    }
  }
  REQUIRE(best_z.size() == 2);
  CHECK((best_z - optimum).norm() <= 0.3);
}

TEST_CASE("the constrained tuner improves while honoring the state box") {
  const OptProblem problem =
      cbftune::make_opt_problem(cbftune::make_task("double_integrator_box"));
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 1, 10.0);
  const RunRecord record = cbftune::run_safe_bo(problem, 10, 20, cfg, 1);
  REQUIRE(record.entries.size() == 30);
  CHECK(record.best_feasible.back() < record.best_feasible[9]);
  const Phase suggest_phase = Phase::suggest;
  CHECK(cbftune::feasibility_rate(record, &suggest_phase) >= 0.9);
  double best_r = kInf;
  Eigen::VectorXd best_z;
  for (const auto& e : record.entries) {
    if (e.feasible && e.r < best_r) {
      best_r = e.r;
      best_z = e.z_raw;
    }
  }
  REQUIRE(best_z.size() == 2);
  CHECK((best_z - Eigen::Vector2d(-1.004, -2.324)).norm() <= 0.6);
}

TEST_CASE("random search is a flat design with phase bookkeeping") {
  const OptProblem problem = wiggly_problem();
  const RunRecord record = cbftune::run_random_search(problem, 4, 6, 17);
  REQUIRE(record.entries.size() == 10);
  CHECK(record.algorithm == "rs");
  const Eigen::MatrixXd design =
      cbftune::lhs_init(problem.space, 10, 17);
  for (int i = 0; i < 10; ++i) {
    CHECK((record.entries[i].z_raw - design.row(i).transpose()).norm() == 0.0);
    CHECK(record.entries[i].phase == (i < 4 ? Phase::init : Phase::suggest));
  }
  const RunRecord again = cbftune::run_random_search(problem, 4, 6, 17);
  for (int i = 0; i < 10; ++i) {
    CHECK((record.entries[i].z_raw - again.entries[i].z_raw).norm() == 0.0);
  }
}

TEST_CASE("guided suggestions stay feasible more often than blind sampling") {
  OptProblem problem;
  problem.space = unit_line();
  problem.q = 1;
  problem.evaluator = [](const Eigen::VectorXd& z, std::uint64_t) {
    EvalOutcome out;
    out.r = z[0];
    out.g = Eigen::VectorXd::Constant(1, z[0] - 0.5);
    out.feasible = out.g[0] <= 1e-9;
    return out;
  };
  const AcquisitionConfig cfg =
      AcquisitionConfig::with_uniform_betas(2.0, 2.0, 1, 10.0);
  const Phase suggest_phase = Phase::suggest;
  std::vector<double> bo_rates, rs_rates;
  for (std::uint64_t seed = 1; seed <= 9; ++seed) {
    const RunRecord bo = cbftune::run_safe_bo(problem, 8, 10, cfg, seed);
    const RunRecord rs = cbftune::run_random_search(problem, 8, 10, seed);
    bo_rates.push_back(cbftune::feasibility_rate(bo, &suggest_phase));
    rs_rates.push_back(cbftune::feasibility_rate(rs, &suggest_phase));
  }
  std::sort(bo_rates.begin(), bo_rates.end());
  std::sort(rs_rates.begin(), rs_rates.end());
  CHECK(bo_rates[4] > rs_rates[4]);
}

TEST_CASE("the evolution strategy contracts onto a 1-D sphere optimum") {
  OptProblem problem;
  problem.space =
      SearchSpace({{"z", -2.0, 2.0, false, cbftune::ParamCategory::control}});
  problem.q = 0;
  problem.evaluator = [](const Eigen::VectorXd& z, std::uint64_t) {
    EvalOutcome out;
    out.r = z[0] * z[0];
    out.g = Eigen::VectorXd(0);
    out.feasible = true;
    return out;
  };
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(1, 1.0);
  const RunRecord record =
      cbftune::run_one_plus_one_es(problem, start, 0.3, 50, 5);
  REQUIRE(record.entries.size() == 51);
  CHECK(record.algorithm == "es");
  CHECK(record.entries.front().phase == Phase::init);
  CHECK(record.entries.front().r == 1.0);
  CHECK(record.best_feasible.back() <= 1e-2);

  const RunRecord again =
      cbftune::run_one_plus_one_es(problem, start, 0.3, 50, 5);
  for (size_t i = 0; i < record.entries.size(); ++i) {
    CHECK((record.entries[i].z_raw - again.entries[i].z_raw).norm() == 0.0);
  }
}

TEST_CASE("rejected offspring never displace the parent") {
  OptProblem problem;
  problem.space = unit_line();
  problem.q = 1;
  const double start_value = 0.5;
  problem.evaluator = [start_value](const Eigen::VectorXd& z, std::uint64_t) {
    EvalOutcome out;
    out.r = z[0];
    const bool at_start = std::abs(z[0] - start_value) <= 1e-12;
    out.g = Eigen::VectorXd::Constant(1, at_start ? -1.0 : 1.0);
    out.feasible = at_start;
    return out;
  };
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(1, start_value);
  const RunRecord record =
      cbftune::run_one_plus_one_es(problem, start, 0.2, 30, 7);
  REQUIRE(record.entries.size() == 31);
  CHECK(record.best_feasible.back() == start_value);
  const Phase suggest_phase = Phase::suggest;
  CHECK(cbftune::feasibility_rate(record, &suggest_phase) == 0.0);
}

TEST_CASE("the evolution strategy refuses an unsafe starting point") {
  OptProblem problem;
  problem.space = unit_line();
  problem.q = 1;
  problem.evaluator = [](const Eigen::VectorXd& z, std::uint64_t) {
    EvalOutcome out;
    out.r = z[0];
    out.g = Eigen::VectorXd::Constant(1, 1.0);
    out.feasible = false;
    return out;
  };
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(1, 0.5);
  CHECK_THROWS_AS(cbftune::run_one_plus_one_es(problem, start, 0.2, 10, 1),
                  std::invalid_argument);
  // parameter validation
  OptProblem ok = wiggly_problem();
  const Eigen::VectorXd z0 = Eigen::VectorXd::Constant(1, 0.2);
  CHECK_THROWS_AS(cbftune::run_one_plus_one_es(ok, z0, 0.0, 10, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(cbftune::run_one_plus_one_es(ok, z0, 0.2, -1, 1),
                  std::invalid_argument);
}

TEST_CASE("feasibility accounting by phase") {
  RunRecord record;
  const OptProblem problem = wiggly_problem();
  record.push(manual_entry(problem, 0.2, Phase::init));    // feasible
  record.push(manual_entry(problem, 0.9, Phase::init));    // infeasible
  record.push(manual_entry(problem, 0.3, Phase::suggest));  // feasible
  record.push(manual_entry(problem, 0.4, Phase::suggest));  // feasible
  CHECK(cbftune::feasibility_rate(record, nullptr) == 0.75);
  const Phase init_phase = Phase::init;
  CHECK(cbftune::feasibility_rate(record, &init_phase) == 0.5);
  const Phase suggest_phase = Phase::suggest;
  CHECK(cbftune::feasibility_rate(record, &suggest_phase) == 1.0);

  RunRecord init_only;
  init_only.push(manual_entry(problem, 0.2, Phase::init));
  CHECK(cbftune::feasibility_rate(init_only, nullptr) == 1.0);
  CHECK_THROWS_AS(cbftune::feasibility_rate(init_only, &suggest_phase),
                  std::invalid_argument);
  RunRecord none;
  CHECK_THROWS_AS(cbftune::feasibility_rate(none, nullptr),
                  std::invalid_argument);

  CHECK(std::strcmp(cbftune::to_string(Phase::init), "init") == 0);
  CHECK(std::strcmp(cbftune::to_string(Phase::suggest), "suggest") == 0);
}
