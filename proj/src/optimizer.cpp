#include "cbftune/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "cbftune/errors.hpp"
#include "cbftune/rng.hpp"

namespace cbftune {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDescentIters = 200;
constexpr double kGradTol = 1e-6;
constexpr int kFitRestartsCold = 4;
constexpr int kFitRestartsWarm = 2;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

Eigen::VectorXd clamp_unit(Eigen::VectorXd x) {
  return x.cwiseMax(0.0).cwiseMin(1.0);
}

/// Latin hypercube in the unit box: one sample per stratum per dimension.
Eigen::MatrixXd lhs_unit(int n, int p, Rng* rng) {
  Eigen::MatrixXd unit(n, p);
  std::vector<int> perm(n);
  for (int j = 0; j < p; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng->uniform_int(i + 1)]);
    }
    for (int i = 0; i < n; ++i) {
      unit(i, j) = (perm[i] + rng->uniform()) / n;
    }
  }
  return unit;
}

RunEntry make_entry(const SearchSpace& space, const Eigen::VectorXd& z_raw,
                    const EvalOutcome& out, Phase phase, double wall_time) {
  RunEntry entry;
  entry.z_raw = z_raw;
  entry.z_norm = space.to_normalized(z_raw);
  entry.r = out.r;
  entry.g = out.g;
  entry.feasible = out.feasible;
  entry.phase = phase;
  entry.wall_time = wall_time;
  entry.trace_id = out.trace_id;
  return entry;
}

RunEntry timed_eval(const OptProblem& problem, const Eigen::VectorXd& z_raw,
                    std::uint64_t seed, Phase phase) {
  const auto start = std::chrono::steady_clock::now();
  const EvalOutcome out = problem.evaluator(z_raw, seed);
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  if (out.g.size() != problem.q) {
    throw std::logic_error("evaluator returned wrong constraint count");
  }
  return make_entry(problem.space, z_raw, out, phase, elapsed.count());
}

struct Surrogates {
  GpPosterior objective;
  std::vector<GpPosterior> constraints;

  std::vector<const GpPosterior*> constraint_ptrs() const {
    std::vector<const GpPosterior*> ptrs;
    ptrs.reserve(constraints.size());
    for (const auto& gp : constraints) ptrs.push_back(&gp);
    return ptrs;
  }
};

Surrogates fit_surrogates(const OptProblem& problem, const RunRecord& history,
                          std::uint64_t seed,
                          std::vector<KernelHyperparams>* warm_io) {
  // A suggestion may coincide with an earlier evaluation (the fallback path
  // does so by construction). The evaluator is deterministic, so dropping
  // near-duplicates loses nothing and keeps the Gram matrix well posed.
  std::vector<int> kept;
  for (int i = 0; i < static_cast<int>(history.entries.size()); ++i) {
    bool duplicate = false;
    for (const int k : kept) {
      const auto diff = history.entries[i].z_norm - history.entries[k].z_norm;
      if (diff.cwiseAbs().maxCoeff() <= 1e-9) {
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

  const bool warm = warm_io != nullptr &&
                    static_cast<int>(warm_io->size()) == problem.q + 1;
  const int restarts = warm ? kFitRestartsWarm : kFitRestartsCold;
  const FitBounds bounds;

  Surrogates out{
      GpPosterior::fit({inputs, r}, bounds, restarts, mix_seed(seed, 0),
                       warm ? &(*warm_io)[0] : nullptr),
      {}};
  out.constraints.reserve(problem.q);
  for (int j = 0; j < problem.q; ++j) {
    out.constraints.push_back(
        GpPosterior::fit({inputs, g.col(j)}, bounds, restarts,
                         mix_seed(seed, j + 1),
                         warm ? &(*warm_io)[j + 1] : nullptr));
  }
  if (warm_io != nullptr) {
    warm_io->clear();
    warm_io->push_back(out.objective.hyperparams());
    for (const auto& gp : out.constraints) {
      warm_io->push_back(gp.hyperparams());
    }
  }
  return out;
}

/// Projected gradient descent of the acquisition inside the unit box.
/// Returns the reached point and its value.
std::pair<Eigen::VectorXd, double> descend(
    const Surrogates& gps, const std::vector<const GpPosterior*>& cons,
    const AcquisitionConfig& cfg, Eigen::VectorXd x, double value) {
  for (int iter = 0; iter < kDescentIters; ++iter) {
    Eigen::VectorXd grad;
    try {
      grad = sb2o_gradient(gps.objective, cons, x, cfg);
    } catch (const UndefinedGradientError&) {
      break;  // should not happen at finite-valued points; stop defensively
    }
    Eigen::VectorXd proj = grad;
    for (int j = 0; j < x.size(); ++j) {
      if ((x[j] <= 0.0 && grad[j] > 0.0) || (x[j] >= 1.0 && grad[j] < 0.0)) {
        proj[j] = 0.0;
      }
    }
    if (proj.norm() <= kGradTol) break;

    double step = 0.25;
    bool moved = false;
    while (step >= 1e-14) {
      const Eigen::VectorXd cand = clamp_unit(x - step * grad);
      const double cand_value = sb2o(gps.objective, cons, cand, cfg);
      if (cand_value < value - 1e-4 * step * proj.squaredNorm() ||
          cand_value < value - 1e-12 * (1.0 + std::abs(value))) {
        x = cand;
        value = cand_value;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return {std::move(x), value};
}

}  // namespace

OptProblem make_opt_problem(const TaskSpec& task) {
  OptProblem problem;
  problem.space = task.space;
  problem.q = task.num_constraints;
  problem.evaluator = [task](const Eigen::VectorXd& z, std::uint64_t seed) {
    return evaluate(task, z, seed);
  };
  return problem;
}

const char* to_string(Phase p) {
  return p == Phase::init ? "init" : "suggest";
}

void RunRecord::push(RunEntry entry) {
  const double prev = best_feasible.empty() ? kInf : best_feasible.back();
  best_feasible.push_back(entry.feasible ? std::min(prev, entry.r) : prev);
  entries.push_back(std::move(entry));
}

Eigen::MatrixXd lhs_init(const SearchSpace& space, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("lhs_init: n must be >= 1");
  if (space.dim() == 0) throw std::invalid_argument("lhs_init: empty space");
  Rng rng(seed);
  const Eigen::MatrixXd unit = lhs_unit(n, space.dim(), &rng);
  Eigen::MatrixXd raw(n, space.dim());
  for (int i = 0; i < n; ++i) {
    raw.row(i) = space.from_normalized(unit.row(i).transpose()).transpose();
  }
  return raw;
}

SuggestResult suggest(const OptProblem& problem, const RunRecord& history,
                      const AcquisitionConfig& cfg, int restarts,
                      std::uint64_t seed,
                      std::vector<KernelHyperparams>* warm_io) {
  if (restarts < 1) throw std::invalid_argument("suggest: restarts >= 1");
  if (cfg.beta_constraints.size() != problem.q) {
    throw std::invalid_argument("suggest: beta count != constraint count");
  }
  bool any_feasible = false;
  for (const auto& e : history.entries) any_feasible |= e.feasible;
  if (!any_feasible) {
    throw NoFeasibleStartError(
        "suggest: history contains no feasible evaluation");
  }

  const Surrogates gps = fit_surrogates(problem, history, seed, warm_io);
  const auto cons = gps.constraint_ptrs();

  // Starts: every feasible evaluated point plus LHS candidates, both kept
  // only where the barrier is finite.
  std::vector<Eigen::VectorXd> starts;
  for (const auto& e : history.entries) {
    if (e.feasible) starts.push_back(e.z_norm);
  }
  Rng rng(mix_seed(seed, 0x10f5));
  const Eigen::MatrixXd pool = lhs_unit(restarts, problem.space.dim(), &rng);
  for (int i = 0; i < pool.rows(); ++i) {
    starts.push_back(pool.row(i).transpose());
  }

  Eigen::VectorXd best_x;
  double best_value = kInf;
  for (const auto& start : starts) {
    const double start_value = sb2o(gps.objective, cons, start, cfg);
    if (!std::isfinite(start_value)) continue;
    auto [x, value] = descend(gps, cons, cfg, start, start_value);
    if (value < best_value) {
      best_value = value;
      best_x = std::move(x);
    }
  }

  SuggestResult result;
  if (!std::isfinite(best_value)) {
    // Every start sits outside the surrogate-feasible region; fall back to
    // the best feasible observation.
    const RunEntry* best_entry = nullptr;
    for (const auto& e : history.entries) {
      if (e.feasible && (best_entry == nullptr || e.r < best_entry->r)) {
        best_entry = &e;
      }
    }
    result.z_raw = best_entry->z_raw;
    result.acquisition = kInf;
    result.fallback = true;
    return result;
  }
  result.z_raw = problem.space.clamp(problem.space.from_normalized(best_x));
  result.acquisition = best_value;
  result.fallback = false;
  return result;
}

RunRecord run_safe_bo(const OptProblem& problem, int n_init, int budget,
                      const AcquisitionConfig& cfg, std::uint64_t seed) {
  if (n_init < 1) throw std::invalid_argument("run_safe_bo: n_init >= 1");
  if (budget < 0) throw std::invalid_argument("run_safe_bo: budget >= 0");
  RunRecord record;
  record.algorithm = "sb2o";
  record.seed = seed;

  const Eigen::MatrixXd design = lhs_init(problem.space, n_init, seed);
  for (int i = 0; i < design.rows(); ++i) {
    record.push(
        timed_eval(problem, design.row(i).transpose(), seed, Phase::init));
  }

  std::vector<KernelHyperparams> warm;
  for (int round = 0; round < budget; ++round) {
    const SuggestResult res =
        suggest(problem, record, cfg, 20, mix_seed(seed, round + 1), &warm);
    record.push(timed_eval(problem, res.z_raw, seed, Phase::suggest));
  }
  return record;
}

RunRecord run_random_search(const OptProblem& problem, int n_init, int budget,
                            std::uint64_t seed) {
  if (n_init < 1) throw std::invalid_argument("run_random_search: n_init >= 1");
  if (budget < 0) throw std::invalid_argument("run_random_search: budget >= 0");
  RunRecord record;
  record.algorithm = "rs";
  record.seed = seed;
  const Eigen::MatrixXd design =
      lhs_init(problem.space, n_init + budget, seed);
  for (int i = 0; i < design.rows(); ++i) {
    record.push(timed_eval(problem, design.row(i).transpose(), seed,
                           i < n_init ? Phase::init : Phase::suggest));
  }
  return record;
}

RunRecord run_one_plus_one_es(const OptProblem& problem,
                              const Eigen::VectorXd& start, double sigma0,
                              int budget, std::uint64_t seed) {
  if (budget < 0) throw std::invalid_argument("es: budget >= 0");
  if (!(sigma0 > 0.0)) throw std::invalid_argument("es: sigma0 > 0");
  RunRecord record;
  record.algorithm = "es";
  record.seed = seed;

  RunEntry parent = timed_eval(problem, start, seed, Phase::init);
  if (!parent.feasible) {
    throw std::invalid_argument("es: start point must be feasible");
  }
  record.push(parent);

  const double up = std::pow(1.5, 0.25);
  const double down = std::pow(1.5, -0.25);
  Eigen::VectorXd x = record.entries.front().z_norm;
  double parent_r = record.entries.front().r;
  double sigma = sigma0;
  Rng rng(seed);
  for (int k = 0; k < budget; ++k) {
    Eigen::VectorXd offspring = x;
    for (int j = 0; j < offspring.size(); ++j) {
      offspring[j] += sigma * rng.normal();
    }
    offspring = clamp_unit(offspring);
    const Eigen::VectorXd z_raw = problem.space.from_normalized(offspring);
    const RunEntry entry = timed_eval(problem, z_raw, seed, Phase::suggest);
    const bool success = entry.feasible && entry.r < parent_r;
    record.push(entry);
    if (success) {
      x = offspring;
      parent_r = entry.r;
      sigma *= up;
    } else {
      sigma *= down;
    }
    sigma = std::max(sigma, 1e-6);
  }
  return record;
}

double feasibility_rate(const RunRecord& record, const Phase* phase_filter) {
  int total = 0;
  int feasible = 0;
  for (const auto& e : record.entries) {
    if (phase_filter != nullptr && e.phase != *phase_filter) continue;
    ++total;
    feasible += e.feasible ? 1 : 0;
  }
  if (total == 0) {
    throw std::invalid_argument("feasibility_rate: no entries after filter");
  }
  return static_cast<double>(feasible) / total;
}

}  // namespace cbftune
