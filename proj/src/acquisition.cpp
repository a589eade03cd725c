#include "cbftune/acquisition.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cbftune/errors.hpp"

namespace cbftune {
namespace {

void check_config(const AcquisitionConfig& cfg, int q) {
  if (!(cfg.beta_objective > 0.0) || !(cfg.barrier_weight > 0.0)) {
    throw std::invalid_argument("acquisition: beta and c must be positive");
  }
  if (cfg.beta_constraints.size() != q) {
    throw std::invalid_argument(
        "acquisition: one constraint beta required per constraint");
  }
  if ((cfg.beta_constraints.array() <= 0.0).any()) {
    throw std::invalid_argument("acquisition: constraint betas must be > 0");
  }
}

}  // namespace

AcquisitionConfig AcquisitionConfig::with_uniform_betas(double beta_obj,
                                                        double beta_con, int q,
                                                        double c,
                                                        BoundMode mode) {
  AcquisitionConfig cfg;
  cfg.beta_objective = beta_obj;
  cfg.beta_constraints = Eigen::VectorXd::Constant(q, beta_con);
  cfg.barrier_weight = c;
  cfg.bound_mode = mode;
  return cfg;
}

double lcb(const GpPosterior& gp, const Eigen::VectorXd& z, double beta) {
  if (!(beta >= 0.0)) {
    throw std::invalid_argument("acquisition: beta must be nonnegative");
  }
  const Prediction pred = gp.predict(z);
  return pred.mean - beta * std::sqrt(pred.variance);
}

double theoretical_beta(double rkhs_norm, double gamma, int n, double delta) {
  if (!(rkhs_norm > 0.0) || !(gamma >= 0.0) || n < 1) {
    throw std::invalid_argument("acquisition: invalid beta inputs");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("acquisition: delta must lie in (0,1)");
  }
  const double log_term = std::log(static_cast<double>(n) / delta);
  return std::sqrt(2.0 * rkhs_norm * rkhs_norm +
                   300.0 * gamma * log_term * log_term * log_term);
}

double pessimistic_bound(const GpPosterior& gp, const Eigen::VectorXd& z,
                         double beta, BoundMode mode) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("acquisition: beta must be positive");
  }
  const Prediction pred = gp.predict(z);
  const double band = beta * std::sqrt(pred.variance);
  return mode == BoundMode::conservative ? pred.mean + band : pred.mean - band;
}

BarrierValue barrier(const GpPosterior& gp, const Eigen::VectorXd& z,
                     double beta, double barrier_weight, BoundMode mode) {
  if (!(barrier_weight > 0.0)) {
    throw std::invalid_argument("acquisition: barrier weight must be > 0");
  }
  BarrierValue out;
  out.margin = -pessimistic_bound(gp, z, beta, mode);
  out.value = out.margin > 0.0
                  ? -std::log(out.margin) / barrier_weight
                  : std::numeric_limits<double>::infinity();
  return out;
}

double sb2o(const GpPosterior& objective,
            const std::vector<const GpPosterior*>& constraints,
            const Eigen::VectorXd& z, const AcquisitionConfig& cfg) {
  check_config(cfg, static_cast<int>(constraints.size()));
  double total = lcb(objective, z, cfg.beta_objective);
  for (size_t i = 0; i < constraints.size(); ++i) {
    const BarrierValue term =
        barrier(*constraints[i], z, cfg.beta_constraints[i],
                cfg.barrier_weight, cfg.bound_mode);
    if (!term.finite()) return std::numeric_limits<double>::infinity();
    total += term.value;
  }
  return total;
}

Eigen::VectorXd sb2o_gradient(
    const GpPosterior& objective,
    const std::vector<const GpPosterior*>& constraints,
    const Eigen::VectorXd& z, const AcquisitionConfig& cfg) {
  check_config(cfg, static_cast<int>(constraints.size()));
  const PredictionGradient obj_grad = objective.predict_gradient(z);
  Eigen::VectorXd grad = obj_grad.mean - cfg.beta_objective * obj_grad.std;
  const double band_sign = cfg.bound_mode == BoundMode::conservative ? 1.0 : -1.0;
  for (size_t i = 0; i < constraints.size(); ++i) {
    const double beta = cfg.beta_constraints[i];
    const double bound = pessimistic_bound(*constraints[i], z, beta,
                                           cfg.bound_mode);
    const double margin = -bound;
    if (!(margin > 0.0)) {
      throw UndefinedGradientError(
          "acquisition: barrier infinite at query point");
    }
    const PredictionGradient g = constraints[i]->predict_gradient(z);
    const Eigen::VectorXd dbound = g.mean + band_sign * beta * g.std;
    // d/dz [-ln(-bound)/c] = dbound / (c * margin)
    grad += dbound / (cfg.barrier_weight * margin);
  }
  return grad;
}

double duality_gap_bound(int num_constraints, double barrier_weight) {
  if (num_constraints < 0 || !(barrier_weight > 0.0)) {
    throw std::invalid_argument("acquisition: invalid gap-bound inputs");
  }
  return static_cast<double>(num_constraints) / barrier_weight;
}

}  // namespace cbftune
