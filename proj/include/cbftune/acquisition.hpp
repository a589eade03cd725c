#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cbftune/gp.hpp"

namespace cbftune {

/// Sign convention for the constraint confidence bound. `conservative`
/// (mu + beta * sigma) is the default: it is the only sign under which the
/// calibrated band implies high-probability feasibility. `literal_paper`
/// (mu - beta * sigma) reproduces the optimistic variant as printed.
enum class BoundMode { conservative, literal_paper };

/// Knobs for the barrier acquisition.
struct AcquisitionConfig {
  double beta_objective = 2.0;
  Eigen::VectorXd beta_constraints;  // length q, all > 0
  double barrier_weight = 10.0;      // barrier sharpness c, > 0
  BoundMode bound_mode = BoundMode::conservative;

  /// Uniform constraint betas (the common case).
  static AcquisitionConfig with_uniform_betas(double beta_obj,
                                              double beta_con, int q,
                                              double c,
                                              BoundMode mode = BoundMode::conservative);
};

/// Lower confidence bound mu - beta * sigma of a surrogate at z.
double lcb(const GpPosterior& gp, const Eigen::VectorXd& z, double beta);

/// Exploration weight sqrt(2 ||g||_k^2 + 300 gamma ln^3(n / delta)) from the
/// calibrated-uncertainty lemma. Requires rkhs_norm > 0, gamma >= 0, n >= 1
/// and delta in (0,1).
double theoretical_beta(double rkhs_norm, double gamma, int n, double delta);

/// Confidence bound on a constraint surrogate; feasibility of the surrogate
/// constraint means this value is negative.
double pessimistic_bound(const GpPosterior& gp, const Eigen::VectorXd& z,
                         double beta, BoundMode mode);

/// One log-barrier term -ln(margin) / c with margin = -pessimistic_bound.
/// value is +infinity when the margin is nonpositive.
struct BarrierValue {
  double value = 0.0;
  double margin = 0.0;

  bool finite() const { return margin > 0.0; }
};

BarrierValue barrier(const GpPosterior& gp, const Eigen::VectorXd& z,
                     double beta, double barrier_weight, BoundMode mode);

/// Barrier acquisition: LCB of the objective plus one log-barrier per
/// constraint surrogate; +infinity outside the surrogate-feasible region.
/// cfg.beta_constraints must have one entry per constraint posterior.
double sb2o(const GpPosterior& objective,
            const std::vector<const GpPosterior*>& constraints,
            const Eigen::VectorXd& z, const AcquisitionConfig& cfg);

/// Analytic gradient of sb2o. Throws UndefinedGradientError when any barrier
/// is infinite at z.
Eigen::VectorXd sb2o_gradient(const GpPosterior& objective,
                              const std::vector<const GpPosterior*>& constraints,
                              const Eigen::VectorXd& z,
                              const AcquisitionConfig& cfg);

/// Worst-case acquisition suboptimality q / c at barrier-stationary points.
double duality_gap_bound(int num_constraints, double barrier_weight);

}  // namespace cbftune
