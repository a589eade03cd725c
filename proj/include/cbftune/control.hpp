#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "cbftune/qp.hpp"

namespace cbftune {

/// Control-affine plant xdot = f(x) + g(x) u.
struct ControlAffineDynamics {
  int state_dim = 0;
  int input_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> g;
};

/// Safety certificate h(x) >= 0 with class-K gain alpha. Barriers whose
/// first derivative carries no input (relative degree 2) set ecbf_mu and
/// supply the second-order terms L_f^2 h and L_g L_f h; the filter then
/// enforces the exponential-surrogate row on h_e = L_f h + mu h.
struct BarrierSpec {
  std::function<double(const Eigen::VectorXd&)> h;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_h;
  double alpha = 1.0;
  std::optional<double> ecbf_mu;
  // Returns (L_f^2 h, L_g L_f h) at x; required when ecbf_mu is set.
  std::function<std::pair<double, Eigen::RowVectorXd>(const Eigen::VectorXd&)>
      second_order;
};

/// Soft convergence certificate: row L_f V + L_g V u + epsilon V <= delta
/// with slack delta penalized by slack_weight in the filter objective.
struct ClfSpec {
  std::function<double(const Eigen::VectorXd&)> v;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_v;
  double epsilon = 1.0;
  double slack_weight = 1.0;
};

/// Filter objective ||u - u_ref||^2 + lambda ||u||^2 plus hard input bounds.
struct FilterConfig {
  double regularization_lambda = 0.0;
  Eigen::MatrixXd input_a;  // rows A_u u <= b_u; may be empty
  Eigen::VectorXd input_b;
};

/// One inequality row a' u <= b in the filter QP.
struct ConstraintRow {
  Eigen::RowVectorXd a;
  double b = 0.0;
};

/// Linear row enforcing the barrier condition at x. Relative-degree-1
/// barriers yield L_f h + L_g h u + alpha h >= 0; ECBF barriers yield
/// L_f^2 h + L_g L_f h u + (alpha + mu) L_f h + alpha mu h >= 0. Throws
/// DegenerateConstraintError when L_g h vanishes without ECBF data.
ConstraintRow cbf_row(const ControlAffineDynamics& dyn,
                      const BarrierSpec& barrier, const Eigen::VectorXd& x);

struct FilterResult {
  QpStatus status = QpStatus::infeasible;
  Eigen::VectorXd u;    // meaningful only when optimal
  double slack = 0.0;   // CLF slack; 0 when no CLF given
};

/// Minimally invasive safe controller: projects u_ref onto the set cut out
/// by all barrier rows and input bounds, with an optional soft CLF row.
FilterResult safety_filter(const ControlAffineDynamics& dyn,
                           const std::vector<BarrierSpec>& barriers,
                           const ClfSpec* clf, const Eigen::VectorXd& u_ref,
                           const Eigen::VectorXd& x, const FilterConfig& cfg);

struct CareSolution {
  Eigen::MatrixXd p;  // stabilizing solution, PSD
  Eigen::MatrixXd k;  // gain R^-1 B' P, so u = -K x stabilizes
};

/// Continuous algebraic Riccati equation A'P + PA - PBR^-1B'P + Q = 0 via
/// Newton-Kleinman iteration (Lyapunov sub-solves by Kronecker
/// vectorization), seeded with a pole-placement stabilizing gain. Throws
/// NoStabilizingSolutionError when the iteration fails to converge.
CareSolution care_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const Eigen::MatrixXd& q, const Eigen::MatrixXd& r);

/// Cart-pole physical constants (pole angle theta = 0 hanging down, pi up).
struct CartPoleParams {
  double gravity = 10.0;
  double pole_length = 2.0;
  double cart_mass = 5.0;
  double pole_mass = 1.0;
};

/// Swing-up nominal control: pumps pendulum energy toward the upright level
/// with a PD term regulating the cart toward x_ref. gains = [k_E, k_p, k_d].
double energy_shaping_nominal(const Eigen::Vector4d& state,
                              const Eigen::Vector3d& gains,
                              const CartPoleParams& params, double x_ref = 0.0);

enum class SwingMode { swing, lqr };

/// Hybrid swing-up policy: energy shaping until the (v, theta, omega)
/// deviation from the target drops below eta, then a latched LQR law
/// -K (p - p_d). Theta deviations are wrapped to (-pi, pi] so any odd
/// multiple of pi matches the upright target.
std::pair<double, SwingMode> switched_controller(
    const Eigen::Vector4d& state, double eta, const Eigen::RowVector4d& k_lqr,
    const Eigen::Vector4d& target, SwingMode current_mode,
    const Eigen::Vector3d& gains, const CartPoleParams& params);

}  // namespace cbftune
