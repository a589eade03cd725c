#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cbftune/control.hpp"
#include "cbftune/search_space.hpp"

namespace cbftune {

/// 2-D single integrator steered to x_d past a circular obstacle by a
/// proportional law filtered through the obstacle barrier. z = [alpha, k_p].
struct PointMassTask {
  Eigen::Vector2d x0{0.0, 1.0};
  Eigen::Vector2d x_d{3.0, 1.0};
  Eigen::Vector2d x_c{1.5, 0.8};
  double radius = 0.8;
  double response_tol = 0.1;
  double response_deadline = 0.85;
};

/// Double integrator under u = K x with the gain pair as the decision
/// vector; the optional state box turns the tuning problem into a
/// constrained one (box violation is a black-box constraint, not a runtime
/// filter).
struct DoubleIntegratorTask {
  Eigen::Vector2d x0{1.0, 1.0};
  bool state_box = false;
  double box_lo = -0.4;
  double box_hi = 1.2;
};

/// Cart-pole swing-up with the track barrier |x| <= x_l enforced through an
/// ECBF row. z = [k_E, k_p, k_d, alpha, mu].
struct CartPoleTask {
  CartPoleParams params;
  double input_limit = 100.0;
  double x0 = -1.0;
  double theta0 = 0.0;
  double x_d = 1.0;
  double x_l = 3.0;
  double eta = 1.0;
  double control_period = 0.01;
  double input_cost = 1e-2;      // R
  double settle_tol = 0.05;
  double settle_deadline = 15.0;
};

/// Ego vehicle closing on a constant-speed leader; CLF regulates speed to
/// v0, ECBF keeps the gap above d0. z = [alpha, k, f] with f the control
/// frequency in units of 100 Hz (period 0.01 / f seconds).
struct AccParams {
  double mass = 1650.0;
  double f0 = 2.0;
  double f1 = 5.0;
  double f2 = 3.0;
  double grav = 9.81;
  double v0 = 64.0 / 3.6;  // leader and desired speed, m/s
  double d_init = 31.4;
  double d0 = 10.0;
  double ev_init_speed = 25.0;
  double mu_acc = 0.5;
  double clf_epsilon = 1.0;

  double rolling_resistance(double v) const { return f0 + f1 * v + f2 * v * v; }
  double input_limit() const { return 0.4 * mass * grav; }
};

struct TaskSpec {
  std::string name;
  std::variant<PointMassTask, DoubleIntegratorTask, CartPoleTask, AccParams>
      params;
  SearchSpace space;
  int num_constraints = 0;
  double t_max = 20.0;
  double dt = 1e-3;
  double control_period = 0.01;  // overridden per-z for the ACC task
};

/// Builds a benchmark by id: point_mass, double_integrator,
/// double_integrator_box, cartpole_swingup, acc. Throws ConfigError on an
/// unknown id.
TaskSpec make_task(const std::string& id);
bool is_known_task(const std::string& id);

enum class Termination { settled, timeout, qp_infeasible, state_violation };
const char* to_string(Termination t);

/// Fixed-step episode record. Arrays are index-aligned: inputs[i] is the
/// zero-order-hold value applied on [times[i], times[i+1]) (the final entry
/// repeats the last hold), barriers[i] stacks each barrier's h at states[i],
/// and qp_status[i] is the status of the solve governing that interval.
struct EpisodeTrace {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> barriers;
  std::vector<QpStatus> qp_status;
  Termination termination = Termination::timeout;
  double t_max = 0.0;

  Eigen::VectorXd target;           // deviation reference for lqr_cost
  std::vector<bool> angle_wrap;     // per state dim: wrap deviation mod 2pi
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<std::string> barrier_names;

  int size() const { return static_cast<int>(times.size()); }
};

struct EvalOutcome {
  double r = 0.0;
  Eigen::VectorXd g;
  bool feasible = false;
  std::string trace_id;
};

/// Simulates one episode: RK4 at the inner step task.dt with the control
/// input recomputed every control period and held. Ends at settling, the
/// horizon, QP infeasibility, or a non-finite state.
EpisodeTrace integrate_episode(const TaskSpec& task, const Eigen::VectorXd& z,
                               std::uint64_t seed);

/// Trapezoidal integral of deviation' Q deviation + u' R u over the trace.
double lqr_cost(const EpisodeTrace& trace, const Eigen::MatrixXd& q,
                const Eigen::MatrixXd& r);

/// First sampled time with ||x(t) - target|| <= tol; trace.t_max + 1 when
/// the threshold is never reached.
double response_time(const EpisodeTrace& trace, const Eigen::VectorXd& target,
                     double tol);

/// Runs the episode and maps it to the tuning-level objective/constraints.
EvalOutcome evaluate(const TaskSpec& task, const Eigen::VectorXd& z,
                     std::uint64_t seed);

/// Longitudinal dynamics [vdot, ddot] = [(-F_r(v) + u)/m, v0 - v].
Eigen::Vector2d acc_dynamics(const Eigen::Vector2d& state, double u,
                             const AccParams& params);

/// Writes the trace as CSV (t, states..., inputs..., barriers..., qp_status);
/// header always present.
void write_trace_csv(const EpisodeTrace& trace, const std::string& path);

}  // namespace cbftune
