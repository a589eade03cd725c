#include "cbftune/tasks.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "cbftune/errors.hpp"

namespace cbftune {
namespace {

constexpr double kFeasibleTol = 1e-9;

// --- deterministic trace ids -------------------------------------------------

std::uint64_t fnv1a(const void* data, size_t len, std::uint64_t h) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string make_trace_id(const std::string& task, const Eigen::VectorXd& z,
                          std::uint64_t seed) {
  std::uint64_t h = fnv1a(task.data(), task.size(), 14695981039346656037ULL);
  h = fnv1a(z.data(), sizeof(double) * z.size(), h);
  h = fnv1a(&seed, sizeof(seed), h);
  std::ostringstream out;
  out << "ep-" << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

// --- generic fixed-step loop -------------------------------------------------

// Everything one episode needs beyond the integrator itself. The nominal
// policy may carry mutable per-episode state (the swing-up latch), so the
// whole context is rebuilt per episode and never shared.
struct EpisodeModel {
  ControlAffineDynamics dyn;
  std::vector<BarrierSpec> barriers;
  std::optional<ClfSpec> clf;
  FilterConfig filter;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> nominal;
  std::function<bool(const Eigen::VectorXd&)> settled;  // may be empty
  // Actuator limit applied to the filtered command before it reaches the
  // plant (the swing-up QP is posed without input rows, so its solution can
  // exceed what the cart can deliver).
  double input_saturation = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x0;
  Eigen::VectorXd target;
  std::vector<bool> angle_wrap;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<std::string> barrier_names;
};

Eigen::VectorXd rk4_step(const ControlAffineDynamics& dyn,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         double dt) {
  const auto deriv = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    return dyn.f(s) + dyn.g(s) * u;
  };
  const Eigen::VectorXd k1 = deriv(x);
  const Eigen::VectorXd k2 = deriv(x + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = deriv(x + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = deriv(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

EpisodeTrace run_episode(const EpisodeModel& model, double t_max, double dt,
                         double control_period) {
  EpisodeTrace trace;
  trace.t_max = t_max;
  trace.target = model.target;
  trace.angle_wrap = model.angle_wrap;
  trace.state_names = model.state_names;
  trace.input_names = model.input_names;
  trace.barrier_names = model.barrier_names;

  const long total_steps = std::lround(t_max / dt);
  const long steps_per_hold =
      std::max(1L, std::lround(control_period / dt));
  const int m = model.dyn.input_dim;
  const bool unconstrained = model.barriers.empty() && !model.clf.has_value() &&
                             model.filter.input_a.rows() == 0;

  Eigen::VectorXd x = model.x0;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  QpStatus status = QpStatus::optimal;

  const auto barrier_values = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd h(model.barriers.size());
    for (size_t i = 0; i < model.barriers.size(); ++i) {
      h[i] = model.barriers[i].h(s);
    }
    return h;
  };
  const auto append = [&](double t) {
    trace.times.push_back(t);
    trace.states.push_back(x);
    trace.inputs.push_back(u);
    trace.barriers.push_back(barrier_values(x));
    trace.qp_status.push_back(status);
  };

  trace.termination = Termination::timeout;
  for (long step = 0; step < total_steps; ++step) {
    const double t = step * dt;
    if (step % steps_per_hold == 0) {
      const Eigen::VectorXd u_ref = model.nominal(x);
      if (unconstrained) {
        u = u_ref;
        status = QpStatus::optimal;
      } else {
        const FilterResult res = safety_filter(
            model.dyn, model.barriers,
            model.clf.has_value() ? &*model.clf : nullptr, u_ref, x,
            model.filter);
        status = res.status;
        if (res.status != QpStatus::optimal) {
          append(t);
          trace.termination = Termination::qp_infeasible;
          return trace;
        }
        u = res.u.cwiseMax(-model.input_saturation)
                .cwiseMin(model.input_saturation);
      }
    }
    append(t);
    const Eigen::VectorXd x_next = rk4_step(model.dyn, x, u, dt);
    if (!x_next.allFinite()) {
      trace.termination = Termination::state_violation;
      return trace;
    }
    x = x_next;
    if (model.settled && model.settled(x)) {
      append((step + 1) * dt);
      trace.termination = Termination::settled;
      return trace;
    }
  }
  append(total_steps * dt);
  return trace;
}

// --- task models -------------------------------------------------------------

EpisodeModel point_mass_model(const PointMassTask& task,
                              const Eigen::VectorXd& z) {
  EpisodeModel model;
  model.dyn.state_dim = 2;
  model.dyn.input_dim = 2;
  model.dyn.f = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  model.dyn.g = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(2, 2).eval();
  };
  const double alpha = z[0];
  const double k_p = z[1];
  if (task.radius > 0.0) {
    BarrierSpec barrier;
    const Eigen::Vector2d center = task.x_c;
    const double radius = task.radius;
    barrier.h = [center, radius](const Eigen::VectorXd& x) {
      return (x - center).norm() - radius;
    };
    barrier.grad_h = [center](const Eigen::VectorXd& x) {
      const Eigen::VectorXd diff = x - center;
      return (diff / std::max(diff.norm(), 1e-12)).eval();
    };
    barrier.alpha = alpha;
    model.barriers.push_back(std::move(barrier));
    model.barrier_names = {"h_obs"};
  }
  const Eigen::Vector2d x_d = task.x_d;
  model.nominal = [k_p, x_d](const Eigen::VectorXd& x) {
    return (k_p * (x_d - x)).eval();
  };
  model.settled = [x_d](const Eigen::VectorXd& x) {
    return (x - x_d).norm() <= 1e-3;
  };
  model.x0 = task.x0;
  model.target = task.x_d;
  model.angle_wrap = {false, false};
  model.state_names = {"x1", "x2"};
  model.input_names = {"u1", "u2"};
  return model;
}

EpisodeModel double_integrator_model(const DoubleIntegratorTask& task,
                                     const Eigen::VectorXd& z) {
  EpisodeModel model;
  model.dyn.state_dim = 2;
  model.dyn.input_dim = 1;
  model.dyn.f = [](const Eigen::VectorXd& x) {
    return Eigen::Vector2d(x[1], 0.0).eval();
  };
  model.dyn.g = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::Vector2d(0.0, 1.0)).eval();
  };
  const Eigen::RowVector2d k(z[0], z[1]);
  model.nominal = [k](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, k.dot(x)).eval();
  };
  model.settled = [](const Eigen::VectorXd& x) {
    return x.cwiseAbs().maxCoeff() <= 1e-3;
  };
  model.x0 = task.x0;
  model.target = Eigen::Vector2d::Zero();
  model.angle_wrap = {false, false};
  model.state_names = {"x", "v"};
  model.input_names = {"u"};
  return model;
}

// Upright linearization of the cart-pole around theta = pi.
void cartpole_upright(const CartPoleParams& p, Eigen::Matrix4d* a,
                      Eigen::Vector4d* b) {
  a->setZero();
  (*a)(0, 1) = 1.0;
  (*a)(1, 2) = p.pole_mass * p.gravity / p.cart_mass;
  (*a)(2, 3) = 1.0;
  (*a)(3, 2) = (p.cart_mass + p.pole_mass) * p.gravity /
               (p.pole_length * p.cart_mass);
  b->setZero();
  (*b)(1) = 1.0 / p.cart_mass;
  (*b)(3) = 1.0 / (p.pole_length * p.cart_mass);
}

struct CartPoleLatch {
  SwingMode mode = SwingMode::swing;
};

EpisodeModel cartpole_model(const CartPoleTask& task, const Eigen::VectorXd& z,
                            const std::shared_ptr<CartPoleLatch>& latch) {
  EpisodeModel model;
  const CartPoleParams p = task.params;
  model.dyn.state_dim = 4;
  model.dyn.input_dim = 1;
  model.dyn.f = [p](const Eigen::VectorXd& s) {
    const double theta = s[2];
    const double omega = s[3];
    const double sin_t = std::sin(theta);
    const double cos_t = std::cos(theta);
    const double denom = p.cart_mass + p.pole_mass * sin_t * sin_t;
    Eigen::Vector4d dx;
    dx[0] = s[1];
    dx[1] = p.pole_mass * sin_t *
            (p.pole_length * omega * omega + p.gravity * cos_t) / denom;
    dx[2] = omega;
    dx[3] = -(p.pole_mass * p.pole_length * omega * omega * cos_t * sin_t +
              (p.cart_mass + p.pole_mass) * p.gravity * sin_t) /
            (p.pole_length * denom);
    return Eigen::VectorXd(dx);
  };
  model.dyn.g = [p](const Eigen::VectorXd& s) {
    // omega row follows from the pole equation l*thetadd = -(xdd cos + g sin),
    // the same coupling that produces f_omega above
    const double sin_t = std::sin(s[2]);
    const double cos_t = std::cos(s[2]);
    const double denom = p.cart_mass + p.pole_mass * sin_t * sin_t;
    Eigen::Vector4d col;
    col << 0.0, 1.0 / denom, 0.0, -cos_t / (p.pole_length * denom);
    return Eigen::MatrixXd(col);
  };

  BarrierSpec barrier;
  const double x_l = task.x_l;
  barrier.h = [x_l](const Eigen::VectorXd& s) {
    return x_l * x_l - s[0] * s[0];
  };
  barrier.grad_h = [](const Eigen::VectorXd& s) {
    Eigen::Vector4d g(-2.0 * s[0], 0.0, 0.0, 0.0);
    return Eigen::VectorXd(g);
  };
  barrier.alpha = z[3];
  barrier.ecbf_mu = z[4];
  const auto f_fn = model.dyn.f;
  const auto g_fn = model.dyn.g;
  barrier.second_order = [f_fn, g_fn](const Eigen::VectorXd& s) {
    // L_f h = -2 x v; differentiate again along the dynamics
    const Eigen::VectorXd f = f_fn(s);
    const double lf2h = -2.0 * s[1] * s[1] - 2.0 * s[0] * f[1];
    Eigen::RowVectorXd lglfh = -2.0 * s[0] * g_fn(s).row(1);
    return std::make_pair(lf2h, lglfh);
  };
  model.barriers.push_back(std::move(barrier));
  model.barrier_names = {"h_x"};
  model.input_saturation = task.input_limit;

  Eigen::Matrix4d a_up;
  Eigen::Vector4d b_up;
  cartpole_upright(p, &a_up, &b_up);
  const CareSolution care = care_solve(
      a_up, b_up, Eigen::Matrix4d::Identity(),
      Eigen::MatrixXd::Constant(1, 1, task.input_cost));
  const Eigen::RowVector4d k_lqr = care.k.row(0);
  const Eigen::Vector4d target(task.x_d, 0.0, M_PI, 0.0);
  const Eigen::Vector3d gains(z[0], z[1], z[2]);
  const double eta = task.eta;
  model.nominal = [latch, eta, k_lqr, target, gains,
                   p](const Eigen::VectorXd& s) {
    const auto [u, mode] = switched_controller(s, eta, k_lqr, target,
                                               latch->mode, gains, p);
    latch->mode = mode;
    return Eigen::VectorXd::Constant(1, u).eval();
  };
  const double settle_tol = task.settle_tol;
  model.settled = [latch, target, settle_tol](const Eigen::VectorXd& s) {
    if (latch->mode != SwingMode::lqr) return false;
    Eigen::Vector4d dev = s - target;
    dev[2] = std::remainder(dev[2], 2.0 * M_PI);
    return dev.norm() <= settle_tol;
  };
  model.x0 = Eigen::Vector4d(task.x0, 0.0, task.theta0, 0.0);
  model.target = target;
  model.angle_wrap = {false, false, true, false};
  model.state_names = {"x", "v", "theta", "omega"};
  model.input_names = {"u"};
  return model;
}

EpisodeModel acc_model(const AccParams& params, const Eigen::VectorXd& z) {
  EpisodeModel model;
  model.dyn.state_dim = 2;
  model.dyn.input_dim = 1;
  model.dyn.f = [params](const Eigen::VectorXd& s) {
    return Eigen::VectorXd(
        acc_dynamics(Eigen::Vector2d(s[0], s[1]), 0.0, params));
  };
  model.dyn.g = [params](const Eigen::VectorXd&) {
    Eigen::Vector2d col(1.0 / params.mass, 0.0);
    return Eigen::MatrixXd(col);
  };

  BarrierSpec barrier;
  const double d0 = params.d0;
  barrier.h = [d0](const Eigen::VectorXd& s) { return s[1] - d0; };
  barrier.grad_h = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::Vector2d(0.0, 1.0));
  };
  barrier.alpha = z[0];
  barrier.ecbf_mu = params.mu_acc;
  barrier.second_order = [params](const Eigen::VectorXd& s) {
    // L_f h = v0 - v, so its derivative picks up -vdot
    const double lf2h = params.rolling_resistance(s[0]) / params.mass;
    Eigen::RowVectorXd lglfh(1);
    lglfh << -1.0 / params.mass;
    return std::make_pair(lf2h, lglfh);
  };
  model.barriers.push_back(std::move(barrier));
  model.barrier_names = {"h_d"};

  ClfSpec clf;
  const double v0 = params.v0;
  clf.v = [v0](const Eigen::VectorXd& s) {
    return (s[0] - v0) * (s[0] - v0);
  };
  clf.grad_v = [v0](const Eigen::VectorXd& s) {
    return Eigen::VectorXd(Eigen::Vector2d(2.0 * (s[0] - v0), 0.0));
  };
  clf.epsilon = params.clf_epsilon;
  // the tracking term is scaled by 1/m^2, so the slack weight picks up m^2
  clf.slack_weight = z[1] * params.mass * params.mass;
  model.clf = std::move(clf);

  model.filter.input_a.resize(2, 1);
  model.filter.input_a << 1.0, -1.0;
  model.filter.input_b =
      Eigen::Vector2d(params.input_limit(), params.input_limit());

  model.nominal = [params](const Eigen::VectorXd& s) {
    return Eigen::VectorXd::Constant(1, params.rolling_resistance(s[0]))
        .eval();
  };
  model.x0 = Eigen::Vector2d(params.ev_init_speed, params.d_init);
  model.target = Eigen::Vector2d(params.v0, params.d0);
  model.angle_wrap = {false, false};
  model.state_names = {"v", "d"};
  model.input_names = {"u"};
  return model;
}

double worst_barrier_violation(const EpisodeTrace& trace, int index) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& h : trace.barriers) {
    worst = std::max(worst, -h[index]);
  }
  return worst;
}

bool failed(const EpisodeTrace& trace) {
  return trace.termination == Termination::qp_infeasible ||
         trace.termination == Termination::state_violation;
}

}  // namespace

TaskSpec make_task(const std::string& id) {
  TaskSpec task;
  task.name = id;
  if (id == "point_mass") {
    task.params = PointMassTask{};
    task.space = SearchSpace({
        {"alpha", 0.1, 10.0, true, ParamCategory::safety},
        {"k_p", 0.1, 10.0, true, ParamCategory::control},
    });
    task.num_constraints = 1;
    task.t_max = 20.0;
  } else if (id == "double_integrator" || id == "double_integrator_box") {
    DoubleIntegratorTask params;
    params.state_box = (id == "double_integrator_box");
    task.params = params;
    task.space = SearchSpace({
        {"k1", -5.0, -0.001, false, ParamCategory::control},
        {"k2", -5.0, -0.001, false, ParamCategory::control},
    });
    task.num_constraints = params.state_box ? 1 : 0;
    task.t_max = 20.0;
  } else if (id == "cartpole_swingup") {
    task.params = CartPoleTask{};
    task.space = SearchSpace({
        {"k_E", 0.01, 100.0, true, ParamCategory::control},
        {"k_p", 0.01, 100.0, true, ParamCategory::control},
        {"k_d", 0.01, 100.0, true, ParamCategory::control},
        {"alpha", 0.01, 100.0, true, ParamCategory::safety},
        {"mu", 0.01, 100.0, true, ParamCategory::safety},
    });
    task.num_constraints = 2;
    task.t_max = 20.0;
  } else if (id == "acc") {
    task.params = AccParams{};
    task.space = SearchSpace({
        {"alpha", 0.1, 10.0, true, ParamCategory::safety},
        {"k", 0.1, 10.0, true, ParamCategory::control},
        {"f", 0.1, 1.0, true, ParamCategory::deployment},
    });
    task.num_constraints = 2;
    task.t_max = 60.0;
  } else {
    throw ConfigError("unknown task id: " + id);
  }
  return task;
}

bool is_known_task(const std::string& id) {
  return id == "point_mass" || id == "double_integrator" ||
         id == "double_integrator_box" || id == "cartpole_swingup" ||
         id == "acc";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::settled:
      return "settled";
    case Termination::timeout:
      return "timeout";
    case Termination::qp_infeasible:
      return "qp_infeasible";
    case Termination::state_violation:
      return "state_violation";
  }
  return "unknown";
}

Eigen::Vector2d acc_dynamics(const Eigen::Vector2d& state, double u,
                             const AccParams& params) {
  return {(-params.rolling_resistance(state[0]) + u) / params.mass,
          params.v0 - state[0]};
}

EpisodeTrace integrate_episode(const TaskSpec& task, const Eigen::VectorXd& z,
                               std::uint64_t /*seed*/) {
  if (!task.space.contains(z)) {
    throw std::invalid_argument("episode: z outside the search box");
  }
  double period = task.control_period;
  EpisodeModel model;
  if (const auto* pm = std::get_if<PointMassTask>(&task.params)) {
    model = point_mass_model(*pm, z);
  } else if (const auto* di =
                 std::get_if<DoubleIntegratorTask>(&task.params)) {
    model = double_integrator_model(*di, z);
  } else if (const auto* cp = std::get_if<CartPoleTask>(&task.params)) {
    auto latch = std::make_shared<CartPoleLatch>();
    model = cartpole_model(*cp, z, latch);
    period = cp->control_period;
  } else {
    const auto& acc = std::get<AccParams>(task.params);
    model = acc_model(acc, z);
    period = 0.01 / z[2];  // deployment frequency in units of 100 Hz
  }
  return run_episode(model, task.t_max, task.dt, period);
}

double lqr_cost(const EpisodeTrace& trace, const Eigen::MatrixXd& q,
                const Eigen::MatrixXd& r) {
  if (trace.size() == 0) {
    throw std::invalid_argument("lqr_cost: empty trace");
  }
  const auto integrand = [&](int i) {
    Eigen::VectorXd dev = trace.states[i] - trace.target;
    for (size_t j = 0; j < trace.angle_wrap.size(); ++j) {
      if (trace.angle_wrap[j]) dev[j] = std::remainder(dev[j], 2.0 * M_PI);
    }
    const Eigen::VectorXd& u = trace.inputs[i];
    return dev.dot(q * dev) + u.dot(r * u);
  };
  double total = 0.0;
  double prev = integrand(0);
  for (int i = 1; i < trace.size(); ++i) {
    const double cur = integrand(i);
    total += 0.5 * (prev + cur) * (trace.times[i] - trace.times[i - 1]);
    prev = cur;
  }
  return total;
}

double response_time(const EpisodeTrace& trace, const Eigen::VectorXd& target,
                     double tol) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("response_time: tol must be positive");
  }
  for (int i = 0; i < trace.size(); ++i) {
    if ((trace.states[i] - target).norm() <= tol) return trace.times[i];
  }
  return trace.t_max + 1.0;
}

EvalOutcome evaluate(const TaskSpec& task, const Eigen::VectorXd& z,
                     std::uint64_t seed) {
  const EpisodeTrace trace = integrate_episode(task, z, seed);
  EvalOutcome out;
  out.trace_id = make_trace_id(task.name, z, seed);

  if (const auto* pm = std::get_if<PointMassTask>(&task.params)) {
    out.r = lqr_cost(trace, Eigen::Matrix2d::Identity(),
                     2.0 * Eigen::Matrix2d::Identity());
    out.g.resize(1);
    out.g[0] =
        response_time(trace, pm->x_d, pm->response_tol) - pm->response_deadline;
  } else if (const auto* di =
                 std::get_if<DoubleIntegratorTask>(&task.params)) {
    out.r = lqr_cost(trace, Eigen::Matrix2d::Identity(),
                     Eigen::MatrixXd::Identity(1, 1));
    if (di->state_box) {
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& s : trace.states) {
        worst = std::max({worst, s[0] - di->box_hi, di->box_lo - s[0],
                          s[1] - di->box_hi, di->box_lo - s[1]});
      }
      out.g = Eigen::VectorXd::Constant(1, worst);
    } else {
      out.g.resize(0);
    }
  } else if (const auto* cp = std::get_if<CartPoleTask>(&task.params)) {
    out.r = lqr_cost(trace, Eigen::Matrix4d::Identity(),
                     Eigen::MatrixXd::Constant(1, 1, cp->input_cost));
    out.g.resize(2);
    out.g[0] = worst_barrier_violation(trace, 0) + (failed(trace) ? 1.0 : 0.0);
    const double settle_time = trace.termination == Termination::settled
                                   ? trace.times.back()
                                   : task.t_max + 1.0;
    out.g[1] = settle_time - cp->settle_deadline;
  } else {
    const auto& acc = std::get<AccParams>(task.params);
    // objective integrand of the cruise task: normalized speed, gap and
    // control-effort deviations
    const auto integrand = [&](int i) {
      const double v = trace.states[i][0];
      const double d = trace.states[i][1];
      const double u = trace.inputs[i][0];
      const double fr = acc.rolling_resistance(v);
      const double tv = (v - acc.v0) / acc.v0;
      const double td = (d - acc.d0) / acc.d0;
      const double tu = (u - fr) / acc.mass;
      return tv * tv + td * td + tu * tu;
    };
    double total = 0.0;
    for (int i = 1; i < trace.size(); ++i) {
      total += 0.5 * (integrand(i - 1) + integrand(i)) *
               (trace.times[i] - trace.times[i - 1]);
    }
    out.r = total;
    out.g.resize(2);
    const double worst_gap = worst_barrier_violation(trace, 0);
    out.g[0] = worst_gap;
    out.g[1] = worst_gap + (failed(trace) ? 1.0 : 0.0);
  }
  out.feasible = (out.g.array() <= kFeasibleTol).all();
  return out;
}

void write_trace_csv(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("trace export: cannot open " + path);
  }
  out << "t";
  for (const auto& n : trace.state_names) out << "," << n;
  for (const auto& n : trace.input_names) out << "," << n;
  for (const auto& n : trace.barrier_names) out << "," << n;
  out << ",qp_status\n";
  out.precision(17);
  for (int i = 0; i < trace.size(); ++i) {
    out << trace.times[i];
    for (int j = 0; j < trace.states[i].size(); ++j) {
      out << "," << trace.states[i][j];
    }
    for (int j = 0; j < trace.inputs[i].size(); ++j) {
      out << "," << trace.inputs[i][j];
    }
    for (int j = 0; j < trace.barriers[i].size(); ++j) {
      out << "," << trace.barriers[i][j];
    }
    out << ","
        << (trace.qp_status[i] == QpStatus::optimal ? "optimal" : "infeasible")
        << "\n";
  }
  if (!out.good()) {
    throw std::runtime_error("trace export: write failed for " + path);
  }
}

}  // namespace cbftune
