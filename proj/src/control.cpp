#include "cbftune/control.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/KroneckerProduct>

#include "cbftune/errors.hpp"

namespace cbftune {
namespace {

// vec(A'P + PA) = (I (x) A' + A' (x) I) vec(P); solves A'P + PA = -C.
Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& a,
                               const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(a.rows());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd lhs =
      Eigen::kroneckerProduct(eye, a.transpose()).eval() +
      Eigen::kroneckerProduct(a.transpose(), eye).eval();
  const Eigen::VectorXd rhs =
      -Eigen::Map<const Eigen::VectorXd>(c.data(), n * n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible()) {
    throw NoStabilizingSolutionError("care: singular Lyapunov system");
  }
  const Eigen::VectorXd sol = lu.solve(rhs);
  Eigen::MatrixXd p = Eigen::Map<const Eigen::MatrixXd>(sol.data(), n, n);
  return 0.5 * (p + p.transpose());
}

double spectral_abscissa(const Eigen::MatrixXd& a) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(a, false)
      .eigenvalues()
      .real()
      .maxCoeff();
}

bool is_controllable(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                     Eigen::MatrixXd* ctrb) {
  const int n = static_cast<int>(a.rows());
  ctrb->resize(n, n);
  Eigen::VectorXd col = b;
  for (int j = 0; j < n; ++j) {
    ctrb->col(j) = col;
    col = a * col;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(*ctrb);
  return lu.isInvertible() && lu.rcond() > 1e-13;
}

// Ackermann single-input pole placement at {-1, ..., -n}.
Eigen::RowVectorXd ackermann(const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& ctrb) {
  const int n = static_cast<int>(a.rows());
  // desired characteristic polynomial prod_i (s + i)
  std::vector<double> coeffs{1.0};  // highest degree first
  for (int i = 1; i <= n; ++i) {
    std::vector<double> next(coeffs.size() + 1, 0.0);
    for (size_t j = 0; j < coeffs.size(); ++j) {
      next[j] += coeffs[j];
      next[j + 1] += coeffs[j] * i;
    }
    coeffs = next;
  }
  Eigen::MatrixXd alpha_a = Eigen::MatrixXd::Zero(n, n);
  for (double c : coeffs) {
    alpha_a = alpha_a * a + c * Eigen::MatrixXd::Identity(n, n);
  }
  Eigen::RowVectorXd last = Eigen::RowVectorXd::Zero(n);
  last[n - 1] = 1.0;
  return last * ctrb.fullPivLu().solve(alpha_a);
}

// A stabilizing initial gain: zero if A is already Hurwitz, otherwise pole
// placement through a single pseudo-input direction b = B w.
Eigen::MatrixXd initial_stabilizing_gain(const Eigen::MatrixXd& a,
                                         const Eigen::MatrixXd& b) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  if (spectral_abscissa(a) < -1e-9) {
    return Eigen::MatrixXd::Zero(m, n);
  }
  std::vector<Eigen::VectorXd> directions;
  for (int i = 0; i < m; ++i) {
    directions.push_back(Eigen::VectorXd::Unit(m, i));
  }
  if (m > 1) {
    directions.push_back(Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(m)));
    for (int i = 1; i < m; ++i) {
      Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
      w[i] = -1.0;
      directions.push_back(w / w.norm());
    }
  }
  for (const auto& w : directions) {
    const Eigen::VectorXd bw = b * w;
    Eigen::MatrixXd ctrb;
    if (!is_controllable(a, bw, &ctrb)) continue;
    const Eigen::RowVectorXd k_row = ackermann(a, ctrb);
    const Eigen::MatrixXd k = w * k_row;
    if (spectral_abscissa(a - b * k) < -1e-9) return k;
  }
  throw NoStabilizingSolutionError(
      "care: no stabilizing initial gain found (system may not be "
      "stabilizable through a single input direction)");
}

}  // namespace

ConstraintRow cbf_row(const ControlAffineDynamics& dyn,
                      const BarrierSpec& barrier, const Eigen::VectorXd& x) {
  if (!(barrier.alpha > 0.0)) {
    throw std::invalid_argument("cbf: alpha must be positive");
  }
  const double h = barrier.h(x);
  const Eigen::VectorXd grad = barrier.grad_h(x);
  const Eigen::VectorXd f = dyn.f(x);
  const double lfh = grad.dot(f);
  ConstraintRow row;
  if (!barrier.ecbf_mu.has_value()) {
    const Eigen::RowVectorXd lgh = grad.transpose() * dyn.g(x);
    if (lgh.norm() <= 1e-12) {
      throw DegenerateConstraintError(
          "cbf: input does not appear in the barrier derivative");
    }
    // L_f h + L_g h u + alpha h >= 0
    row.a = -lgh;
    row.b = lfh + barrier.alpha * h;
    return row;
  }
  const double mu = *barrier.ecbf_mu;
  if (!(mu > 0.0)) {
    throw std::invalid_argument("cbf: ecbf rate must be positive");
  }
  if (!barrier.second_order) {
    throw DegenerateConstraintError(
        "cbf: ecbf barrier lacks second-order terms");
  }
  const auto [lf2h, lglfh] = barrier.second_order(x);
  // surrogate h_e = L_f h + mu h; row: d h_e/dt + alpha h_e >= 0
  row.a = -lglfh;
  row.b = lf2h + (barrier.alpha + mu) * lfh + barrier.alpha * mu * h;
  return row;
}

FilterResult safety_filter(const ControlAffineDynamics& dyn,
                           const std::vector<BarrierSpec>& barriers,
                           const ClfSpec* clf, const Eigen::VectorXd& u_ref,
                           const Eigen::VectorXd& x, const FilterConfig& cfg) {
  if (cfg.regularization_lambda < 0.0) {
    throw std::invalid_argument("filter: lambda must be nonnegative");
  }
  const int m = dyn.input_dim;
  const int nv = m + (clf != nullptr ? 1 : 0);
  QpProblem qp;
  qp.hessian = Eigen::MatrixXd::Zero(nv, nv);
  qp.hessian.topLeftCorner(m, m) =
      2.0 * (1.0 + cfg.regularization_lambda) *
      Eigen::MatrixXd::Identity(m, m);
  qp.linear = Eigen::VectorXd::Zero(nv);
  qp.linear.head(m) = -2.0 * u_ref;

  const int num_bounds = static_cast<int>(cfg.input_a.rows());
  const int num_rows =
      static_cast<int>(barriers.size()) + (clf != nullptr ? 1 : 0) +
      num_bounds;
  qp.ineq_a = Eigen::MatrixXd::Zero(num_rows, nv);
  qp.ineq_b = Eigen::VectorXd::Zero(num_rows);
  int r = 0;
  for (const auto& barrier : barriers) {
    const ConstraintRow row = cbf_row(dyn, barrier, x);
    qp.ineq_a.block(r, 0, 1, m) = row.a;
    qp.ineq_b[r] = row.b;
    ++r;
  }
  if (clf != nullptr) {
    if (!(clf->slack_weight > 0.0)) {
      throw std::invalid_argument("filter: slack weight must be positive");
    }
    qp.hessian(m, m) = 2.0 * clf->slack_weight;
    const double v = clf->v(x);
    const Eigen::VectorXd grad_v = clf->grad_v(x);
    const double lfv = grad_v.dot(dyn.f(x));
    const Eigen::RowVectorXd lgv = grad_v.transpose() * dyn.g(x);
    // L_f V + L_g V u + epsilon V <= delta
    qp.ineq_a.block(r, 0, 1, m) = lgv;
    qp.ineq_a(r, m) = -1.0;
    qp.ineq_b[r] = -lfv - clf->epsilon * v;
    ++r;
  }
  if (num_bounds > 0) {
    qp.ineq_a.block(r, 0, num_bounds, m) = cfg.input_a;
    qp.ineq_b.segment(r, num_bounds) = cfg.input_b;
  }

  const QpSolution sol = solve(qp);
  FilterResult out;
  out.status = sol.status;
  if (sol.status == QpStatus::optimal) {
    out.u = sol.primal.head(m);
    out.slack = clf != nullptr ? sol.primal[m] : 0.0;
  }
  return out;
}

CareSolution care_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != m || r.cols() != m) {
    throw std::invalid_argument("care: inconsistent shapes");
  }
  Eigen::LLT<Eigen::MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success) {
    throw std::invalid_argument("care: R must be positive definite");
  }
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q)
          .eigenvalues()
          .minCoeff() < -1e-10) {
    throw std::invalid_argument("care: Q must be positive semidefinite");
  }

  Eigen::MatrixXd k = initial_stabilizing_gain(a, b);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  bool converged = false;
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::MatrixXd a_cl = a - b * k;
    const Eigen::MatrixXd cost = q + k.transpose() * r * k;
    const Eigen::MatrixXd p_next = lyapunov_solve(a_cl, cost);
    const double delta = (p_next - p).norm() / (1.0 + p_next.norm());
    p = p_next;
    k = r_llt.solve(b.transpose() * p);
    if (delta < 1e-14) {
      converged = true;
      break;
    }
  }
  const Eigen::MatrixXd residual =
      a.transpose() * p + p * a - p * b * r_llt.solve(b.transpose() * p) + q;
  if (!converged || residual.norm() > 1e-8 ||
      spectral_abscissa(a - b * k) >= 0.0) {
    throw NoStabilizingSolutionError(
        "care: Newton iteration did not reach a stabilizing solution");
  }
  return CareSolution{p, k};
}

double energy_shaping_nominal(const Eigen::Vector4d& state,
                              const Eigen::Vector3d& gains,
                              const CartPoleParams& params, double x_ref) {
  if (!(gains[0] > 0.0) || gains[1] < 0.0 || gains[2] < 0.0) {
    throw std::invalid_argument(
        "swing-up: k_E must be positive, k_p and k_d nonnegative");
  }
  const double x = state[0] - x_ref;
  const double v = state[1];
  const double theta = state[2];
  const double omega = state[3];
  const double mp = params.pole_mass;
  const double mc = params.cart_mass;
  const double l = params.pole_length;
  const double g = params.gravity;
  const double cos_t = std::cos(theta);
  // energy error relative to the upright level
  const double energy = 0.5 * mp * l * l * omega * omega - mp * g * l -
                        mp * g * l * cos_t;
  const double xdd_des =
      gains[0] * omega * cos_t * energy - gains[1] * x - gains[2] * v;
  return (mc + mp - mp * cos_t * cos_t) * xdd_des -
         mp * g * std::sin(theta) * cos_t -
         mp * l * omega * omega * std::sin(theta);
}

std::pair<double, SwingMode> switched_controller(
    const Eigen::Vector4d& state, double eta, const Eigen::RowVector4d& k_lqr,
    const Eigen::Vector4d& target, SwingMode current_mode,
    const Eigen::Vector3d& gains, const CartPoleParams& params) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("swing-up: eta must be positive");
  }
  Eigen::Vector4d dev = state - target;
  dev[2] = std::remainder(dev[2], 2.0 * M_PI);
  SwingMode mode = current_mode;
  if (mode == SwingMode::swing && dev.tail(3).norm() <= eta) {
    mode = SwingMode::lqr;  // latches: never hands back
  }
  const double u = mode == SwingMode::lqr
                       ? -k_lqr.dot(dev)
                       : energy_shaping_nominal(state, gains, params, target[0]);
  return {u, mode};
}

}  // namespace cbftune
