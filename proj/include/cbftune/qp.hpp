#pragma once

#include <Eigen/Dense>
#include <vector>

namespace cbftune {

/// Strictly convex quadratic program
///   min 0.5 u' H u + f' u   s.t.  A u <= b
/// with H symmetric positive definite and small dimension (n <= ~4, m <= ~8).
struct QpProblem {
  Eigen::MatrixXd hessian;  // n x n, SPD
  Eigen::VectorXd linear;   // n
  Eigen::MatrixXd ineq_a;   // m x n, rows encode a' u <= b
  Eigen::VectorXd ineq_b;   // m

  int num_vars() const { return static_cast<int>(hessian.rows()); }
  int num_rows() const { return static_cast<int>(ineq_a.rows()); }

  /// Throws std::invalid_argument unless the Hessian is symmetric within
  /// 1e-12 and has minimum eigenvalue > 1e-10, with consistent shapes.
  void validate() const;
};

enum class QpStatus { optimal, infeasible };

struct QpSolution {
  QpStatus status = QpStatus::infeasible;
  Eigen::VectorXd primal;       // n; meaningful only when optimal
  Eigen::VectorXd duals;        // m, >= 0, zero on inactive rows
  std::vector<int> active_set;  // row indices, sorted ascending
  double objective = 0.0;
};

/// Solves the QP by enumerating every candidate active set (|S| <= n),
/// solving the equality-KKT system and keeping the best primal-feasible
/// candidate with nonnegative duals. Near-singular subsets are skipped.
/// When no candidate is feasible, an internal phase-1 problem certifies
/// emptiness and status = infeasible is returned. Among equal-objective
/// candidates the smallest active set wins, then the lexicographically
/// first.
QpSolution solve(const QpProblem& qp);

/// Max-norm KKT residual of a candidate: stationarity, primal violation,
/// dual negativity and complementary slackness.
double kkt_residual(const QpProblem& qp, const QpSolution& sol);

}  // namespace cbftune
