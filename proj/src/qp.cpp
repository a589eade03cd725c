#include "cbftune/qp.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "cbftune/errors.hpp"

namespace cbftune {
namespace {

constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-10;
constexpr double kRcondSkip = 1e-12;  // skip subsets with rcond below this

struct Candidate {
  bool found = false;
  Eigen::VectorXd u;
  Eigen::VectorXd duals;
  std::vector<int> active;
  double objective = std::numeric_limits<double>::infinity();
};

double objective_value(const QpProblem& qp, const Eigen::VectorXd& u) {
  return 0.5 * u.dot(qp.hessian * u) + qp.linear.dot(u);
}

// Solves the equality-KKT system for active set `active`; returns false when
// the system is too close to singular to trust.
bool kkt_solve(const QpProblem& qp, const std::vector<int>& active,
               Eigen::VectorXd* u, Eigen::VectorXd* lambda) {
  const int n = qp.num_vars();
  const int s = static_cast<int>(active.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + s, n + s);
  Eigen::VectorXd rhs(n + s);
  kkt.topLeftCorner(n, n) = qp.hessian;
  rhs.head(n) = -qp.linear;
  for (int i = 0; i < s; ++i) {
    kkt.block(n + i, 0, 1, n) = qp.ineq_a.row(active[i]);
    kkt.block(0, n + i, n, 1) = qp.ineq_a.row(active[i]).transpose();
    rhs[n + i] = qp.ineq_b[active[i]];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible() || lu.rcond() < kRcondSkip) return false;
  const Eigen::VectorXd sol = lu.solve(rhs);
  *u = sol.head(n);
  *lambda = sol.tail(s);
  return true;
}

// Enumerates subsets of {0..m-1} of size `size` in lexicographic order.
void for_each_subset(int m, int size,
                     const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(size);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == size) {
      fn(idx);
      return;
    }
    for (int i = start; i <= m - (size - depth); ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
}

// Active-set enumeration without the phase-1 fallback.
Candidate enumerate_best(const QpProblem& qp) {
  const int n = qp.num_vars();
  const int m = qp.num_rows();
  Candidate best;
  const int max_size = std::min(n, m);
  for (int size = 0; size <= max_size; ++size) {
    for_each_subset(m, size, [&](const std::vector<int>& active) {
      Eigen::VectorXd u, lambda;
      if (!kkt_solve(qp, active, &u, &lambda)) return;
      if ((lambda.array() < -kDualTol).any()) return;
      for (int i = 0; i < m; ++i) {
        const double viol = qp.ineq_a.row(i).dot(u) - qp.ineq_b[i];
        if (viol > kPrimalTol * (1.0 + std::abs(qp.ineq_b[i]))) return;
      }
      const double obj = objective_value(qp, u);
      // Strict improvement keeps the first (smallest, lexicographically
      // earliest) active set among ties.
      if (obj < best.objective - 1e-12 * (1.0 + std::abs(obj))) {
        best.found = true;
        best.u = u;
        best.duals = lambda;
        best.active = active;
        best.objective = obj;
      }
    });
  }
  return best;
}

// Certifies emptiness of {u : A u <= b} by minimizing the worst violation:
//   min s + (mu/2)(||u||^2 + s^2)  s.t.  a_i' u - s <= b_i.
bool feasible_set_empty(const QpProblem& qp) {
  const int n = qp.num_vars();
  const int m = qp.num_rows();
  const double mu = 1e-6;
  QpProblem phase1;
  phase1.hessian = mu * Eigen::MatrixXd::Identity(n + 1, n + 1);
  phase1.linear = Eigen::VectorXd::Zero(n + 1);
  phase1.linear[n] = 1.0;
  phase1.ineq_a.resize(m, n + 1);
  phase1.ineq_a.leftCols(n) = qp.ineq_a;
  phase1.ineq_a.col(n).setConstant(-1.0);
  phase1.ineq_b = qp.ineq_b;
  const Candidate sol = enumerate_best(phase1);
  if (!sol.found) {
    // a large-enough slack always satisfies every row
    throw DegenerateConstraintError("phase-1 enumeration found no candidate");
  }
  const double worst = sol.u[n];
  return worst > 1e-9;
}

}  // namespace

void QpProblem::validate() const {
  const int n = num_vars();
  if (hessian.cols() != n || linear.size() != n) {
    throw std::invalid_argument("qp: inconsistent objective shapes");
  }
  if (ineq_a.rows() != ineq_b.size() ||
      (ineq_a.rows() > 0 && ineq_a.cols() != n)) {
    throw std::invalid_argument("qp: inconsistent constraint shapes");
  }
  const double scale = 1.0 + hessian.cwiseAbs().maxCoeff();
  if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("qp: hessian not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian);
  if (eig.eigenvalues().minCoeff() <= 1e-10) {
    throw std::invalid_argument("qp: hessian not positive definite");
  }
}

QpSolution solve(const QpProblem& qp) {
  qp.validate();
  const int m = qp.num_rows();
  QpSolution out;
  const Candidate best = enumerate_best(qp);
  if (!best.found) {
    if (feasible_set_empty(qp)) {
      out.status = QpStatus::infeasible;
      return out;
    }
    {  // temporary diagnostic dump
      fprintf(stderr, "DEGENERATE QP n=%d m=%d\nH:\n", qp.num_vars(), m);
      for (int i = 0; i < qp.num_vars(); ++i) {
        for (int j = 0; j < qp.num_vars(); ++j)
          fprintf(stderr, " %.17g", qp.hessian(i, j));
        fprintf(stderr, "\n");
      }
      fprintf(stderr, "f:");
      for (int i = 0; i < qp.num_vars(); ++i)
        fprintf(stderr, " %.17g", qp.linear[i]);
      fprintf(stderr, "\nA|b:\n");
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < qp.num_vars(); ++j)
          fprintf(stderr, " %.17g", qp.ineq_a(i, j));
        fprintf(stderr, " | %.17g\n", qp.ineq_b[i]);
      }
    }
    throw DegenerateConstraintError(
        "qp: feasible set nonempty but every KKT subset was degenerate");
  }
  out.status = QpStatus::optimal;
  out.primal = best.u;
  out.objective = best.objective;
  out.active_set = best.active;
  out.duals = Eigen::VectorXd::Zero(m);
  for (size_t i = 0; i < best.active.size(); ++i) {
    out.duals[best.active[i]] = std::max(0.0, best.duals[i]);
  }
  return out;
}

double kkt_residual(const QpProblem& qp, const QpSolution& sol) {
  Eigen::VectorXd stat = qp.hessian * sol.primal + qp.linear;
  if (qp.num_rows() > 0) stat += qp.ineq_a.transpose() * sol.duals;
  double res = stat.cwiseAbs().maxCoeff();
  for (int i = 0; i < qp.num_rows(); ++i) {
    const double slack = qp.ineq_a.row(i).dot(sol.primal) - qp.ineq_b[i];
    res = std::max(res, slack);                      // primal violation
    res = std::max(res, -sol.duals[i]);              // dual negativity
    res = std::max(res, std::abs(sol.duals[i] * slack));  // complementarity
  }
  return res;
}

}  // namespace cbftune
