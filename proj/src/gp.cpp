#include "cbftune/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cbftune/errors.hpp"
#include "cbftune/rng.hpp"

namespace cbftune {
namespace {

constexpr double kSqrt5 = 2.2360679774997896;
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

double scaled_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& lengthscales) {
  double sum = 0.0;
  for (int j = 0; j < a.size(); ++j) {
    const double t = (a[j] - b[j]) / lengthscales[j];
    sum += t * t;
  }
  return std::sqrt(sum);
}

double matern52_unit(double d) {
  const double s = kSqrt5 * d;
  return (1.0 + s + (5.0 / 3.0) * d * d) * std::exp(-s);
}

void check_hyperparams(const KernelHyperparams& hp, int p) {
  if (hp.lengthscales.size() != p) {
    throw std::invalid_argument("gp: lengthscale count does not match dim");
  }
  if (!(hp.signal_variance > 0.0) || (hp.lengthscales.array() <= 0.0).any()) {
    throw std::invalid_argument("gp: hyperparameters must be positive");
  }
  if (!(hp.jitter >= 1e-12 && hp.jitter <= kJitterMax)) {
    throw std::invalid_argument("gp: jitter outside [1e-12, 1e-4]");
  }
}

// Unit-signal correlation matrix C with C_ii = 1.
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& inputs,
                                   const Eigen::VectorXd& lengthscales) {
  const int n = static_cast<int>(inputs.rows());
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = matern52_unit(
          scaled_distance(inputs.row(i), inputs.row(j), lengthscales));
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

// Cholesky of C + jitter*I with x10 escalation; returns the jitter used.
double factorize(const Eigen::MatrixXd& c, double jitter_start,
                 Eigen::LLT<Eigen::MatrixXd>* llt) {
  double jitter = jitter_start;
  while (true) {
    Eigen::MatrixXd m = c;
    m.diagonal().array() += jitter;
    llt->compute(m);
    if (llt->info() == Eigen::Success) return jitter;
    if (jitter >= kJitterMax) {
      throw IllConditionedDataError(
          "gp: Gram matrix not factorizable at maximum jitter");
    }
    jitter *= 10.0;
  }
}

// Hyperparameter vector in optimizer coordinates:
// [log sv, log l_1..log l_p, mean].
struct FitParams {
  Eigen::VectorXd theta;
  int p = 0;

  double sv() const { return std::exp(theta[0]); }
  Eigen::VectorXd lengthscales() const {
    return theta.segment(1, p).array().exp();
  }
  double mean() const { return theta[p + 1]; }
};

struct FitBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

FitBox make_fit_box(const FitBounds& bounds, int p) {
  FitBox box;
  box.lo.resize(p + 2);
  box.hi.resize(p + 2);
  box.lo[0] = std::log(bounds.signal_variance_min);
  box.hi[0] = std::log(bounds.signal_variance_max);
  for (int j = 0; j < p; ++j) {
    box.lo[1 + j] = std::log(bounds.lengthscale_min);
    box.hi[1 + j] = std::log(bounds.lengthscale_max);
  }
  // standardized targets have zero mean and unit variance
  box.lo[p + 1] = -5.0;
  box.hi[p + 1] = 5.0;
  return box;
}

Eigen::VectorXd project(const Eigen::VectorXd& theta, const FitBox& box) {
  return theta.cwiseMax(box.lo).cwiseMin(box.hi);
}

// Log marginal likelihood of the standardized model and its gradient in
// optimizer coordinates. Returns -inf on factorization failure.
double lml_and_grad(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                    const FitParams& params, Eigen::VectorXd* grad) {
  const int n = static_cast<int>(inputs.rows());
  const int p = params.p;
  const double sv = params.sv();
  const Eigen::VectorXd ls = params.lengthscales();
  const Eigen::MatrixXd c = correlation_matrix(inputs, ls);
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter;
  try {
    jitter = factorize(c, kJitterStart, &llt);
  } catch (const IllConditionedDataError&) {
    return -std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd resid =
      y - Eigen::VectorXd::Constant(n, params.mean());
  // K = sv * M with M = C + jitter*I
  const Eigen::VectorXd minv_resid = llt.solve(resid);
  const double quad = resid.dot(minv_resid) / sv;
  double logdet_m = 0.0;
  for (int i = 0; i < n; ++i) {
    logdet_m += 2.0 * std::log(llt.matrixLLT()(i, i));
  }
  const double logdet = n * std::log(sv) + logdet_m;
  const double lml = -0.5 * quad - 0.5 * logdet - 0.5 * n * kLog2Pi;
  if (grad == nullptr) return lml;

  grad->resize(p + 2);
  const Eigen::VectorXd alpha = minv_resid / sv;  // K^-1 resid
  // d/d log sv: K depends on sv proportionally (jitter is relative), so
  // 0.5 tr((aa' - K^-1) K) = 0.5 (resid' a - n)
  (*grad)[0] = 0.5 * (resid.dot(alpha) - static_cast<double>(n));
  // lengthscale directions need K^-1 explicitly
  const Eigen::MatrixXd minv =
      llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd kinv = minv / sv;
  for (int j = 0; j < p; ++j) {
    // dK/d log l_j = sv * (5/3)(1 + sqrt5 d) e^{-sqrt5 d} (dz_j/l_j)^2
    Eigen::MatrixXd dk(n, n);
    for (int a = 0; a < n; ++a) {
      dk(a, a) = 0.0;
      for (int b = a + 1; b < n; ++b) {
        const double d = scaled_distance(inputs.row(a), inputs.row(b), ls);
        const double dz = (inputs(a, j) - inputs(b, j)) / ls[j];
        const double v = sv * (5.0 / 3.0) * (1.0 + kSqrt5 * d) *
                         std::exp(-kSqrt5 * d) * dz * dz;
        dk(a, b) = v;
        dk(b, a) = v;
      }
    }
    (*grad)[1 + j] =
        0.5 * (alpha.dot(dk * alpha) - (kinv.cwiseProduct(dk)).sum());
  }
  (*grad)[p + 1] = alpha.sum();
  return lml;
}

// Projected gradient ascent with backtracking.
double maximize_lml(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                    const FitBox& box, FitParams* params) {
  constexpr int kMaxIter = 60;
  Eigen::VectorXd grad;
  double value = lml_and_grad(inputs, y, *params, &grad);
  if (!std::isfinite(value)) return value;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    // stationarity measure that ignores directions blocked by the box
    Eigen::VectorXd eff = grad;
    for (int j = 0; j < eff.size(); ++j) {
      if (params->theta[j] <= box.lo[j] + 1e-14 && eff[j] < 0.0) eff[j] = 0.0;
      if (params->theta[j] >= box.hi[j] - 1e-14 && eff[j] > 0.0) eff[j] = 0.0;
    }
    if (eff.cwiseAbs().maxCoeff() < 1e-6) break;
    double step = 0.5;
    bool moved = false;
    while (step > 1e-12) {
      FitParams trial = *params;
      trial.theta = project(params->theta + step * grad, box);
      Eigen::VectorXd trial_grad;
      const double trial_value = lml_and_grad(inputs, y, trial, &trial_grad);
      const double gain = grad.dot(trial.theta - params->theta);
      if (std::isfinite(trial_value) && trial_value >= value + 1e-4 * gain &&
          trial_value > value) {
        *params = trial;
        value = trial_value;
        grad = trial_grad;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return value;
}

}  // namespace

void Dataset::validate() const {
  if (inputs.rows() == 0 || inputs.rows() != targets.size()) {
    throw std::invalid_argument("gp: dataset shape mismatch or empty");
  }
  if ((inputs.array() < -1e-12).any() ||
      (inputs.array() > 1.0 + 1e-12).any()) {
    throw std::invalid_argument("gp: inputs must lie in the unit box");
  }
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("gp: non-finite dataset");
  }
  for (int i = 0; i < inputs.rows(); ++i) {
    for (int j = i + 1; j < inputs.rows(); ++j) {
      if ((inputs.row(i) - inputs.row(j)).cwiseAbs().maxCoeff() <= 1e-12) {
        throw std::invalid_argument("gp: duplicate input rows");
      }
    }
  }
}

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const KernelHyperparams& hp) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("gp: point dimension mismatch");
  }
  check_hyperparams(hp, static_cast<int>(a.size()));
  return hp.signal_variance *
         matern52_unit(scaled_distance(a, b, hp.lengthscales));
}

Eigen::VectorXd matern52_gradient(const Eigen::VectorXd& a,
                                  const Eigen::VectorXd& b,
                                  const KernelHyperparams& hp) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("gp: point dimension mismatch");
  }
  check_hyperparams(hp, static_cast<int>(a.size()));
  const double d = scaled_distance(a, b, hp.lengthscales);
  const double factor = -(5.0 / 3.0) * hp.signal_variance *
                        (1.0 + kSqrt5 * d) * std::exp(-kSqrt5 * d);
  Eigen::VectorXd grad(a.size());
  for (int j = 0; j < a.size(); ++j) {
    const double l = hp.lengthscales[j];
    grad[j] = factor * (a[j] - b[j]) / (l * l);
  }
  return grad;
}

GpPosterior GpPosterior::from_hyperparams(Dataset dataset,
                                          KernelHyperparams hp) {
  dataset.validate();
  check_hyperparams(hp, dataset.dim());
  const Eigen::MatrixXd c =
      correlation_matrix(dataset.inputs, hp.lengthscales);
  Eigen::LLT<Eigen::MatrixXd> llt;
  hp.jitter = factorize(c, hp.jitter, &llt);

  GpPosterior post;
  const int n = dataset.size();
  const Eigen::VectorXd resid =
      dataset.targets - Eigen::VectorXd::Constant(n, hp.constant_mean);
  // K = sv * (C + jitter I); chol(K) = sqrt(sv) * chol(C + jitter I)
  post.weights_ = llt.solve(resid) / hp.signal_variance;
  post.chol_ = std::sqrt(hp.signal_variance) *
               Eigen::MatrixXd(llt.matrixL());
  double logdet = n * std::log(hp.signal_variance);
  for (int i = 0; i < n; ++i) {
    logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  }
  post.lml_ = -0.5 * resid.dot(post.weights_) - 0.5 * logdet -
              0.5 * n * kLog2Pi;
  post.dataset_ = std::move(dataset);
  post.hyperparams_ = std::move(hp);
  return post;
}

GpPosterior GpPosterior::fit(Dataset dataset, const FitBounds& bounds,
                             int restarts, std::uint64_t seed,
                             const KernelHyperparams* warm_start) {
  dataset.validate();
  if (dataset.size() < 2) {
    throw std::invalid_argument("gp: fitting needs at least two points");
  }
  if (restarts < 1) {
    throw std::invalid_argument("gp: restarts must be >= 1");
  }
  const int p = dataset.dim();
  const int n = dataset.size();

  const double shift = dataset.targets.mean();
  double scale = std::sqrt(
      (dataset.targets.array() - shift).square().sum() / n);
  if (scale < 1e-12) scale = 1.0;
  const Eigen::VectorXd y_std = (dataset.targets.array() - shift) / scale;

  const FitBox box = make_fit_box(bounds, p);
  Rng rng(seed);

  FitParams best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < restarts; ++k) {
    FitParams params;
    params.p = p;
    params.theta.resize(p + 2);
    if (k == 0) {
      if (warm_start != nullptr) {
        // convert raw-space warm start into standardized coordinates
        params.theta[0] =
            std::log(warm_start->signal_variance / (scale * scale));
        for (int j = 0; j < p; ++j) {
          params.theta[1 + j] = std::log(warm_start->lengthscales[j]);
        }
        params.theta[p + 1] = (warm_start->constant_mean - shift) / scale;
      } else {
        params.theta[0] = 0.0;  // sv = 1
        for (int j = 0; j < p; ++j) params.theta[1 + j] = std::log(0.5);
        params.theta[p + 1] = 0.0;
      }
    } else {
      params.theta[0] = rng.uniform(std::log(1e-2), std::log(1e2));
      for (int j = 0; j < p; ++j) {
        params.theta[1 + j] = rng.uniform(std::log(0.05), std::log(2.0));
      }
      params.theta[p + 1] = rng.uniform(-1.0, 1.0);
    }
    params.theta = project(params.theta, box);
    const double value = maximize_lml(dataset.inputs, y_std, box, &params);
    if (value > best_value) {
      best_value = value;
      best = params;
    }
  }
  if (!std::isfinite(best_value)) {
    throw IllConditionedDataError("gp: likelihood not finite at any start");
  }

  KernelHyperparams hp;
  hp.signal_variance = best.sv() * scale * scale;
  hp.lengthscales = best.lengthscales();
  hp.constant_mean = shift + scale * best.mean();
  hp.jitter = kJitterStart;
  return from_hyperparams(std::move(dataset), std::move(hp));
}

Prediction GpPosterior::predict(const Eigen::VectorXd& z) const {
  const int n = dataset_.size();
  if (z.size() != dataset_.dim()) {
    throw std::invalid_argument("gp: query dimension mismatch");
  }
  Eigen::VectorXd kstar(n);
  for (int i = 0; i < n; ++i) {
    kstar[i] = matern52(z, dataset_.inputs.row(i), hyperparams_);
  }
  Prediction out;
  out.mean = hyperparams_.constant_mean + kstar.dot(weights_);
  const Eigen::VectorXd w =
      chol_.triangularView<Eigen::Lower>().solve(kstar);
  out.variance = std::max(0.0, hyperparams_.signal_variance - w.squaredNorm());
  return out;
}

PredictionGradient GpPosterior::predict_gradient(
    const Eigen::VectorXd& z) const {
  const int n = dataset_.size();
  const int p = dataset_.dim();
  if (z.size() != p) {
    throw std::invalid_argument("gp: query dimension mismatch");
  }
  Eigen::VectorXd kstar(n);
  Eigen::MatrixXd jac(n, p);  // d kstar_i / d z
  for (int i = 0; i < n; ++i) {
    kstar[i] = matern52(z, dataset_.inputs.row(i), hyperparams_);
    jac.row(i) = matern52_gradient(z, dataset_.inputs.row(i), hyperparams_);
  }
  PredictionGradient out;
  out.mean = jac.transpose() * weights_;

  const double variance =
      std::max(0.0, hyperparams_.signal_variance -
                        chol_.triangularView<Eigen::Lower>()
                            .solve(kstar)
                            .squaredNorm());
  if (variance > 1e-12) {
    // d var / dz = -2 J' K^-1 k*
    Eigen::VectorXd kinv_kstar =
        chol_.triangularView<Eigen::Lower>().solve(kstar);
    chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(kinv_kstar);
    const Eigen::VectorXd dvar = -2.0 * jac.transpose() * kinv_kstar;
    out.std = dvar / (2.0 * std::sqrt(variance));
  } else {
    out.std = Eigen::VectorXd::Zero(p);
  }
  return out;
}

}  // namespace cbftune
