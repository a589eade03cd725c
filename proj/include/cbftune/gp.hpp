#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace cbftune {

/// Evaluated configurations and their scalar observations, in normalized
/// search coordinates. Inputs must lie in the unit box and be pairwise
/// distinct: the regression model is noise-free and degenerates on duplicates.
struct Dataset {
  Eigen::MatrixXd inputs;   // N x p
  Eigen::VectorXd targets;  // N

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }

  /// Throws std::invalid_argument on any invariant violation.
  void validate() const;
};

/// Matern 5/2 kernel with per-dimension lengthscales plus a constant mean.
/// `jitter` is the diagonal nugget relative to the signal variance, i.e. the
/// Gram matrix factorized is signal_variance * (C + jitter * I).
struct KernelHyperparams {
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;
  double constant_mean = 0.0;
  double jitter = 1e-10;
};

/// Matern 5/2 covariance between two points.
double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const KernelHyperparams& hp);

/// Gradient of matern52 with respect to the first argument.
Eigen::VectorXd matern52_gradient(const Eigen::VectorXd& a,
                                  const Eigen::VectorXd& b,
                                  const KernelHyperparams& hp);

/// Box constraints for maximum-likelihood hyperparameter search, applied in
/// the standardized-target space.
struct FitBounds {
  double lengthscale_min = 1e-2;
  double lengthscale_max = 10.0;
  double signal_variance_min = 1e-4;
  double signal_variance_max = 1e4;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct PredictionGradient {
  Eigen::VectorXd mean;  // d mean / dz
  Eigen::VectorXd std;   // d sqrt(variance) / dz; zero when variance ~ 0
};

/// Immutable fitted surrogate: dataset, hyperparameters, Cholesky factor of
/// the (jittered) Gram matrix and the predictive weights K^-1 (y - m).
/// Safe to share across threads read-only.
class GpPosterior {
 public:
  /// Maximizes the exact log marginal likelihood by multi-restart projected
  /// gradient ascent in log-hyperparameter space. Targets are standardized
  /// internally; the returned hyperparameters are in raw target units.
  /// Deterministic given `seed`. `warm_start`, when given, seeds the first
  /// restart. Requires N >= 2.
  static GpPosterior fit(Dataset dataset, const FitBounds& bounds, int restarts,
                         std::uint64_t seed,
                         const KernelHyperparams* warm_start = nullptr);

  /// Builds the posterior for fixed hyperparameters (no likelihood search).
  /// Escalates jitter on factorization failure; throws
  /// IllConditionedDataError when 1e-4 relative jitter is not enough.
  static GpPosterior from_hyperparams(Dataset dataset, KernelHyperparams hp);

  Prediction predict(const Eigen::VectorXd& z) const;
  PredictionGradient predict_gradient(const Eigen::VectorXd& z) const;

  const Dataset& dataset() const { return dataset_; }
  const KernelHyperparams& hyperparams() const { return hyperparams_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double log_marginal_likelihood() const { return lml_; }

 private:
  GpPosterior() = default;

  Dataset dataset_;
  KernelHyperparams hyperparams_;
  Eigen::MatrixXd chol_;     // lower triangular
  Eigen::VectorXd weights_;  // K^-1 (y - m)
  double lml_ = 0.0;
};

}  // namespace cbftune
