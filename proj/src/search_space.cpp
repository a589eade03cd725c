#include "cbftune/search_space.hpp"

#include <cmath>
#include <stdexcept>

namespace cbftune {

SearchSpace::SearchSpace(std::vector<SearchDim> dims) : dims_(std::move(dims)) {
  for (const auto& d : dims_) {
    if (!(d.lower < d.upper)) {
      throw std::invalid_argument("search dim '" + d.name +
                                  "': lower bound must be below upper");
    }
    if (d.log_scaled && !(d.lower > 0.0)) {
      throw std::invalid_argument("search dim '" + d.name +
                                  "': log scaling requires positive bounds");
    }
  }
}

Eigen::VectorXd SearchSpace::to_normalized(const Eigen::VectorXd& raw) const {
  if (raw.size() != dim()) {
    throw std::invalid_argument("point dimension mismatch");
  }
  Eigen::VectorXd unit(dim());
  for (int j = 0; j < dim(); ++j) {
    const auto& d = dims_[j];
    if (d.log_scaled) {
      const double lo = std::log10(d.lower);
      const double hi = std::log10(d.upper);
      unit[j] = (std::log10(raw[j]) - lo) / (hi - lo);
    } else {
      unit[j] = (raw[j] - d.lower) / (d.upper - d.lower);
    }
  }
  return unit;
}

Eigen::VectorXd SearchSpace::from_normalized(const Eigen::VectorXd& unit) const {
  if (unit.size() != dim()) {
    throw std::invalid_argument("point dimension mismatch");
  }
  Eigen::VectorXd raw(dim());
  for (int j = 0; j < dim(); ++j) {
    const auto& d = dims_[j];
    if (d.log_scaled) {
      const double lo = std::log10(d.lower);
      const double hi = std::log10(d.upper);
      raw[j] = std::pow(10.0, lo + unit[j] * (hi - lo));
    } else {
      raw[j] = d.lower + unit[j] * (d.upper - d.lower);
    }
  }
  return raw;
}

Eigen::VectorXd SearchSpace::clamp(const Eigen::VectorXd& raw) const {
  if (raw.size() != dim()) {
    throw std::invalid_argument("point dimension mismatch");
  }
  Eigen::VectorXd out = raw;
  for (int j = 0; j < dim(); ++j) {
    out[j] = std::min(std::max(out[j], dims_[j].lower), dims_[j].upper);
  }
  return out;
}

bool SearchSpace::contains(const Eigen::VectorXd& raw, double tol) const {
  if (raw.size() != dim()) return false;
  for (int j = 0; j < dim(); ++j) {
    const auto& d = dims_[j];
    const double margin = tol * (d.upper - d.lower);
    if (!(raw[j] >= d.lower - margin && raw[j] <= d.upper + margin)) {
      return false;
    }
  }
  return true;
}

}  // namespace cbftune
