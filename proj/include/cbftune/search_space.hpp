#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace cbftune {

enum class ParamCategory { control, safety, deployment };

struct SearchDim {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  bool log_scaled = false;
  ParamCategory category = ParamCategory::control;
};

/// Box search domain with per-dimension linear or log10 mapping to the unit
/// cube. All surrogate modeling and acquisition search happens in normalized
/// coordinates; evaluators receive raw coordinates.
class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<SearchDim> dims);

  int dim() const { return static_cast<int>(dims_.size()); }
  const std::vector<SearchDim>& dims() const { return dims_; }

  Eigen::VectorXd to_normalized(const Eigen::VectorXd& raw) const;
  Eigen::VectorXd from_normalized(const Eigen::VectorXd& unit) const;

  /// Clamp a raw point into the box.
  Eigen::VectorXd clamp(const Eigen::VectorXd& raw) const;

  bool contains(const Eigen::VectorXd& raw, double tol = 1e-9) const;

 private:
  std::vector<SearchDim> dims_;
};

}  // namespace cbftune
