#pragma once

#include <stdexcept>
#include <string>

namespace cbftune {

/// Gram matrix could not be factorized even after jitter escalation.
class IllConditionedDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The optimization history contains no feasible evaluation to start from.
class NoFeasibleStartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A barrier row has no control authority (relative degree mismatch).
class DegenerateConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Riccati iteration failed to produce a stabilizing solution.
class NoStabilizingSolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gradient requested at a point where the acquisition is not finite.
class UndefinedGradientError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A referenced record, trace or entry does not exist.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration is missing, malformed, or violates the schema.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cbftune
