#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rsl {

// Contract violations: bad configuration, mismatched grids, malformed files.
// The CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class GridMismatchError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

// Numerical failures during a run. The CLI maps these to exit code 3;
// Monte Carlo drivers catch them per path and keep going.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A hidden-state norm crossed the explosion threshold. The SDE limits have
// quadratic drift, so finite-time blowup is a legitimate outcome that must
// be reported, not a bug.
class ExplosionError : public NumericalError {
  public:
    ExplosionError(std::size_t layer, double norm, std::int64_t path_id = -1)
        : NumericalError("hidden state exploded at layer " + std::to_string(layer) +
                         " (norm " + std::to_string(norm) + ", path " +
                         std::to_string(path_id) + ")"),
          layer(layer),
          norm(norm),
          path_id(path_id) {}

    std::size_t layer;
    double norm;
    std::int64_t path_id;
};

class SingularityError : public NumericalError {
  public:
    SingularityError(double t, double cond)
        : NumericalError("Jacobian numerically singular at t=" + std::to_string(t) +
                         " (cond " + std::to_string(cond) + ")"),
          t(t),
          cond(cond) {}

    double t;
    double cond;
};

class DivergenceError : public NumericalError {
  public:
    DivergenceError(double loss, std::size_t update)
        : NumericalError("training diverged at update " + std::to_string(update) +
                         " (loss " + std::to_string(loss) + ")"),
          loss(loss),
          update(update) {}

    double loss;
    std::size_t update;
};

inline constexpr double kExplosionThreshold = 1e6;
inline constexpr double kConditionLimit = 1e12;

}  // namespace rsl
