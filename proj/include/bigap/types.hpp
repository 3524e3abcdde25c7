#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace bigap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid user input: dimension mismatch, out-of-range parameter, bad config key.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A problem oracle returned something unusable (non-finite value, wrong size).
class EvaluationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vector &v) { return v.allFinite(); }

/// Pair of partial gradients (or adjoint products) with respect to x and y.
struct BlockGrad {
    Vector x;
    Vector y;
};

} // namespace bigap
