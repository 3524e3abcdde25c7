#pragma once

#include "bigap/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bigap {

/// Closed convex set with a cheap Euclidean projection.
///
/// Full-space and box sets are handled natively; anything else is supplied as a
/// projection callback that is trusted to be a true projection.
class ProjectableSet {
  public:
    enum class Kind { FullSpace, Box, Custom };
    using ProjectionFn = std::function<Vector(const Vector &)>;

    ProjectableSet() = default;

    static ProjectableSet full_space(Eigen::Index dim);
    /// Either bound may hold +/-infinity. Throws ConfigError if lower > upper anywhere.
    static ProjectableSet box(Vector lower, Vector upper);
    static ProjectableSet uniform_box(Eigen::Index dim, double lower, double upper);
    static ProjectableSet nonnegative(Eigen::Index dim);
    static ProjectableSet custom(Eigen::Index dim, ProjectionFn projection);

    Kind kind() const { return kind_; }
    Eigen::Index dim() const { return dim_; }
    const Vector &lower() const { return lower_; }
    const Vector &upper() const { return upper_; }

    Vector project(const Vector &v) const;
    void project_in_place(Vector &v) const;

    /// Feasibility test; custom sets compare against their own projection.
    bool contains(const Vector &v, double tol = 0.0) const;

    /// Random point of the set, used for gradient checks and property tests.
    Vector sample(std::mt19937_64 &rng, double scale = 1.0) const;

  private:
    Kind kind_ = Kind::FullSpace;
    Eigen::Index dim_ = 0;
    Vector lower_;
    Vector upper_;
    ProjectionFn projection_;
};

/// Throws ConfigError on dimension mismatch.
Vector project(const ProjectableSet &set, const Vector &v);

struct PrimalPoint {
    Vector x;
    Vector y;
};

/// Constrained bilevel problem given through first-order oracles:
///
///   min_{x in X, y in Y} F(x, y)  s.t.  y in argmin_{y' in Y} { f(x, y') : g(x, y') <= 0 }.
///
/// f(x, .) and g(x, .) must be convex on Y and every lower-level solution must
/// admit a multiplier; neither is checked at runtime. Oracles must be pure and
/// reentrant. The `*_eval` helpers wrap the raw callbacks with size and
/// finiteness checks and are what the algorithms call.
struct BilevelProblem {
    using ValueFn = std::function<double(const Vector &, const Vector &)>;
    using GradFn = std::function<BlockGrad(const Vector &, const Vector &)>;
    using ConstraintFn = std::function<Vector(const Vector &, const Vector &)>;
    using VjpFn = std::function<BlockGrad(const Vector &, const Vector &, const Vector &)>;

    std::string name;
    Eigen::Index dim_x = 0;
    Eigen::Index dim_y = 0;
    Eigen::Index dim_p = 0;

    ValueFn upper_value;
    GradFn upper_grad;
    ValueFn lower_value;
    GradFn lower_grad;
    ConstraintFn constraint_value; ///< may be empty when dim_p == 0
    VjpFn constraint_vjp;          ///< (lambda^T grad_x g, lambda^T grad_y g); may be empty when dim_p == 0

    ProjectableSet set_x;
    ProjectableSet set_y;

    std::optional<PrimalPoint> reference_solution;
    /// Benchmark protocol starting point, used when a run is not given one.
    std::optional<PrimalPoint> default_start;
    /// Benchmark protocol value of the multiplier cap r, used when a run does not set one.
    std::optional<double> default_r;

    /// Structural checks: dimensions, required oracles present.
    void validate() const;

    double upper_eval(const Vector &x, const Vector &y) const;
    BlockGrad upper_grad_eval(const Vector &x, const Vector &y) const;
    double lower_eval(const Vector &x, const Vector &y) const;
    BlockGrad lower_grad_eval(const Vector &x, const Vector &y) const;
    Vector constraint_eval(const Vector &x, const Vector &y) const;
    BlockGrad constraint_vjp_eval(const Vector &x, const Vector &y, const Vector &lambda) const;
};

struct OracleCheck {
    std::string oracle;
    bool applicable = true;      ///< false for constraint checks when dim_p == 0
    double max_rel_error = 0.0;  ///< ||user - fd|| / max(||fd||, 1), worst over samples
    bool passed = true;
};

struct ValidationReport {
    std::vector<OracleCheck> checks;
    double tolerance = 1e-4;
    bool passed = true;
    std::string failure; ///< set when an oracle produced a non-finite value
};

struct ValidationOptions {
    int samples = 5;
    double step = 1e-6; ///< scaled by 1 + ||point||_inf
    std::uint64_t seed = 0;
    double tolerance = 1e-4;
};

/// Compares user gradients and constraint VJPs against central finite differences
/// of the value oracles at random feasible points.
ValidationReport validate_gradients(const BilevelProblem &problem, const ValidationOptions &options);

inline ValidationReport validate_gradients(const BilevelProblem &problem, int samples, double step,
                                           std::uint64_t seed) {
    return validate_gradients(problem, ValidationOptions{samples, step, seed, 1e-4});
}

/// ||a - b||_2 / max(||b||_2, 1): relative for large gradients, absolute near zero.
double relative_error(const Vector &actual, const Vector &expected);

} // namespace bigap
