#pragma once

// Reference computations used to cross-check the solver code paths. Nothing in
// here shares implementation with gapfn or solver; they are kept slow and plain.

#include "bigap/gapfn.hpp"
#include "bigap/problem.hpp"

#include <functional>
#include <vector>

namespace bigap {

struct MinimaxBilevelProblem;

namespace oracle {

struct OracleConfig {
    double fd_step = 1e-6; ///< scaled by 1 + ||point||_inf
    int grid_points = 10001;
    double high_acc_tol = 1e-12;
    long high_acc_max_iters = 1000000;
};

/// Central differences, one coordinate at a time.
Vector finite_diff_grad(const std::function<double(const Vector &)> &fn, const Vector &point,
                        const OracleConfig &cfg = {});

struct GridMax {
    double argmax = 0.0;
    double max = 0.0;
};

/// Uniform grid over [lo, hi], then one refinement pass with the same number of
/// points over the two cells around the best grid point.
GridMax grid_argmax_concave_1d(const std::function<double(double)> &fn, double lo, double hi,
                               const OracleConfig &cfg = {});

struct HighAccuracySolve {
    Vector theta;
    bool converged = false;
    long iters = 0;
    double mapping_norm = 0.0;
    std::vector<double> objective_trace; ///< filled only when requested
};

/// theta*-subproblem by projected gradient with Armijo backtracking from a unit
/// step, run until the gradient-mapping norm drops below cfg.high_acc_tol.
HighAccuracySolve solve_inner_highacc(const BilevelProblem &problem, const GapParams &params,
                                      const Vector &x, const Vector &y, const Vector &z,
                                      const OracleConfig &cfg = {}, bool record_objective = false);

/// Normal equations solved by an in-place Cholesky factorization.
/// Throws std::runtime_error when the design is (numerically) rank deficient.
Vector least_squares(const Matrix &design, const Vector &response);

struct SaddlePoint {
    Vector y;
    Vector z;
    bool converged = false;
    long iters = 0;
};

/// Alternating projected gradient descent-ascent on min_y max_z f(x, y, z) for a
/// fixed x. Converges for strongly convex-concave f with a small enough step.
SaddlePoint saddle_point_alternating(const MinimaxBilevelProblem &problem, const Vector &x,
                                     Vector y, Vector z, double step, double tol, long max_iters);

} // namespace oracle
} // namespace bigap
