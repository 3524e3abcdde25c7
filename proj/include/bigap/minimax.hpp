#pragma once

// Bilevel problems whose lower level is a convex-concave saddle problem
//
//   min_{x in X, y in Y, z in Z} F(x, y, z)  s.t.  (y, z) saddle point of min_y max_z f(x, y, z).

#include "bigap/gapfn.hpp"
#include "bigap/solver.hpp"

#include <functional>
#include <optional>
#include <string>

namespace bigap {

struct TripleGrad {
    Vector x, y, z;
};

struct TriplePoint {
    Vector x, y, z;
};

/// f(x, ., z) convex and f(x, y, .) concave are caller obligations.
struct MinimaxBilevelProblem {
    using ValueFn = std::function<double(const Vector &, const Vector &, const Vector &)>;
    using GradFn = std::function<TripleGrad(const Vector &, const Vector &, const Vector &)>;

    std::string name;
    Eigen::Index dim_x = 0;
    Eigen::Index dim_y = 0;
    Eigen::Index dim_z = 0;

    ValueFn upper_value;
    GradFn upper_grad;
    ValueFn lower_value;
    GradFn lower_grad;

    ProjectableSet set_x;
    ProjectableSet set_y;
    ProjectableSet set_z;

    std::optional<TriplePoint> reference_solution;
    std::optional<TriplePoint> default_start;

    void validate() const;

    double upper_eval(const Vector &x, const Vector &y, const Vector &z) const;
    TripleGrad upper_grad_eval(const Vector &x, const Vector &y, const Vector &z) const;
    double lower_eval(const Vector &x, const Vector &y, const Vector &z) const;
    TripleGrad lower_grad_eval(const Vector &x, const Vector &y, const Vector &z) const;
};

/// Saddle gap: [max_{lambda in Z} f(x, y, lambda) - ||lambda - z||^2 / (2 gamma2)]
///           - [min_{theta in Y} f(x, theta, z) + ||theta - y||^2 / (2 gamma1)].
/// Both subproblems are solved to params.inner_tol; `converged` is the AND of both.
GapEvaluation saddle_gap_value(const MinimaxBilevelProblem &problem, const GapParams &params,
                               const Vector &x, const Vector &y, const Vector &z);

GapGradient saddle_gap_gradient(const MinimaxBilevelProblem &problem, const GapParams &params,
                                const Vector &x, const Vector &y, const Vector &z);

/// Gap expression and gradient with (theta, lambda) standing in for the exact solutions.
double saddle_gap_value_at(const MinimaxBilevelProblem &problem, const GapParams &params, const Vector &x,
                           const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda);
void saddle_gap_gradient_at(const MinimaxBilevelProblem &problem, const GapParams &params, const Vector &x,
                            const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda,
                            Vector &gx, Vector &gy, Vector &gz);

struct MinimaxStart {
    Vector x, y, z;
    std::optional<Vector> theta;  ///< defaults to y
    std::optional<Vector> lambda; ///< defaults to z
};

/// Auxiliary single steps: theta -= eta * (grad_y f(x, theta, z) + (theta - y) / gamma1),
/// lambda -= eta * (-grad_z f(x, y, lambda) + (lambda - z) / gamma2), each projected.
void minimax_aux_step(const MinimaxBilevelProblem &problem, const GapParams &params, double eta,
                      const IterState &state, Vector &theta_next, Vector &lambda_next);

Directions minimax_directions(const MinimaxBilevelProblem &problem, const GapParams &params,
                              const IterState &state, const Vector &theta_next, const Vector &lambda_next,
                              double c_k);

/// Single-loop method for the minimax lower level. The trace's ref_rel_err is the
/// distance of the full (x, y, z) to the reference, relative to its norm (absolute if zero).
/// GapParams::r and the merit settings are not used here.
RunTrace run_minimax(const MinimaxBilevelProblem &problem, const SolverConfig &config,
                     const std::optional<MinimaxStart> &start = std::nullopt);

} // namespace bigap
