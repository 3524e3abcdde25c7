#pragma once

#include "bigap/problem.hpp"

#include <functional>

namespace bigap {

/// Proximal weights of the doubly regularized gap function and the multiplier cap
/// Z = [0, r]^p used by the solver.
struct GapParams {
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    double r = 10.0;
    double inner_tol = 1e-10;      ///< bound on the projected-gradient-mapping norm of the theta solve
    long inner_max_iters = 200000;

    /// Throws ConfigError unless gamma1, gamma2, inner_tol > 0, r >= 0, inner_max_iters >= 1.
    void validate() const;
};

struct GapEvaluation {
    double value = 0.0;
    Vector theta_star;
    Vector lambda_star;
    long inner_iters_used = 0;
    bool converged = true;
};

struct GapGradient {
    Vector gx;
    Vector gy;
    Vector gz;
    GapEvaluation eval;
};

struct InnerSolution {
    Vector theta;
    long iters = 0;
    bool converged = false;
};

/// Proj_{R^p_+}(z + gamma2 * g(x, y)), the closed-form maximizer of the lambda-subproblem.
Vector lambda_star(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                   const Vector &y, const Vector &z);

/// argmin_{theta in Y} f(x, theta) + z^T g(x, theta) + ||theta - y||^2 / (2 gamma1).
///
/// Projected gradient descent from `warm_start` (default y). The step starts at
/// gamma1 / (1 + gamma1 * L_hat), L_hat probed by finite differences of the
/// smooth part's gradient, and is halved whenever the local curvature along the
/// step exceeds 1 / step.
InnerSolution theta_star(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                         const Vector &y, const Vector &z, const Vector *warm_start = nullptr);

/// G_gamma(x, y, z). z must be componentwise nonnegative (z > r is tolerated).
GapEvaluation gap_value(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                        const Vector &y, const Vector &z);

/// Gradient of G_gamma assembled from first-order oracles at the exact (theta*, lambda*).
GapGradient gap_gradient(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                         const Vector &y, const Vector &z);

/// The gap expression and its gradient blocks with caller-supplied (theta, lambda)
/// in place of the exact maximizer/minimizer. With theta = theta_k this is the
/// cheap proxy the solver logs every iteration.
double gap_value_at(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                    const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda);
void gap_gradient_at(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                     const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda,
                     Vector &gx, Vector &gy, Vector &gz);

namespace detail {

/// Pieces of a strongly convex subproblem
///   min_{v in set} smooth(v) + ||v - center||^2 / (2 weight).
struct ProxSubproblem {
    std::function<Vector(const Vector &)> smooth_grad;
    const ProjectableSet *set = nullptr;
    const Vector *center = nullptr;
    double weight = 1.0;
};

InnerSolution solve_prox_subproblem(const ProxSubproblem &sub, const Vector &start, double tol,
                                    long max_iters);

void require_nonnegative(const Vector &z, const char *what);
void require_size(const Vector &v, Eigen::Index n, const char *what);

} // namespace detail

} // namespace bigap
