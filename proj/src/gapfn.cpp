#include "bigap/gapfn.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace bigap {

void GapParams::validate() const {
    if (!(gamma1 > 0.0) || !(gamma2 > 0.0))
        throw ConfigError("gamma1 and gamma2 must be positive");
    if (!(r >= 0.0))
        throw ConfigError("multiplier cap r must be nonnegative");
    if (!(inner_tol > 0.0))
        throw ConfigError("inner_tol must be positive");
    if (inner_max_iters < 1)
        throw ConfigError("inner_max_iters must be at least 1");
}

namespace detail {

void require_nonnegative(const Vector &z, const char *what) {
    if ((z.array() < 0.0).any())
        throw ConfigError(std::string(what) + " must be componentwise nonnegative");
}

void require_size(const Vector &v, Eigen::Index n, const char *what) {
    if (v.size() != n)
        throw ConfigError(std::string(what) + " has size " + std::to_string(v.size()) + ", expected " +
                          std::to_string(n));
}

namespace {

// Largest ||grad(v + t d) - grad(v)|| / t over three fixed pseudo-random unit
// directions. Seeded with a constant so the subproblem solve stays a pure function.
double probe_smoothness(const ProxSubproblem &sub, const Vector &v, const Vector &grad_v) {
    if (v.size() == 0)
        return 0.0;
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal;
    const double t = 1e-4 * (1.0 + v.lpNorm<Eigen::Infinity>());
    double estimate = 0.0;
    for (int probe = 0; probe < 3; ++probe) {
        Vector d(v.size());
        for (auto &di : d)
            di = normal(rng);
        d.normalize();
        const Vector g = sub.smooth_grad(v + t * d);
        estimate = std::max(estimate, (g - grad_v).norm() / t);
    }
    return std::isfinite(estimate) ? estimate : 0.0;
}

} // namespace

InnerSolution solve_prox_subproblem(const ProxSubproblem &sub, const Vector &start, double tol,
                                    long max_iters) {
    const Vector &center = *sub.center;
    const double inv_w = 1.0 / sub.weight;
    InnerSolution out;
    Vector v = sub.set->project(start);
    Vector smooth_g = sub.smooth_grad(v);
    if (!smooth_g.allFinite())
        throw EvaluationError("inner subproblem gradient is non-finite");

    const double lhat = probe_smoothness(sub, v, smooth_g);
    double step = sub.weight / (1.0 + sub.weight * lhat);

    Vector grad = smooth_g + inv_w * (v - center);
    Vector trial(v.size());
    for (long it = 0; it < max_iters; ++it) {
        trial = v - step * grad;
        sub.set->project_in_place(trial);
        const Vector delta = trial - v;
        out.iters = it + 1;
        if (delta.norm() / step <= tol) {
            out.theta = std::move(trial);
            out.converged = true;
            return out;
        }
        Vector trial_g = sub.smooth_grad(trial);
        if (!trial_g.allFinite())
            throw EvaluationError("inner subproblem gradient is non-finite");
        Vector trial_grad = trial_g + inv_w * (trial - center);
        // Curvature test <grad(trial) - grad(v), delta> <= ||delta||^2 / step: the
        // descent inequality for quadratics, but free of the cancellation that makes
        // function-value tests fail near the solution.
        const double dd = delta.squaredNorm();
        if ((trial_grad - grad).dot(delta) > dd / step * (1.0 + 1e-12)) {
            step *= 0.5;
            continue;
        }
        v.swap(trial);
        grad.swap(trial_grad);
    }
    out.theta = std::move(v);
    out.converged = false;
    return out;
}

} // namespace detail

namespace {

void check_inputs(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                  const Vector &y, const Vector &z) {
    params.validate();
    detail::require_size(x, problem.dim_x, "x");
    detail::require_size(y, problem.dim_y, "y");
    detail::require_size(z, problem.dim_p, "z");
    detail::require_nonnegative(z, "z");
}

} // namespace

Vector lambda_star(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                   const Vector &y, const Vector &z) {
    // The closed form stays meaningful at gamma2 = 0 (lambda* = z), so only the sign is enforced here.
    GapParams relaxed = params;
    if (params.gamma2 == 0.0)
        relaxed.gamma2 = 1.0;
    check_inputs(problem, relaxed, x, y, z);
    return (z + params.gamma2 * problem.constraint_eval(x, y)).cwiseMax(0.0);
}

InnerSolution theta_star(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                         const Vector &y, const Vector &z, const Vector *warm_start) {
    check_inputs(problem, params, x, y, z);
    const bool constrained = problem.dim_p > 0;
    detail::ProxSubproblem sub;
    sub.smooth_grad = [&](const Vector &t) {
        Vector g = problem.lower_grad_eval(x, t).y;
        if (constrained)
            g += problem.constraint_vjp_eval(x, t, z).y;
        return g;
    };
    sub.set = &problem.set_y;
    sub.center = &y;
    sub.weight = params.gamma1;
    return detail::solve_prox_subproblem(sub, warm_start ? *warm_start : y, params.inner_tol,
                                         params.inner_max_iters);
}

double gap_value_at(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                    const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda) {
    const Vector g_y = problem.constraint_eval(x, y);
    const Vector g_theta = problem.constraint_eval(x, theta);
    const double max_part = problem.lower_eval(x, y) + lambda.dot(g_y) -
                            (lambda - z).squaredNorm() / (2.0 * params.gamma2);
    const double min_part = problem.lower_eval(x, theta) + z.dot(g_theta) +
                            (theta - y).squaredNorm() / (2.0 * params.gamma1);
    return max_part - min_part;
}

void gap_gradient_at(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                     const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda,
                     Vector &gx, Vector &gy, Vector &gz) {
    const BlockGrad f_y = problem.lower_grad_eval(x, y);
    const BlockGrad f_theta = problem.lower_grad_eval(x, theta);
    const BlockGrad vjp_y = problem.constraint_vjp_eval(x, y, lambda);
    const BlockGrad vjp_theta = problem.constraint_vjp_eval(x, theta, z);
    gx = f_y.x + vjp_y.x - f_theta.x - vjp_theta.x;
    gy = f_y.y + vjp_y.y - (y - theta) / params.gamma1;
    gz = -(z - lambda) / params.gamma2 - problem.constraint_eval(x, theta);
}

GapEvaluation gap_value(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                        const Vector &y, const Vector &z) {
    GapEvaluation ev;
    ev.lambda_star = lambda_star(problem, params, x, y, z);
    InnerSolution inner = theta_star(problem, params, x, y, z);
    ev.theta_star = std::move(inner.theta);
    ev.inner_iters_used = inner.iters;
    ev.converged = inner.converged;
    ev.value = gap_value_at(problem, params, x, y, z, ev.theta_star, ev.lambda_star);
    return ev;
}

GapGradient gap_gradient(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                         const Vector &y, const Vector &z) {
    GapGradient out;
    out.eval = gap_value(problem, params, x, y, z);
    gap_gradient_at(problem, params, x, y, z, out.eval.theta_star, out.eval.lambda_star, out.gx,
                    out.gy, out.gz);
    return out;
}

} // namespace bigap
