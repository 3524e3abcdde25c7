#include "bigap/oracle.hpp"
#include "bigap/minimax.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace bigap::oracle {

Vector finite_diff_grad(const std::function<double(const Vector &)> &fn, const Vector &point,
                        const OracleConfig &cfg) {
    const double h = cfg.fd_step * (1.0 + (point.size() ? point.lpNorm<Eigen::Infinity>() : 0.0));
    Vector grad(point.size());
    Vector probe = point;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        probe[i] = point[i] + h;
        const double up = fn(probe);
        probe[i] = point[i] - h;
        const double down = fn(probe);
        probe[i] = point[i];
        if (!std::isfinite(up) || !std::isfinite(down))
            throw EvaluationError("finite difference: non-finite sample along coordinate " + std::to_string(i));
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

GridMax grid_argmax_concave_1d(const std::function<double(double)> &fn, double lo, double hi,
                               const OracleConfig &cfg) {
    if (!(lo < hi))
        throw ConfigError("grid_argmax_concave_1d: need lo < hi");
    const int n = std::max(cfg.grid_points, 3);
    auto scan = [&](double a, double b, GridMax best) {
        const double dx = (b - a) / (n - 1);
        for (int i = 0; i < n; ++i) {
            const double t = (i == n - 1) ? b : a + i * dx;
            const double v = fn(t);
            if (v > best.max) {
                best.max = v;
                best.argmax = t;
            }
        }
        return best;
    };
    GridMax coarse = scan(lo, hi, {lo, fn(lo)});
    const double cell = (hi - lo) / (n - 1);
    return scan(std::max(lo, coarse.argmax - cell), std::min(hi, coarse.argmax + cell), coarse);
}

HighAccuracySolve solve_inner_highacc(const BilevelProblem &problem, const GapParams &params,
                                      const Vector &x, const Vector &y, const Vector &z,
                                      const OracleConfig &cfg, bool record_objective) {
    auto objective = [&](const Vector &t) {
        double v = problem.lower_eval(x, t) + (t - y).squaredNorm() / (2.0 * params.gamma1);
        if (problem.dim_p > 0)
            v += z.dot(problem.constraint_eval(x, t));
        return v;
    };
    auto gradient = [&](const Vector &t) {
        Vector g = problem.lower_grad_eval(x, t).y + (t - y) / params.gamma1;
        if (problem.dim_p > 0)
            g += problem.constraint_vjp_eval(x, t, z).y;
        return g;
    };

    HighAccuracySolve out;
    Vector t = problem.set_y.project(y);
    double ft = objective(t);
    Vector g = gradient(t);
    if (record_objective)
        out.objective_trace.push_back(ft);
    double step = 1.0;
    for (long it = 0; it < cfg.high_acc_max_iters; ++it) {
        out.iters = it + 1;
        out.mapping_norm = (t - problem.set_y.project(t - step * g)).norm() / step;
        if (out.mapping_norm <= cfg.high_acc_tol) {
            out.converged = true;
            break;
        }
        // Armijo backtracking along the projection arc. Once the decrease drops
        // below the rounding level of f it is measured by the trapezoid rule
        // (f(c) - f(t) ~ <g(t) + g(c), c - t> / 2) instead of by differencing f.
        Vector cand, gc;
        double fc = ft;
        bool accepted = false;
        for (int bt = 0; bt < 80 && !accepted; ++bt) {
            cand = problem.set_y.project(t - step * g);
            const Vector delta = cand - t;
            fc = objective(cand);
            gc = gradient(cand);
            double decrease = fc - ft;
            if (std::abs(decrease) <= 1e-10 * (1.0 + std::abs(ft)))
                decrease = 0.5 * (g + gc).dot(delta);
            accepted = decrease <= 1e-4 * g.dot(delta);
            if (!accepted)
                step *= 0.5;
        }
        if (!accepted)
            break;
        t = std::move(cand);
        g = std::move(gc);
        ft = fc;
        if (record_objective)
            out.objective_trace.push_back(ft);
        step *= 2.0;
    }
    out.theta = std::move(t);
    return out;
}

Vector least_squares(const Matrix &design, const Vector &response) {
    if (design.rows() != response.size())
        throw ConfigError("least_squares: design and response sizes differ");
    Matrix normal = design.transpose() * design;
    Vector rhs = design.transpose() * response;
    Eigen::LLT<Eigen::Ref<Matrix>> llt(normal);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("least_squares: design is rank deficient");
    // `normal` now holds the Cholesky factor.
    const double diag_max = normal.diagonal().cwiseAbs().maxCoeff();
    const double diag_min = normal.diagonal().cwiseAbs().minCoeff();
    if (diag_min <= 1e-7 * diag_max)
        throw std::runtime_error("least_squares: design is numerically rank deficient");
    return llt.solve(rhs);
}

SaddlePoint saddle_point_alternating(const MinimaxBilevelProblem &problem, const Vector &x, Vector y,
                                     Vector z, double step, double tol, long max_iters) {
    SaddlePoint out;
    for (long it = 0; it < max_iters; ++it) {
        Vector y_next = problem.set_y.project(y - step * problem.lower_grad_eval(x, y, z).y);
        Vector z_next = problem.set_z.project(z + step * problem.lower_grad_eval(x, y_next, z).z);
        const double move = std::sqrt((y_next - y).squaredNorm() + (z_next - z).squaredNorm()) / step;
        y = std::move(y_next);
        z = std::move(z_next);
        out.iters = it + 1;
        if (move <= tol) {
            out.converged = true;
            break;
        }
    }
    out.y = std::move(y);
    out.z = std::move(z);
    return out;
}

} // namespace bigap::oracle
