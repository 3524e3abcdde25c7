#include "bigap/minimax.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace bigap {

namespace {

void check_vector(const Vector &v, Eigen::Index n, const char *oracle) {
    if (v.size() != n) {
        std::ostringstream os;
        os << oracle << " returned size " << v.size() << ", expected " << n;
        throw EvaluationError(os.str());
    }
    if (!v.allFinite())
        throw EvaluationError(std::string(oracle) + " returned a non-finite value");
}

void check_scalar(double v, const char *oracle) {
    if (!std::isfinite(v))
        throw EvaluationError(std::string(oracle) + " returned a non-finite value");
}

void check_triple(const MinimaxBilevelProblem &p, const GapParams &params, const Vector &x, const Vector &y,
                  const Vector &z) {
    params.validate();
    detail::require_size(x, p.dim_x, "x");
    detail::require_size(y, p.dim_y, "y");
    detail::require_size(z, p.dim_z, "z");
}

Vector concat(const Vector &a, const Vector &b, const Vector &c) {
    Vector w(a.size() + b.size() + c.size());
    w << a, b, c;
    return w;
}

} // namespace

void MinimaxBilevelProblem::validate() const {
    if (dim_x < 0 || dim_y < 0 || dim_z < 0)
        throw ConfigError(name + ": negative dimension");
    if (!upper_value || !upper_grad || !lower_value || !lower_grad)
        throw ConfigError(name + ": missing oracle");
    if (set_x.dim() != dim_x || set_y.dim() != dim_y || set_z.dim() != dim_z)
        throw ConfigError(name + ": feasible set dimension does not match problem dimension");
}

double MinimaxBilevelProblem::upper_eval(const Vector &x, const Vector &y, const Vector &z) const {
    const double v = upper_value(x, y, z);
    check_scalar(v, "upper_value");
    return v;
}

TripleGrad MinimaxBilevelProblem::upper_grad_eval(const Vector &x, const Vector &y, const Vector &z) const {
    TripleGrad g = upper_grad(x, y, z);
    check_vector(g.x, dim_x, "upper_grad (x block)");
    check_vector(g.y, dim_y, "upper_grad (y block)");
    check_vector(g.z, dim_z, "upper_grad (z block)");
    return g;
}

double MinimaxBilevelProblem::lower_eval(const Vector &x, const Vector &y, const Vector &z) const {
    const double v = lower_value(x, y, z);
    check_scalar(v, "lower_value");
    return v;
}

TripleGrad MinimaxBilevelProblem::lower_grad_eval(const Vector &x, const Vector &y, const Vector &z) const {
    TripleGrad g = lower_grad(x, y, z);
    check_vector(g.x, dim_x, "lower_grad (x block)");
    check_vector(g.y, dim_y, "lower_grad (y block)");
    check_vector(g.z, dim_z, "lower_grad (z block)");
    return g;
}

double saddle_gap_value_at(const MinimaxBilevelProblem &p, const GapParams &params, const Vector &x,
                           const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda) {
    const double max_part = p.lower_eval(x, y, lambda) - (lambda - z).squaredNorm() / (2.0 * params.gamma2);
    const double min_part = p.lower_eval(x, theta, z) + (theta - y).squaredNorm() / (2.0 * params.gamma1);
    return max_part - min_part;
}

void saddle_gap_gradient_at(const MinimaxBilevelProblem &p, const GapParams &params, const Vector &x,
                            const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda,
                            Vector &gx, Vector &gy, Vector &gz) {
    const TripleGrad at_lambda = p.lower_grad_eval(x, y, lambda);
    const TripleGrad at_theta = p.lower_grad_eval(x, theta, z);
    gx = at_lambda.x - at_theta.x;
    gy = at_lambda.y - (y - theta) / params.gamma1;
    gz = -(z - lambda) / params.gamma2 - at_theta.z;
}

GapEvaluation saddle_gap_value(const MinimaxBilevelProblem &p, const GapParams &params, const Vector &x,
                               const Vector &y, const Vector &z) {
    check_triple(p, params, x, y, z);

    detail::ProxSubproblem theta_sub;
    theta_sub.smooth_grad = [&](const Vector &t) { return p.lower_grad_eval(x, t, z).y; };
    theta_sub.set = &p.set_y;
    theta_sub.center = &y;
    theta_sub.weight = params.gamma1;
    InnerSolution theta = detail::solve_prox_subproblem(theta_sub, y, params.inner_tol, params.inner_max_iters);

    // max over lambda, posed as minimizing the negated objective
    detail::ProxSubproblem lambda_sub;
    lambda_sub.smooth_grad = [&](const Vector &l) -> Vector { return -p.lower_grad_eval(x, y, l).z; };
    lambda_sub.set = &p.set_z;
    lambda_sub.center = &z;
    lambda_sub.weight = params.gamma2;
    InnerSolution lambda = detail::solve_prox_subproblem(lambda_sub, z, params.inner_tol, params.inner_max_iters);

    GapEvaluation ev;
    ev.theta_star = std::move(theta.theta);
    ev.lambda_star = std::move(lambda.theta);
    ev.inner_iters_used = theta.iters + lambda.iters;
    ev.converged = theta.converged && lambda.converged;
    ev.value = saddle_gap_value_at(p, params, x, y, z, ev.theta_star, ev.lambda_star);
    return ev;
}

GapGradient saddle_gap_gradient(const MinimaxBilevelProblem &p, const GapParams &params, const Vector &x,
                                const Vector &y, const Vector &z) {
    GapGradient out;
    out.eval = saddle_gap_value(p, params, x, y, z);
    saddle_gap_gradient_at(p, params, x, y, z, out.eval.theta_star, out.eval.lambda_star, out.gx, out.gy,
                           out.gz);
    return out;
}

void minimax_aux_step(const MinimaxBilevelProblem &p, const GapParams &params, double eta, const IterState &s,
                      Vector &theta_next, Vector &lambda_next) {
    const Vector d_theta = p.lower_grad_eval(s.x, s.theta, s.z).y + (s.theta - s.y) / params.gamma1;
    const Vector d_lambda = -p.lower_grad_eval(s.x, s.y, s.lambda).z + (s.lambda - s.z) / params.gamma2;
    theta_next = s.theta - eta * d_theta;
    lambda_next = s.lambda - eta * d_lambda;
    p.set_y.project_in_place(theta_next);
    p.set_z.project_in_place(lambda_next);
}

Directions minimax_directions(const MinimaxBilevelProblem &p, const GapParams &params, const IterState &s,
                              const Vector &theta_next, const Vector &lambda_next, double c_k) {
    const TripleGrad grad_F = p.upper_grad_eval(s.x, s.y, s.z);
    const TripleGrad at_lambda = p.lower_grad_eval(s.x, s.y, lambda_next);
    const TripleGrad at_theta = p.lower_grad_eval(s.x, theta_next, s.z);
    Directions d;
    d.dx = grad_F.x / c_k + at_lambda.x - at_theta.x;
    d.dy = grad_F.y / c_k + at_lambda.y - (s.y - theta_next) / params.gamma1;
    d.dz = grad_F.z / c_k - (s.z - lambda_next) / params.gamma2 - at_theta.z;
    return d;
}

RunTrace run_minimax(const MinimaxBilevelProblem &p, const SolverConfig &config,
                     const std::optional<MinimaxStart> &start) {
    p.validate();
    config.validate();
    const GapParams &params = config.gap;

    IterState s;
    if (start) {
        s.x = start->x;
        s.y = start->y;
        s.z = start->z;
    } else if (p.default_start) {
        s.x = p.default_start->x;
        s.y = p.default_start->y;
        s.z = p.default_start->z;
    } else {
        s.x = Vector::Zero(p.dim_x);
        s.y = Vector::Zero(p.dim_y);
        s.z = Vector::Zero(p.dim_z);
    }
    detail::require_size(s.x, p.dim_x, "start x");
    detail::require_size(s.y, p.dim_y, "start y");
    detail::require_size(s.z, p.dim_z, "start z");
    p.set_x.project_in_place(s.x);
    p.set_y.project_in_place(s.y);
    p.set_z.project_in_place(s.z);
    s.theta = (start && start->theta) ? *start->theta : s.y;
    s.lambda = (start && start->lambda) ? *start->lambda : s.z;
    detail::require_size(s.theta, p.dim_y, "start theta");
    detail::require_size(s.lambda, p.dim_z, "start lambda");
    p.set_y.project_in_place(s.theta);
    p.set_z.project_in_place(s.lambda);

    std::optional<Vector> ref;
    if (p.reference_solution)
        ref = concat(p.reference_solution->x, p.reference_solution->y, p.reference_solution->z);

    RunTrace trace;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    auto residual_of = [&](const Vector &theta, const Vector &lambda, double c) {
        Vector gx, gy, gz;
        saddle_gap_gradient_at(p, params, s.x, s.y, s.z, theta, lambda, gx, gy, gz);
        const TripleGrad grad_F = p.upper_grad_eval(s.x, s.y, s.z);
        return std::sqrt(normal_cone_distance_sq(p.set_x, s.x, grad_F.x + c * gx) +
                         normal_cone_distance_sq(p.set_y, s.y, grad_F.y + c * gy) +
                         normal_cone_distance_sq(p.set_z, s.z, grad_F.z + c * gz));
    };

    auto add_diagnostics = [&](TraceRow &row) {
        const GapEvaluation ev = saddle_gap_value(p, params, s.x, s.y, s.z);
        row.gap_exact = ev.value;
        row.res_exact = residual_of(ev.theta_star, ev.lambda_star, row.c_k);
        row.diag_reliable = ev.converged;
    };

    auto emit_row = [&](double c_res) {
        TraceRow row;
        row.k = s.k;
        row.c_k = c_res;
        row.F = p.upper_eval(s.x, s.y, s.z);
        row.gap_proxy = saddle_gap_value_at(p, params, s.x, s.y, s.z, s.theta, s.lambda);
        row.res_proxy = residual_of(s.theta, s.lambda, c_res);
        if (ref)
            row.ref_rel_err = reference_error(concat(s.x, s.y, s.z), *ref);
        if (config.diag_every > 0 && s.k % config.diag_every == 0)
            add_diagnostics(row);
        row.time_s = elapsed();
        trace.rows.push_back(std::move(row));
    };

    auto stop_reason = [&]() -> std::optional<RunStatus> {
        const TraceRow &row = trace.rows.back();
        if (config.stop_ref_rel_err && row.ref_rel_err && *row.ref_rel_err < *config.stop_ref_rel_err)
            return RunStatus::ReferenceMet;
        if (config.stop_residual && row.res_proxy <= *config.stop_residual)
            return RunStatus::ResidualMet;
        return std::nullopt;
    };

    try {
        emit_row(penalty_at(config, 0));
        std::optional<RunStatus> done = stop_reason();
        for (long k = 0; !done && k < config.max_iters; ++k) {
            const double c_k = penalty_at(config, k);
            Vector theta_next, lambda_next;
            minimax_aux_step(p, params, config.eta, s, theta_next, lambda_next);
            const Directions d = minimax_directions(p, params, s, theta_next, lambda_next, c_k);
            if (!d.dx.allFinite() || !d.dy.allFinite() || !d.dz.allFinite())
                throw EvaluationError("non-finite update direction at k=" + std::to_string(k));

            s.k = k + 1;
            s.x -= config.alpha * d.dx;
            s.y -= config.alpha * d.dy;
            s.z -= config.alpha * d.dz;
            p.set_x.project_in_place(s.x);
            p.set_y.project_in_place(s.y);
            p.set_z.project_in_place(s.z);
            s.theta = std::move(theta_next);
            s.lambda = std::move(lambda_next);
            const double biggest = std::max({s.x.lpNorm<Eigen::Infinity>(), s.y.lpNorm<Eigen::Infinity>(),
                                             s.z.lpNorm<Eigen::Infinity>(), s.theta.lpNorm<Eigen::Infinity>(),
                                             s.lambda.lpNorm<Eigen::Infinity>()});
            if (!(biggest <= 1e12))
                throw EvaluationError("iterate diverged (norm above 1e12) at k=" + std::to_string(s.k));
            emit_row(c_k);
            done = stop_reason();
        }
        trace.status = done.value_or(RunStatus::MaxIters);
        if (config.diag_every > 0 && !trace.rows.back().gap_exact) {
            add_diagnostics(trace.rows.back());
            trace.rows.back().time_s = elapsed();
        }
    } catch (const EvaluationError &e) {
        trace.status = RunStatus::OracleFailure;
        trace.message = e.what();
    }
    trace.final_state = s;
    trace.wall_time_s = elapsed();
    return trace;
}

} // namespace bigap
