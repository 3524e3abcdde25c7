#include "bigap/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace bigap {

namespace {

constexpr double kDivergenceNorm = 1e12;

void require_finite(const Vector &v, const char *what) {
    if (!v.allFinite())
        throw EvaluationError(std::string(what) + " is non-finite");
}

} // namespace

double normal_cone_distance_sq(const ProjectableSet &set, const Vector &w, const Vector &d) {
    switch (set.kind()) {
    case ProjectableSet::Kind::FullSpace:
        return d.squaredNorm();
    case ProjectableSet::Kind::Box: {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const bool at_lower = w[i] <= set.lower()[i];
            const bool at_upper = w[i] >= set.upper()[i];
            double c = d[i];
            if (at_lower && at_upper)
                c = 0.0; // fixed coordinate, normal cone is the whole line
            else if (at_lower)
                c = std::min(d[i], 0.0);
            else if (at_upper)
                c = std::max(d[i], 0.0);
            acc += c * c;
        }
        return acc;
    }
    case ProjectableSet::Kind::Custom:
        return (w - set.project(w - d)).squaredNorm();
    }
    return 0.0;
}

std::string to_string(RunStatus status) {
    switch (status) {
    case RunStatus::MaxIters:
        return "max-iters";
    case RunStatus::ResidualMet:
        return "residual-met";
    case RunStatus::ReferenceMet:
        return "reference-met";
    case RunStatus::OracleFailure:
        return "oracle-failure";
    }
    return "unknown";
}

void SolverConfig::validate() const {
    gap.validate();
    if (!(alpha >= 0.0) || !(eta >= 0.0))
        throw ConfigError("step sizes must be nonnegative");
    if (!(penalty_c > 0.0))
        throw ConfigError("penalty constant c must be positive");
    if (!(penalty_rho >= 0.0 && penalty_rho < 0.5))
        throw ConfigError("penalty exponent rho must lie in [0, 0.5)");
    if (max_iters < 0)
        throw ConfigError("max_iters must be nonnegative");
    if (diag_every < 0)
        throw ConfigError("diag_every must be nonnegative");
}

double penalty_at(const SolverConfig &config, long k) {
    return config.penalty_c * std::pow(static_cast<double>(k) + 1.0, config.penalty_rho);
}

ProjectableSet multiplier_box(const BilevelProblem &problem, const GapParams &params) {
    return ProjectableSet::uniform_box(problem.dim_p, 0.0, params.r);
}

Vector step_theta(const BilevelProblem &problem, const GapParams &params, const SolverConfig &config,
                  const IterState &s) {
    Vector d = problem.lower_grad_eval(s.x, s.theta).y + (s.theta - s.y) / params.gamma1;
    if (problem.dim_p > 0)
        d += problem.constraint_vjp_eval(s.x, s.theta, s.z).y;
    require_finite(d, "theta direction");
    Vector next = s.theta - config.eta * d;
    problem.set_y.project_in_place(next);
    return next;
}

Vector step_lambda(const BilevelProblem &problem, const GapParams &params, const IterState &s) {
    return (s.z + params.gamma2 * problem.constraint_eval(s.x, s.y)).cwiseMax(0.0);
}

Directions directions(const BilevelProblem &problem, const GapParams &params, const SolverConfig &,
                      const IterState &s, const Vector &theta_next, const Vector &lambda_next,
                      double c_k) {
    const BlockGrad grad_F = problem.upper_grad_eval(s.x, s.y);
    const BlockGrad grad_f = problem.lower_grad_eval(s.x, s.y);
    const BlockGrad grad_f_theta = problem.lower_grad_eval(s.x, theta_next);
    const BlockGrad lam_g = problem.constraint_vjp_eval(s.x, s.y, lambda_next);
    const BlockGrad z_g_theta = problem.constraint_vjp_eval(s.x, theta_next, s.z);

    Directions d;
    d.dx = grad_F.x / c_k + grad_f.x + lam_g.x - grad_f_theta.x - z_g_theta.x;
    d.dy = grad_F.y / c_k + grad_f.y + lam_g.y - (s.y - theta_next) / params.gamma1;
    d.dz = -(s.z - lambda_next) / params.gamma2 - problem.constraint_eval(s.x, theta_next);
    require_finite(d.dx, "x direction");
    require_finite(d.dy, "y direction");
    require_finite(d.dz, "z direction");
    return d;
}

PrimalUpdate step_primal(const BilevelProblem &problem, const SolverConfig &config, const IterState &s,
                         const Vector &dx, const Vector &dy, const Vector &dz) {
    PrimalUpdate u{s.x - config.alpha * dx, s.y - config.alpha * dy, s.z - config.alpha * dz};
    problem.set_x.project_in_place(u.x);
    problem.set_y.project_in_place(u.y);
    u.z = u.z.cwiseMax(0.0).cwiseMin(config.gap.r);
    return u;
}

Directions psi_gradient(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                        const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda,
                        double c) {
    Directions g;
    gap_gradient_at(problem, params, x, y, z, theta, lambda, g.dx, g.dy, g.dz);
    const BlockGrad grad_F = problem.upper_grad_eval(x, y);
    g.dx = grad_F.x + c * g.dx;
    g.dy = grad_F.y + c * g.dy;
    g.dz = c * g.dz;
    return g;
}

double residual(const BilevelProblem &problem, const GapParams &params, const IterState &s,
                const Directions &grad_psi) {
    const double sq = normal_cone_distance_sq(problem.set_x, s.x, grad_psi.dx) +
                      normal_cone_distance_sq(problem.set_y, s.y, grad_psi.dy) +
                      normal_cone_distance_sq(multiplier_box(problem, params), s.z, grad_psi.dz);
    return std::sqrt(sq);
}

MeritValue merit_value(const BilevelProblem &problem, const GapParams &params, const SolverConfig &,
                       const IterState &s, double c_k, const MeritEstimates &estimates, double f_lower) {
    MeritValue m;
    InnerSolution inner = theta_star(problem, params, s.x, s.y, s.z, &s.theta);
    const Vector lam = lambda_star(problem, params, s.x, s.y, s.z);
    const double gap = gap_value_at(problem, params, s.x, s.y, s.z, inner.theta, lam);
    m.value = (problem.upper_eval(s.x, s.y) - f_lower) / c_k + gap +
              estimates.c_theta(params) * (s.theta - inner.theta).squaredNorm();
    m.reliable = inner.converged;
    m.theta_star = std::move(inner.theta);
    return m;
}

double reference_error(const Vector &x, const Vector &x_ref) {
    const double denom = x_ref.norm();
    const double err = (x - x_ref).norm();
    return denom > 0.0 ? err / denom : err;
}

RunTrace run(const BilevelProblem &problem, const SolverConfig &config,
             const std::optional<StartPoint> &start) {
    problem.validate();
    config.validate();
    const GapParams &params = config.gap;
    const ProjectableSet zbox = multiplier_box(problem, params);

    IterState s;
    if (start) {
        s.x = start->x;
        s.y = start->y;
    } else if (problem.default_start) {
        s.x = problem.default_start->x;
        s.y = problem.default_start->y;
    } else {
        s.x = Vector::Zero(problem.dim_x);
        s.y = Vector::Zero(problem.dim_y);
    }
    detail::require_size(s.x, problem.dim_x, "start x");
    detail::require_size(s.y, problem.dim_y, "start y");
    s.z = (start && start->z) ? *start->z : Vector::Zero(problem.dim_p);
    s.theta = (start && start->theta) ? *start->theta : s.y;
    detail::require_size(s.z, problem.dim_p, "start z");
    detail::require_size(s.theta, problem.dim_y, "start theta");
    problem.set_x.project_in_place(s.x);
    problem.set_y.project_in_place(s.y);
    zbox.project_in_place(s.z);
    problem.set_y.project_in_place(s.theta);

    RunTrace trace;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    double f_running_min = std::numeric_limits<double>::infinity();
    std::optional<Vector> diag_theta_star; // theta*(w^k) from the latest diagnostic row

    auto add_diagnostics = [&](TraceRow &row) {
        InnerSolution inner = theta_star(problem, params, s.x, s.y, s.z, &s.theta);
        const Vector lam = lambda_star(problem, params, s.x, s.y, s.z);
        row.gap_exact = gap_value_at(problem, params, s.x, s.y, s.z, inner.theta, lam);
        row.res_exact =
            residual(problem, params, s, psi_gradient(problem, params, s.x, s.y, s.z, inner.theta, lam, row.c_k));
        if (config.merit) {
            const double f_lower = config.merit->f_lower.value_or(f_running_min - 1.0);
            row.merit_V = (row.F - f_lower) / penalty_at(config, s.k) + *row.gap_exact +
                          config.merit->c_theta(params) * (s.theta - inner.theta).squaredNorm();
        }
        row.diag_reliable = inner.converged;
        diag_theta_star = std::move(inner.theta);
    };

    auto emit_row = [&](double c_res) {
        TraceRow row;
        row.k = s.k;
        row.c_k = c_res;
        row.F = problem.upper_eval(s.x, s.y);
        f_running_min = std::min(f_running_min, row.F);
        row.gap_proxy = gap_value_at(problem, params, s.x, s.y, s.z, s.theta, s.lambda);
        row.res_proxy =
            residual(problem, params, s, psi_gradient(problem, params, s.x, s.y, s.z, s.theta, s.lambda, c_res));
        if (problem.reference_solution)
            row.ref_rel_err = reference_error(s.x, problem.reference_solution->x);

        diag_theta_star.reset();
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
        s.lambda = lambda_star(problem, params, s.x, s.y, s.z);
        emit_row(penalty_at(config, 0));
        std::optional<RunStatus> done = stop_reason();
        for (long k = 0; !done && k < config.max_iters; ++k) {
            const double c_k = penalty_at(config, k);
            Vector theta_next = step_theta(problem, params, config, s);
            if (diag_theta_star)
                trace.contraction.push_back({k, (s.theta - *diag_theta_star).squaredNorm(),
                                             (theta_next - *diag_theta_star).squaredNorm()});
            Vector lambda_next = step_lambda(problem, params, s);
            const Directions d = directions(problem, params, config, s, theta_next, lambda_next, c_k);
            PrimalUpdate u = step_primal(problem, config, s, d.dx, d.dy, d.dz);

            s.k = k + 1;
            s.x = std::move(u.x);
            s.y = std::move(u.y);
            s.z = std::move(u.z);
            s.theta = std::move(theta_next);
            s.lambda = std::move(lambda_next);
            const double biggest = std::max({s.x.lpNorm<Eigen::Infinity>(), s.y.lpNorm<Eigen::Infinity>(),
                                             s.theta.lpNorm<Eigen::Infinity>(),
                                             s.lambda.size() ? s.lambda.lpNorm<Eigen::Infinity>() : 0.0});
            if (!(biggest <= kDivergenceNorm))
                throw EvaluationError("iterate diverged (norm above 1e12) at k=" + std::to_string(s.k));

            emit_row(c_k);
            done = stop_reason();
        }
        trace.status = done.value_or(RunStatus::MaxIters);
        // The terminal row always carries exact diagnostics.
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
