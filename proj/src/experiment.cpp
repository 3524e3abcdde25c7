#include "bigap/experiment.hpp"

#include "bigap/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <random>
#include <thread>

namespace bigap {

bool SweepAxes::empty() const {
    return gamma1.empty() && gamma2.empty() && alpha.empty() && eta.empty() && rho.empty();
}

std::vector<std::string> problem_names() {
    return {"synthetic", "sgl", "minimax-toy", "quadratic-unconstrained", "quadratic-sabotaged"};
}

void ExperimentConfig::validate() const {
    const auto names = problem_names();
    if (problem.empty())
        throw ConfigError("no problem selected");
    if (std::find(names.begin(), names.end(), problem) == names.end())
        throw ConfigError("unknown problem '" + problem + "'");
    if (n < 1)
        throw ConfigError("n must be >= 1");
    if (r_cap && !(*r_cap >= 0.0))
        throw ConfigError("r-cap must be nonnegative");
    if (problem == "synthetic")
        bench::SyntheticSpec{n, q}.validate();
    if (problem == "sgl")
        sgl.validate();
    solver.validate();
}

namespace {

BilevelProblem quadratic_base(int n, const char *name) {
    BilevelProblem p;
    p.name = std::string(name) + "(n=" + std::to_string(n) + ")";
    p.dim_x = n;
    p.dim_y = n;
    p.upper_value = [](const Vector &x, const Vector &y) {
        return 0.5 * x.squaredNorm() + 0.5 * (y.array() - 1.0).matrix().squaredNorm();
    };
    p.upper_grad = [](const Vector &x, const Vector &y) {
        return BlockGrad{x, (y.array() - 1.0).matrix()};
    };
    p.lower_value = [](const Vector &x, const Vector &y) { return 0.5 * (y - x).squaredNorm(); };
    p.lower_grad = [](const Vector &x, const Vector &y) { return BlockGrad{x - y, y - x}; };
    p.set_x = ProjectableSet::full_space(n);
    p.set_y = ProjectableSet::full_space(n);
    // y*(x) = x, so F(x, x) is minimized at x = 1/2.
    p.reference_solution = PrimalPoint{Vector::Constant(n, 0.5), Vector::Constant(n, 0.5)};
    p.default_start = PrimalPoint{Vector::Zero(n), Vector::Zero(n)};
    return p;
}

} // namespace

BilevelProblem make_unconstrained_fixture(int n) {
    if (n < 1)
        throw ConfigError("fixture: n must be >= 1");
    return quadratic_base(n, "quadratic-unconstrained");
}

BilevelProblem make_sabotaged_fixture(int n) {
    if (n < 1)
        throw ConfigError("fixture: n must be >= 1");
    BilevelProblem p = quadratic_base(n, "quadratic-sabotaged");
    p.dim_p = 1;
    p.constraint_value = [n](const Vector &, const Vector &y) { return Vector::Constant(1, y.sum() - n); };
    p.constraint_vjp = [n](const Vector &x, const Vector &, const Vector &lambda) {
        return BlockGrad{Vector::Zero(x.size()), Vector::Constant(n, lambda[0])};
    };
    p.upper_grad = [](const Vector &x, const Vector &y) {
        return BlockGrad{2.0 * x, (y.array() - 1.0).matrix()}; // wrong: grad_x F = x
    };
    return p;
}

ProblemInstance make_problem(const ExperimentConfig &config) {
    config.validate();
    ProblemInstance out;
    const std::string &name = config.problem;
    if (name == "synthetic") {
        out.bilevel = bench::make_synthetic({config.n, config.q});
    } else if (name == "sgl") {
        bench::SglInstance inst = bench::make_sgl(config.sgl);
        out.bilevel = std::move(inst.problem);
        out.sgl_data = std::move(inst.data);
    } else if (name == "minimax-toy") {
        out.minimax = bench::make_toy_minimax(config.n);
    } else if (name == "quadratic-unconstrained") {
        out.bilevel = make_unconstrained_fixture(config.n);
    } else {
        out.bilevel = make_sabotaged_fixture(config.n);
    }
    return out;
}

SolverConfig effective_solver_config(const ExperimentConfig &config, const ProblemInstance &instance) {
    SolverConfig cfg = config.solver;
    if (config.r_cap)
        cfg.gap.r = *config.r_cap;
    else if (instance.bilevel && instance.bilevel->default_r)
        cfg.gap.r = *instance.bilevel->default_r;
    return cfg;
}

RunTrace run_experiment(const ExperimentConfig &config, const ProblemInstance &instance) {
    const SolverConfig cfg = effective_solver_config(config, instance);
    if (instance.minimax)
        return run_minimax(*instance.minimax, cfg);
    return run(*instance.bilevel, cfg);
}

RunTrace run_experiment(const ExperimentConfig &config) { return run_experiment(config, make_problem(config)); }

unsigned resolve_threads(unsigned requested) {
    unsigned count = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char *env = std::getenv("BIGAP_THREADS"); env && *env) {
        unsigned cap = 0;
        const char *end = env + std::char_traits<char>::length(env);
        const auto [ptr, ec] = std::from_chars(env, end, cap);
        if (ec != std::errc() || ptr != end || cap == 0)
            throw ConfigError(std::string("BIGAP_THREADS must be a positive integer, got '") + env + "'");
        count = std::min(count, cap);
    }
    return count;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig &config) {
    if (config.sweep.empty())
        throw ConfigError("sweep: no axes given");
    const ProblemInstance instance = make_problem(config);

    auto axis = [](const std::vector<double> &values, double base) {
        return values.empty() ? std::vector<double>{base} : values;
    };
    const SolverConfig &base = config.solver;
    std::vector<SweepCell> cells;
    for (double g1 : axis(config.sweep.gamma1, base.gap.gamma1))
        for (double g2 : axis(config.sweep.gamma2, base.gap.gamma2))
            for (double a : axis(config.sweep.alpha, base.alpha))
                for (double e : axis(config.sweep.eta, base.eta))
                    for (double r : axis(config.sweep.rho, base.penalty_rho))
                        cells.push_back(SweepCell{g1, g2, a, e, r, {}, {}, {}, {}});

    auto run_cell = [&](SweepCell &cell) {
        ExperimentConfig cc = config;
        cc.solver.gap.gamma1 = cell.gamma1;
        cc.solver.gap.gamma2 = cell.gamma2;
        cc.solver.alpha = cell.alpha;
        cc.solver.eta = cell.eta;
        cc.solver.penalty_rho = cell.rho;
        try {
            cc.solver.validate();
            const RunTrace trace = run_experiment(cc, instance);
            switch (trace.status) {
            case RunStatus::ReferenceMet:
            case RunStatus::ResidualMet:
                cell.status = "ok";
                cell.time_s = trace.wall_time_s;
                cell.iters = trace.rows.back().k;
                break;
            case RunStatus::MaxIters:
                cell.status = "max-iters";
                break;
            case RunStatus::OracleFailure:
                cell.status = "failed";
                cell.message = trace.message;
                break;
            }
        } catch (const std::exception &e) {
            cell.status = "failed";
            cell.message = e.what();
        }
    };

    const unsigned workers = std::min<unsigned>(resolve_threads(config.threads), cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++)
            run_cell(cells[i]);
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < workers; ++t)
            pool.emplace_back(worker);
    }
    return cells;
}

void write_sweep_csv(std::ostream &out, const std::vector<SweepCell> &cells) {
    out << kSweepHeader << '\n';
    for (const SweepCell &c : cells) {
        out << format_double(c.gamma1) << ',' << format_double(c.gamma2) << ',' << format_double(c.alpha) << ','
            << format_double(c.eta) << ',' << format_double(c.rho) << ','
            << (c.time_s ? format_double(*c.time_s) : "") << ',' << (c.iters ? std::to_string(*c.iters) : "")
            << ',' << c.status << '\n';
    }
}

namespace {

double scalar_rel_error(double actual, double expected) {
    return std::abs(actual - expected) / std::max(std::abs(expected), 1.0);
}

OracleCheck make_check(std::string name, double err, double tol) {
    return OracleCheck{std::move(name), true, err, err <= tol};
}

// Directional derivative of `value` at w along d against <grad, d>.
double directional_error(const std::function<double(const Vector &)> &value, const Vector &w, const Vector &d,
                         const Vector &grad, double step) {
    const double h = step * (1.0 + w.lpNorm<Eigen::Infinity>());
    const double fd = (value(w + h * d) - value(w - h * d)) / (2.0 * h);
    return scalar_rel_error(grad.dot(d), fd);
}

Vector random_direction(std::mt19937_64 &rng, Eigen::Index n) {
    std::normal_distribution<double> normal;
    Vector d(n);
    for (auto &v : d)
        v = normal(rng);
    return d / std::max(d.norm(), 1e-300);
}

GradcheckReport gradcheck_bilevel(const BilevelProblem &p, const GapParams &params, int samples,
                                  std::uint64_t seed) {
    GradcheckReport report;
    const ValidationReport v = validate_gradients(p, ValidationOptions{samples, 1e-6, seed, report.tolerance});
    report.checks = v.checks;
    report.failure = v.failure;
    report.passed = v.passed;
    if (!v.failure.empty())
        return report;

    // Gap gradient along random directions; z kept inside (0, r) so w +/- h d stays valid.
    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
    std::uniform_real_distribution<double> unit(0.1, 0.9);
    const Eigen::Index nx = p.dim_x, ny = p.dim_y, np = p.dim_p;
    double worst = 0.0;
    try {
        for (int s = 0; s < samples; ++s) {
            Vector w(nx + ny + np);
            w.head(nx) = p.set_x.sample(rng);
            w.segment(nx, ny) = p.set_y.sample(rng);
            for (Eigen::Index i = 0; i < np; ++i)
                w[nx + ny + i] = params.r * unit(rng);
            Vector d = random_direction(rng, w.size());
            if (params.r == 0.0)
                d.tail(np).setZero();
            auto value = [&](const Vector &u) {
                return gap_value(p, params, u.head(nx), u.segment(nx, ny), u.tail(np)).value;
            };
            const GapGradient g = gap_gradient(p, params, w.head(nx), w.segment(nx, ny), w.tail(np));
            Vector grad(w.size());
            grad << g.gx, g.gy, g.gz;
            worst = std::max(worst, directional_error(value, w, d, grad, 1e-6));
        }
    } catch (const EvaluationError &e) {
        report.failure = e.what();
        report.passed = false;
        return report;
    }
    report.checks.push_back(make_check("gap_gradient.directional", worst, report.tolerance));
    report.passed = report.passed && report.checks.back().passed;
    return report;
}

GradcheckReport gradcheck_minimax(const MinimaxBilevelProblem &p, const GapParams &params, int samples,
                                  std::uint64_t seed) {
    GradcheckReport report;
    std::mt19937_64 rng(seed);
    const Eigen::Index nx = p.dim_x, ny = p.dim_y, nz = p.dim_z;
    const oracle::OracleConfig fd;
    double err[6] = {0, 0, 0, 0, 0, 0};
    double gap_err = 0.0;
    try {
        for (int s = 0; s < samples; ++s) {
            Vector w(nx + ny + nz);
            w << p.set_x.sample(rng), p.set_y.sample(rng), p.set_z.sample(rng);
            auto upper = [&](const Vector &u) { return p.upper_eval(u.head(nx), u.segment(nx, ny), u.tail(nz)); };
            auto lower = [&](const Vector &u) { return p.lower_eval(u.head(nx), u.segment(nx, ny), u.tail(nz)); };
            const Vector fu = oracle::finite_diff_grad(upper, w, fd);
            const Vector fl = oracle::finite_diff_grad(lower, w, fd);
            const TripleGrad gu = p.upper_grad_eval(w.head(nx), w.segment(nx, ny), w.tail(nz));
            const TripleGrad gl = p.lower_grad_eval(w.head(nx), w.segment(nx, ny), w.tail(nz));
            err[0] = std::max(err[0], relative_error(gu.x, fu.head(nx)));
            err[1] = std::max(err[1], relative_error(gu.y, fu.segment(nx, ny)));
            err[2] = std::max(err[2], relative_error(gu.z, fu.tail(nz)));
            err[3] = std::max(err[3], relative_error(gl.x, fl.head(nx)));
            err[4] = std::max(err[4], relative_error(gl.y, fl.segment(nx, ny)));
            err[5] = std::max(err[5], relative_error(gl.z, fl.tail(nz)));

            auto gap = [&](const Vector &u) {
                return saddle_gap_value(p, params, u.head(nx), u.segment(nx, ny), u.tail(nz)).value;
            };
            const GapGradient g = saddle_gap_gradient(p, params, w.head(nx), w.segment(nx, ny), w.tail(nz));
            Vector grad(w.size());
            grad << g.gx, g.gy, g.gz;
            gap_err = std::max(gap_err, directional_error(gap, w, random_direction(rng, w.size()), grad, 1e-6));
        }
    } catch (const EvaluationError &e) {
        report.failure = e.what();
        report.passed = false;
        return report;
    }
    const char *names[6] = {"upper_grad.x", "upper_grad.y", "upper_grad.z",
                            "lower_grad.x", "lower_grad.y", "lower_grad.z"};
    for (int i = 0; i < 6; ++i)
        report.checks.push_back(make_check(names[i], err[i], report.tolerance));
    report.checks.push_back(make_check("saddle_gap_gradient.directional", gap_err, report.tolerance));
    for (const auto &c : report.checks)
        report.passed = report.passed && c.passed;
    return report;
}

} // namespace

GradcheckReport gradcheck(const ExperimentConfig &config, const ProblemInstance &instance, int samples) {
    const SolverConfig cfg = effective_solver_config(config, instance);
    if (instance.minimax)
        return gradcheck_minimax(*instance.minimax, cfg.gap, samples, cfg.seed);
    return gradcheck_bilevel(*instance.bilevel, cfg.gap, samples, cfg.seed);
}

void print_gradcheck(std::ostream &out, const GradcheckReport &report) {
    char line[160];
    for (const OracleCheck &c : report.checks) {
        if (!c.applicable)
            std::snprintf(line, sizeof line, "%-34s %12s  n/a\n", c.oracle.c_str(), "-");
        else
            std::snprintf(line, sizeof line, "%-34s %12.3e  %s\n", c.oracle.c_str(), c.max_rel_error,
                          c.passed ? "pass" : "FAIL");
        out << line;
    }
    if (!report.failure.empty())
        out << "error: " << report.failure << '\n';
    out << (report.passed ? "gradcheck passed" : "gradcheck failed") << " (tolerance " << report.tolerance
        << ")\n";
}

} // namespace bigap
