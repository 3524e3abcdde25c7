#include "bigap/problem.hpp"
#include "bigap/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace bigap {

namespace {

std::string describe(const Vector &v) {
    std::ostringstream os;
    os.precision(6);
    os << '(';
    const Eigen::Index shown = std::min<Eigen::Index>(v.size(), 6);
    for (Eigen::Index i = 0; i < shown; ++i)
        os << (i ? ", " : "") << v[i];
    if (v.size() > shown)
        os << ", ...";
    os << ')';
    return os.str();
}

void check_vector(const Vector &v, Eigen::Index n, const char *oracle, const Vector &x,
                  const Vector &y) {
    if (v.size() != n) {
        std::ostringstream os;
        os << oracle << " returned size " << v.size() << ", expected " << n;
        throw EvaluationError(os.str());
    }
    if (!v.allFinite())
        throw EvaluationError(std::string(oracle) + " returned a non-finite value at x=" + describe(x) +
                              " y=" + describe(y));
}

void check_scalar(double v, const char *oracle, const Vector &x, const Vector &y) {
    if (!std::isfinite(v))
        throw EvaluationError(std::string(oracle) + " returned a non-finite value at x=" + describe(x) +
                              " y=" + describe(y));
}

} // namespace

ProjectableSet ProjectableSet::full_space(Eigen::Index dim) {
    if (dim < 0)
        throw ConfigError("set dimension must be nonnegative");
    ProjectableSet s;
    s.kind_ = Kind::FullSpace;
    s.dim_ = dim;
    return s;
}

ProjectableSet ProjectableSet::box(Vector lower, Vector upper) {
    if (lower.size() != upper.size())
        throw ConfigError("box bounds have different sizes");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (std::isnan(lower[i]) || std::isnan(upper[i]))
            throw ConfigError("box bound is NaN");
        if (lower[i] > upper[i])
            throw ConfigError("box lower bound exceeds upper bound at index " + std::to_string(i));
    }
    ProjectableSet s;
    s.kind_ = Kind::Box;
    s.dim_ = lower.size();
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
}

ProjectableSet ProjectableSet::uniform_box(Eigen::Index dim, double lower, double upper) {
    return box(Vector::Constant(dim, lower), Vector::Constant(dim, upper));
}

ProjectableSet ProjectableSet::nonnegative(Eigen::Index dim) {
    return uniform_box(dim, 0.0, std::numeric_limits<double>::infinity());
}

ProjectableSet ProjectableSet::custom(Eigen::Index dim, ProjectionFn projection) {
    if (!projection)
        throw ConfigError("custom set needs a projection oracle");
    ProjectableSet s;
    s.kind_ = Kind::Custom;
    s.dim_ = dim;
    s.projection_ = std::move(projection);
    return s;
}

void ProjectableSet::project_in_place(Vector &v) const {
    if (v.size() != dim_) {
        std::ostringstream os;
        os << "projection: vector has size " << v.size() << ", set has dimension " << dim_;
        throw ConfigError(os.str());
    }
    switch (kind_) {
    case Kind::FullSpace:
        return;
    case Kind::Box:
        v = v.cwiseMax(lower_).cwiseMin(upper_);
        return;
    case Kind::Custom: {
        Vector p = projection_(v);
        if (p.size() != dim_)
            throw EvaluationError("custom projection returned the wrong size");
        v = std::move(p);
        return;
    }
    }
}

Vector ProjectableSet::project(const Vector &v) const {
    Vector out = v;
    project_in_place(out);
    return out;
}

bool ProjectableSet::contains(const Vector &v, double tol) const {
    if (v.size() != dim_)
        return false;
    switch (kind_) {
    case Kind::FullSpace:
        return true;
    case Kind::Box:
        return ((v - lower_).array() >= -tol).all() && ((upper_ - v).array() >= -tol).all();
    case Kind::Custom:
        return (projection_(v) - v).lpNorm<Eigen::Infinity>() <= tol;
    }
    return false;
}

Vector ProjectableSet::sample(std::mt19937_64 &rng, double scale) const {
    std::normal_distribution<double> normal(0.0, scale);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector v(dim_);
    for (Eigen::Index i = 0; i < dim_; ++i) {
        if (kind_ == Kind::Box) {
            const bool lo = std::isfinite(lower_[i]), hi = std::isfinite(upper_[i]);
            if (lo && hi)
                v[i] = lower_[i] + unit(rng) * (upper_[i] - lower_[i]);
            else if (lo)
                v[i] = lower_[i] + std::abs(normal(rng));
            else if (hi)
                v[i] = upper_[i] - std::abs(normal(rng));
            else
                v[i] = normal(rng);
        } else {
            v[i] = normal(rng);
        }
    }
    if (kind_ == Kind::Custom)
        project_in_place(v);
    return v;
}

Vector project(const ProjectableSet &set, const Vector &v) { return set.project(v); }

void BilevelProblem::validate() const {
    if (dim_x < 0 || dim_y < 0 || dim_p < 0)
        throw ConfigError(name + ": negative dimension");
    if (!upper_value || !upper_grad || !lower_value || !lower_grad)
        throw ConfigError(name + ": missing objective oracle");
    if (dim_p > 0 && (!constraint_value || !constraint_vjp))
        throw ConfigError(name + ": dim_p > 0 but constraint oracles are missing");
    if (set_x.dim() != dim_x || set_y.dim() != dim_y)
        throw ConfigError(name + ": feasible set dimension does not match problem dimension");
    auto check_point = [&](const std::optional<PrimalPoint> &p, const char *what) {
        if (p && (p->x.size() != dim_x || p->y.size() != dim_y))
            throw ConfigError(name + ": " + what + " has wrong dimensions");
    };
    check_point(reference_solution, "reference solution");
    check_point(default_start, "default start");
}

double BilevelProblem::upper_eval(const Vector &x, const Vector &y) const {
    const double v = upper_value(x, y);
    check_scalar(v, "upper_value", x, y);
    return v;
}

BlockGrad BilevelProblem::upper_grad_eval(const Vector &x, const Vector &y) const {
    BlockGrad g = upper_grad(x, y);
    check_vector(g.x, dim_x, "upper_grad (x block)", x, y);
    check_vector(g.y, dim_y, "upper_grad (y block)", x, y);
    return g;
}

double BilevelProblem::lower_eval(const Vector &x, const Vector &y) const {
    const double v = lower_value(x, y);
    check_scalar(v, "lower_value", x, y);
    return v;
}

BlockGrad BilevelProblem::lower_grad_eval(const Vector &x, const Vector &y) const {
    BlockGrad g = lower_grad(x, y);
    check_vector(g.x, dim_x, "lower_grad (x block)", x, y);
    check_vector(g.y, dim_y, "lower_grad (y block)", x, y);
    return g;
}

Vector BilevelProblem::constraint_eval(const Vector &x, const Vector &y) const {
    if (dim_p == 0)
        return Vector(0);
    Vector g = constraint_value(x, y);
    check_vector(g, dim_p, "constraint_value", x, y);
    return g;
}

BlockGrad BilevelProblem::constraint_vjp_eval(const Vector &x, const Vector &y,
                                              const Vector &lambda) const {
    if (dim_p == 0)
        return {Vector::Zero(dim_x), Vector::Zero(dim_y)};
    if (lambda.size() != dim_p)
        throw ConfigError(name + ": multiplier has wrong size for constraint_vjp");
    BlockGrad g = constraint_vjp(x, y, lambda);
    check_vector(g.x, dim_x, "constraint_vjp (x block)", x, y);
    check_vector(g.y, dim_y, "constraint_vjp (y block)", x, y);
    return g;
}

double relative_error(const Vector &actual, const Vector &expected) {
    if (actual.size() != expected.size())
        return std::numeric_limits<double>::infinity();
    if (actual.size() == 0)
        return 0.0;
    return (actual - expected).norm() / std::max(expected.norm(), 1.0);
}

ValidationReport validate_gradients(const BilevelProblem &problem, const ValidationOptions &options) {
    if (options.samples < 1)
        throw ConfigError("validate_gradients: samples must be >= 1");
    if (!(options.step > 0.0))
        throw ConfigError("validate_gradients: step must be positive");
    problem.validate();

    ValidationReport report;
    report.tolerance = options.tolerance;
    const bool constrained = problem.dim_p > 0;
    report.checks = {
        {"upper_grad.x", true, 0.0, true},     {"upper_grad.y", true, 0.0, true},
        {"lower_grad.x", true, 0.0, true},     {"lower_grad.y", true, 0.0, true},
        {"constraint_vjp.x", constrained, 0.0, true}, {"constraint_vjp.y", constrained, 0.0, true},
    };

    const Eigen::Index n = problem.dim_x, m = problem.dim_y;
    auto split = [n, m](const Vector &w) { return std::pair<Vector, Vector>{w.head(n), w.tail(m)}; };
    oracle::OracleConfig fd;
    fd.fd_step = options.step;

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.5, 1.5);
    try {
        for (int s = 0; s < options.samples; ++s) {
            const Vector x = problem.set_x.sample(rng);
            const Vector y = problem.set_y.sample(rng);
            Vector w(n + m);
            w << x, y;

            auto record = [&](std::size_t idx, const BlockGrad &user, const Vector &numeric) {
                const double ex = relative_error(user.x, numeric.head(n));
                const double ey = relative_error(user.y, numeric.tail(m));
                report.checks[idx].max_rel_error = std::max(report.checks[idx].max_rel_error, ex);
                report.checks[idx + 1].max_rel_error = std::max(report.checks[idx + 1].max_rel_error, ey);
            };

            record(0, problem.upper_grad_eval(x, y),
                   oracle::finite_diff_grad(
                       [&](const Vector &v) {
                           auto [a, b] = split(v);
                           return problem.upper_eval(a, b);
                       },
                       w, fd));
            record(2, problem.lower_grad_eval(x, y),
                   oracle::finite_diff_grad(
                       [&](const Vector &v) {
                           auto [a, b] = split(v);
                           return problem.lower_eval(a, b);
                       },
                       w, fd));
            if (constrained) {
                Vector lambda(problem.dim_p);
                for (auto &l : lambda)
                    l = unit(rng);
                record(4, problem.constraint_vjp_eval(x, y, lambda),
                       oracle::finite_diff_grad(
                           [&](const Vector &v) {
                               auto [a, b] = split(v);
                               return lambda.dot(problem.constraint_eval(a, b));
                           },
                           w, fd));
            }
        }
    } catch (const EvaluationError &e) {
        report.passed = false;
        report.failure = e.what();
    }

    for (auto &c : report.checks) {
        if (!c.applicable)
            continue;
        c.passed = c.max_rel_error <= options.tolerance;
        report.passed = report.passed && c.passed;
    }
    return report;
}

} // namespace bigap
