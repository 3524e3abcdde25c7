#include "bigap/bench.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>

namespace bigap::bench {

double NormalSampler::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double NormalSampler::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t NormalSampler::below(std::uint64_t bound) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % bound;
}

void SyntheticSpec::validate() const {
    if (n < 1)
        throw ConfigError("synthetic: n must be >= 1");
    if (q != 1 && q != 3)
        throw ConfigError("synthetic: q must be 1 or 3");
}

BilevelProblem make_synthetic(const SyntheticSpec &spec) {
    spec.validate();
    const Eigen::Index n = spec.n;
    const int q = spec.q;

    BilevelProblem p;
    p.name = "synthetic(n=" + std::to_string(n) + ",q=" + std::to_string(q) + ")";
    p.dim_x = n;
    p.dim_y = 2 * n;
    p.dim_p = 2;

    p.upper_value = [n](const Vector &x, const Vector &y) {
        return (y.head(n).array() - 2.0).matrix().dot((x.array() - 1.0).matrix()) +
               (y.tail(n).array() + 3.0).matrix().squaredNorm();
    };
    p.upper_grad = [n](const Vector &x, const Vector &y) {
        BlockGrad g{(y.head(n).array() - 2.0).matrix(), Vector(2 * n)};
        g.y << (x.array() - 1.0).matrix(), 2.0 * (y.tail(n).array() + 3.0).matrix();
        return g;
    };
    p.lower_value = [n](const Vector &x, const Vector &y) {
        return 0.5 * y.head(n).squaredNorm() - x.dot(y.head(n)) + y.tail(n).sum();
    };
    p.lower_grad = [n](const Vector &x, const Vector &y) {
        BlockGrad g{-y.head(n), Vector(2 * n)};
        g.y << y.head(n) - x, Vector::Ones(n);
        return g;
    };
    p.constraint_value = [q](const Vector &x, const Vector &y) {
        const double h = (q == 1) ? x.sum() : x.array().cube().sum();
        const double s = h + y.sum();
        Vector g(2);
        g << s, -s;
        return g;
    };
    p.constraint_vjp = [n, q](const Vector &x, const Vector &, const Vector &lambda) {
        const double w = lambda[0] - lambda[1];
        BlockGrad g;
        g.x = (q == 1) ? Vector::Constant(n, w) : Vector(3.0 * w * x.array().square());
        g.y = Vector::Constant(2 * n, w);
        return g;
    };
    p.set_x = ProjectableSet::full_space(n);
    p.set_y = ProjectableSet::full_space(2 * n);

    Vector y_ref(2 * n), y_start(2 * n);
    y_ref << Vector::Constant(n, 2.0), Vector::Constant(n, -3.0);
    y_start.setOnes();
    p.reference_solution = PrimalPoint{Vector::Ones(n), y_ref};
    p.default_start = PrimalPoint{Vector::Zero(n), y_start};
    // The multiplier z* = (0, 1) sits on the boundary of [0, 1]^2. Larger caps let
    // z1 + z2 drift (it is a null direction while both rows are active), which
    // doubles the curvature of lambda^T g and destabilizes alpha = 1e-3 for q = 3.
    p.default_r = 1.0;
    return p;
}

void SglSpec::validate() const {
    if (p < 1 || groups < 1 || p % groups != 0)
        throw ConfigError("sgl: p must be a positive multiple of the group count");
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw ConfigError("sgl: split sizes must be >= 1");
    if (!(snr > 0.0))
        throw ConfigError("sgl: snr must be positive");
    if (!(warm_start_reg >= 0.0))
        throw ConfigError("sgl: warm_start_reg must be nonnegative");
}

double mean_squared_error(const Matrix &a, const Vector &b, const Vector &beta) {
    return (a * beta - b).squaredNorm() / static_cast<double>(b.size());
}

namespace {

// prox of t * (lambda_group * sum ||v^(m)|| + lambda_l1 * ||v||_1): soft threshold, then group shrink.
Vector sgl_prox(const Vector &v, int group_size, double t_group, double t_l1) {
    Vector out = (v.array().abs() - t_l1).max(0.0) * v.array().sign();
    for (Eigen::Index start = 0; start < out.size(); start += group_size) {
        auto block = out.segment(start, group_size);
        const double nrm = block.norm();
        block *= nrm > t_group ? (1.0 - t_group / nrm) : 0.0;
    }
    return out;
}

double largest_eigenvalue_gram(const Matrix &a) {
    Vector v = Vector::Ones(a.cols()).normalized();
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
        Vector w = a.transpose() * (a * v);
        const double nw = w.norm();
        if (nw == 0.0)
            return 0.0;
        const double next = v.dot(w);
        v = w / nw;
        if (std::abs(next - lambda) <= 1e-12 * std::abs(next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda;
}

} // namespace

Vector solve_sparse_group_lasso(const Matrix &a, const Vector &b, int group_size, double lambda_group,
                                double lambda_l1, double tol, int max_iters) {
    if (group_size < 1 || a.cols() % group_size != 0)
        throw ConfigError("sparse group lasso: group size must divide the feature count");
    const double lip = 1.01 * largest_eigenvalue_gram(a) + 1e-12;
    const double t = 1.0 / lip;
    Vector beta = Vector::Zero(a.cols());
    Vector momentum = beta;
    double s = 1.0;
    for (int it = 0; it < max_iters; ++it) {
        const Vector grad = a.transpose() * (a * momentum - b);
        Vector next = sgl_prox(momentum - t * grad, group_size, t * lambda_group, t * lambda_l1);
        const double s_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s * s));
        const double change = (next - beta).norm();
        momentum = next + ((s - 1.0) / s_next) * (next - beta);
        beta = std::move(next);
        s = s_next;
        if (change <= tol * (1.0 + beta.norm()))
            break;
    }
    return beta;
}

SglInstance make_sgl(const SglSpec &spec) {
    spec.validate();
    const int p = spec.p, m = spec.groups, gs = spec.p / spec.groups;
    const int total = spec.n_train + spec.n_val + spec.n_test;

    NormalSampler rng(spec.seed);
    Matrix a(total, p);
    for (int i = 0; i < total; ++i)
        for (int j = 0; j < p; ++j)
            a(i, j) = rng.normal();

    Vector beta = Vector::Zero(p);
    for (int grp = 0; grp < std::min(5, m); ++grp)
        for (int j = 0; j < std::min(5, gs); ++j)
            beta[grp * gs + j] = j + 1.0;

    Vector noise(total);
    for (auto &e : noise)
        e = rng.normal();
    const Vector signal = a * beta;
    const double sigma = signal.norm() / (spec.snr * noise.norm());
    const Vector response = signal + sigma * noise;

    // Fisher-Yates shuffle to split rows at random.
    std::vector<int> order(total);
    for (int i = 0; i < total; ++i)
        order[i] = i;
    for (int i = total - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);

    auto data = std::make_shared<DataSplit>();
    auto take = [&](int offset, int count, Matrix &out_a, Vector &out_b) {
        out_a.resize(count, p);
        out_b.resize(count);
        for (int i = 0; i < count; ++i) {
            out_a.row(i) = a.row(order[offset + i]);
            out_b[i] = response[order[offset + i]];
        }
    };
    take(0, spec.n_train, data->a_train, data->b_train);
    take(spec.n_train, spec.n_val, data->a_val, data->b_val);
    take(spec.n_train + spec.n_val, spec.n_test, data->a_test, data->b_test);
    data->beta_true = beta;
    data->sigma = sigma;
    data->group_size = gs;

    BilevelProblem prob;
    prob.name = "sgl(p=" + std::to_string(p) + ",M=" + std::to_string(m) + ")";
    prob.dim_x = m + 1;
    prob.dim_y = p;
    prob.dim_p = m + 1;

    const double inv_val = 1.0 / spec.n_val, inv_tr = 1.0 / spec.n_train;
    prob.upper_value = [data, inv_val](const Vector &, const Vector &y) {
        return 0.5 * inv_val * (data->a_val * y - data->b_val).squaredNorm();
    };
    prob.upper_grad = [data, inv_val, m](const Vector &, const Vector &y) {
        return BlockGrad{Vector::Zero(m + 1), inv_val * (data->a_val.transpose() * (data->a_val * y - data->b_val))};
    };
    prob.lower_value = [data, inv_tr](const Vector &, const Vector &y) {
        return 0.5 * inv_tr * (data->a_train * y - data->b_train).squaredNorm();
    };
    prob.lower_grad = [data, inv_tr, m](const Vector &, const Vector &y) {
        return BlockGrad{Vector::Zero(m + 1),
                         inv_tr * (data->a_train.transpose() * (data->a_train * y - data->b_train))};
    };
    prob.constraint_value = [m, gs](const Vector &u, const Vector &y) {
        Vector g(m + 1);
        for (int grp = 0; grp < m; ++grp)
            g[grp] = y.segment(grp * gs, gs).squaredNorm() - u[grp];
        g[m] = y.lpNorm<1>() - u[m];
        return g;
    };
    // The l1 row uses the subgradient sign(beta_i), with 0 at beta_i = 0.
    prob.constraint_vjp = [m, gs](const Vector &, const Vector &y, const Vector &lambda) {
        BlockGrad g{-lambda, Vector(y.size())};
        for (int grp = 0; grp < m; ++grp)
            g.y.segment(grp * gs, gs) = 2.0 * lambda[grp] * y.segment(grp * gs, gs);
        g.y += lambda[m] * y.array().sign().matrix();
        return g;
    };
    prob.set_x = ProjectableSet::nonnegative(m + 1);
    prob.set_y = ProjectableSet::full_space(p);

    // Warm start from the penalized form, written with the unnormalized 1/2 sum training loss.
    const Vector beta0 = solve_sparse_group_lasso(data->a_train, data->b_train, gs, spec.warm_start_reg,
                                                  spec.warm_start_reg);
    Vector u0(m + 1);
    for (int grp = 0; grp < m; ++grp)
        u0[grp] = beta0.segment(grp * gs, gs).squaredNorm();
    u0[m] = beta0.lpNorm<1>();
    prob.default_start = PrimalPoint{u0, beta0};

    return SglInstance{std::move(prob), *data};
}

void write_sgl_csv(std::ostream &out, const DataSplit &data) {
    const Eigen::Index p = data.a_train.cols();
    for (Eigen::Index j = 0; j < p; ++j)
        out << 'f' << j << ',';
    out << "response,split\n";
    out.precision(17);
    auto dump = [&](const Matrix &a, const Vector &b, const char *label) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            for (Eigen::Index j = 0; j < p; ++j)
                out << a(i, j) << ',';
            out << b[i] << ',' << label << '\n';
        }
    };
    dump(data.a_train, data.b_train, "train");
    dump(data.a_val, data.b_val, "val");
    dump(data.a_test, data.b_test, "test");
}

MinimaxBilevelProblem make_toy_minimax(int n) {
    if (n < 1)
        throw ConfigError("toy minimax: n must be >= 1");
    MinimaxBilevelProblem p;
    p.name = "minimax-toy(n=" + std::to_string(n) + ")";
    p.dim_x = p.dim_y = p.dim_z = n;
    p.upper_value = [](const Vector &x, const Vector &y, const Vector &z) {
        return 0.5 * (x - y).squaredNorm() + 0.5 * z.squaredNorm();
    };
    p.upper_grad = [](const Vector &x, const Vector &y, const Vector &z) {
        return TripleGrad{x - y, y - x, z};
    };
    p.lower_value = [](const Vector &x, const Vector &y, const Vector &z) {
        return y.dot(z) + 0.5 * (y - x).squaredNorm() - 0.5 * (z - x).squaredNorm();
    };
    p.lower_grad = [](const Vector &x, const Vector &y, const Vector &z) {
        return TripleGrad{z - y, z + y - x, y - z + x};
    };
    p.set_x = ProjectableSet::full_space(n);
    p.set_y = ProjectableSet::full_space(n);
    p.set_z = ProjectableSet::uniform_box(n, -10.0, 10.0);
    p.reference_solution = TriplePoint{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
    p.default_start = TriplePoint{Vector::Ones(n), Vector::Ones(n), Vector::Ones(n)};
    return p;
}

} // namespace bigap::bench
