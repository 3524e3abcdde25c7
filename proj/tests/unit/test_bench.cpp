#include "bigap/bench.hpp"
#include "bigap/oracle.hpp"

#include "doctest.h"

#include <set>
#include <sstream>

using namespace bigap;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

} // namespace

TEST_CASE("sampler streams are reproducible") {
    bench::NormalSampler a(42), b(42);
    for (int i = 0; i < 100; ++i)
        CHECK(a.normal() == b.normal());
    bench::NormalSampler u(1);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = u.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1) < 0.05);
    for (int i = 0; i < 1000; ++i) {
        CHECK(u.below(7) < 7);
        const double r = u.uniform();
        CHECK(r >= 0.0);
        CHECK(r < 1.0);
    }
}

TEST_CASE("synthetic problem: constraint values and derivatives") {
    const BilevelProblem p1 = bench::make_synthetic({1, 1});
    Vector y(2);
    y << 1, 1;
    const Vector g = p1.constraint_eval(v1(0), y);
    CHECK(g[0] == 2.0);
    CHECK(g[1] == -2.0);

    const BilevelProblem p3 = bench::make_synthetic({1, 3});
    Vector lam(2);
    lam << 1, 0;
    CHECK(p3.constraint_vjp_eval(v1(2), y, lam).x[0] == doctest::Approx(12.0));
    CHECK(validate_gradients(p3, 5, 1e-6, 0).passed);
    CHECK_THROWS_AS(bench::make_synthetic({0, 1}), ConfigError);
    CHECK_THROWS_AS(bench::make_synthetic({3, 2}), ConfigError);
}

TEST_CASE("synthetic reference solution is lower-level optimal with a multiplier") {
    const int n = 6;
    const BilevelProblem p = bench::make_synthetic({n, 3});
    const PrimalPoint &ref = *p.reference_solution;
    CHECK(ref.x == Vector::Ones(n));
    const Vector g = p.constraint_eval(ref.x, ref.y);
    CHECK(g.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((ref.y.head(n) - ref.x - Vector::Ones(n)).norm() <= 1e-12);
    // Stationarity in y: grad_y f + J^T mu = 0 with mu = (m1, m2); the split rows
    // make the multiplier m1 - m2. Least squares for it over the y-block.
    const Vector gf = p.lower_grad_eval(ref.x, ref.y).y;
    Matrix jac(2 * n, 1);
    Vector l1(2);
    l1 << 1, 0;
    jac.col(0) = p.constraint_vjp_eval(ref.x, ref.y, l1).y;
    const Vector mu = oracle::least_squares(jac, -gf);
    CHECK((jac * mu + gf).norm() <= 1e-8);
}

TEST_CASE("sgl instance structure") {
    bench::SglSpec spec;
    spec.seed = 3;
    const bench::SglInstance inst = bench::make_sgl(spec);
    CHECK((inst.data.beta_true.array() != 0.0).count() == 25);
    CHECK(inst.data.a_train.rows() == 100);
    CHECK(inst.data.a_val.rows() == 100);
    CHECK(inst.data.a_test.rows() == 300);
    CHECK(inst.problem.dim_x == 31);
    CHECK(inst.problem.dim_y == 150);
    CHECK(inst.problem.dim_p == 31);
    const Vector g = inst.problem.constraint_eval(Vector::Ones(31), Vector::Zero(150));
    CHECK(g.isApprox(-Vector::Ones(31)));
    CHECK(validate_gradients(inst.problem, 3, 1e-6, 1).passed);
    const PrimalPoint &start = *inst.problem.default_start;
    CHECK(inst.problem.constraint_eval(start.x, start.y).maxCoeff() <= 1e-12);

    bench::SglSpec bad = spec;
    bad.groups = 7;
    CHECK_THROWS_AS(bench::make_sgl(bad), ConfigError);
    bad = spec;
    bad.n_val = 0;
    CHECK_THROWS_AS(bench::make_sgl(bad), ConfigError);
}

TEST_CASE("sgl with inactive constraints reduces to least squares") {
    bench::SglSpec spec;
    spec.p = 10;
    spec.groups = 2;
    spec.n_train = 20;
    spec.n_val = 10;
    spec.n_test = 10;
    spec.seed = 5;
    const bench::SglInstance inst = bench::make_sgl(spec);
    const Vector ls = oracle::least_squares(inst.data.a_train, inst.data.b_train);
    const Vector u = Vector::Constant(3, 1e6);
    GapParams params;
    params.gamma1 = 1e8;
    params.inner_tol = 1e-12;
    const InnerSolution s = theta_star(inst.problem, params, u, Vector::Zero(10), Vector::Zero(3));
    CHECK(s.converged);
    CHECK((s.theta - ls).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("sparse group lasso solver") {
    bench::NormalSampler rng(4);
    Matrix a(40, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a.data()[i] = rng.normal();
    Vector beta(6);
    beta << 1, 2, 0, 0, 0, 0;
    const Vector b = a * beta;
    const Vector ls = bench::solve_sparse_group_lasso(a, b, 2, 0.0, 0.0);
    CHECK((ls - beta).norm() <= 1e-6);
    const Vector zero = bench::solve_sparse_group_lasso(a, b, 2, 1e4, 0.0);
    CHECK(zero.norm() == 0.0);
    const Vector sparse = bench::solve_sparse_group_lasso(a, b, 2, 5.0, 1.0);
    CHECK(sparse.tail(4).norm() == 0.0);
}

TEST_CASE("sgl data csv") {
    bench::SglSpec spec;
    spec.p = 4;
    spec.groups = 2;
    spec.n_train = 3;
    spec.n_val = 2;
    spec.n_test = 1;
    const bench::SglInstance inst = bench::make_sgl(spec);
    std::ostringstream out;
    bench::write_sgl_csv(out, inst.data);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "f0,f1,f2,f3,response,split");
    std::multiset<std::string> splits;
    while (std::getline(in, line))
        splits.insert(line.substr(line.rfind(',') + 1));
    CHECK(splits.count("train") == 3);
    CHECK(splits.count("val") == 2);
    CHECK(splits.count("test") == 1);
}

TEST_CASE("toy minimax: saddle point, curvature signs and reference") {
    const MinimaxBilevelProblem p = bench::make_toy_minimax(1);
    const Vector x = v1(0.8);
    const oracle::SaddlePoint sp = oracle::saddle_point_alternating(p, x, v1(3), v1(-2), 0.2, 1e-13, 1000000);
    CHECK(sp.converged);
    CHECK(std::abs(sp.y[0] - 0.0) <= 1e-8);
    CHECK(std::abs(sp.z[0] - 0.8) <= 1e-8);

    const MinimaxBilevelProblem q = bench::make_toy_minimax(3);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 20; ++t) {
        Vector x3(3), y3(3), z3(3), d(3);
        for (int i = 0; i < 3; ++i) {
            x3[i] = normal(rng);
            y3[i] = normal(rng);
            z3[i] = normal(rng);
            d[i] = normal(rng);
        }
        auto fy = [&](double s) { return q.lower_eval(x3, y3 + s * d, z3); };
        auto fz = [&](double s) { return q.lower_eval(x3, y3, z3 + s * d); };
        CHECK(fy(1) + fy(-1) - 2 * fy(0) > 0);
        CHECK(fz(1) + fz(-1) - 2 * fz(0) < 0);
    }
    const TriplePoint &ref = *q.reference_solution;
    CHECK(q.set_x.contains(ref.x));
    CHECK(q.set_y.contains(ref.y));
    CHECK(q.set_z.contains(ref.z));
}
