#include "bigap/oracle.hpp"

#include "../support/convex_instance.hpp"

#include "doctest.h"

using namespace bigap;

TEST_CASE("finite differences") {
    Vector p(2);
    p << 1, 2;
    const Vector g = oracle::finite_diff_grad([](const Vector &v) { return 0.5 * v.squaredNorm(); }, p);
    CHECK((g - p).lpNorm<Eigen::Infinity>() <= 1e-9);
    p << 3, 5;
    const Vector h = oracle::finite_diff_grad([](const Vector &v) { return v[0] * v[1]; }, p);
    CHECK(std::abs(h[0] - 5) <= 1e-8);
    CHECK(std::abs(h[1] - 3) <= 1e-8);
}

TEST_CASE("grid maximization of concave functions") {
    const auto a = oracle::grid_argmax_concave_1d([](double l) { return -(l - 2) * (l - 2); }, 0, 10);
    CHECK(std::abs(a.argmax - 2) <= 1e-3);
    const auto b = oracle::grid_argmax_concave_1d([](double l) { return -l - 0.5 * l * l; }, 0, 10);
    CHECK(b.argmax == 0.0);
    CHECK(b.max == 0.0);
    CHECK_THROWS_AS(oracle::grid_argmax_concave_1d([](double) { return 0.0; }, 1, 1), ConfigError);
}

TEST_CASE("high-accuracy inner solve on a quadratic") {
    // f = ||y - A x||^2 / 2 + mu ||y||^2 / 2 on a box large enough to stay inactive:
    // theta* = (A x + y / gamma1) / (1 + mu + 1 / gamma1).
    BilevelProblem p = testing::make_quadratic_inner(4, 0.5, 3);
    p.set_y = ProjectableSet::full_space(4);
    GapParams params;
    params.gamma1 = 2.0;
    const Vector x = Vector::LinSpaced(4, -1, 1), y = Vector::Constant(4, 0.3);
    // A x from the gradient at y = 0: grad_y f(x, 0) = -A x.
    const Vector a_x = -p.lower_grad_eval(x, Vector::Zero(4)).y;
    const Vector closed = (a_x + y / params.gamma1) / (1.0 + 0.5 + 1.0 / params.gamma1);
    const auto s = oracle::solve_inner_highacc(p, params, x, y, Vector(), {}, true);
    CHECK(s.converged);
    CHECK((s.theta - closed).lpNorm<Eigen::Infinity>() <= 1e-10);
    REQUIRE(s.objective_trace.size() >= 2);
    for (std::size_t i = 1; i < s.objective_trace.size(); ++i)
        CHECK(s.objective_trace[i] < s.objective_trace[i - 1]);
}

TEST_CASE("least squares") {
    const Vector r = Vector::LinSpaced(3, 1, 3);
    CHECK((oracle::least_squares(Matrix::Identity(3, 3), r) - r).norm() <= 1e-14);
    Matrix d(2, 1);
    d << 1, 1;
    Vector b(2);
    b << 1, 3;
    CHECK(oracle::least_squares(d, b)[0] == doctest::Approx(2.0));

    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    Matrix a(30, 5);
    Vector y(30);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a.data()[i] = normal(rng);
    for (auto &v : y)
        v = normal(rng);
    const Vector beta = oracle::least_squares(a, y);
    CHECK((a.transpose() * (y - a * beta)).norm() <= 1e-10);

    Matrix rank1(3, 2);
    rank1 << 1, 2, 2, 4, 3, 6;
    CHECK_THROWS_AS(oracle::least_squares(rank1, Vector::Ones(3)), std::runtime_error);
}
