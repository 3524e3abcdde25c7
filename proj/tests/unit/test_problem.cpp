#include "bigap/experiment.hpp"
#include "bigap/problem.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>

using namespace bigap;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out[i++] = x;
    return out;
}

BilevelProblem quadratic_problem() {
    BilevelProblem p;
    p.name = "quadratic";
    p.dim_x = 2;
    p.dim_y = 2;
    p.upper_value = [](const Vector &, const Vector &y) { return 0.5 * y.squaredNorm(); };
    p.upper_grad = [](const Vector &x, const Vector &y) { return BlockGrad{Vector::Zero(x.size()), y}; };
    p.lower_value = [](const Vector &x, const Vector &y) { return 0.5 * (y - x).squaredNorm(); };
    p.lower_grad = [](const Vector &x, const Vector &y) { return BlockGrad{x - y, y - x}; };
    p.set_x = ProjectableSet::full_space(2);
    p.set_y = ProjectableSet::full_space(2);
    return p;
}

const OracleCheck &find(const ValidationReport &r, const std::string &name) {
    for (const auto &c : r.checks)
        if (c.oracle == name)
            return c;
    FAIL("missing check " << name);
    return r.checks.front();
}

} // namespace

TEST_CASE("projection onto boxes and the full space") {
    const double inf = std::numeric_limits<double>::infinity();
    const auto orthant = ProjectableSet::box(vec({0, 0}), vec({inf, inf}));
    CHECK(project(orthant, vec({-1, 2})) == vec({0, 2}));
    CHECK(project(ProjectableSet::full_space(2), vec({3.5, -7})) == vec({3.5, -7}));
    CHECK(project(ProjectableSet::uniform_box(3, 0, 1), vec({0.5, 2, -3})) == vec({0.5, 1, 0}));
    CHECK(project(ProjectableSet::nonnegative(2), vec({-1, 2})) == vec({0, 2}));
}

TEST_CASE("projection is idempotent and non-expansive") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    const auto box = ProjectableSet::box(vec({-1, 0, -2, 0}), vec({1, 3, 2, 0}));
    const auto ball = ProjectableSet::custom(4, [](const Vector &v) -> Vector {
        const double n = v.norm();
        return n > 1.0 ? Vector(v / n) : v;
    });
    for (const auto *set : {&box, &ball}) {
        for (int t = 0; t < 200; ++t) {
            Vector a(4), b(4);
            for (int i = 0; i < 4; ++i) {
                a[i] = 3 * normal(rng);
                b[i] = 3 * normal(rng);
            }
            const Vector pa = set->project(a), pb = set->project(b);
            CHECK((set->project(pa) - pa).norm() <= 1e-15);
            CHECK((pa - pb).norm() <= (a - b).norm() + 1e-12);
            CHECK(set->contains(pa, 1e-12));
        }
    }
}

TEST_CASE("set construction and dimension errors") {
    CHECK_THROWS_AS(ProjectableSet::box(vec({1}), vec({0})), ConfigError);
    CHECK_THROWS_AS(project(ProjectableSet::full_space(2), vec({1, 2, 3})), ConfigError);
    std::mt19937_64 rng(1);
    const auto box = ProjectableSet::uniform_box(5, -1, 2);
    for (int t = 0; t < 20; ++t)
        CHECK(box.contains(box.sample(rng)));
}

TEST_CASE("validate_gradients accepts exact gradients") {
    const ValidationReport r = validate_gradients(quadratic_problem(), 5, 1e-6, 7);
    CHECK(r.passed);
    CHECK(r.failure.empty());
    for (const auto &c : r.checks)
        if (c.applicable)
            CHECK(c.max_rel_error < 1e-8);
}

TEST_CASE("validate_gradients flags a gradient off by a factor of two") {
    const ValidationReport r = validate_gradients(make_sabotaged_fixture(3), 5, 1e-6, 0);
    CHECK_FALSE(r.passed);
    const OracleCheck &bad = find(r, "upper_grad.x");
    CHECK_FALSE(bad.passed);
    CHECK(bad.max_rel_error == doctest::Approx(1.0).epsilon(0.05));
    CHECK(find(r, "upper_grad.y").passed);
}

TEST_CASE("validate_gradients marks constraint checks n/a without constraints") {
    const ValidationReport r = validate_gradients(make_unconstrained_fixture(3), 5, 1e-6, 0);
    CHECK(r.passed);
    CHECK_FALSE(find(r, "constraint_vjp.x").applicable);
    CHECK_FALSE(find(r, "constraint_vjp.y").applicable);
}

TEST_CASE("non-finite oracle output is an evaluation error") {
    BilevelProblem p = quadratic_problem();
    p.upper_value = [](const Vector &, const Vector &) { return std::nan(""); };
    CHECK_THROWS_AS(p.upper_eval(vec({0, 0}), vec({0, 0})), EvaluationError);
    const ValidationReport r = validate_gradients(p, 2, 1e-6, 0);
    CHECK_FALSE(r.passed);
    CHECK_FALSE(r.failure.empty());
}

TEST_CASE("structural validation") {
    BilevelProblem p = quadratic_problem();
    CHECK_NOTHROW(p.validate());
    p.dim_p = 1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = quadratic_problem();
    p.set_y = ProjectableSet::full_space(3);
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = quadratic_problem();
    p.upper_grad = [](const Vector &, const Vector &) { return BlockGrad{Vector::Zero(3), Vector::Zero(2)}; };
    CHECK_THROWS(p.upper_grad_eval(vec({0, 0}), vec({0, 0})));
}

TEST_CASE("relative_error is absolute near zero") {
    CHECK(relative_error(vec({0.5}), vec({0.0})) == doctest::Approx(0.5));
    CHECK(relative_error(vec({20}), vec({10})) == doctest::Approx(1.0));
}
