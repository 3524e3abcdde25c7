#include "bigap/experiment.hpp"

#include "doctest.h"

#include <cstdlib>
#include <sstream>

using namespace bigap;

namespace {

struct EnvGuard {
    explicit EnvGuard(const char *value) {
        if (value)
            ::setenv("BIGAP_THREADS", value, 1);
        else
            ::unsetenv("BIGAP_THREADS");
    }
    ~EnvGuard() { ::unsetenv("BIGAP_THREADS"); }
};

ExperimentConfig small_synthetic() {
    ExperimentConfig c;
    c.problem = "synthetic";
    c.n = 20;
    c.q = 1;
    c.solver.gap.gamma2 = 0.1;
    c.solver.max_iters = 100000;
    c.solver.diag_every = 0;
    c.solver.stop_ref_rel_err = 0.01;
    return c;
}

} // namespace

TEST_CASE("problem registry") {
    const auto names = problem_names();
    CHECK(names.size() == 5);
    for (const auto &name : names) {
        ExperimentConfig c;
        c.problem = name;
        c.n = name == "sgl" ? 1000 : 4;
        c.sgl.p = 20;
        c.sgl.groups = 4;
        const ProblemInstance inst = make_problem(c);
        CHECK(inst.bilevel.has_value() != inst.minimax.has_value());
        CHECK(inst.sgl_data.has_value() == (name == "sgl"));
    }
    ExperimentConfig bad;
    bad.problem = "nope";
    CHECK_THROWS_AS(make_problem(bad), ConfigError);
}

TEST_CASE("multiplier cap resolution") {
    ExperimentConfig c = small_synthetic();
    const ProblemInstance inst = make_problem(c);
    CHECK(effective_solver_config(c, inst).gap.r == 1.0);
    c.r_cap = 4.0;
    CHECK(effective_solver_config(c, inst).gap.r == 4.0);
    ExperimentConfig f;
    f.problem = "quadratic-sabotaged";
    f.n = 3;
    CHECK(effective_solver_config(f, make_problem(f)).gap.r == f.solver.gap.r);
}

TEST_CASE("thread count honours BIGAP_THREADS") {
    {
        EnvGuard env(nullptr);
        CHECK(resolve_threads(3) == 3);
        CHECK(resolve_threads(0) >= 1);
    }
    {
        EnvGuard env("2");
        CHECK(resolve_threads(8) == 2);
        CHECK(resolve_threads(1) == 1);
    }
    {
        EnvGuard env("many");
        CHECK_THROWS_AS(resolve_threads(1), ConfigError);
    }
    {
        EnvGuard env("0");
        CHECK_THROWS_AS(resolve_threads(1), ConfigError);
    }
}

TEST_CASE("sweep order, statuses and csv") {
    EnvGuard env("2");
    ExperimentConfig c = small_synthetic();
    c.sweep.gamma1 = {1, 3};
    c.sweep.gamma2 = {0.1, -1};
    c.solver.max_iters = 60000;
    const auto cells = run_sweep(c);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0].gamma1 == 1);
    CHECK(cells[0].gamma2 == 0.1);
    CHECK(cells[1].gamma2 == -1);
    CHECK(cells[2].gamma1 == 3);
    CHECK(cells[0].status == "ok");
    CHECK(cells[0].iters.has_value());
    CHECK(cells[1].status == "failed");
    CHECK_FALSE(cells[1].time_s.has_value());

    std::ostringstream out;
    write_sweep_csv(out, cells);
    std::istringstream in(out.str());
    std::string header, row0, row1;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    CHECK(header == kSweepHeader);
    CHECK(row1 == "1,-1,0.001,0.01,0.29999999999999999,,,failed");
}

TEST_CASE("sweep results do not depend on the worker count") {
    ExperimentConfig c = small_synthetic();
    c.sweep.gamma1 = {1, 2, 3};
    std::vector<SweepCell> one, three;
    {
        EnvGuard env("1");
        one = run_sweep(c);
    }
    {
        EnvGuard env("3");
        three = run_sweep(c);
    }
    REQUIRE(one.size() == three.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].gamma1 == three[i].gamma1);
        CHECK(one[i].status == three[i].status);
        CHECK(one[i].iters == three[i].iters);
    }
}

TEST_CASE("gradcheck verdicts") {
    ExperimentConfig c;
    c.n = 3;
    c.problem = "synthetic";
    c.q = 3;
    CHECK(gradcheck(c, make_problem(c)).passed);
    c.problem = "quadratic-sabotaged";
    CHECK_FALSE(gradcheck(c, make_problem(c)).passed);
    c.problem = "minimax-toy";
    CHECK(gradcheck(c, make_problem(c)).passed);
    c.problem = "quadratic-unconstrained";
    const GradcheckReport r = gradcheck(c, make_problem(c));
    CHECK(r.passed);
    std::ostringstream out;
    print_gradcheck(out, r);
    CHECK(out.str().find("n/a") != std::string::npos);
}

TEST_CASE("experiment configuration validation") {
    ExperimentConfig c = small_synthetic();
    CHECK_NOTHROW(c.validate());
    c.q = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_synthetic();
    c.solver.penalty_rho = 0.7;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_synthetic();
    c.r_cap = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
