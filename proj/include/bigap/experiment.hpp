#pragma once

// Experiment harness behind the CLI: problem registry, single runs, parameter
// sweeps on a bounded worker pool, and gradient checks.

#include "bigap/bench.hpp"
#include "bigap/minimax.hpp"
#include "bigap/solver.hpp"
#include "bigap/trace_io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bigap {

/// Lists over which a sweep takes the Cartesian product. An empty axis keeps the
/// base configuration's value.
struct SweepAxes {
    std::vector<double> gamma1, gamma2, alpha, eta, rho;

    bool empty() const;
};

struct ExperimentConfig {
    /// synthetic | sgl | minimax-toy | quadratic-unconstrained | quadratic-sabotaged
    std::string problem;
    int n = 1000; ///< synthetic, minimax-toy and fixture dimension
    int q = 1;
    bench::SglSpec sgl;
    SolverConfig solver;
    /// Multiplier cap; defaults to the problem's protocol value, else solver.gap.r.
    std::optional<double> r_cap;
    std::string out; ///< empty: standard output
    TraceFormat format = TraceFormat::Csv;
    SweepAxes sweep;
    unsigned threads = 0; ///< 0: available parallelism

    void validate() const;
};

std::vector<std::string> problem_names();

/// Exactly one of the two is set.
struct ProblemInstance {
    std::optional<BilevelProblem> bilevel;
    std::optional<MinimaxBilevelProblem> minimax;
    std::optional<bench::DataSplit> sgl_data;
};

ProblemInstance make_problem(const ExperimentConfig &config);

/// dim_p = 0 fixture: F = ||x||^2 / 2 + ||y - 1||^2 / 2, f = ||y - x||^2 / 2.
BilevelProblem make_unconstrained_fixture(int n);

/// Constrained quadratic whose upper-level x-gradient is deliberately wrong by a factor 2.
BilevelProblem make_sabotaged_fixture(int n);

/// The solver configuration with r resolved against the instance.
SolverConfig effective_solver_config(const ExperimentConfig &config, const ProblemInstance &instance);

RunTrace run_experiment(const ExperimentConfig &config, const ProblemInstance &instance);
RunTrace run_experiment(const ExperimentConfig &config);

struct SweepCell {
    double gamma1 = 0.0, gamma2 = 0.0, alpha = 0.0, eta = 0.0, rho = 0.0;
    std::string status;             ///< ok | max-iters | failed
    std::optional<double> time_s;   ///< set when status is ok
    std::optional<long> iters;      ///< iterations to the stopping rule
    std::string message;
};

/// Worker count: `requested` (0 = hardware concurrency), capped by BIGAP_THREADS
/// when set. Throws ConfigError on a malformed BIGAP_THREADS.
unsigned resolve_threads(unsigned requested);

/// Runs every cell of the product of axes. Cell order is gamma1-major, in axis
/// order, independent of the worker count. Cell failures are recorded, not thrown.
std::vector<SweepCell> run_sweep(const ExperimentConfig &config);

inline constexpr std::string_view kSweepHeader = "gamma1,gamma2,alpha,eta,rho,time_s,iters,status";

void write_sweep_csv(std::ostream &out, const std::vector<SweepCell> &cells);

struct GradcheckReport {
    std::vector<OracleCheck> checks;
    double tolerance = 1e-4;
    bool passed = true;
    std::string failure;
};

/// Oracle checks against finite differences plus a directional check of the gap
/// gradient (saddle gap for minimax problems).
GradcheckReport gradcheck(const ExperimentConfig &config, const ProblemInstance &instance, int samples = 5);

void print_gradcheck(std::ostream &out, const GradcheckReport &report);

} // namespace bigap
