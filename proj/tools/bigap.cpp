// bigap: run, sweep and gradient-check the single-loop bilevel solver.
//
// Exit codes: 0 ok, 1 configuration error, 2 oracle failure, 3 gradcheck failure.

#include "bigap/experiment.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitOracle = 2;
constexpr int kExitGradcheck = 3;

struct Cli {
    bigap::ExperimentConfig cfg;
    std::optional<int> n;
    std::string format = "csv";
    double c = 1.0;
    double stop_ref = 0.01;
    std::optional<double> stop_res;
    std::string dump_data;
    int samples = 5;
};

std::string with_opt(const char *key, const std::optional<double> &v) {
    return v ? std::string(key) + "=" + bigap::format_double(*v) : std::string(key) + "=n/a";
}

std::ostream &summary_stream(const bigap::ExperimentConfig &cfg) {
    // Keep stdout clean when the trace itself goes there.
    return cfg.out.empty() ? std::cerr : std::cout;
}

int finish_config(Cli &cli) {
    auto &cfg = cli.cfg;
    if (!cli.n)
        cli.n = cfg.problem == "synthetic" ? 1000 : cfg.problem == "minimax-toy" ? 5 : 3;
    cfg.n = *cli.n;
    cfg.format = bigap::parse_trace_format(cli.format);
    cfg.solver.penalty_c = cli.c;
    cfg.solver.stop_ref_rel_err = cli.stop_ref > 0.0 ? std::optional<double>(cli.stop_ref) : std::nullopt;
    cfg.solver.stop_residual = cli.stop_res;
    cfg.sgl.seed = cfg.solver.seed;
    cfg.validate();
    return kExitOk;
}

int cmd_run(const Cli &cli) {
    const auto &cfg = cli.cfg;
    const bigap::ProblemInstance instance = bigap::make_problem(cfg);
    if (!cli.dump_data.empty()) {
        if (!instance.sgl_data)
            throw bigap::ConfigError("--dump-data applies to the sgl problem only");
        std::ofstream out(cli.dump_data);
        if (!out)
            throw bigap::ConfigError("cannot open '" + cli.dump_data + "'");
        bigap::bench::write_sgl_csv(out, *instance.sgl_data);
    }
    const bigap::RunTrace trace = bigap::run_experiment(cfg, instance);
    if (cfg.out.empty())
        bigap::write_trace(std::cout, trace, cfg.format);
    else
        bigap::write_trace_file(cfg.out, trace, cfg.format);

    std::ostream &os = summary_stream(cfg);
    if (trace.rows.empty()) {
        os << "status=" << bigap::to_string(trace.status) << " iters=0 residual=n/a ref_rel_err=n/a wall_time_s="
           << bigap::format_double(trace.wall_time_s) << '\n';
        std::cerr << "error: " << trace.message << '\n';
        return kExitOracle;
    }
    const bigap::TraceRow &last = trace.rows.back();
    const std::optional<double> residual = last.res_exact ? last.res_exact : std::optional<double>(last.res_proxy);
    os << "status=" << bigap::to_string(trace.status) << " iters=" << last.k << ' ' << with_opt("residual", residual)
       << ' ' << with_opt("ref_rel_err", last.ref_rel_err) << " wall_time_s=" << bigap::format_double(trace.wall_time_s)
       << '\n';
    if (!trace.message.empty())
        std::cerr << "error: " << trace.message << '\n';
    return trace.status == bigap::RunStatus::OracleFailure ? kExitOracle : kExitOk;
}

int cmd_sweep(const Cli &cli) {
    const std::vector<bigap::SweepCell> cells = bigap::run_sweep(cli.cfg);
    if (cli.cfg.out.empty()) {
        bigap::write_sweep_csv(std::cout, cells);
    } else {
        std::ofstream out(cli.cfg.out);
        if (!out)
            throw bigap::ConfigError("cannot open '" + cli.cfg.out + "'");
        bigap::write_sweep_csv(out, cells);
    }
    std::size_t ok = 0;
    for (const auto &c : cells) {
        ok += c.status == "ok";
        if (!c.message.empty())
            std::cerr << "cell gamma1=" << c.gamma1 << " gamma2=" << c.gamma2 << ": " << c.message << '\n';
    }
    summary_stream(cli.cfg) << "cells=" << cells.size() << " ok=" << ok << '\n';
    return kExitOk;
}

int cmd_gradcheck(const Cli &cli) {
    const bigap::ProblemInstance instance = bigap::make_problem(cli.cfg);
    const bigap::GradcheckReport report = bigap::gradcheck(cli.cfg, instance, cli.samples);
    bigap::print_gradcheck(std::cout, report);
    if (!report.failure.empty())
        return kExitOracle;
    return report.passed ? kExitOk : kExitGradcheck;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Single-loop gap-function solver for constrained bilevel problems"};
    app.set_config("--config", "", "flat key = value file; command-line flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.fallthrough();
    app.require_subcommand(1, 1);

    Cli cli;
    auto &cfg = cli.cfg;
    auto &s = cfg.solver;
    std::string problems;
    for (const auto &p : bigap::problem_names())
        problems += (problems.empty() ? "" : ", ") + p;

    app.add_option("--problem", cfg.problem, "one of: " + problems)->required();
    app.add_option("--n", cli.n, "problem dimension (synthetic 1000, minimax-toy 5, fixtures 3)");
    app.add_option("--q", cfg.q, "synthetic exponent, 1 or 3")->capture_default_str();
    app.add_option("--gamma1", s.gap.gamma1)->capture_default_str();
    app.add_option("--gamma2", s.gap.gamma2)->capture_default_str();
    app.add_option("--alpha", s.alpha, "primal step")->capture_default_str();
    app.add_option("--eta", s.eta, "theta step")->capture_default_str();
    app.add_option("--rho", s.penalty_rho, "penalty growth exponent")->capture_default_str();
    app.add_option("--r-cap", cfg.r_cap, "multiplier cap r (default: problem protocol value, else 10)");
    app.add_option("--c", cli.c, "penalty base c")->capture_default_str();
    app.add_option("--max-iters", s.max_iters)->capture_default_str();
    app.add_option("--diag-every", s.diag_every, "exact diagnostics stride, 0 disables")->capture_default_str();
    app.add_option("--seed", s.seed)->capture_default_str();
    app.add_option("--out", cfg.out, "output file (default: stdout)");
    app.add_option("--format", cli.format, "csv | json-lines")->capture_default_str();
    app.add_option("--stop-ref", cli.stop_ref, "stop at this relative reference error, <= 0 disables")
        ->capture_default_str();
    app.add_option("--stop-res", cli.stop_res, "stop when the residual proxy falls below this");
    app.add_option("--inner-tol", s.gap.inner_tol)->capture_default_str();
    app.add_option("--sgl-p", cfg.sgl.p)->capture_default_str();
    app.add_option("--sgl-groups", cfg.sgl.groups)->capture_default_str();
    app.add_option("--n-train", cfg.sgl.n_train)->capture_default_str();
    app.add_option("--n-val", cfg.sgl.n_val)->capture_default_str();
    app.add_option("--n-test", cfg.sgl.n_test)->capture_default_str();
    app.add_option("--snr", cfg.sgl.snr)->capture_default_str();

    // Everything lives on the top-level app so config files stay flat.
    app.add_option("--dump-data", cli.dump_data, "run: write the generated SGL data as CSV");
    app.add_option("--sweep-gamma1", cfg.sweep.gamma1, "sweep axis, comma separated")->delimiter(',');
    app.add_option("--sweep-gamma2", cfg.sweep.gamma2)->delimiter(',');
    app.add_option("--sweep-alpha", cfg.sweep.alpha)->delimiter(',');
    app.add_option("--sweep-eta", cfg.sweep.eta)->delimiter(',');
    app.add_option("--sweep-rho", cfg.sweep.rho)->delimiter(',');
    app.add_option("--threads", cfg.threads, "sweep workers (0: all cores; BIGAP_THREADS caps)");
    app.add_option("--samples", cli.samples, "gradcheck sample points")->capture_default_str();

    auto *run = app.add_subcommand("run", "single solver run; writes a trace");
    auto *sweep = app.add_subcommand("sweep", "Cartesian product of hyperparameter axes");
    app.add_subcommand("gradcheck", "finite-difference checks of every oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        finish_config(cli);
        if (run->parsed())
            return cmd_run(cli);
        if (sweep->parsed())
            return cmd_sweep(cli);
        return cmd_gradcheck(cli);
    } catch (const bigap::ConfigError &e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const bigap::EvaluationError &e) {
        std::cerr << "oracle failure: " << e.what() << '\n';
        return kExitOracle;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitOracle;
    }
}
