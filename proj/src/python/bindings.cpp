// Python bindings: problem constructors, the gap function, single runs, sweeps
// and gradient checks. Long computations release the GIL.

#include "bigap/experiment.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>
#include <sstream>

namespace py = pybind11;
using namespace bigap;

namespace {

double or_nan(const std::optional<double> &v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); }

/// Column name -> list of values; unsampled diagnostics are NaN.
py::dict trace_columns(const RunTrace &t) {
    std::vector<double> k, time_s, c_k, F, gap_proxy, res_proxy, gap_exact, res_exact, merit_V, ref_rel_err;
    for (const TraceRow &r : t.rows) {
        k.push_back(static_cast<double>(r.k));
        time_s.push_back(r.time_s);
        c_k.push_back(r.c_k);
        F.push_back(r.F);
        gap_proxy.push_back(r.gap_proxy);
        res_proxy.push_back(r.res_proxy);
        gap_exact.push_back(or_nan(r.gap_exact));
        res_exact.push_back(or_nan(r.res_exact));
        merit_V.push_back(or_nan(r.merit_V));
        ref_rel_err.push_back(or_nan(r.ref_rel_err));
    }
    py::dict d;
    d["k"] = k;
    d["time_s"] = time_s;
    d["c_k"] = c_k;
    d["F"] = F;
    d["gap_proxy"] = gap_proxy;
    d["res_proxy"] = res_proxy;
    d["gap_exact"] = gap_exact;
    d["res_exact"] = res_exact;
    d["merit_V"] = merit_V;
    d["ref_rel_err"] = ref_rel_err;
    return d;
}

py::list checks_to_list(const std::vector<OracleCheck> &checks) {
    py::list out;
    for (const OracleCheck &c : checks) {
        py::dict d;
        d["oracle"] = c.oracle;
        d["applicable"] = c.applicable;
        d["max_rel_error"] = c.max_rel_error;
        d["passed"] = c.passed;
        out.append(d);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Single-loop gap-function solver for constrained bilevel problems";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_RuntimeError);

    py::class_<GapParams>(m, "GapParams")
        .def(py::init<>())
        .def(py::init([](double gamma1, double gamma2, double r, double inner_tol) {
                 GapParams p{gamma1, gamma2, r, inner_tol};
                 p.validate();
                 return p;
             }),
             py::arg("gamma1") = 1.0, py::arg("gamma2") = 1.0, py::arg("r") = 10.0, py::arg("inner_tol") = 1e-10)
        .def_readwrite("gamma1", &GapParams::gamma1)
        .def_readwrite("gamma2", &GapParams::gamma2)
        .def_readwrite("r", &GapParams::r)
        .def_readwrite("inner_tol", &GapParams::inner_tol)
        .def_readwrite("inner_max_iters", &GapParams::inner_max_iters)
        .def("validate", &GapParams::validate);

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &SolverConfig::alpha)
        .def_readwrite("eta", &SolverConfig::eta)
        .def_readwrite("penalty_c", &SolverConfig::penalty_c)
        .def_readwrite("penalty_rho", &SolverConfig::penalty_rho)
        .def_readwrite("gap", &SolverConfig::gap)
        .def_readwrite("max_iters", &SolverConfig::max_iters)
        .def_readwrite("diag_every", &SolverConfig::diag_every)
        .def_readwrite("stop_residual", &SolverConfig::stop_residual)
        .def_readwrite("stop_ref_rel_err", &SolverConfig::stop_ref_rel_err)
        .def_readwrite("seed", &SolverConfig::seed)
        .def("validate", &SolverConfig::validate);

    py::class_<BilevelProblem>(m, "BilevelProblem")
        .def_readonly("name", &BilevelProblem::name)
        .def_readonly("dim_x", &BilevelProblem::dim_x)
        .def_readonly("dim_y", &BilevelProblem::dim_y)
        .def_readonly("dim_p", &BilevelProblem::dim_p)
        .def_property_readonly("reference_x",
                               [](const BilevelProblem &p) -> std::optional<Vector> {
                                   if (!p.reference_solution)
                                       return std::nullopt;
                                   return p.reference_solution->x;
                               })
        .def("upper_value", &BilevelProblem::upper_eval, py::arg("x"), py::arg("y"))
        .def("lower_value", &BilevelProblem::lower_eval, py::arg("x"), py::arg("y"))
        .def("constraint_value", &BilevelProblem::constraint_eval, py::arg("x"), py::arg("y"));

    py::class_<MinimaxBilevelProblem>(m, "MinimaxBilevelProblem")
        .def_readonly("name", &MinimaxBilevelProblem::name)
        .def_readonly("dim_x", &MinimaxBilevelProblem::dim_x)
        .def_readonly("dim_y", &MinimaxBilevelProblem::dim_y)
        .def_readonly("dim_z", &MinimaxBilevelProblem::dim_z);

    py::class_<RunTrace>(m, "RunTrace")
        .def_property_readonly("status", [](const RunTrace &t) { return to_string(t.status); })
        .def_readonly("message", &RunTrace::message)
        .def_readonly("wall_time_s", &RunTrace::wall_time_s)
        .def_property_readonly("x", [](const RunTrace &t) { return t.final_state.x; })
        .def_property_readonly("y", [](const RunTrace &t) { return t.final_state.y; })
        .def_property_readonly("z", [](const RunTrace &t) { return t.final_state.z; })
        .def_property_readonly("iters", [](const RunTrace &t) { return t.rows.empty() ? 0L : t.rows.back().k; })
        .def("columns", &trace_columns)
        .def(
            "to_csv",
            [](const RunTrace &t) {
                std::ostringstream out;
                write_trace_csv(out, t);
                return out.str();
            })
        .def("__len__", [](const RunTrace &t) { return t.rows.size(); });

    m.def("synthetic", [](int n, int q) { return bench::make_synthetic({n, q}); }, py::arg("n") = 1000,
          py::arg("q") = 1);
    m.def(
        "sgl",
        [](int p, int groups, int n_train, int n_val, int n_test, double snr, std::uint64_t seed) {
            bench::SglSpec s;
            s.p = p;
            s.groups = groups;
            s.n_train = n_train;
            s.n_val = n_val;
            s.n_test = n_test;
            s.snr = snr;
            s.seed = seed;
            bench::SglInstance inst = bench::make_sgl(s);
            py::dict data;
            data["a_train"] = inst.data.a_train;
            data["b_train"] = inst.data.b_train;
            data["a_val"] = inst.data.a_val;
            data["b_val"] = inst.data.b_val;
            data["a_test"] = inst.data.a_test;
            data["b_test"] = inst.data.b_test;
            data["beta_true"] = inst.data.beta_true;
            data["sigma"] = inst.data.sigma;
            return py::make_tuple(std::move(inst.problem), data);
        },
        py::arg("p") = 150, py::arg("groups") = 30, py::arg("n_train") = 100, py::arg("n_val") = 100,
        py::arg("n_test") = 300, py::arg("snr") = 3.0, py::arg("seed") = 0);
    m.def("toy_minimax", &bench::make_toy_minimax, py::arg("n") = 5);

    m.def("penalty_at", &penalty_at, py::arg("config"), py::arg("k"));
    m.def("lambda_star", &lambda_star, py::arg("problem"), py::arg("params"), py::arg("x"), py::arg("y"),
          py::arg("z"));
    m.def(
        "theta_star",
        [](const BilevelProblem &p, const GapParams &g, const Vector &x, const Vector &y, const Vector &z) {
            const InnerSolution s = theta_star(p, g, x, y, z);
            return py::make_tuple(s.theta, s.iters, s.converged);
        },
        py::arg("problem"), py::arg("params"), py::arg("x"), py::arg("y"), py::arg("z"));
    m.def(
        "gap_value",
        [](const BilevelProblem &p, const GapParams &g, const Vector &x, const Vector &y, const Vector &z) {
            return gap_value(p, g, x, y, z).value;
        },
        py::arg("problem"), py::arg("params"), py::arg("x"), py::arg("y"), py::arg("z"));
    m.def(
        "gap_gradient",
        [](const BilevelProblem &p, const GapParams &g, const Vector &x, const Vector &y, const Vector &z) {
            const GapGradient gr = gap_gradient(p, g, x, y, z);
            return py::make_tuple(gr.gx, gr.gy, gr.gz);
        },
        py::arg("problem"), py::arg("params"), py::arg("x"), py::arg("y"), py::arg("z"));
    m.def(
        "validate_gradients",
        [](const BilevelProblem &p, int samples, double step, std::uint64_t seed) {
            const ValidationReport r = validate_gradients(p, samples, step, seed);
            py::dict d;
            d["passed"] = r.passed;
            d["failure"] = r.failure;
            d["checks"] = checks_to_list(r.checks);
            return d;
        },
        py::arg("problem"), py::arg("samples") = 5, py::arg("step") = 1e-6, py::arg("seed") = 0);

    m.def("run", [](const BilevelProblem &p, const SolverConfig &c) { return run(p, c); }, py::arg("problem"),
          py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "run_minimax", [](const MinimaxBilevelProblem &p, const SolverConfig &c) { return run_minimax(p, c); },
        py::arg("problem"), py::arg("config"), py::call_guard<py::gil_scoped_release>());

    m.def("problem_names", &problem_names);
    m.def(
        "sweep",
        [](const std::string &problem, const SolverConfig &base, int n, int q, std::vector<double> gamma1,
           std::vector<double> gamma2, std::vector<double> alpha, std::vector<double> eta, std::vector<double> rho,
           unsigned threads) {
            ExperimentConfig c;
            c.problem = problem;
            c.solver = base;
            c.n = n;
            c.q = q;
            c.sweep = {std::move(gamma1), std::move(gamma2), std::move(alpha), std::move(eta), std::move(rho)};
            c.threads = threads;
            c.validate();
            std::vector<SweepCell> cells;
            {
                py::gil_scoped_release release;
                cells = run_sweep(c);
            }
            py::list out;
            for (const SweepCell &cell : cells) {
                py::dict d;
                d["gamma1"] = cell.gamma1;
                d["gamma2"] = cell.gamma2;
                d["alpha"] = cell.alpha;
                d["eta"] = cell.eta;
                d["rho"] = cell.rho;
                d["time_s"] = cell.time_s;
                d["iters"] = cell.iters;
                d["status"] = cell.status;
                out.append(d);
            }
            return out;
        },
        py::arg("problem"), py::arg("base"), py::arg("n") = 100, py::arg("q") = 1,
        py::arg("gamma1") = std::vector<double>{}, py::arg("gamma2") = std::vector<double>{},
        py::arg("alpha") = std::vector<double>{}, py::arg("eta") = std::vector<double>{},
        py::arg("rho") = std::vector<double>{}, py::arg("threads") = 0u);
    m.def(
        "gradcheck",
        [](const std::string &problem, int n, int q, int samples) {
            ExperimentConfig c;
            c.problem = problem;
            c.n = n;
            c.q = q;
            c.validate();
            const GradcheckReport r = gradcheck(c, make_problem(c), samples);
            py::dict d;
            d["passed"] = r.passed && r.failure.empty();
            d["failure"] = r.failure;
            d["checks"] = checks_to_list(r.checks);
            return d;
        },
        py::arg("problem"), py::arg("n") = 3, py::arg("q") = 1, py::arg("samples") = 5);
}
