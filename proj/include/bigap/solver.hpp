#pragma once

// Single-loop penalized gap-function method for constrained bilevel problems.
//
// Each iteration takes one projected gradient step on the theta-subproblem,
// the closed-form lambda update, and one projected step on (x, y, z) along the
// approximate gradient of F / c_k + G_gamma, with c_k = c (k + 1)^rho.

#include "bigap/gapfn.hpp"
#include "bigap/problem.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bigap {

/// User estimates of the smoothness constants entering the merit function.
/// Used only for diagnostics.
struct MeritEstimates {
    double lf = 0.0;  ///< smoothness of f
    double lg1 = 0.0; ///< Lipschitz constant of grad_x g
    double lg = 0.0;  ///< Lipschitz constant of g
    /// Lower bound of F. When absent the running minimum of observed F, minus 1, is used.
    std::optional<double> f_lower;

    double c_theta(const GapParams &params) const { return lf + params.r * lg1 + 1.0 / params.gamma1 + lg; }
};

struct SolverConfig {
    double alpha = 1e-3;       ///< primal step
    double eta = 1e-2;         ///< theta step
    double penalty_c = 1.0;
    double penalty_rho = 0.3;  ///< in [0, 0.5)
    GapParams gap;
    long max_iters = 200000;
    long diag_every = 100;     ///< 0 disables exact diagnostics
    std::optional<double> stop_residual;    ///< compared with the per-iteration residual proxy
    std::optional<double> stop_ref_rel_err; ///< compared with ||x - x*|| / ||x*||
    std::uint64_t seed = 0;
    std::optional<MeritEstimates> merit;

    void validate() const;
};

struct IterState {
    long k = 0;
    Vector x, y, z, theta, lambda;
};

/// Initial point; missing pieces default to the problem's protocol start (or
/// zero), z = 0 and theta = y.
struct StartPoint {
    Vector x, y;
    std::optional<Vector> z;
    std::optional<Vector> theta;
};

enum class RunStatus { MaxIters, ResidualMet, ReferenceMet, OracleFailure };

std::string to_string(RunStatus status);

/// One telemetry row. Row k describes the iterate after k updates; its residuals
/// use the penalty c_{k-1} that produced it (c_0 for the initial row).
struct TraceRow {
    long k = 0;
    double time_s = 0.0;
    double c_k = 0.0;
    double F = 0.0;
    double gap_proxy = 0.0;
    double res_proxy = 0.0;
    std::optional<double> gap_exact;
    std::optional<double> res_exact;
    std::optional<double> merit_V;
    std::optional<double> ref_rel_err;
    bool diag_reliable = true; ///< inner theta* solve converged on diagnostic rows
};

/// ||theta^k - theta*(w^k)||^2 and ||theta^{k+1} - theta*(w^k)||^2 at a diagnostic iteration.
struct ContractionSample {
    long k = 0;
    double before = 0.0;
    double after = 0.0;
};

struct RunTrace {
    std::vector<TraceRow> rows;
    std::vector<ContractionSample> contraction;
    RunStatus status = RunStatus::MaxIters;
    std::string message;
    IterState final_state;
    double wall_time_s = 0.0;
};

struct Directions {
    Vector dx, dy, dz;
};

struct PrimalUpdate {
    Vector x, y, z;
};

struct MeritValue {
    double value = 0.0;
    bool reliable = true;
    Vector theta_star;
};

double penalty_at(const SolverConfig &config, long k);

/// The box [0, r]^p holding the multiplier block.
ProjectableSet multiplier_box(const BilevelProblem &problem, const GapParams &params);

Vector step_theta(const BilevelProblem &problem, const GapParams &params, const SolverConfig &config,
                  const IterState &state);

Vector step_lambda(const BilevelProblem &problem, const GapParams &params, const IterState &state);

Directions directions(const BilevelProblem &problem, const GapParams &params, const SolverConfig &config,
                      const IterState &state, const Vector &theta_next, const Vector &lambda_next,
                      double c_k);

PrimalUpdate step_primal(const BilevelProblem &problem, const SolverConfig &config, const IterState &state,
                         const Vector &dx, const Vector &dy, const Vector &dz);

/// grad F + c * grad G_gamma at the state's (x, y, z), with (theta, lambda)
/// standing in for (theta*, lambda*).
Directions psi_gradient(const BilevelProblem &problem, const GapParams &params, const Vector &x,
                        const Vector &y, const Vector &z, const Vector &theta, const Vector &lambda,
                        double c);

/// Squared distance from 0 to d + N_set(w) for one block; see residual().
double normal_cone_distance_sq(const ProjectableSet &set, const Vector &w, const Vector &d);

/// dist(0, grad_psi + N_{X x Y x Z}(w)). Box and full-space blocks use the exact
/// normal cone; custom blocks fall back to ||w - Proj(w - grad_psi)||.
double residual(const BilevelProblem &problem, const GapParams &params, const IterState &state,
                const Directions &grad_psi);

/// V_k = (F - F_lower) / c_k + G_gamma + C_theta ||theta^k - theta*(w^k)||^2.
MeritValue merit_value(const BilevelProblem &problem, const GapParams &params, const SolverConfig &config,
                       const IterState &state, double c_k, const MeritEstimates &estimates,
                       double f_lower);

RunTrace run(const BilevelProblem &problem, const SolverConfig &config,
             const std::optional<StartPoint> &start = std::nullopt);

/// ||x - x*|| / ||x*|| (absolute when x* = 0).
double reference_error(const Vector &x, const Vector &x_ref);

} // namespace bigap
