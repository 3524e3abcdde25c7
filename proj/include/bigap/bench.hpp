#pragma once

// Benchmark instances: the coupled-equality synthetic problem with a known
// optimum, the sparse group LASSO hyperparameter problem, and a small
// strongly convex-concave minimax toy.

#include "bigap/minimax.hpp"
#include "bigap/problem.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace bigap::bench {

/// Standard normal variates by the Box-Muller transform on top of
/// std::mt19937_64 (whose output sequence is fixed by the standard). Uniforms
/// take the top 53 bits of each draw, so streams match across platforms up to
/// libm rounding in log/cos/sin.
class NormalSampler {
  public:
    explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

    double uniform();                        ///< in [0, 1)
    double normal();
    std::uint64_t below(std::uint64_t bound); ///< uniform integer in [0, bound)

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct SyntheticSpec {
    int n = 1000;
    int q = 1; ///< exponent of h(t) = t^q, 1 or 3

    void validate() const;
};

/// x in R^n, y = (y1, y2) in R^{2n}, X and Y full space.
///   F = (y1 - 2)^T (x - 1) + ||y2 + 3||^2
///   f = ||y1||^2 / 2 - x^T y1 + 1^T y2
///   sum_i x_i^q + 1^T y1 + 1^T y2 = 0, split into the two rows (s, -s) <= 0.
/// Reference (1, 2, -3) and protocol start (0, 1, 1).
BilevelProblem make_synthetic(const SyntheticSpec &spec);

struct SglSpec {
    int p = 150;
    int groups = 30; ///< M; must divide p
    int n_train = 100;
    int n_val = 100;
    int n_test = 300;
    double snr = 3.0;
    std::uint64_t seed = 0;
    double warm_start_reg = 0.1; ///< weights of the penalized problem solved for the start point

    void validate() const;
};

struct DataSplit {
    Matrix a_train, a_val, a_test;
    Vector b_train, b_val, b_test;
    Vector beta_true;
    double sigma = 0.0;
    int group_size = 0;
};

struct SglInstance {
    BilevelProblem problem;
    DataSplit data;
};

/// Upper variable u in R_+^{M+1}, lower variable beta in R^p.
///   F = ||A_val beta - b_val||^2 / (2 n_val),  f = ||A_tr beta - b_tr||^2 / (2 n_tr),
///   g_m = ||beta^(m)||^2 - u_m (m = 1..M),  g_{M+1} = ||beta||_1 - u_{M+1}.
/// default_start is the warm start: beta from the group-lasso-penalized training
/// fit with all weights warm_start_reg, u set to the constraint values it attains.
SglInstance make_sgl(const SglSpec &spec);

/// Mean squared error of beta on a split.
double mean_squared_error(const Matrix &a, const Vector &b, const Vector &beta);

/// argmin ||A beta - b||^2 / 2 + lambda_group * sum_m ||beta^(m)|| + lambda_l1 ||beta||_1 (FISTA).
Vector solve_sparse_group_lasso(const Matrix &a, const Vector &b, int group_size, double lambda_group,
                                double lambda_l1, double tol = 1e-10, int max_iters = 100000);

/// CSV with columns f0..f{p-1},response,split (split in {train,val,test}).
void write_sgl_csv(std::ostream &out, const DataSplit &data);

/// F = ||x - y||^2 / 2 + ||z||^2 / 2,  f = y^T z + ||y - x||^2 / 2 - ||z - x||^2 / 2.
/// The lower-level saddle point is (y, z) = (0, x), so the bilevel optimum is the
/// origin. X, Y full space; Z = [-10, 10]^n.
MinimaxBilevelProblem make_toy_minimax(int n);

} // namespace bigap::bench
