#pragma once

#include <vector>

#include <Eigen/Dense>

#include "shsic/kernels.hpp"
#include "shsic/objective.hpp"
#include "shsic/prox.hpp"

namespace shsic {

// Tuning constants for the MM outer loop and the linearized-ADMM inner loop.
// Zeros mean "derive": lipschitz from the analytic bound, rho so that the
// linearization weight tau = 4 rho lambda_max(Sigma^)^2 lands at the Lipschitz
// constant (which balances the two halves of the Pi update), tau from rho.
struct SolverConfig {
    double lambda = 0.0;
    double rho = 0.0;
    double lipschitz = 0.0;
    double tau = 0.0;
    double outer_tol = 1e-5;
    int outer_max = 100;
    double inner_tol = 1e-6;
    int inner_max = 2000;

    // Residual balancing: double or halve rho (tau follows, the scaled dual
    // is rescaled) when primal and dual residuals drift apart. Fixed points
    // are unaffected.
    bool adapt_rho = true;

    enum class Init { LeadingEigvec, Zero, Warm };
    Init init = Init::LeadingEigvec;
    Eigen::MatrixXd warm_pi; // used when init == Warm
    Eigen::MatrixXd warm_h;  // optional; derived from warm_pi when empty

    // The algorithm as stated reinitializes the inner dual variable to zero
    // at every outer pass; this toggle carries it across passes instead.
    bool carry_gamma = false;

    // When a user-supplied lipschitz turns out too small (the accepted step
    // would increase the penalized objective), double it and retry instead of
    // failing. Has no effect on the analytic bound.
    bool backtrack_lipschitz = false;
};

// Fully resolved constants for one solve. tau >= 4 rho lambda_max^2 is
// enforced here, which is the linearized-ADMM convergence requirement.
struct SolverParams {
    double lambda = 0.0;
    double rho = 1.0;
    double lipschitz = 0.0;
    double tau = 0.0;
    double inner_tol = 1e-6;
    int inner_max = 2000;
    bool exact_projection = false; // force the dense projection path
};

SolverParams resolve_params(const SolverConfig& config, const DataSet& data,
                            const Eigen::Ref<const Eigen::MatrixXd>& ltilde,
                            const CovarianceContext& ctx);

// Inner-loop iterates. `b` caches Sigma^1/2 * pi * Sigma^1/2 and is kept in
// sync by ladmm_iterate; `proj_ws` tracks the projection subspace.
struct SolverState {
    Eigen::MatrixXd pi;
    Eigen::MatrixXd h;
    Eigen::MatrixXd gamma;
    Eigen::MatrixXd b;
    ProjectionWorkspace proj_ws;
    int outer_iter = 0;
    long inner_iter = 0;
    std::vector<double> objective_trace;
};

SolverState make_state(const Eigen::Ref<const Eigen::MatrixXd>& pi,
                       const Eigen::Ref<const Eigen::MatrixXd>& h,
                       const CovarianceContext& ctx);

// Anchor of the quadratic majorizer at Pi_r: Pi_r - grad_r / L.
Eigen::MatrixXd mm_subproblem_target(const Eigen::Ref<const Eigen::MatrixXd>& pi_r,
                                     const Eigen::Ref<const Eigen::MatrixXd>& grad_r,
                                     double lipschitz);

// One full (Pi, H, Gamma) sweep of the linearized ADMM on the MM subproblem
// anchored at `anchor`. Returns the primal residual ||S Pi S - H||_F of the
// new iterate; the dual residual rho ||H - H_prev||_F goes to *dual_out.
double ladmm_iterate(SolverState& state, const SolverParams& params,
                     const Eigen::Ref<const Eigen::MatrixXd>& anchor,
                     const CovarianceContext& ctx, double* dual_out = nullptr);

struct FitDiagnostics {
    int outer_iterations = 0;
    long inner_iterations = 0;
    double final_objective = 0.0;
    bool outer_converged = false;
    bool inner_converged = false; // inner loop hit tolerance on the last pass
    bool all_shrunk = false;      // penalty zeroed the whole matrix
    bool stalled = false;         // subproblem step no longer decreased the objective
    double eigen_gap = 0.0;       // lambda_1 - lambda_2 of Pi_hat
    double lipschitz = 0.0;
    double tau = 0.0;
    std::vector<double> objective_trace;
};

struct FitResult {
    Eigen::MatrixXd pi_hat;
    Eigen::VectorXd beta_hat;      // unit norm, first nonzero coordinate positive; zero if all shrunk
    std::vector<int> support;      // 0-based indices with |beta_hat_i| >= 1e-4
    FitDiagnostics diagnostics;
};

// Magnitude below which a coordinate of the normalized direction is treated
// as zero when reporting supports.
inline constexpr double kSupportTol = 1e-4;

// MM outer loop around the linearized-ADMM inner solver. The penalized
// objective of accepted iterates is non-increasing; a subproblem step that
// fails to decrease it is re-solved more tightly once and then rejected
// (diagnostics.stalled), so the trace stays monotone.
FitResult fit(const DataSet& data, const CenteredResponseKernel& lk,
              const CovarianceContext& ctx, const SolverConfig& config);

// Unit-norm leading eigenvector, sign-fixed so the first nonzero coordinate
// is positive. Throws numerical_error for a zero matrix.
Eigen::VectorXd extract_direction(const Eigen::Ref<const Eigen::MatrixXd>& pi_hat);

} // namespace shsic
