#include "shsic/solver.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "shsic/prox.hpp"

namespace shsic {

namespace {

// S * P * S, routed through the nonzero columns of P when P is sparse enough
// for the gather to pay off. P symmetric, so nonzero rows == nonzero columns.
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& s, const Eigen::MatrixXd& p) {
    const Eigen::Index dim = p.rows();
    std::vector<Eigen::Index> nz;
    nz.reserve(static_cast<std::size_t>(dim));
    for (Eigen::Index j = 0; j < dim; ++j) {
        if ((p.col(j).array() != 0.0).any()) {
            nz.push_back(j);
        }
    }
    const Eigen::Index k = static_cast<Eigen::Index>(nz.size());
    if (k == 0) {
        return Eigen::MatrixXd::Zero(dim, dim);
    }
    if (2 * k > dim) {
        Eigen::MatrixXd out(dim, dim);
        out.noalias() = s * p * s;
        return 0.5 * (out + out.transpose()).eval();
    }
    Eigen::MatrixXd sc(dim, k);
    Eigen::MatrixXd pc(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        sc.col(a) = s.col(nz[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < k; ++b) {
            pc(a, b) = p(nz[static_cast<std::size_t>(a)], nz[static_cast<std::size_t>(b)]);
        }
    }
    Eigen::MatrixXd out(dim, dim);
    out.noalias() = sc * pc * sc.transpose();
    return 0.5 * (out + out.transpose()).eval();
}

Eigen::MatrixXd initial_pi(const SolverConfig& config, const CovarianceContext& ctx) {
    const Eigen::Index p = ctx.sigma_hat.rows();
    switch (config.init) {
        case SolverConfig::Init::Zero:
            return Eigen::MatrixXd::Zero(p, p);
        case SolverConfig::Init::Warm: {
            if (config.warm_pi.rows() != p || config.warm_pi.cols() != p) {
                throw std::invalid_argument("warm start dimension mismatch");
            }
            return config.warm_pi;
        }
        case SolverConfig::Init::LeadingEigvec:
        default: {
            const Eigen::VectorXd& v = ctx.top_eigvec;
            const double denom = v.dot(ctx.sigma_hat * v);
            if (!(denom > 0.0)) {
                return Eigen::MatrixXd::Zero(p, p);
            }
            return (v * v.transpose()) / denom;
        }
    }
}

} // namespace

SolverParams resolve_params(const SolverConfig& config, const DataSet& data,
                            const Eigen::Ref<const Eigen::MatrixXd>& ltilde,
                            const CovarianceContext& ctx) {
    if (config.lambda < 0.0) {
        throw std::invalid_argument("lambda must be nonnegative");
    }
    if (config.rho < 0.0) {
        throw std::invalid_argument("rho must be positive (or zero to derive it)");
    }
    SolverParams params;
    params.lambda = config.lambda;
    params.inner_tol = config.inner_tol;
    params.inner_max = config.inner_max;
    if (config.lipschitz > 0.0) {
        params.lipschitz = config.lipschitz;
    } else if (config.lipschitz < 0.0) {
        // Secant estimate; fit() pairs this with objective-descent
        // backtracking toward the analytic bound.
        params.lipschitz = estimate_gradient_lipschitz(data, ltilde, ctx);
    } else {
        params.lipschitz = lipschitz_bound(data, ltilde);
    }
    if (!(params.lipschitz > 0.0)) {
        throw numerical_error("degenerate data: Lipschitz constant is zero");
    }
    if (!(ctx.lambda_max_sq > 0.0)) {
        throw numerical_error("covariance has no positive eigenvalue");
    }
    // Derived rho puts tau = 4 rho lambda_max^2 at the Lipschitz constant, so
    // neither half of the Pi update dominates the other.
    params.rho = config.rho > 0.0
                     ? config.rho
                     : params.lipschitz / (4.0 * ctx.lambda_max_sq);
    const double tau_floor = 4.0 * params.rho * ctx.lambda_max_sq;
    params.tau = config.tau > 0.0 ? config.tau : tau_floor;
    if (params.tau < tau_floor * (1.0 - 1e-12)) {
        throw std::invalid_argument("tau must be at least 4 rho lambda_max(Sigma)^2");
    }
    return params;
}

SolverState make_state(const Eigen::Ref<const Eigen::MatrixXd>& pi,
                       const Eigen::Ref<const Eigen::MatrixXd>& h,
                       const CovarianceContext& ctx) {
    SolverState state;
    state.pi = pi;
    state.h = h;
    state.gamma = Eigen::MatrixXd::Zero(pi.rows(), pi.cols());
    state.b = sandwich(ctx.sigma_half, state.pi);
    return state;
}

Eigen::MatrixXd mm_subproblem_target(const Eigen::Ref<const Eigen::MatrixXd>& pi_r,
                                     const Eigen::Ref<const Eigen::MatrixXd>& grad_r,
                                     double lipschitz) {
    if (!(lipschitz > 0.0)) {
        throw std::invalid_argument("Lipschitz constant must be positive");
    }
    return pi_r - grad_r / lipschitz;
}

double ladmm_iterate(SolverState& state, const SolverParams& params,
                     const Eigen::Ref<const Eigen::MatrixXd>& anchor,
                     const CovarianceContext& ctx, double* dual_out) {
    const double sum = params.lipschitz + params.tau;
    const double w_anchor = params.lipschitz / sum;
    const double w_inner = params.tau / sum;
    const double shrink = params.lambda / sum;
    const double rho_over_tau = params.rho / params.tau;

    // Pi update: soft-threshold of the convex combination of the MM anchor and
    // the linearized augmented-Lagrangian point. Sigma Pi Sigma = S (S Pi S) S
    // lets the cached b absorb one sandwich product.
    Eigen::MatrixXd correction = sandwich(ctx.sigma_half, state.b - state.h + state.gamma);
    Eigen::MatrixXd target =
        w_anchor * anchor + w_inner * (state.pi - rho_over_tau * correction);
    state.pi = soft_threshold(target, shrink);
    state.b = sandwich(ctx.sigma_half, state.pi);

    // H update: projection onto {PSD, trace <= 1}.
    Eigen::MatrixXd h_prev = std::move(state.h);
    if (params.exact_projection) {
        state.h = project_trace_psd(state.b + state.gamma);
    } else {
        state.h = project_trace_psd_warm(state.b + state.gamma, state.proj_ws);
    }

    // Scaled dual update.
    state.gamma += state.b - state.h;

    state.inner_iter += 1;
    if (dual_out != nullptr) {
        *dual_out = params.rho * (state.h - h_prev).norm();
    }
    return (state.b - state.h).norm();
}

Eigen::VectorXd extract_direction(const Eigen::Ref<const Eigen::MatrixXd>& pi_hat) {
    if (pi_hat.rows() != pi_hat.cols()) {
        throw data_error("projection matrix is not square");
    }
    if (pi_hat.cwiseAbs().maxCoeff() == 0.0) {
        throw numerical_error("zero projection matrix has no direction");
    }
    const SpectralDecomposition eig = sym_eig(0.5 * (pi_hat + pi_hat.transpose()));
    Eigen::VectorXd beta = eig.eigenvectors.col(0);
    beta /= beta.norm();
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        if (beta(i) != 0.0) {
            if (beta(i) < 0.0) {
                beta = -beta;
            }
            break;
        }
    }
    return beta;
}

FitResult fit(const DataSet& data, const CenteredResponseKernel& lk,
              const CovarianceContext& ctx, const SolverConfig& config) {
    const Eigen::MatrixXd& ltilde = lk.ltilde;
    SolverParams params = resolve_params(config, data, ltilde, ctx);
    const double analytic_l = lipschitz_bound(data, ltilde);
    const bool backtrack = config.backtrack_lipschitz || config.lipschitz < 0.0;

    Eigen::MatrixXd pi = initial_pi(config, ctx);
    Eigen::MatrixXd h0;
    if (config.init == SolverConfig::Init::Warm && config.warm_h.size() > 0) {
        h0 = config.warm_h;
    } else {
        h0 = sandwich(ctx.sigma_half, pi);
    }
    SolverState state = make_state(pi, h0, ctx);

    FitDiagnostics diag;
    double f_prev = penalized_objective(state.pi, data, ltilde, params.lambda);
    diag.objective_trace.push_back(f_prev);

    bool outer_converged = false;
    bool inner_converged = false;
    int outer = 0;
    while (outer < config.outer_max) {
        const Eigen::MatrixXd pi_r = state.pi;
        const SolverState snapshot = state;

        Eigen::MatrixXd grad_r = grad(pi_r, data, ltilde);
        Eigen::MatrixXd anchor = mm_subproblem_target(pi_r, grad_r, params.lipschitz);

        // Inner L-ADMM; Gamma restarts at zero each outer pass unless carried.
        if (!config.carry_gamma) {
            state.gamma.setZero();
        }
        double inner_tol = params.inner_tol;
        int budget = params.inner_max;
        bool accepted = false;
        int tighten = 0;
        double f_new = f_prev;
        const double rho_floor = params.rho * 1e-6;
        const double rho_cap = params.rho * 1e9;
        while (true) {
            inner_converged = false;
            for (int j = 0; j < budget; ++j) {
                double dual = 0.0;
                double primal = ladmm_iterate(state, params, anchor, ctx, &dual);
                const double scale = std::max(1.0, state.h.norm());
                if (primal <= inner_tol * scale && dual <= inner_tol) {
                    // The subspace projection is certified by one exact sweep
                    // before the stop is believed.
                    if (!params.exact_projection && state.pi.rows() >= 64) {
                        SolverParams exact = params;
                        exact.exact_projection = true;
                        primal = ladmm_iterate(state, exact, anchor, ctx, &dual);
                        if (!(primal <= inner_tol * std::max(1.0, state.h.norm()) &&
                              dual <= inner_tol)) {
                            continue;
                        }
                    }
                    inner_converged = true;
                    break;
                }
                // Residual balancing keeps the two rates comparable; the
                // scaled dual variable is rescaled so the underlying
                // multiplier is unchanged.
                if (config.adapt_rho && (j + 1) % 8 == 0) {
                    const double pr = primal / scale;
                    if (pr > 10.0 * dual && params.rho < rho_cap) {
                        params.rho *= 2.0;
                        params.tau *= 2.0;
                        state.gamma *= 0.5;
                    } else if (dual > 10.0 * pr && params.rho > rho_floor) {
                        params.rho *= 0.5;
                        params.tau *= 0.5;
                        state.gamma *= 2.0;
                    }
                }
            }
            f_new = penalized_objective(state.pi, data, ltilde, params.lambda);
            if (f_new <= f_prev) {
                accepted = true;
                break;
            }
            if (tighten < 1) {
                // Inexact subproblem solve; continue the same inner loop
                // with a tighter tolerance before giving up on this step.
                ++tighten;
                inner_tol *= 0.1;
                budget = 2 * params.inner_max;
                continue;
            }
            if (backtrack && params.lipschitz < analytic_l) {
                params.lipschitz = std::min(2.0 * params.lipschitz, analytic_l);
                state = snapshot;
                anchor = mm_subproblem_target(pi_r, grad_r, params.lipschitz);
                tighten = 0;
                inner_tol = params.inner_tol;
                budget = params.inner_max;
                continue;
            }
            break;
        }

        if (!accepted) {
            state = snapshot;
            diag.stalled = true;
            break;
        }

        ++outer;
        diag.objective_trace.push_back(f_new);
        f_prev = f_new;

        const double rel_change =
            (state.pi - pi_r).norm() / std::max(1.0, pi_r.norm());
        if (rel_change <= config.outer_tol) {
            outer_converged = true;
            break;
        }
    }

    FitResult result;
    result.pi_hat = 0.5 * (state.pi + state.pi.transpose());
    diag.outer_iterations = outer;
    diag.inner_iterations = state.inner_iter;
    diag.final_objective = f_prev;
    diag.outer_converged = outer_converged;
    diag.inner_converged = inner_converged;
    diag.lipschitz = params.lipschitz;
    diag.tau = params.tau;
    diag.all_shrunk = result.pi_hat.cwiseAbs().maxCoeff() == 0.0;
    if (diag.all_shrunk) {
        result.beta_hat = Eigen::VectorXd::Zero(data.p());
    } else {
        result.beta_hat = extract_direction(result.pi_hat);
        const SpectralDecomposition eig = sym_eig(result.pi_hat);
        diag.eigen_gap =
            eig.eigenvalues.size() > 1 ? eig.eigenvalues(0) - eig.eigenvalues(1) : eig.eigenvalues(0);
        for (Eigen::Index i = 0; i < result.beta_hat.size(); ++i) {
            if (std::abs(result.beta_hat(i)) >= kSupportTol) {
                result.support.push_back(static_cast<int>(i));
            }
        }
    }
    result.diagnostics = std::move(diag);
    return result;
}

} // namespace shsic
