#include "shsic/objective.hpp"

#include <cmath>

#include "shsic/prox.hpp"
#include "shsic/rng.hpp"

namespace shsic {

namespace {

void require_square_p(const Eigen::Ref<const Eigen::MatrixXd>& pi, Eigen::Index p) {
    if (pi.rows() != p || pi.cols() != p) {
        throw data_error("projection matrix dimension does not match predictors");
    }
}

void require_kernel_n(const Eigen::Ref<const Eigen::MatrixXd>& ltilde, Eigen::Index n) {
    if (ltilde.rows() != n || ltilde.cols() != n) {
        throw data_error("response kernel dimension does not match sample size");
    }
}

} // namespace

ProjectionMatrix::ProjectionMatrix(Eigen::MatrixXd pi) : pi_(std::move(pi)) {
    if (pi_.rows() != pi_.cols()) {
        throw data_error("projection matrix is not square");
    }
    const double scale = std::max(1.0, pi_.cwiseAbs().maxCoeff());
    if ((pi_ - pi_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw data_error("projection matrix is not symmetric");
    }
    pi_ = 0.5 * (pi_ + pi_.transpose()).eval();
    const SpectralDecomposition eig = sym_eig(pi_);
    const double top = std::max(0.0, eig.eigenvalues(0));
    if (eig.eigenvalues(eig.eigenvalues.size() - 1) < -1e-8 * std::max(1.0, top)) {
        throw data_error("projection matrix is not positive semidefinite");
    }
}

CovarianceContext covariance_context(const DataSet& data) {
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    Eigen::MatrixXd centered = data.x().rowwise() - data.x().colwise().mean();
    Eigen::MatrixXd sigma(p, p);
    sigma.noalias() = centered.transpose() * centered / static_cast<double>(n - 1);
    sigma = 0.5 * (sigma + sigma.transpose()).eval();

    const SpectralDecomposition eig = sym_eig(sigma);
    const Eigen::VectorXd clipped = eig.eigenvalues.cwiseMax(0.0);
    Eigen::MatrixXd half(p, p);
    half.noalias() = eig.eigenvectors * clipped.cwiseSqrt().asDiagonal() *
                     eig.eigenvectors.transpose();
    half = 0.5 * (half + half.transpose()).eval();

    CovarianceContext ctx;
    ctx.sigma_hat = std::move(sigma);
    ctx.sigma_half = std::move(half);
    ctx.lambda_max_sq = clipped(0) * clipped(0);
    ctx.top_eigvec = eig.eigenvectors.col(0);
    return ctx;
}

Eigen::MatrixXd pair_quadform_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::MatrixXd>& p) {
    const Eigen::Index n = x.rows();
    require_square_p(p, x.cols());
    // d_ij^T P d_ij = m_ii + m_jj - 2 m_ij with M = X P X^T; only the diagonal
    // of M is materialized, the cross terms are formed row by row.
    Eigen::MatrixXd a(n, x.cols());
    a.noalias() = x * p;
    Eigen::VectorXd diag(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        diag(i) = a.row(i).dot(x.row(i));
    }
    Eigen::MatrixXd q(n, n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        q(i, i) = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = diag(i) + diag(j) - 2.0 * a.row(i).dot(x.row(j));
            q(i, j) = v;
            q(j, i) = v;
        }
    }
    return q;
}

double loss(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
            const Eigen::Ref<const Eigen::MatrixXd>& ltilde) {
    require_square_p(pi, data.p());
    require_kernel_n(ltilde, data.n());
    const Eigen::Index n = data.n();
    const Eigen::MatrixXd q = pair_quadform_matrix(data.x(), pi);
    // Row partials summed in index order keep the result independent of the
    // thread count.
    Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            s += std::exp(-0.5 * q(i, j)) * ltilde(i, j);
        }
        row_sum(i) = s;
    }
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    return -row_sum.sum() / nn;
}

Eigen::MatrixXd grad(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
                     const Eigen::Ref<const Eigen::MatrixXd>& ltilde) {
    require_square_p(pi, data.p());
    require_kernel_n(ltilde, data.n());
    const Eigen::Index n = data.n();
    Eigen::MatrixXd c = pair_quadform_matrix(data.x(), pi);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            c(i, j) = std::exp(-0.5 * c(i, j)) * ltilde(i, j);
        }
    }
    const Eigen::VectorXd row_sums = c.rowwise().sum();
    c = (Eigen::MatrixXd(row_sums.asDiagonal()) - c).eval();
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    Eigen::MatrixXd g(data.p(), data.p());
    g.noalias() = data.x().transpose() * c * data.x() / nn;
    return 0.5 * (g + g.transpose()).eval();
}

double lipschitz_bound(const DataSet& data, const Eigen::Ref<const Eigen::MatrixXd>& ltilde) {
    require_kernel_n(ltilde, data.n());
    const Eigen::Index n = data.n();
    const Eigen::MatrixXd& x = data.x();
    const Eigen::VectorXd sq = x.rowwise().squaredNorm();
    Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            // ||Z_ij||_F = ||X_i - X_j||^2
            const double d2 = sq(i) + sq(j) - 2.0 * x.row(i).dot(x.row(j));
            s += std::abs(ltilde(i, j)) * d2 * d2;
        }
        row_sum(i) = s;
    }
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    return row_sum.sum() / (4.0 * nn);
}

double estimate_gradient_lipschitz(const DataSet& data,
                                   const Eigen::Ref<const Eigen::MatrixXd>& ltilde,
                                   const CovarianceContext& ctx, int pairs, double safety) {
    const double analytic = lipschitz_bound(data, ltilde);
    const Eigen::Index p = data.p();
    Rng rng(0x5EC4E7);
    auto feasible_point = [&]() {
        Eigen::MatrixXd a(p, p);
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) {
                a(i, j) = rng.normal();
            }
        }
        Eigen::MatrixXd pi = a * a.transpose();
        const double weighted = (ctx.sigma_hat.array() * pi.array()).sum();
        if (weighted > 0.0) {
            pi *= (0.1 + 0.9 * rng.uniform()) / weighted;
        }
        return pi;
    };
    double worst = 0.0;
    for (int t = 0; t < pairs; ++t) {
        const Eigen::MatrixXd a = feasible_point();
        const Eigen::MatrixXd b = feasible_point();
        const double dist = (a - b).norm();
        if (dist <= 0.0) {
            continue;
        }
        const double slope = (grad(a, data, ltilde) - grad(b, data, ltilde)).norm() / dist;
        worst = std::max(worst, slope);
    }
    if (!(worst > 0.0)) {
        return analytic;
    }
    return std::min(analytic, safety * worst);
}

bool in_feasible_set(const Eigen::Ref<const Eigen::MatrixXd>& pi,
                     const CovarianceContext& ctx, double tol) {
    if (pi.rows() != pi.cols() || pi.rows() != ctx.sigma_hat.rows()) {
        return false;
    }
    // tr(S Pi S) = <Sigma^, Pi>
    const double trace = (ctx.sigma_hat.array() * pi.array()).sum();
    if (trace > 1.0 + tol) {
        return false;
    }
    const SpectralDecomposition eig = sym_eig(0.5 * (pi + pi.transpose()));
    return eig.eigenvalues(eig.eigenvalues.size() - 1) >= -tol;
}

double penalized_objective(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
                           const Eigen::Ref<const Eigen::MatrixXd>& ltilde, double lambda) {
    return loss(pi, data, ltilde) + lambda * pi.cwiseAbs().sum();
}

} // namespace shsic
