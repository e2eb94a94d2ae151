#include "shsic/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace shsic {

SpectralDecomposition sym_eig(const Eigen::Ref<const Eigen::MatrixXd>& w) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
    if (es.info() != Eigen::Success) {
        throw numerical_error("eigendecomposition failed");
    }
    const Eigen::Index p = w.rows();
    SpectralDecomposition out;
    out.eigenvalues = es.eigenvalues().reverse();
    out.eigenvectors.resize(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        out.eigenvectors.col(i) = es.eigenvectors().col(p - 1 - i);
    }
    return out;
}

Eigen::MatrixXd soft_threshold(const Eigen::Ref<const Eigen::MatrixXd>& a, double b) {
    if (b < 0.0) {
        throw data_error("soft-threshold level must be nonnegative");
    }
    return a.array().sign() * (a.array().abs() - b).max(0.0);
}

Eigen::MatrixXd project_trace_psd(const Eigen::Ref<const Eigen::MatrixXd>& w,
                                  double* theta_out) {
    const Eigen::Index p = w.rows();
    if (w.cols() != p) {
        throw data_error("projection input is not square");
    }
    const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw data_error("projection input is not symmetric");
    }
    const SpectralDecomposition eig = sym_eig(0.5 * (w + w.transpose()));
    const Eigen::VectorXd& ev = eig.eigenvalues; // descending

    // theta = 0 when the clipped spectrum already fits the trace budget;
    // otherwise water-fill: with the top k eigenvalues active,
    // theta_k = (sum_{i<=k} ev_i - 1) / k, valid when ev_k > theta_k >= ev_{k+1}.
    double theta = 0.0;
    if (ev.cwiseMax(0.0).sum() > 1.0) {
        double cum = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
            cum += ev(k);
            const double cand = (cum - 1.0) / static_cast<double>(k + 1);
            const double next = (k + 1 < p) ? ev(k + 1) : -std::numeric_limits<double>::infinity();
            if (cand >= next) {
                theta = cand;
                break;
            }
        }
    }
    if (theta_out != nullptr) {
        *theta_out = theta;
    }

    const Eigen::VectorXd shifted = (ev.array() - theta).max(0.0);
    Eigen::MatrixXd h(p, p);
    h.noalias() = eig.eigenvectors * shifted.asDiagonal() * eig.eigenvectors.transpose();
    return 0.5 * (h + h.transpose()).eval();
}

namespace {

// Water-filling level for a descending spectrum.
double waterfill_theta(const Eigen::VectorXd& ev) {
    if (ev.cwiseMax(0.0).sum() <= 1.0) {
        return 0.0;
    }
    double cum = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        cum += ev(k);
        const double cand = (cum - 1.0) / static_cast<double>(k + 1);
        const double next =
            (k + 1 < ev.size()) ? ev(k + 1) : -std::numeric_limits<double>::infinity();
        if (cand >= next) {
            return cand;
        }
    }
    return 0.0;
}

} // namespace

Eigen::MatrixXd project_trace_psd_warm(const Eigen::Ref<const Eigen::MatrixXd>& w,
                                       ProjectionWorkspace& ws, double* theta_out) {
    const Eigen::Index p = w.rows();
    ++ws.calls;
    // Small problems, the priming call, and a periodic resync all take the
    // exact dense path; the basis is refreshed from it.
    const bool resync = ws.basis.size() == 0 || ws.calls % 128 == 0;
    if (p < 64 || resync) {
        double theta = 0.0;
        const SpectralDecomposition eig = sym_eig(0.5 * (w + w.transpose()));
        theta = waterfill_theta(eig.eigenvalues);
        if (theta_out != nullptr) {
            *theta_out = theta;
        }
        if (p >= 64) {
            Eigen::Index active = 0;
            while (active < p && eig.eigenvalues(active) > theta) {
                ++active;
            }
            // Cushion capped at 48 columns; wider active spectra simply keep
            // using the dense path until they concentrate.
            const Eigen::Index m = std::min<Eigen::Index>(
                std::min<Eigen::Index>(p, 48), std::max<Eigen::Index>(12, active + 6));
            ws.basis = eig.eigenvectors.leftCols(m);
        }
        const Eigen::VectorXd shifted = (eig.eigenvalues.array() - theta).max(0.0);
        Eigen::MatrixXd h(p, p);
        h.noalias() = eig.eigenvectors * shifted.asDiagonal() * eig.eigenvectors.transpose();
        return 0.5 * (h + h.transpose()).eval();
    }

    const Eigen::MatrixXd ws_sym = 0.5 * (w + w.transpose());
    // Gershgorin shift makes the matrix PSD so orthogonal iteration targets
    // the largest algebraic eigenvalues.
    const double shift = ws_sym.cwiseAbs().rowwise().sum().maxCoeff();

    const Eigen::Index m = ws.basis.cols();
    Eigen::MatrixXd v = ws.basis;
    for (int t = 0; t < 2; ++t) {
        Eigen::MatrixXd av = ws_sym * v + shift * v;
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(av);
        v.noalias() = qr.householderQ() * Eigen::MatrixXd::Identity(p, m);
    }
    Eigen::MatrixXd wv = ws_sym * v;
    Eigen::MatrixXd t_small = v.transpose() * wv;
    t_small = 0.5 * (t_small + t_small.transpose()).eval();
    const SpectralDecomposition ritz = sym_eig(t_small);
    const Eigen::MatrixXd u = v * ritz.eigenvectors;

    const double theta = waterfill_theta(ritz.eigenvalues);
    Eigen::Index active = 0;
    while (active < m && ritz.eigenvalues(active) > theta) {
        ++active;
    }
    // The subspace must strictly contain the active spectrum and the pairs
    // that are kept must have converged; anything else goes to the dense path.
    bool certified = active < m - 1;
    if (certified && active > 0) {
        const Eigen::MatrixXd wu = ws_sym * u.leftCols(active);
        for (Eigen::Index i = 0; i < active && certified; ++i) {
            const double resid = (wu.col(i) - ritz.eigenvalues(i) * u.col(i)).norm();
            certified = resid <= 1e-9 * std::max(1.0, std::abs(ritz.eigenvalues(i)));
        }
    }
    if (!certified) {
        ws.basis.resize(0, 0); // dense resync, which also regrows the cushion
        return project_trace_psd_warm(w, ws, theta_out);
    }

    // Keep a cushion around the active block for the next call.
    const Eigen::Index keep =
        std::min(m, std::max<Eigen::Index>(12, active + 6));
    ws.basis = u.leftCols(keep);
    if (theta_out != nullptr) {
        *theta_out = theta;
    }
    if (active == 0) {
        return Eigen::MatrixXd::Zero(p, p);
    }
    const Eigen::VectorXd kept = (ritz.eigenvalues.head(active).array() - theta).max(0.0);
    Eigen::MatrixXd h(p, p);
    h.noalias() = u.leftCols(active) * kept.asDiagonal() * u.leftCols(active).transpose();
    return 0.5 * (h + h.transpose()).eval();
}

} // namespace shsic
