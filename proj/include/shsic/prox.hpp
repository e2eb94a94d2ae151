#pragma once

#include <Eigen/Dense>

#include "shsic/errors.hpp"

namespace shsic {

// Spectral decomposition with eigenvalues in descending order and
// orthonormal eigenvectors in matching columns.
struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

SpectralDecomposition sym_eig(const Eigen::Ref<const Eigen::MatrixXd>& w);

// Elementwise soft-thresholding: sign(a) max(|a| - b, 0). b >= 0.
Eigen::MatrixXd soft_threshold(const Eigen::Ref<const Eigen::MatrixXd>& a, double b);

// Euclidean projection onto F = {H PSD, tr(H) <= 1}. Eigenvalues are shifted
// by theta* = max(0, root of sum_i (w_i - theta)_+ = 1) and clipped at zero
// (water-filling over the sorted spectrum). `theta_out`, when given, receives
// the shift that was applied.
Eigen::MatrixXd project_trace_psd(const Eigen::Ref<const Eigen::MatrixXd>& w,
                                  double* theta_out = nullptr);

// Tracked subspace for repeated projections of slowly-changing inputs (the
// inner-loop H update). Empty until the first call primes it.
struct ProjectionWorkspace {
    Eigen::MatrixXd basis; // p x m orthonormal columns
    long calls = 0;
};

// Same projection, but approximated through warm-started subspace iteration
// when the input is large. Only the spectrum above the water-filling level is
// needed, so a small tracked invariant subspace suffices; the output is always
// exactly feasible (PSD, trace <= 1). Falls back to the dense path for small
// inputs, on the priming call, and periodically to resynchronize the basis.
Eigen::MatrixXd project_trace_psd_warm(const Eigen::Ref<const Eigen::MatrixXd>& w,
                                       ProjectionWorkspace& ws, double* theta_out = nullptr);

} // namespace shsic
