#pragma once

#include <Eigen/Dense>

#include "shsic/data.hpp"
#include "shsic/kernels.hpp"

namespace shsic {

// Symmetric PSD candidate for the projection beta beta^T. Validates on
// construction: symmetry within 1e-10 and smallest eigenvalue above
// -1e-8 times the largest (the PSD cone membership tolerance).
class ProjectionMatrix {
public:
    explicit ProjectionMatrix(Eigen::MatrixXd pi);
    const Eigen::MatrixXd& matrix() const { return pi_; }
    Eigen::Index dim() const { return pi_.rows(); }

private:
    Eigen::MatrixXd pi_;
};

// Sample covariance of X, its symmetric PSD square root, and the squared top
// eigenvalue. No inverse is ever taken, so rank deficiency (p > n) is fine.
struct CovarianceContext {
    Eigen::MatrixXd sigma_hat;
    Eigen::MatrixXd sigma_half;
    double lambda_max_sq = 0.0;
    Eigen::VectorXd top_eigvec; // leading eigenvector of sigma_hat
};

CovarianceContext covariance_context(const DataSet& data);

// Q(i,j) = d_ij^T P d_ij with d_ij = X_i - X_j: the pairwise quadratic forms
// <P, Z_ij> evaluated without materializing the rank-one outer products.
// Parallel over rows of Q; each entry is computed independently.
Eigen::MatrixXd pair_quadform_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::MatrixXd>& p);

// Smooth part of the objective: f(P) = -(1/n^2) sum_ij exp(-<P, Z_ij>/2) L~_ij.
double loss(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
            const Eigen::Ref<const Eigen::MatrixXd>& ltilde);

// Gradient of f via the factored form (1/n^2) X^T (diag(C 1) - C) X with
// c_ij = exp(-<P, Z_ij>/2) L~_ij; output symmetrized.
Eigen::MatrixXd grad(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
                     const Eigen::Ref<const Eigen::MatrixXd>& ltilde);

// Closed-form Lipschitz constant of grad over the feasible set:
// sum_ij |L~_ij| ||X_i - X_j||^4 / (4 n^2).
double lipschitz_bound(const DataSet& data, const Eigen::Ref<const Eigen::MatrixXd>& ltilde);

// Secant estimate of the gradient Lipschitz constant: the largest
// ||grad(A) - grad(B)|| / ||A - B|| over `pairs` deterministic random pairs in
// the feasible set, inflated by `safety` and clipped to the analytic bound.
// Cheap steps for solvers that pair it with objective-descent backtracking.
double estimate_gradient_lipschitz(const DataSet& data,
                                   const Eigen::Ref<const Eigen::MatrixXd>& ltilde,
                                   const CovarianceContext& ctx, int pairs = 4,
                                   double safety = 4.0);

// Membership in D = {P PSD, tr(Sigma^1/2 P Sigma^1/2) <= 1} within tol.
bool in_feasible_set(const Eigen::Ref<const Eigen::MatrixXd>& pi,
                     const CovarianceContext& ctx, double tol);

// f(P) + lambda * ||P||_1 (elementwise l1 norm).
double penalized_objective(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
                           const Eigen::Ref<const Eigen::MatrixXd>& ltilde, double lambda);

namespace serial {
Eigen::MatrixXd pair_quadform_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::MatrixXd>& p);
double loss(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
            const Eigen::Ref<const Eigen::MatrixXd>& ltilde);
Eigen::MatrixXd grad(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
                     const Eigen::Ref<const Eigen::MatrixXd>& ltilde);
double lipschitz_bound(const DataSet& data, const Eigen::Ref<const Eigen::MatrixXd>& ltilde);
} // namespace serial

} // namespace shsic
