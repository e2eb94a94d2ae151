#pragma once

#include <Eigen/Dense>

#include "shsic/data.hpp"
#include "shsic/errors.hpp"

namespace shsic {

// Centered response kernel L~ = H L H with H = I - (1/n) 1 1^T, precomputed
// once per dataset. L~ is symmetrized and has zero row sums by construction.
struct CenteredResponseKernel {
    Eigen::MatrixXd ltilde;
    Eigen::VectorXd sigma_y; // per-coordinate bandwidths used to build L
};

// Gaussian kernel matrix over scalar values: K(k,l) = exp(-(v_k - v_l)^2 / (2 sigma^2)).
// Parallel over row blocks; entries are a pure elementwise map, so the result
// is identical for any thread count.
Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::Ref<const Eigen::VectorXd>& values,
                                       double sigma);

// H L H, symmetrized.
Eigen::MatrixXd center_kernel(const Eigen::Ref<const Eigen::MatrixXd>& l);

// Response kernel with bandwidths estimated as the per-column sample standard
// deviation (divisor n-1). Multivariate responses use the product of
// per-coordinate Gaussian kernels. Throws data_error for a zero-variance
// response column.
CenteredResponseKernel response_kernel(const Eigen::Ref<const Eigen::MatrixXd>& y);

// Same with explicit bandwidths (one per response column).
CenteredResponseKernel response_kernel(const Eigen::Ref<const Eigen::MatrixXd>& y,
                                       const Eigen::Ref<const Eigen::VectorXd>& bandwidths);

// V-statistic HSIC: (1/n^2) sum_ij K_ij L~_ij = (1/n^2) tr(K H L H).
double hsic_v(const Eigen::Ref<const Eigen::MatrixXd>& k,
              const Eigen::Ref<const Eigen::MatrixXd>& ltilde);

inline double hsic_v(const Eigen::Ref<const Eigen::MatrixXd>& k,
                     const CenteredResponseKernel& l) {
    return hsic_v(k, l.ltilde);
}

// Kernel matrix of the projected predictors, K_ij(beta) with bandwidth^2 =
// beta^T Sigma^ beta. This is the K of the HSIC objective for a direction beta.
Eigen::MatrixXd direction_kernel_matrix(const DataSet& data,
                                        const Eigen::Ref<const Eigen::VectorXd>& beta);

namespace serial {
// Reference implementation: plain double loop, no threading. Kept for tests
// and for the serial-vs-parallel benchmark.
Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::Ref<const Eigen::VectorXd>& values,
                                       double sigma);
} // namespace serial

} // namespace shsic
