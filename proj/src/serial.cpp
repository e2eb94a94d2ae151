#include <cmath>

#include "shsic/kernels.hpp"
#include "shsic/objective.hpp"

// Straight-line single-threaded references for the parallel kernels. These are
// deliberately written as plain loops over the defining formulas; the tests
// hold the parallel versions to them and the benchmark measures the gap.

namespace shsic::serial {

Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::Ref<const Eigen::VectorXd>& values,
                                       double sigma) {
    if (!(sigma > 0.0)) {
        throw data_error("bandwidth must be positive");
    }
    const Eigen::Index n = values.size();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = values(i) - values(j);
            k(i, j) = std::exp(-d * d / (2.0 * sigma * sigma));
        }
    }
    return k;
}

Eigen::MatrixXd pair_quadform_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::MatrixXd>& p) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd q(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::VectorXd d = x.row(i) - x.row(j);
            q(i, j) = d.dot(p * d);
        }
    }
    return q;
}

double loss(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
            const Eigen::Ref<const Eigen::MatrixXd>& ltilde) {
    const Eigen::Index n = data.n();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::VectorXd d = data.x().row(i) - data.x().row(j);
            acc += std::exp(-0.5 * d.dot(pi * d)) * ltilde(i, j);
        }
    }
    return -acc / (static_cast<double>(n) * static_cast<double>(n));
}

Eigen::MatrixXd grad(const Eigen::Ref<const Eigen::MatrixXd>& pi, const DataSet& data,
                     const Eigen::Ref<const Eigen::MatrixXd>& ltilde) {
    const Eigen::Index n = data.n();
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::VectorXd d = data.x().row(i) - data.x().row(j);
            c(i, j) = std::exp(-0.5 * d.dot(pi * d)) * ltilde(i, j);
        }
    }
    const Eigen::MatrixXd m = Eigen::MatrixXd(c.rowwise().sum().asDiagonal()) - c;
    Eigen::MatrixXd g = data.x().transpose() * m * data.x() /
                        (static_cast<double>(n) * static_cast<double>(n));
    return 0.5 * (g + g.transpose()).eval();
}

double lipschitz_bound(const DataSet& data, const Eigen::Ref<const Eigen::MatrixXd>& ltilde) {
    const Eigen::Index n = data.n();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d2 = (data.x().row(i) - data.x().row(j)).squaredNorm();
            acc += std::abs(ltilde(i, j)) * d2 * d2;
        }
    }
    return acc / (4.0 * static_cast<double>(n) * static_cast<double>(n));
}

} // namespace shsic::serial
