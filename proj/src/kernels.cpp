#include "shsic/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace shsic {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw data_error(std::string(what) + " contains non-finite entries");
    }
}

} // namespace

double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const Eigen::Index n = v.size();
    if (n < 2) {
        return 0.0;
    }
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1));
}

DataSet::DataSet(Eigen::MatrixXd x, Eigen::MatrixXd y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.rows() < 2) {
        throw data_error("need at least 2 observations");
    }
    if (y_.rows() != x_.rows()) {
        throw data_error("X and Y row counts differ");
    }
    if (y_.cols() < 1) {
        throw data_error("Y has no columns");
    }
    require_finite(x_, "X");
    require_finite(y_, "Y");
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
        if (sample_sd(x_.col(j)) <= 0.0) {
            throw data_error("X column " + std::to_string(j + 1) + " has zero variance");
        }
    }
}

DataSet DataSet::subset(const std::vector<Eigen::Index>& idx) const {
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(idx.size()), x_.cols());
    Eigen::MatrixXd ys(static_cast<Eigen::Index>(idx.size()), y_.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        xs.row(static_cast<Eigen::Index>(r)) = x_.row(idx[r]);
        ys.row(static_cast<Eigen::Index>(r)) = y_.row(idx[r]);
    }
    return DataSet(std::move(xs), std::move(ys));
}

Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::Ref<const Eigen::VectorXd>& values,
                                       double sigma) {
    if (!(sigma > 0.0)) {
        throw data_error("bandwidth must be positive");
    }
    const Eigen::Index n = values.size();
    if (n < 1) {
        throw data_error("empty value vector");
    }
    Eigen::MatrixXd k(n, n);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        const double vi = values(i);
        for (Eigen::Index j = 0; j < i; ++j) {
            const double d = vi - values(j);
            const double e = std::exp(-d * d * inv2s2);
            k(i, j) = e;
            k(j, i) = e;
        }
    }
    return k;
}

Eigen::MatrixXd center_kernel(const Eigen::Ref<const Eigen::MatrixXd>& l) {
    const Eigen::Index n = l.rows();
    if (l.cols() != n) {
        throw data_error("kernel matrix is not square");
    }
    const Eigen::VectorXd row_means = l.rowwise().mean();
    const Eigen::RowVectorXd col_means = l.colwise().mean();
    const double grand = row_means.mean();
    Eigen::MatrixXd lt = l;
    lt.colwise() -= row_means;
    lt.rowwise() -= col_means;
    lt.array() += grand;
    lt = 0.5 * (lt + lt.transpose()).eval();
    return lt;
}

CenteredResponseKernel response_kernel(const Eigen::Ref<const Eigen::MatrixXd>& y) {
    Eigen::VectorXd bw(y.cols());
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        bw(c) = sample_sd(y.col(c));
        if (!(bw(c) > 0.0)) {
            throw data_error("response column " + std::to_string(c + 1) +
                             " has zero variance (degenerate response)");
        }
    }
    return response_kernel(y, bw);
}

CenteredResponseKernel response_kernel(const Eigen::Ref<const Eigen::MatrixXd>& y,
                                       const Eigen::Ref<const Eigen::VectorXd>& bandwidths) {
    if (bandwidths.size() != y.cols()) {
        throw data_error("one bandwidth per response column required");
    }
    Eigen::MatrixXd l = gaussian_kernel_matrix(y.col(0), bandwidths(0));
    for (Eigen::Index c = 1; c < y.cols(); ++c) {
        l.array() *= gaussian_kernel_matrix(y.col(c), bandwidths(c)).array();
    }
    return CenteredResponseKernel{center_kernel(l), bandwidths};
}

double hsic_v(const Eigen::Ref<const Eigen::MatrixXd>& k,
              const Eigen::Ref<const Eigen::MatrixXd>& ltilde) {
    if (k.rows() != k.cols() || k.rows() != ltilde.rows() || ltilde.rows() != ltilde.cols()) {
        throw data_error("kernel matrix dimensions disagree");
    }
    const Eigen::Index n = k.rows();
    // Accumulate the products in sorted order: relabeling the samples permutes
    // the same multiset of terms, so the statistic is bit-identical under any
    // simultaneous permutation of K and L~.
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            terms.push_back(k(i, j) * ltilde(i, j));
        }
    }
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (const double t : terms) {
        acc += t;
    }
    const double nd = static_cast<double>(n);
    return acc / (nd * nd);
}

Eigen::MatrixXd direction_kernel_matrix(const DataSet& data,
                                        const Eigen::Ref<const Eigen::VectorXd>& beta) {
    if (beta.size() != data.p()) {
        throw data_error("direction length does not match predictor count");
    }
    const Eigen::VectorXd z = data.x() * beta;
    const Eigen::VectorXd centered = z.array() - z.mean();
    const double nm1 = static_cast<double>(data.n() - 1);
    const double var = centered.squaredNorm() / nm1; // beta^T Sigma^ beta
    if (!(var > 0.0)) {
        throw data_error("direction has zero predictive variance");
    }
    return gaussian_kernel_matrix(z, std::sqrt(var));
}

} // namespace shsic
