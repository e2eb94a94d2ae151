#pragma once

#include <Eigen/Dense>

#include "shsic/errors.hpp"

namespace shsic {

// A validated sample: predictors X (n x p, rows are observations) and
// responses Y (n x q, q = 1 for a univariate response).
class DataSet {
public:
    DataSet(Eigen::MatrixXd x, Eigen::MatrixXd y);

    const Eigen::MatrixXd& x() const { return x_; }
    const Eigen::MatrixXd& y() const { return y_; }
    Eigen::Index n() const { return x_.rows(); }
    Eigen::Index p() const { return x_.cols(); }
    Eigen::Index q() const { return y_.cols(); }

    // Rows `idx` of both X and Y, revalidated (throws data_error if the
    // subset has a zero-variance predictor column).
    DataSet subset(const std::vector<Eigen::Index>& idx) const;

private:
    Eigen::MatrixXd x_;
    Eigen::MatrixXd y_;
};

// Sample standard deviation with divisor n-1.
double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& v);

} // namespace shsic
