#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shsic/solver.hpp"

namespace shsic {

struct TuneConfig {
    std::vector<double> lambda_grid; // descending; empty = derive from data
    int grid_size = 20;              // points in the derived grid
    double grid_decades = 3.0;       // derived grid spans [lambda_max/10^d, lambda_max]
    int folds = 5;
    std::vector<double> bandwidth_grid; // empty = automatic per-fit grid
    int bandwidth_grid_size = 20;
    std::uint64_t seed = 0;
};

struct TuneReport {
    std::vector<double> lambdas;                  // descending, as evaluated
    std::vector<double> mean_errors;              // per lambda
    std::vector<std::vector<double>> fold_errors; // [lambda][fold], NaN = fold skipped
    std::vector<double> chosen_bandwidths;        // per fold, at the chosen lambda
    double chosen_lambda = 0.0;
    int chosen_index = -1;
    std::vector<int> fold_of;                     // fold id per observation
    std::vector<std::string> warnings;
};

// Nadaraya-Watson prediction of a scalar response at x_star from the index
// z = beta^T x with Gaussian kernel K_h. Weights sum to one; if every weight
// underflows, falls back to the nearest neighbour in index distance and sets
// *fallback.
double nw_predict(const Eigen::Ref<const Eigen::VectorXd>& beta,
                  const Eigen::Ref<const Eigen::MatrixXd>& x_train,
                  const Eigen::Ref<const Eigen::VectorXd>& y_train, double h,
                  const Eigen::Ref<const Eigen::VectorXd>& x_star,
                  bool* fallback = nullptr);

// Leave-one-out squared error of the Nadaraya-Watson fit at bandwidth h,
// summed over observations (and response coordinates), computed from a single
// fit: the diagonal weight is removed and the rest renormalized.
double loo_sse(const Eigen::Ref<const Eigen::VectorXd>& z,
               const Eigen::Ref<const Eigen::MatrixXd>& y, double h);

// Grid bandwidth minimizing the leave-one-out error; ties break toward the
// largest bandwidth.
double loo_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& beta, const DataSet& train,
                     const std::vector<double>& grid);

// 20 log-spaced bandwidths spanning [0.1 sd(z), 2 range(z)].
std::vector<double> auto_bandwidth_grid(const Eigen::Ref<const Eigen::VectorXd>& z, int size);

// Smallest power-of-two multiple of 1 that shrinks the whole matrix to zero
// on a pilot fit, found by doubling (and halving below 1 when needed).
double find_lambda_max(const DataSet& data, const CenteredResponseKernel& lk,
                       const CovarianceContext& ctx, SolverConfig config);

// M-fold cross-validation over a descending lambda grid with warm starts.
// Prediction error follows sum_m sum_{i in C_m} ||Y_i - Yhat_i||^2 / (M |C_m|).
// Ties in the minimum break toward the larger lambda.
TuneReport cv_select_lambda(const DataSet& data, const CovarianceContext& ctx,
                            const SolverConfig& solver_config, const TuneConfig& tune_config);

} // namespace shsic
