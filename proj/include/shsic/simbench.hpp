#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shsic/tuning.hpp"

namespace shsic {

// One synthetic regression design. Studies 1-4 have a univariate response,
// 5-6 a bivariate one; all share the AR(1) predictor covariance 0.5^|i-j|,
// with studies 4 and 6 replacing the first coordinate by |X2 + X3| + 0.1 xi.
struct StudySpec {
    int study = 1;
    int n = 100;
    int p = 150;
    std::uint64_t seed = 0;
};

struct GeneratedData {
    DataSet data;
    Eigen::VectorXd beta;     // true direction, unit norm
    std::vector<int> support; // 0-based indices of nonzero coefficients
};

GeneratedData generate(const StudySpec& spec);

struct ReplicateMetrics {
    double tpr = 0.0;
    double fpr = 0.0;
    double corr = 0.0;
    double chosen_lambda = 0.0;
    bool zero_estimate = false;
    bool failed = false;
    std::string error;
};

// Support recovery and direction accuracy of one estimate: beta_hat is
// normalized, truncated at 1e-4, and compared against the true support;
// corr is |cor(X beta_hat, X beta)|.
ReplicateMetrics metrics(const Eigen::Ref<const Eigen::VectorXd>& beta_hat,
                         const Eigen::Ref<const Eigen::VectorXd>& beta_true,
                         const Eigen::Ref<const Eigen::MatrixXd>& x);

struct BenchmarkConfig {
    int replicates = 20;
    SolverConfig solver;
    TuneConfig tune;
    int max_workers = 0; // 0 = all available
};

struct MetricsReport {
    StudySpec spec;
    std::vector<ReplicateMetrics> rows;
    double tpr_mean = 0.0;
    double fpr_mean = 0.0;
    double corr_mean = 0.0;
    int failures = 0;
    bool monotone_ok = true;              // every fit's objective trace non-increasing
    double max_monotonicity_violation = 0.0;
};

// generate -> cross-validate lambda -> refit on the full replicate -> metrics,
// replicated with per-replicate RNG streams. Replicates run in parallel;
// aggregation is position-based and independent of scheduling. More than 20%
// failed replicates aborts with numerical_error.
MetricsReport run_benchmark(const StudySpec& spec, const BenchmarkConfig& config);

// report.csv row: study,n,p,replicates,tpr_mean,fpr_mean,corr_mean
void write_report_csv(const std::string& path, const std::vector<MetricsReport>& reports);
// companion per-replicate rows: study,replicate,tpr,fpr,corr,chosen_lambda,failed
void write_replicates_csv(const std::string& path, const std::vector<MetricsReport>& reports);
// Human-readable table; values are multiplied by 100 here and only here.
std::string render_table(const std::vector<MetricsReport>& reports);

} // namespace shsic
