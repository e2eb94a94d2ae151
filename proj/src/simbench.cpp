#include "shsic/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <omp.h>

#include "shsic/rng.hpp"

namespace shsic {

namespace {

// Stationary AR(1) draw with unit marginal variance: cov(W_i, W_j) = 0.5^|i-j|.
Eigen::VectorXd ar1_row(Rng& rng, int len) {
    constexpr double rho = 0.5;
    const double scale = std::sqrt(1.0 - rho * rho);
    Eigen::VectorXd w(len);
    w(0) = rng.normal();
    for (int j = 1; j < len; ++j) {
        w(j) = rho * w(j - 1) + scale * rng.normal();
    }
    return w;
}

Eigen::VectorXd true_beta(int study, int p) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (study == 3 || study == 5 || study == 6) {
        beta.head(4).setConstant(0.5);
    } else {
        beta.head(3).setConstant(1.0 / std::sqrt(3.0));
    }
    return beta;
}

} // namespace

GeneratedData generate(const StudySpec& spec) {
    if (spec.study < 1 || spec.study > 6) {
        throw data_error("unknown study id " + std::to_string(spec.study));
    }
    if (spec.p < 4) {
        throw data_error("study designs need p >= 4");
    }
    if (spec.n < 10) {
        throw data_error("study designs need n >= 10");
    }
    const bool abs_first = spec.study == 4 || spec.study == 6;
    const int q = spec.study >= 5 ? 2 : 1;

    Rng rng(spec.seed);
    Eigen::MatrixXd x(spec.n, spec.p);
    Eigen::MatrixXd y(spec.n, q);
    const Eigen::VectorXd beta = true_beta(spec.study, spec.p);

    for (int i = 0; i < spec.n; ++i) {
        if (abs_first) {
            const Eigen::VectorXd w = ar1_row(rng, spec.p - 1);
            x.row(i).tail(spec.p - 1) = w.transpose();
            x(i, 0) = std::abs(x(i, 1) + x(i, 2)) + 0.1 * rng.normal();
        } else {
            x.row(i) = ar1_row(rng, spec.p).transpose();
        }
        const double index = beta.dot(x.row(i));
        const double eps = rng.normal();
        switch (spec.study) {
            case 1:
                y(i, 0) = index + 2.0 * eps;
                break;
            case 2:
                y(i, 0) = 1.0 + std::exp(index) + eps;
                break;
            case 3:
                y(i, 0) = (index + 0.5) * (index + 0.5) + 0.5 * eps;
                break;
            case 4:
                y(i, 0) = std::sin(index) + 0.2 * eps;
                break;
            case 5:
                y(i, 0) = index + 2.0 * eps;
                y(i, 1) = (index + 0.5) * (index + 0.5) + 0.5 * eps;
                break;
            case 6:
                y(i, 0) = (index + 0.5) * (index + 0.5) + 0.5 * eps;
                y(i, 1) = std::sin(index) + 0.2 * eps;
                break;
        }
    }

    GeneratedData out{DataSet(std::move(x), std::move(y)), beta, {}};
    for (int j = 0; j < spec.p; ++j) {
        if (out.beta(j) != 0.0) {
            out.support.push_back(j);
        }
    }
    return out;
}

ReplicateMetrics metrics(const Eigen::Ref<const Eigen::VectorXd>& beta_hat,
                         const Eigen::Ref<const Eigen::VectorXd>& beta_true,
                         const Eigen::Ref<const Eigen::MatrixXd>& x) {
    if (beta_hat.size() != beta_true.size() || x.cols() != beta_hat.size()) {
        throw data_error("metric inputs have inconsistent dimensions");
    }
    ReplicateMetrics out;
    const double norm = beta_hat.norm();
    if (!(norm > 0.0)) {
        out.zero_estimate = true;
        return out;
    }
    const Eigen::VectorXd b = beta_hat / norm;

    const Eigen::Index p = b.size();
    Eigen::Index true_count = 0;
    Eigen::Index hits = 0;
    Eigen::Index false_hits = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        const bool in_truth = beta_true(j) != 0.0;
        const bool selected = std::abs(b(j)) >= kSupportTol;
        true_count += in_truth;
        hits += (in_truth && selected);
        false_hits += (!in_truth && selected);
    }
    out.tpr = true_count > 0 ? static_cast<double>(hits) / static_cast<double>(true_count) : 0.0;
    const Eigen::Index nulls = p - true_count;
    out.fpr = nulls > 0 ? static_cast<double>(false_hits) / static_cast<double>(nulls) : 0.0;

    const Eigen::VectorXd zh = x * b;
    const Eigen::VectorXd zt = x * beta_true;
    const Eigen::VectorXd ch = zh.array() - zh.mean();
    const Eigen::VectorXd ct = zt.array() - zt.mean();
    const double denom = ch.norm() * ct.norm();
    out.corr = denom > 0.0 ? std::abs(ch.dot(ct)) / denom : 0.0;
    return out;
}

MetricsReport run_benchmark(const StudySpec& spec, const BenchmarkConfig& config) {
    if (config.replicates < 1) {
        throw data_error("need at least one replicate");
    }
    MetricsReport report;
    report.spec = spec;
    report.rows.assign(static_cast<std::size_t>(config.replicates), ReplicateMetrics{});

    std::vector<double> violations(static_cast<std::size_t>(config.replicates), 0.0);

    const int workers = config.max_workers > 0 ? config.max_workers : 0;
#pragma omp parallel for schedule(dynamic) num_threads(workers > 0 ? workers : omp_get_max_threads())
    for (int rep = 0; rep < config.replicates; ++rep) {
        ReplicateMetrics& row = report.rows[static_cast<std::size_t>(rep)];
        try {
            StudySpec rep_spec = spec;
            rep_spec.seed = Rng::stream(spec.seed, static_cast<std::uint64_t>(rep)).next_u64();
            const GeneratedData gen = generate(rep_spec);
            const CovarianceContext ctx = covariance_context(gen.data);

            TuneConfig tune = config.tune;
            tune.seed = rep_spec.seed ^ 0x5DEECE66DULL;
            const TuneReport cv = cv_select_lambda(gen.data, ctx, config.solver, tune);

            SolverConfig refit = config.solver;
            refit.lambda = cv.chosen_lambda;
            const CenteredResponseKernel lk = response_kernel(gen.data.y());
            const FitResult res = fit(gen.data, lk, ctx, refit);

            double viol = 0.0;
            const std::vector<double>& trace = res.diagnostics.objective_trace;
            for (std::size_t t = 1; t < trace.size(); ++t) {
                viol = std::max(viol, trace[t] - trace[t - 1]);
            }
            violations[static_cast<std::size_t>(rep)] = viol;

            row = metrics(res.beta_hat, gen.beta, gen.data.x());
            row.chosen_lambda = cv.chosen_lambda;
            row.zero_estimate = res.diagnostics.all_shrunk;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
    }

    double tpr = 0.0;
    double fpr = 0.0;
    double corr = 0.0;
    int ok = 0;
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
        if (report.rows[r].failed) {
            ++report.failures;
            continue;
        }
        tpr += report.rows[r].tpr;
        fpr += report.rows[r].fpr;
        corr += report.rows[r].corr;
        ++ok;
        report.max_monotonicity_violation =
            std::max(report.max_monotonicity_violation, violations[r]);
    }
    if (report.failures * 5 > config.replicates) {
        std::string first;
        for (const ReplicateMetrics& m : report.rows) {
            if (m.failed) {
                first = m.error;
                break;
            }
        }
        throw numerical_error("more than 20% of replicates failed: " + first);
    }
    if (ok > 0) {
        report.tpr_mean = tpr / ok;
        report.fpr_mean = fpr / ok;
        report.corr_mean = corr / ok;
    }
    report.monotone_ok = report.max_monotonicity_violation <= 1e-10;
    return report;
}

void write_report_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
    std::ofstream out(path);
    if (!out) {
        throw data_error("cannot write " + path);
    }
    out << "study,n,p,replicates,tpr_mean,fpr_mean,corr_mean\n";
    char buf[256];
    for (const MetricsReport& r : reports) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%zu,%.17g,%.17g,%.17g\n", r.spec.study,
                      r.spec.n, r.spec.p, r.rows.size(), r.tpr_mean, r.fpr_mean, r.corr_mean);
        out << buf;
    }
}

void write_replicates_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
    std::ofstream out(path);
    if (!out) {
        throw data_error("cannot write " + path);
    }
    out << "study,replicate,tpr,fpr,corr,chosen_lambda,failed\n";
    char buf[256];
    for (const MetricsReport& r : reports) {
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
            const ReplicateMetrics& m = r.rows[i];
            std::snprintf(buf, sizeof(buf), "%d,%zu,%.17g,%.17g,%.17g,%.17g,%d\n", r.spec.study,
                          i + 1, m.tpr, m.fpr, m.corr, m.chosen_lambda, m.failed ? 1 : 0);
            out << buf;
        }
    }
}

std::string render_table(const std::vector<MetricsReport>& reports) {
    std::ostringstream out;
    char buf[256];
    out << "study      n      p   reps    TPR    FPR   corr   (x100)\n";
    for (const MetricsReport& r : reports) {
        std::snprintf(buf, sizeof(buf), "%5d  %5d  %5d  %5zu  %5.1f  %5.1f  %5.1f\n",
                      r.spec.study, r.spec.n, r.spec.p, r.rows.size(), 100.0 * r.tpr_mean,
                      100.0 * r.fpr_mean, 100.0 * r.corr_mean);
        out << buf;
    }
    return out.str();
}

} // namespace shsic
