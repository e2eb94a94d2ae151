#include "shsic/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shsic/rng.hpp"

namespace shsic {

namespace {

constexpr double kWeightFloor = 1e-300;

double gauss(double u, double h) { return std::exp(-0.5 * (u / h) * (u / h)); }

} // namespace

double nw_predict(const Eigen::Ref<const Eigen::VectorXd>& beta,
                  const Eigen::Ref<const Eigen::MatrixXd>& x_train,
                  const Eigen::Ref<const Eigen::VectorXd>& y_train, double h,
                  const Eigen::Ref<const Eigen::VectorXd>& x_star, bool* fallback) {
    if (!(h > 0.0)) {
        throw data_error("bandwidth must be positive");
    }
    if (x_train.rows() < 1 || x_train.rows() != y_train.size() ||
        x_train.cols() != beta.size() || x_star.size() != beta.size()) {
        throw data_error("prediction inputs have inconsistent dimensions");
    }
    if (fallback != nullptr) {
        *fallback = false;
    }
    const double z_star = beta.dot(x_star);
    const Eigen::VectorXd z = x_train * beta;
    double wsum = 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double w = gauss(z_star - z(i), h);
        wsum += w;
        acc += w * y_train(i);
    }
    if (wsum <= kWeightFloor) {
        // Every weight underflowed: fall back to the nearest training point
        // in index distance.
        Eigen::Index best = 0;
        (z.array() - z_star).abs().minCoeff(&best);
        if (fallback != nullptr) {
            *fallback = true;
        }
        return y_train(best);
    }
    return acc / wsum;
}

double loo_sse(const Eigen::Ref<const Eigen::VectorXd>& z,
               const Eigen::Ref<const Eigen::MatrixXd>& y, double h) {
    if (!(h > 0.0)) {
        throw data_error("bandwidth must be positive");
    }
    const Eigen::Index n = z.size();
    if (y.rows() != n || n < 2) {
        throw data_error("leave-one-out needs at least two observations");
    }
    // Single fit: row sums of the full weight matrix, diagonal removed and
    // renormalized; K_h(0) = 1 for the Gaussian kernel.
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double wsum = 0.0;
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(y.cols());
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double w = gauss(z(i) - z(j), h);
            wsum += w;
            acc += w * y.row(j);
        }
        Eigen::RowVectorXd pred;
        if (wsum <= kWeightFloor) {
            Eigen::Index best = n;
            double dmin = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                const double d = std::abs(z(j) - z(i));
                if (d < dmin) {
                    dmin = d;
                    best = j;
                }
            }
            pred = y.row(best);
        } else {
            pred = acc / wsum;
        }
        sse += (y.row(i) - pred).squaredNorm();
    }
    return sse;
}

std::vector<double> auto_bandwidth_grid(const Eigen::Ref<const Eigen::VectorXd>& z, int size) {
    const double sd = sample_sd(z);
    const double range = z.maxCoeff() - z.minCoeff();
    if (!(range > 0.0) || !(sd > 0.0)) {
        return {1.0};
    }
    const double lo = 0.1 * sd;
    const double hi = 2.0 * range;
    std::vector<double> grid(static_cast<std::size_t>(size));
    if (size == 1) {
        grid[0] = hi;
        return grid;
    }
    const double step = std::log(hi / lo) / static_cast<double>(size - 1);
    for (int i = 0; i < size; ++i) {
        grid[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
    }
    return grid;
}

double loo_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& beta, const DataSet& train,
                     const std::vector<double>& grid) {
    if (grid.empty()) {
        throw data_error("bandwidth grid is empty");
    }
    const Eigen::VectorXd z = train.x() * beta;
    double best_h = grid.front();
    double best_err = std::numeric_limits<double>::infinity();
    for (const double h : grid) {
        const double err = loo_sse(z, train.y(), h);
        // Ties break toward the larger bandwidth.
        if (err < best_err || (err == best_err && h > best_h)) {
            best_err = err;
            best_h = h;
        }
    }
    return best_h;
}

double find_lambda_max(const DataSet& data, const CenteredResponseKernel& lk,
                       const CovarianceContext& ctx, SolverConfig config) {
    // Pilot fits run on reduced budgets; detecting a nonzero support does not
    // need a converged solve, and fully-shrunk fits terminate immediately.
    config.init = SolverConfig::Init::LeadingEigvec;
    config.outer_max = std::min(config.outer_max, 6);
    config.inner_max = std::min(config.inner_max, 400);
    config.inner_tol = std::max(config.inner_tol, 1e-5);
    if (config.lipschitz < 0.0) {
        config.lipschitz = estimate_gradient_lipschitz(data, lk.ltilde, ctx);
        config.backtrack_lipschitz = true;
    }
    auto shrinks = [&](double lambda) {
        SolverConfig c = config;
        c.lambda = lambda;
        return fit(data, lk, ctx, c).diagnostics.all_shrunk;
    };
    // First crossing of a power-of-two ladder anchored near the scale where
    // the first MM step would be shrunk to nothing.
    const Eigen::VectorXd& v = ctx.top_eigvec;
    const double denom = v.dot(ctx.sigma_hat * v);
    const Eigen::MatrixXd pi0 =
        denom > 0.0 ? ((v * v.transpose()) / denom).eval()
                    : Eigen::MatrixXd::Zero(data.p(), data.p()).eval();
    const double lips = config.lipschitz > 0.0 ? config.lipschitz
                                               : lipschitz_bound(data, lk.ltilde);
    const Eigen::MatrixXd anchor =
        mm_subproblem_target(pi0, grad(pi0, data, lk.ltilde), lips);
    double lambda = std::max(1e-12, 2.0 * lips * anchor.cwiseAbs().maxCoeff());

    if (shrinks(lambda)) {
        for (int i = 0; i < 60 && lambda > 1e-12 && shrinks(lambda / 2.0); ++i) {
            lambda /= 2.0;
        }
        return lambda;
    }
    for (int i = 0; i < 60; ++i) {
        lambda *= 2.0;
        if (shrinks(lambda)) {
            return lambda;
        }
    }
    throw numerical_error("no lambda shrinks the estimate to zero");
}

TuneReport cv_select_lambda(const DataSet& data, const CovarianceContext& ctx,
                            const SolverConfig& solver_config, const TuneConfig& tune_config) {
    const Eigen::Index n = data.n();
    const int m = tune_config.folds;
    if (m < 2) {
        throw data_error("need at least 2 folds");
    }
    if (n < 2 * m) {
        throw data_error("need at least 2M observations for M folds");
    }

    TuneReport report;

    // Lambda grid: descending; derived from a pilot search when not given.
    std::vector<double> lambdas = tune_config.lambda_grid;
    if (lambdas.empty()) {
        const CenteredResponseKernel lk_full = response_kernel(data.y());
        const double lambda_max = find_lambda_max(data, lk_full, ctx, solver_config);
        const int g = std::max(2, tune_config.grid_size);
        const double step = tune_config.grid_decades * std::log(10.0) / (g - 1);
        lambdas.resize(static_cast<std::size_t>(g));
        for (int i = 0; i < g; ++i) {
            lambdas[static_cast<std::size_t>(i)] = lambda_max * std::exp(-step * i);
        }
    } else {
        for (std::size_t i = 1; i < lambdas.size(); ++i) {
            if (!(lambdas[i] < lambdas[i - 1])) {
                throw data_error("lambda grid must be strictly decreasing");
            }
        }
        if (lambdas.back() < 0.0) {
            throw data_error("lambda grid values must be nonnegative");
        }
    }
    const std::size_t n_lambda = lambdas.size();

    // Seeded shuffle into M folds of near-equal size.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(tune_config.seed);
    rng.shuffle(order);
    report.fold_of.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t r = 0; r < order.size(); ++r) {
        report.fold_of[static_cast<std::size_t>(order[r])] = static_cast<int>(r % m);
    }

    report.lambdas = lambdas;
    report.fold_errors.assign(n_lambda, std::vector<double>(static_cast<std::size_t>(m),
                                                            std::numeric_limits<double>::quiet_NaN()));
    std::vector<std::vector<double>> fold_bandwidths(
        n_lambda, std::vector<double>(static_cast<std::size_t>(m), 0.0));

    // Folds are independent; each runs its own warm-started descending sweep.
    std::vector<std::string> fold_warnings(static_cast<std::size_t>(m));
    std::vector<std::string> fold_failures(static_cast<std::size_t>(m));
#pragma omp parallel for schedule(dynamic)
    for (int fold = 0; fold < m; ++fold) {
        std::vector<Eigen::Index> train_idx;
        std::vector<Eigen::Index> test_idx;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (report.fold_of[static_cast<std::size_t>(i)] == fold) {
                test_idx.push_back(i);
            } else {
                train_idx.push_back(i);
            }
        }
        try {
            const DataSet train = data.subset(train_idx);
            const CenteredResponseKernel lk = response_kernel(train.y());
            const CovarianceContext fold_ctx = covariance_context(train);

            SolverConfig config = solver_config;
            if (config.lipschitz < 0.0) {
                // One estimate per fold, shared by the whole lambda sweep.
                config.lipschitz = estimate_gradient_lipschitz(train, lk.ltilde, fold_ctx);
                config.backtrack_lipschitz = true;
            }
            for (std::size_t li = 0; li < n_lambda; ++li) {
                config.lambda = lambdas[li];
                const FitResult res = fit(train, lk, fold_ctx, config);

                // Warm start the next (smaller) lambda from this solution.
                config.init = SolverConfig::Init::Warm;
                config.warm_pi = res.pi_hat;

                Eigen::VectorXd beta = res.beta_hat; // zero vector when all shrunk
                double h = 1.0;
                if (!res.diagnostics.all_shrunk) {
                    std::vector<double> grid = tune_config.bandwidth_grid;
                    if (grid.empty()) {
                        grid = auto_bandwidth_grid(train.x() * beta,
                                                   tune_config.bandwidth_grid_size);
                    }
                    h = loo_bandwidth(beta, train, grid);
                }
                fold_bandwidths[li][static_cast<std::size_t>(fold)] = h;

                double sse = 0.0;
                for (const Eigen::Index i : test_idx) {
                    for (Eigen::Index c = 0; c < data.q(); ++c) {
                        const double pred = nw_predict(beta, train.x(), train.y().col(c), h,
                                                       data.x().row(i).transpose());
                        const double d = data.y()(i, c) - pred;
                        sse += d * d;
                    }
                }
                report.fold_errors[li][static_cast<std::size_t>(fold)] =
                    sse / static_cast<double>(test_idx.size());
            }
        } catch (const data_error& e) {
            fold_warnings[static_cast<std::size_t>(fold)] =
                "fold " + std::to_string(fold + 1) + " skipped: " + e.what();
        } catch (const std::exception& e) {
            fold_failures[static_cast<std::size_t>(fold)] = e.what();
        }
    }

    for (const std::string& f : fold_failures) {
        if (!f.empty()) {
            throw numerical_error("cross-validation fold failed: " + f);
        }
    }
    for (const std::string& w : fold_warnings) {
        if (!w.empty()) {
            report.warnings.push_back(w);
        }
    }

    // Mean error per lambda over usable folds, per the M-fold formula.
    report.mean_errors.assign(n_lambda, std::numeric_limits<double>::quiet_NaN());
    bool any_fold = false;
    for (std::size_t li = 0; li < n_lambda; ++li) {
        double total = 0.0;
        int used = 0;
        for (int fold = 0; fold < m; ++fold) {
            const double e = report.fold_errors[li][static_cast<std::size_t>(fold)];
            if (std::isfinite(e)) {
                total += e;
                ++used;
            }
        }
        if (used > 0) {
            report.mean_errors[li] = total / static_cast<double>(used);
            any_fold = true;
        }
    }
    if (!any_fold) {
        throw data_error("every cross-validation fold was degenerate");
    }

    // Minimum mean error; grid is descending, so scanning from the front and
    // keeping strict improvements breaks ties toward the larger lambda.
    int best = -1;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < n_lambda; ++li) {
        const double e = report.mean_errors[li];
        if (std::isfinite(e) && e < best_err) {
            best_err = e;
            best = static_cast<int>(li);
        }
    }
    report.chosen_index = best;
    report.chosen_lambda = lambdas[static_cast<std::size_t>(best)];
    report.chosen_bandwidths = fold_bandwidths[static_cast<std::size_t>(best)];
    return report;
}

} // namespace shsic
