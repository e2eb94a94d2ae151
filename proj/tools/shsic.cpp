#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "shsic/csv.hpp"
#include "shsic/simbench.hpp"
#include "shsic/solver.hpp"
#include "shsic/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOpts {
    std::string x_path;
    std::string y_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 0;
    bool index_col = false;
    int standardize = -1; // -1 = subcommand default
};

struct SolverOpts {
    double lambda = -1.0;
    double rho = 0.0;
    double lipschitz = 0.0;
    double tau = 0.0;
    double outer_tol = 1e-5;
    int outer_max = 100;
    double inner_tol = 1e-6;
    int inner_max = 2000;
};

shsic::SolverConfig to_config(const SolverOpts& o) {
    shsic::SolverConfig c;
    c.lambda = o.lambda >= 0.0 ? o.lambda : 0.0;
    c.rho = o.rho;
    c.lipschitz = o.lipschitz;
    c.tau = o.tau;
    c.outer_tol = o.outer_tol;
    c.outer_max = o.outer_max;
    c.inner_tol = o.inner_tol;
    c.inner_max = o.inner_max;
    return c;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Center and scale X columns, center Y columns.
void standardize_data(Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    const double n = static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        x.col(j).array() -= mean;
        const double sd = std::sqrt(x.col(j).squaredNorm() / (n - 1.0));
        if (sd > 0.0) {
            x.col(j) /= sd;
        }
    }
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        y.col(c).array() -= y.col(c).mean();
    }
}

struct LoadedData {
    shsic::DataSet data;
    bool standardized = false;
};

LoadedData load_xy(const CommonOpts& opts, bool default_standardize) {
    if (opts.x_path.empty() || opts.y_path.empty()) {
        throw CLI::ValidationError("--x and --y are required");
    }
    shsic::CsvOptions csv_opts;
    csv_opts.index_column = opts.index_col;
    Eigen::MatrixXd x = shsic::read_csv(opts.x_path, csv_opts).values;
    Eigen::MatrixXd y = shsic::read_csv(opts.y_path, csv_opts).values;
    if (x.rows() != y.rows()) {
        throw shsic::data_error("X has " + std::to_string(x.rows()) + " rows but Y has " +
                                std::to_string(y.rows()));
    }
    const bool standardize = opts.standardize < 0 ? default_standardize : opts.standardize > 0;
    if (standardize) {
        standardize_data(x, y);
    }
    return LoadedData{shsic::DataSet(std::move(x), std::move(y)), standardize};
}

json solver_json(const SolverOpts& o) {
    return json{{"lambda", o.lambda},     {"rho", o.rho},
                {"lipschitz", o.lipschitz}, {"tau", o.tau},
                {"outer_tol", o.outer_tol}, {"outer_max", o.outer_max},
                {"inner_tol", o.inner_tol}, {"inner_max", o.inner_max}};
}

json diagnostics_json(const shsic::FitDiagnostics& d) {
    return json{{"outer_iterations", d.outer_iterations},
                {"inner_iterations", d.inner_iterations},
                {"final_objective", d.final_objective},
                {"outer_converged", d.outer_converged},
                {"inner_converged", d.inner_converged},
                {"all_shrunk", d.all_shrunk},
                {"stalled", d.stalled},
                {"eigen_gap", d.eigen_gap},
                {"lipschitz", d.lipschitz},
                {"tau", d.tau},
                {"objective_trace", d.objective_trace}};
}

void write_manifest(const fs::path& out_dir, json manifest,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json hashes = json::object();
    for (const std::string& path : inputs) {
        hashes[path] = shsic::file_hash(path);
    }
    manifest["inputs"] = hashes;
    manifest["outputs"] = outputs;
    manifest["version"] = kVersion;
    manifest["compiler"] = __VERSION__;
    std::ofstream out(out_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

void write_fit_outputs(const fs::path& out_dir, const shsic::FitResult& res) {
    Eigen::MatrixXd beta(res.beta_hat.size(), 1);
    beta.col(0) = res.beta_hat;
    shsic::CsvOptions with_index;
    with_index.index_column = true;
    shsic::write_csv((out_dir / "beta_hat.csv").string(), beta, {"beta"}, with_index);

    Eigen::MatrixXd support(static_cast<Eigen::Index>(res.support.size()), 1);
    for (std::size_t i = 0; i < res.support.size(); ++i) {
        support(static_cast<Eigen::Index>(i), 0) = res.support[i] + 1; // 1-based
    }
    shsic::write_csv((out_dir / "support.csv").string(), support, {"index"});
}

int cmd_fit(const CommonOpts& common, const SolverOpts& solver) {
    if (solver.lambda < 0.0) {
        throw CLI::ValidationError("--lambda is required for fit (or use the tune command)");
    }
    const LoadedData loaded = load_xy(common, /*default_standardize=*/true);
    const shsic::CenteredResponseKernel lk = shsic::response_kernel(loaded.data.y());
    const shsic::CovarianceContext ctx = shsic::covariance_context(loaded.data);
    const shsic::FitResult res = shsic::fit(loaded.data, lk, ctx, to_config(solver));

    const fs::path out_dir(common.out_dir);
    fs::create_directories(out_dir);
    write_fit_outputs(out_dir, res);

    json manifest{{"command", "fit"},
                  {"seed", common.seed},
                  {"threads", common.threads},
                  {"standardize", loaded.standardized},
                  {"solver", solver_json(solver)},
                  {"diagnostics", diagnostics_json(res.diagnostics)}};
    write_manifest(out_dir, manifest, {common.x_path, common.y_path},
                   {"beta_hat.csv", "support.csv"});
    if (res.diagnostics.all_shrunk) {
        std::cerr << "note: penalty shrank the estimate to zero\n";
    }
    return 0;
}

int cmd_tune(const CommonOpts& common, const SolverOpts& solver, std::vector<double> grid,
             int folds, int grid_size) {
    const LoadedData loaded = load_xy(common, /*default_standardize=*/true);
    const shsic::CovarianceContext ctx = shsic::covariance_context(loaded.data);

    shsic::TuneConfig tune;
    tune.lambda_grid = std::move(grid);
    tune.folds = folds;
    tune.grid_size = grid_size;
    tune.seed = common.seed;

    const auto t0 = std::chrono::steady_clock::now();
    const shsic::TuneReport report =
        shsic::cv_select_lambda(loaded.data, ctx, to_config(solver), tune);
    const double cv_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path out_dir(common.out_dir);
    fs::create_directories(out_dir);

    {
        std::ofstream out(out_dir / "cv_path.csv");
        out << "lambda,mean_error,chosen";
        for (int f = 0; f < folds; ++f) {
            out << ",fold_" << (f + 1);
        }
        out << "\n";
        for (std::size_t i = 0; i < report.lambdas.size(); ++i) {
            out << fmt(report.lambdas[i]) << "," << fmt(report.mean_errors[i]) << ","
                << (static_cast<int>(i) == report.chosen_index ? 1 : 0);
            for (const double e : report.fold_errors[i]) {
                out << "," << fmt(e);
            }
            out << "\n";
        }
    }
    for (const std::string& w : report.warnings) {
        std::cerr << "warning: " << w << "\n";
    }

    SolverOpts refit = solver;
    refit.lambda = report.chosen_lambda;
    const shsic::CenteredResponseKernel lk = shsic::response_kernel(loaded.data.y());
    const shsic::FitResult res = shsic::fit(loaded.data, lk, ctx, to_config(refit));
    write_fit_outputs(out_dir, res);

    json manifest{{"command", "tune"},
                  {"seed", common.seed},
                  {"threads", common.threads},
                  {"standardize", loaded.standardized},
                  {"folds", folds},
                  {"lambda_grid", report.lambdas},
                  {"chosen_lambda", report.chosen_lambda},
                  {"chosen_bandwidths", report.chosen_bandwidths},
                  {"cv_seconds", cv_seconds},
                  {"solver", solver_json(refit)},
                  {"diagnostics", diagnostics_json(res.diagnostics)}};
    write_manifest(out_dir, manifest, {common.x_path, common.y_path},
                   {"cv_path.csv", "beta_hat.csv", "support.csv"});
    std::cout << "chosen lambda: " << fmt(report.chosen_lambda) << "\n";
    return 0;
}

int cmd_simulate(const CommonOpts& common, const SolverOpts& solver, int study, int n, int p,
                 int replicates, int folds, int grid_size) {
    const fs::path out_dir(common.out_dir);
    fs::create_directories(out_dir);
    const shsic::StudySpec spec{study, n, p, common.seed};

    if (replicates <= 0) {
        const shsic::GeneratedData gen = shsic::generate(spec);
        shsic::write_csv((out_dir / "X.csv").string(), gen.data.x());
        shsic::write_csv((out_dir / "Y.csv").string(), gen.data.y());
        Eigen::MatrixXd truth(gen.beta.size(), 1);
        truth.col(0) = gen.beta;
        shsic::CsvOptions with_index;
        with_index.index_column = true;
        shsic::write_csv((out_dir / "truth.csv").string(), truth, {"beta"}, with_index);

        json manifest{{"command", "simulate"}, {"study", study},        {"n", n},
                      {"p", p},                {"seed", common.seed},   {"threads", common.threads},
                      {"replicates", 0}};
        write_manifest(out_dir, manifest, {}, {"X.csv", "Y.csv", "truth.csv"});
        return 0;
    }

    shsic::BenchmarkConfig config;
    config.replicates = replicates;
    config.solver = to_config(solver);
    config.tune.folds = folds;
    config.tune.grid_size = grid_size;
    config.max_workers = common.threads;
    const shsic::MetricsReport report = shsic::run_benchmark(spec, config);

    const std::vector<shsic::MetricsReport> reports{report};
    shsic::write_report_csv((out_dir / "report.csv").string(), reports);
    shsic::write_replicates_csv((out_dir / "replicates.csv").string(), reports);
    std::cout << shsic::render_table(reports);

    json manifest{{"command", "simulate"},
                  {"study", study},
                  {"n", n},
                  {"p", p},
                  {"seed", common.seed},
                  {"threads", common.threads},
                  {"replicates", replicates},
                  {"folds", folds},
                  {"grid_size", grid_size},
                  {"solver", solver_json(solver)},
                  {"tpr_mean", report.tpr_mean},
                  {"fpr_mean", report.fpr_mean},
                  {"corr_mean", report.corr_mean},
                  {"failures", report.failures},
                  {"monotone_ok", report.monotone_ok}};
    write_manifest(out_dir, manifest, {}, {"report.csv", "replicates.csv"});
    return 0;
}

int cmd_hsic(const CommonOpts& common, const std::string& beta_path,
             const std::string& pi_path) {
    if (beta_path.empty() == pi_path.empty()) {
        throw CLI::ValidationError("exactly one of --beta or --pi is required");
    }
    const LoadedData loaded = load_xy(common, /*default_standardize=*/false);
    const shsic::CenteredResponseKernel lk = shsic::response_kernel(loaded.data.y());

    shsic::CsvOptions csv_opts;
    csv_opts.index_column = common.index_col;
    double stat = 0.0;
    std::vector<std::string> inputs{common.x_path, common.y_path};
    if (!beta_path.empty()) {
        Eigen::MatrixXd b = shsic::read_csv(beta_path, csv_opts).values;
        if (b.cols() != 1) {
            throw shsic::data_error("direction file must have a single value column");
        }
        const Eigen::MatrixXd k = shsic::direction_kernel_matrix(loaded.data, b.col(0));
        stat = shsic::hsic_v(k, lk);
        inputs.push_back(beta_path);
    } else {
        const Eigen::MatrixXd pi_raw = shsic::read_csv(pi_path, csv_opts).values;
        const shsic::ProjectionMatrix pi(pi_raw);
        // exp(-<Pi, Z_ij>/2) summed against L~ is exactly -loss.
        stat = -shsic::loss(pi.matrix(), loaded.data, lk.ltilde);
        inputs.push_back(pi_path);
    }
    std::cout << fmt(stat) << "\n";

    const fs::path out_dir(common.out_dir);
    fs::create_directories(out_dir);
    json manifest{{"command", "hsic"},
                  {"seed", common.seed},
                  {"threads", common.threads},
                  {"standardize", loaded.standardized},
                  {"statistic", stat}};
    write_manifest(out_dir, manifest, inputs, {});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse single-index estimation via the Hilbert-Schmidt independence criterion"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI-style key=value file");
    app.set_version_flag("--version", kVersion);

    CommonOpts common;
    SolverOpts solver;
    auto add_common = [&](CLI::App* cmd, bool with_data) {
        if (with_data) {
            cmd->add_option("--x", common.x_path, "Predictor CSV (rows = observations)");
            cmd->add_option("--y", common.y_path, "Response CSV");
            cmd->add_flag("--index-col", common.index_col, "First CSV column is a row index");
            cmd->add_flag("--standardize,!--no-standardize", common.standardize,
                          "Center/scale X and center Y before fitting");
        }
        cmd->add_option("--seed", common.seed, "Random seed");
        cmd->add_option("--threads", common.threads, "Worker thread limit (0 = all)");
        cmd->add_option("--out-dir", common.out_dir, "Output directory");
    };
    auto add_solver = [&](CLI::App* cmd) {
        cmd->add_option("--rho", solver.rho, "Augmented-Lagrangian weight (0 = derive)");
        cmd->add_option("--lipschitz", solver.lipschitz,
                        "Gradient Lipschitz constant (0 = analytic bound)");
        cmd->add_option("--tau", solver.tau, "Linearization weight (0 = 4 rho lambda_max^2)");
        cmd->add_option("--outer-tol", solver.outer_tol, "Outer stopping tolerance");
        cmd->add_option("--outer-max", solver.outer_max, "Outer iteration cap");
        cmd->add_option("--inner-tol", solver.inner_tol, "Inner stopping tolerance");
        cmd->add_option("--inner-max", solver.inner_max, "Inner iteration cap");
    };

    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit at a fixed sparsity level");
    add_common(fit_cmd, true);
    add_solver(fit_cmd);
    fit_cmd->add_option("--lambda", solver.lambda, "Sparsity penalty");

    CLI::App* tune_cmd =
        app.add_subcommand("tune", "Cross-validate the sparsity level, then refit");
    add_common(tune_cmd, true);
    add_solver(tune_cmd);
    std::vector<double> grid;
    int folds = 5;
    int grid_size = 20;
    tune_cmd->add_option("--lambda-grid", grid, "Descending lambda grid")->delimiter(',');
    tune_cmd->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
    tune_cmd->add_option("--grid-size", grid_size, "Derived grid size")
        ->check(CLI::Range(2, 1000));

    CLI::App* sim_cmd = app.add_subcommand("simulate", "Generate study data or run the benchmark");
    add_common(sim_cmd, false);
    add_solver(sim_cmd);
    CLI::Option* sim_lip = sim_cmd->get_option("--lipschitz");
    int study = 1;
    int n = 100;
    int p = 150;
    int replicates = 0;
    sim_cmd->add_option("--study", study, "Study id (1-6)")->check(CLI::Range(1, 6));
    sim_cmd->add_option("--n", n, "Sample size");
    sim_cmd->add_option("--p", p, "Predictor count");
    sim_cmd->add_option("--replicates", replicates,
                        "Benchmark replicates (0 = just write X/Y/truth files)");
    sim_cmd->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
    sim_cmd->add_option("--grid-size", grid_size, "Lambda grid size")
        ->check(CLI::Range(2, 1000));

    CLI::App* hsic_cmd = app.add_subcommand("hsic", "Evaluate the dependence statistic");
    add_common(hsic_cmd, true);
    std::string beta_path;
    std::string pi_path;
    hsic_cmd->add_option("--beta", beta_path, "Direction vector CSV");
    hsic_cmd->add_option("--pi", pi_path, "Projection matrix CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        app.exit(e);
        return 2;
    }

    if (common.threads > 0) {
        omp_set_num_threads(common.threads);
    }

    try {
        if (app.got_subcommand(fit_cmd)) {
            return cmd_fit(common, solver);
        }
        if (app.got_subcommand(tune_cmd)) {
            return cmd_tune(common, solver, grid, folds, grid_size);
        }
        if (app.got_subcommand(sim_cmd)) {
            // Benchmark runs default to the estimated Lipschitz constant;
            // an explicit --lipschitz (including 0 = analytic) wins.
            if (replicates > 0 && sim_lip->count() == 0) {
                solver.lipschitz = -1.0;
            }
            return cmd_simulate(common, solver, study, n, p, replicates, folds, grid_size);
        }
        if (app.got_subcommand(hsic_cmd)) {
            return cmd_hsic(common, beta_path, pi_path);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const shsic::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const shsic::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
