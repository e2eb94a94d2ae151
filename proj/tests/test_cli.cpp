#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "shsic/csv.hpp"
#include "shsic/simbench.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SHSIC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string run_cli_stdout(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() / "shsic_cli_stdout.txt";
    const std::string cmd =
        std::string(SHSIC_CLI_PATH) + " " + args + " >" + tmp.string() + " 2>/dev/null";
    std::system(cmd.c_str());
    std::ifstream in(tmp);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate exports data files that fit can ingest") {
    const fs::path dir = fresh_dir("shsic_cli_roundtrip");
    REQUIRE(run_cli("simulate --study 1 --n 30 --p 6 --seed 7 --out-dir " + dir.string()) == 0);
    CHECK(fs::exists(dir / "X.csv"));
    CHECK(fs::exists(dir / "Y.csv"));
    CHECK(fs::exists(dir / "truth.csv"));
    CHECK(fs::exists(dir / "manifest.json"));

    // Round-trip: the exported matrices reread losslessly.
    const shsic::GeneratedData gen = shsic::generate(shsic::StudySpec{1, 30, 6, 7});
    const Eigen::MatrixXd x = shsic::read_csv((dir / "X.csv").string()).values;
    CHECK((x - gen.data.x()).cwiseAbs().maxCoeff() == 0.0);

    const fs::path fit_dir = fresh_dir("shsic_cli_roundtrip_fit");
    REQUIRE(run_cli("fit --x " + (dir / "X.csv").string() + " --y " + (dir / "Y.csv").string() +
                    " --lambda 0.05 --no-standardize --out-dir " + fit_dir.string()) == 0);
    CHECK(fs::exists(fit_dir / "beta_hat.csv"));
    CHECK(fs::exists(fit_dir / "support.csv"));
    CHECK(fs::exists(fit_dir / "manifest.json"));
}

TEST_CASE("huge lambda writes a zero direction and the all-shrunk flag") {
    const fs::path dir = fresh_dir("shsic_cli_zero");
    REQUIRE(run_cli("simulate --study 1 --n 20 --p 4 --seed 3 --out-dir " + dir.string()) == 0);
    const fs::path fit_dir = fresh_dir("shsic_cli_zero_fit");
    REQUIRE(run_cli("fit --x " + (dir / "X.csv").string() + " --y " + (dir / "Y.csv").string() +
                    " --lambda 1e9 --out-dir " + fit_dir.string()) == 0);
    const Eigen::MatrixXd beta =
        shsic::read_csv((fit_dir / "beta_hat.csv").string(), {.index_column = true}).values;
    CHECK(beta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(slurp(fit_dir / "manifest.json").find("\"all_shrunk\": true") != std::string::npos);
}

TEST_CASE("missing input files exit with the data-error code") {
    CHECK(run_cli("fit --x /nonexistent/x.csv --y /nonexistent/y.csv --lambda 0.1") == 3);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("simulate --study 9") == 2);
    CHECK(run_cli("fit") == 2); // lambda and files missing
    CHECK(run_cli("definitely-not-a-command") == 2);
}

TEST_CASE("malformed csv is reported with position") {
    const fs::path dir = fresh_dir("shsic_cli_badcsv");
    {
        std::ofstream x(dir / "X.csv");
        x << "1.0,2.0\n3.0,oops\n";
        std::ofstream y(dir / "Y.csv");
        y << "1.0\n2.0\n";
    }
    CHECK(run_cli("fit --x " + (dir / "X.csv").string() + " --y " + (dir / "Y.csv").string() +
                  " --lambda 0.1") == 3);
}

TEST_CASE("dimension mismatch between X and Y is a data error") {
    const fs::path dir = fresh_dir("shsic_cli_mismatch");
    {
        std::ofstream x(dir / "X.csv");
        x << "1.0,2.0\n3.0,4.0\n5.0,6.5\n";
        std::ofstream y(dir / "Y.csv");
        y << "1.0\n2.0\n";
    }
    CHECK(run_cli("fit --x " + (dir / "X.csv").string() + " --y " + (dir / "Y.csv").string() +
                  " --lambda 0.1") == 3);
}

TEST_CASE("hsic favors the true direction and matches across input routes") {
    const fs::path dir = fresh_dir("shsic_cli_hsic");
    REQUIRE(run_cli("simulate --study 2 --n 60 --p 6 --seed 11 --out-dir " + dir.string()) == 0);

    // True direction (from truth.csv) vs an off-support direction.
    const Eigen::MatrixXd truth =
        shsic::read_csv((dir / "truth.csv").string(), {.index_column = true}).values;
    Eigen::MatrixXd other = Eigen::MatrixXd::Zero(6, 1);
    other(4, 0) = 1.0;
    shsic::write_csv((dir / "beta_true.csv").string(), truth);
    shsic::write_csv((dir / "beta_other.csv").string(), other);

    const std::string base = "hsic --x " + (dir / "X.csv").string() + " --y " +
                             (dir / "Y.csv").string() + " --out-dir " + dir.string();
    const double stat_true =
        std::stod(run_cli_stdout(base + " --beta " + (dir / "beta_true.csv").string()));
    const double stat_other =
        std::stod(run_cli_stdout(base + " --beta " + (dir / "beta_other.csv").string()));
    CHECK(stat_true > stat_other);

    // Pi route equals the beta route for Pi = beta beta^T / (beta^T Sigma beta).
    const shsic::GeneratedData gen = shsic::generate(shsic::StudySpec{2, 60, 6, 11});
    const shsic::CovarianceContext ctx = shsic::covariance_context(gen.data);
    const Eigen::VectorXd b = truth.col(0);
    const Eigen::MatrixXd pi = b * b.transpose() / (b.dot(ctx.sigma_hat * b));
    shsic::write_csv((dir / "pi.csv").string(), pi);
    const double stat_pi = std::stod(run_cli_stdout(base + " --pi " + (dir / "pi.csv").string()));
    CHECK(stat_pi == doctest::Approx(stat_true).epsilon(1e-10));

    // Exactly one of --beta/--pi.
    CHECK(run_cli(base) == 2);
    CHECK(run_cli(base + " --beta " + (dir / "beta_true.csv").string() + " --pi " +
                  (dir / "pi.csv").string()) == 2);
}

TEST_CASE("constant response reports zero dependence through the cli") {
    const fs::path dir = fresh_dir("shsic_cli_hsic_const");
    {
        std::ofstream x(dir / "X.csv");
        x << "0.4\n-1.0\n2.2\n0.9\n-0.3\n";
        std::ofstream y(dir / "Y.csv");
        y << "2.0\n2.0\n2.0\n2.0\n2.0\n";
        std::ofstream b(dir / "beta.csv");
        b << "1.0\n";
    }
    // Degenerate response is refused by the estimated-bandwidth kernel.
    CHECK(run_cli("hsic --x " + (dir / "X.csv").string() + " --y " + (dir / "Y.csv").string() +
                  " --beta " + (dir / "beta.csv").string() + " --out-dir " + dir.string()) == 3);
}

TEST_CASE("tune emits a one-row cv path for a single-lambda grid") {
    const fs::path dir = fresh_dir("shsic_cli_tune");
    REQUIRE(run_cli("simulate --study 2 --n 40 --p 5 --seed 13 --out-dir " + dir.string()) == 0);
    const fs::path tune_dir = fresh_dir("shsic_cli_tune_out");
    REQUIRE(run_cli("tune --x " + (dir / "X.csv").string() + " --y " + (dir / "Y.csv").string() +
                    " --lambda-grid 0.05 --folds 3 --no-standardize --seed 5 --out-dir " +
                    tune_dir.string()) == 0);
    const std::string cv = slurp(tune_dir / "cv_path.csv");
    CHECK(cv.find("lambda,mean_error,chosen,fold_1,fold_2,fold_3") == 0);
    CHECK(std::count(cv.begin(), cv.end(), '\n') == 2); // header + one row
    CHECK(fs::exists(tune_dir / "beta_hat.csv"));
}

TEST_CASE("tune rejects more folds than observations") {
    const fs::path dir = fresh_dir("shsic_cli_tune_folds");
    REQUIRE(run_cli("simulate --study 1 --n 12 --p 4 --seed 2 --out-dir " + dir.string()) == 0);
    CHECK(run_cli("tune --x " + (dir / "X.csv").string() + " --y " + (dir / "Y.csv").string() +
                  " --lambda-grid 0.1 --folds 13 --out-dir " + dir.string()) == 3);
}

TEST_CASE("single-threaded fits are byte-identical across runs") {
    const fs::path dir = fresh_dir("shsic_cli_det");
    REQUIRE(run_cli("simulate --study 2 --n 40 --p 8 --seed 19 --out-dir " + dir.string()) == 0);
    const fs::path a = fresh_dir("shsic_cli_det_a");
    const fs::path b = fresh_dir("shsic_cli_det_b");
    const std::string fit_args = "fit --x " + (dir / "X.csv").string() + " --y " +
                                 (dir / "Y.csv").string() +
                                 " --lambda 0.02 --threads 1 --seed 1 --out-dir ";
    REQUIRE(run_cli(fit_args + a.string()) == 0);
    REQUIRE(run_cli(fit_args + b.string()) == 0);
    CHECK(slurp(a / "beta_hat.csv") == slurp(b / "beta_hat.csv"));
    CHECK(slurp(a / "support.csv") == slurp(b / "support.csv"));
}

} // TEST_SUITE
