// Acceptance suite: every criterion prints one PASS/FAIL line with the
// measured quantity; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "oracles.hpp"
#include "shsic/prox.hpp"
#include "shsic/simbench.hpp"
#include "shsic/solver.hpp"
#include "shsic/tuning.hpp"
#include "testutil.hpp"

using namespace shsic;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++g_failures;
    }
}

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Instance {
    DataSet data;
    CenteredResponseKernel lk;
    CovarianceContext ctx;
};

Instance make_instance(Rng& rng, Eigen::Index n, Eigen::Index p) {
    DataSet data = testutil::random_dataset(rng, n, p);
    CenteredResponseKernel lk = response_kernel(data.y());
    CovarianceContext ctx = covariance_context(data);
    return Instance{std::move(data), std::move(lk), std::move(ctx)};
}

void criterion_1_gradient() {
    Rng rng(1001);
    const auto t0 = clock_type::now();
    double worst_fd = 0.0;
    double worst_lit = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 8 + static_cast<Eigen::Index>(rng.uniform_int(13)); // <= 20
        const Eigen::Index p = 3 + static_cast<Eigen::Index>(rng.uniform_int(4));  // <= 6
        const Instance ins = make_instance(rng, n, p);
        const Eigen::MatrixXd pi = testutil::random_pi_in_d(rng, ins.ctx);
        const Eigen::MatrixXd g = grad(pi, ins.data, ins.lk.ltilde);
        const Eigen::MatrixXd fd = oracle::grad_fd(pi, ins.data, ins.lk.ltilde, 1e-5);
        const Eigen::MatrixXd lit = oracle::grad_literal(pi, ins.data.x(), ins.lk.ltilde);
        worst_fd = std::max(worst_fd, (g - fd).norm() / std::max(1.0, g.norm()));
        worst_lit = std::max(worst_lit, (g - lit).cwiseAbs().maxCoeff());
    }
    const double elapsed = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "max FD rel err %.2e <= 1e-5, max literal-sum err %.2e <= 1e-12, %.2fs < 10s",
                  worst_fd, worst_lit, elapsed);
    report(1, "gradient correctness", worst_fd <= 1e-5 && worst_lit <= 1e-12 && elapsed < 10.0,
           detail);
}

void criterion_2_hsic_equivalence() {
    Rng rng(1002);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.uniform_int(8)); // <= 12
        const Eigen::VectorXd vx = testutil::random_vector(rng, n);
        const Eigen::VectorXd vy = testutil::random_vector(rng, n);
        const Eigen::MatrixXd k = gaussian_kernel_matrix(vx, 0.5 + rng.uniform());
        const Eigen::MatrixXd l = gaussian_kernel_matrix(vy, 0.5 + rng.uniform());
        const double v = hsic_v(k, center_kernel(l));
        const double u = oracle::hsic_u(k, l);
        worst = std::max(worst, std::abs(v - u));
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max |V-form - expansion| %.2e <= 1e-12", worst);
    report(2, "HSIC formula equivalence", worst <= 1e-12, detail);
}

void criterion_3_majorization() {
    Rng rng(1003);
    double worst = -1e300;
    for (int inst = 0; inst < 10; ++inst) {
        const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.uniform_int(8));
        const Eigen::Index p = 3 + static_cast<Eigen::Index>(rng.uniform_int(4));
        const Instance ins = make_instance(rng, n, p);
        const double lips = lipschitz_bound(ins.data, ins.lk.ltilde);
        for (int pair = 0; pair < 100; ++pair) {
            const Eigen::MatrixXd a = testutil::random_pi_in_d(rng, ins.ctx);
            const Eigen::MatrixXd b = testutil::random_pi_in_d(rng, ins.ctx);
            const double fa = loss(a, ins.data, ins.lk.ltilde);
            const double fb = loss(b, ins.data, ins.lk.ltilde);
            const Eigen::MatrixXd gb = grad(b, ins.data, ins.lk.ltilde);
            const double rhs = fb + ((a - b).array() * gb.array()).sum() +
                               0.5 * lips * (a - b).squaredNorm();
            worst = std::max(worst, fa - rhs);
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max violation %.2e <= 1e-12", worst);
    report(3, "majorization property", worst <= 1e-12, detail);
}

void criterion_4_projection() {
    Rng rng(1004);
    double worst_opt = 0.0;
    double worst_idem = 0.0;
    bool nonexpansive = true;
    std::vector<Eigen::MatrixXd> projected;
    std::vector<Eigen::MatrixXd> originals;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::MatrixXd w = 2.0 * testutil::random_symmetric(rng, 5);
        const Eigen::MatrixXd h = project_trace_psd(w);
        const Eigen::MatrixXd ref = oracle::dykstra_trace_psd(w, 20000, 1e-13);
        worst_opt = std::max(worst_opt, (h - ref).norm());
        worst_idem = std::max(worst_idem, (project_trace_psd(h) - h).norm());
        originals.push_back(w);
        projected.push_back(h);
    }
    for (std::size_t i = 1; i < projected.size(); ++i) {
        const double lhs = (projected[i] - projected[i - 1]).norm();
        const double rhs = (originals[i] - originals[i - 1]).norm();
        if (lhs > rhs + 1e-12) {
            nonexpansive = false;
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail),
                  "max oracle dist %.2e <= 1e-6, max idempotence drift %.2e, nonexpansive %s",
                  worst_opt, worst_idem, nonexpansive ? "yes" : "no");
    report(4, "projection optimality", worst_opt <= 1e-6 && worst_idem <= 1e-9 && nonexpansive,
           detail);
}

void criterion_5_subproblem() {
    Rng rng(1005);
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
        const Eigen::Index n = 12 + static_cast<Eigen::Index>(rng.uniform_int(9));
        const Eigen::Index p = 4 + static_cast<Eigen::Index>(rng.uniform_int(3)); // <= 6
        const Instance ins = make_instance(rng, n, p);
        const double lips = lipschitz_bound(ins.data, ins.lk.ltilde);

        const Eigen::MatrixXd pi0 = testutil::random_pi_in_d(rng, ins.ctx);
        const Eigen::MatrixXd g = grad(pi0, ins.data, ins.lk.ltilde);
        const Eigen::MatrixXd anchor = mm_subproblem_target(pi0, g, lips);
        const double lambda = 0.02 * (1.0 + rng.uniform()) * lips * anchor.cwiseAbs().maxCoeff();

        SolverConfig config;
        config.lambda = lambda;
        SolverParams params = resolve_params(config, ins.data, ins.lk.ltilde, ins.ctx);
        SolverState state =
            make_state(pi0, ins.ctx.sigma_half * pi0 * ins.ctx.sigma_half, ins.ctx);
        for (int j = 0; j < 20000; ++j) {
            double dual = 0.0;
            const double primal = ladmm_iterate(state, params, anchor, ins.ctx, &dual);
            if (primal <= 1e-10 * std::max(1.0, state.h.norm()) && dual <= 1e-10) {
                break;
            }
        }
        const Eigen::MatrixXd ref =
            oracle::subproblem_reference(anchor, lambda, lips, ins.ctx.sigma_hat, 60000, 1e-12);
        worst = std::max(worst, (state.pi - ref).norm());
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max Frobenius gap to reference %.2e <= 1e-4", worst);
    report(5, "subproblem optimality", worst <= 1e-4, detail);
}

struct BenchOutcome {
    MetricsReport report;
    double seconds = 0.0;
};

BenchOutcome run_study(int study, int replicates) {
    StudySpec spec;
    spec.study = study;
    spec.n = 200;
    spec.p = 150;
    spec.seed = 20240000 + static_cast<std::uint64_t>(study);
    BenchmarkConfig config;
    config.replicates = replicates;
    config.tune.folds = 5;
    config.tune.grid_size = 10;
    config.max_workers = 8;
    const auto t0 = clock_type::now();
    BenchOutcome out;
    out.report = run_benchmark(spec, config);
    out.seconds = seconds_since(t0);
    return out;
}

void criteria_6_7_8_benchmarks() {
    const int replicates = 20;
    const BenchOutcome s2 = run_study(2, replicates);
    const BenchOutcome s4 = run_study(4, replicates);
    const BenchOutcome s5 = run_study(5, replicates);

    double max_violation = 0.0;
    for (const BenchOutcome* b : {&s2, &s4, &s5}) {
        max_violation = std::max(max_violation, b->report.max_monotonicity_violation);
    }
    char detail6[96];
    std::snprintf(detail6, sizeof(detail6), "max objective increase %.2e <= 1e-10",
                  max_violation);
    report(6, "MM monotonicity over benchmark runs", max_violation <= 1e-10, detail6);

    char detail7[256];
    std::snprintf(detail7, sizeof(detail7),
                  "study2 TPR %.3f>=0.95 FPR %.3f<=0.05 corr %.3f>=0.90; "
                  "study4 TPR %.3f>=0.85 corr %.3f>=0.75; %.0fs+%.0fs",
                  s2.report.tpr_mean, s2.report.fpr_mean, s2.report.corr_mean,
                  s4.report.tpr_mean, s4.report.corr_mean, s2.seconds, s4.seconds);
    const bool pass7 = s2.report.tpr_mean >= 0.95 && s2.report.fpr_mean <= 0.05 &&
                       s2.report.corr_mean >= 0.90 && s4.report.tpr_mean >= 0.85 &&
                       s4.report.corr_mean >= 0.75;
    report(7, "table-1 reproduction (studies 2 and 4, scaled)", pass7, detail7);

    char detail8[160];
    std::snprintf(detail8, sizeof(detail8), "study5 TPR %.3f>=0.95 corr %.3f>=0.90; %.0fs",
                  s5.report.tpr_mean, s5.report.corr_mean, s5.seconds);
    const bool pass8 = s5.report.tpr_mean >= 0.95 && s5.report.corr_mean >= 0.90;
    report(8, "table-2 reproduction (study 5, scaled)", pass8, detail8);
}

void criterion_9_loo_identity() {
    Rng rng(1009);
    double worst = 0.0;
    for (const Eigen::Index n : {20L, 35L, 50L}) {
        const Eigen::MatrixXd x = testutil::random_matrix(rng, n, 4);
        const Eigen::MatrixXd y = testutil::random_matrix(rng, n, 1);
        const Eigen::VectorXd beta = testutil::random_vector(rng, 4);
        const Eigen::VectorXd z = x * beta;
        for (const double h : {0.1, 0.5, 1.0, 4.0}) {
            worst = std::max(worst, std::abs(loo_sse(z, y, h) - oracle::loo_sse_refit(z, y, h)));
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max |single-fit - refit| %.2e <= 1e-10", worst);
    report(9, "leave-one-out single-fit identity", worst <= 1e-10, detail);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_10_determinism() {
    const fs::path base = fs::temp_directory_path() / "shsic_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string cli = SHSIC_CLI_PATH;

    auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    bool ok = run("simulate --study 2 --n 100 --p 30 --seed 42 --out-dir " + base.string());
    const std::string fit_args = "fit --x " + (base / "X.csv").string() + " --y " +
                                 (base / "Y.csv").string() +
                                 " --lambda 0.02 --threads 1 --out-dir ";
    ok = ok && run(fit_args + (base / "a").string());
    ok = ok && run(fit_args + (base / "b").string());
    const bool beta_same = slurp(base / "a" / "beta_hat.csv") == slurp(base / "b" / "beta_hat.csv");
    const bool support_same =
        slurp(base / "a" / "support.csv") == slurp(base / "b" / "support.csv");
    const bool nonempty = !slurp(base / "a" / "beta_hat.csv").empty();
    char detail[96];
    std::snprintf(detail, sizeof(detail), "runs ok %d, beta identical %d, support identical %d",
                  ok ? 1 : 0, beta_same ? 1 : 0, support_same ? 1 : 0);
    report(10, "single-thread byte determinism", ok && nonempty && beta_same && support_same,
           detail);
}

} // namespace

int main() {
    omp_set_num_threads(std::min(8, omp_get_max_threads()));

    criterion_1_gradient();
    criterion_2_hsic_equivalence();
    criterion_3_majorization();
    criterion_4_projection();
    criterion_5_subproblem();
    criterion_9_loo_identity();
    criterion_10_determinism();
    criteria_6_7_8_benchmarks();

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
