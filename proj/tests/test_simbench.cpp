#include <doctest.h>

#include <cmath>

#include "shsic/simbench.hpp"
#include "testutil.hpp"

using namespace shsic;

TEST_SUITE("simbench") {

TEST_CASE("study 1 truth: support {1,2,3}, unit norm") {
    const GeneratedData gen = generate(StudySpec{1, 50, 10, 4});
    CHECK(gen.support == std::vector<int>{0, 1, 2});
    CHECK(gen.beta.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gen.beta(0) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(gen.data.q() == 1);
}

TEST_CASE("study 3 truth: support {1,2,3,4} with coefficients 1/2") {
    const GeneratedData gen = generate(StudySpec{3, 50, 12, 4});
    CHECK(gen.support == std::vector<int>{0, 1, 2, 3});
    CHECK(gen.beta(0) == 0.5);
    CHECK(gen.beta(4) == 0.0);
}

TEST_CASE("studies 5 and 6 are bivariate") {
    CHECK(generate(StudySpec{5, 40, 8, 1}).data.q() == 2);
    CHECK(generate(StudySpec{6, 40, 8, 1}).data.q() == 2);
}

TEST_CASE("study 4 first coordinate is the folded sum plus noise") {
    const GeneratedData gen = generate(StudySpec{4, 200, 8, 9});
    const Eigen::MatrixXd& x = gen.data.x();
    const Eigen::VectorXd resid =
        x.col(0) - (x.col(1) + x.col(2)).cwiseAbs();
    CHECK(resid.cwiseAbs().maxCoeff() < 0.6);          // 0.1 xi stays small
    CHECK(sample_sd(resid) == doctest::Approx(0.1).epsilon(0.3));
}

TEST_CASE("generated covariance approximates the AR(1) design") {
    const GeneratedData gen = generate(StudySpec{1, 10000, 5, 31});
    const Eigen::MatrixXd& x = gen.data.x();
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / (x.rows() - 1.0);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            CHECK(std::abs(cov(i, j) - std::pow(0.5, std::abs(i - j))) < 0.05);
        }
    }
}

TEST_CASE("generation is deterministic per seed and distinct across seeds") {
    const GeneratedData a = generate(StudySpec{2, 30, 6, 77});
    const GeneratedData b = generate(StudySpec{2, 30, 6, 77});
    const GeneratedData c = generate(StudySpec{2, 30, 6, 78});
    CHECK((a.data.x() - b.data.x()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.data.y() - b.data.y()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.data.x() - c.data.x()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("unknown study and undersized designs are rejected") {
    CHECK_THROWS_AS(generate(StudySpec{9, 50, 10, 1}), data_error);
    CHECK_THROWS_AS(generate(StudySpec{0, 50, 10, 1}), data_error);
    CHECK_THROWS_AS(generate(StudySpec{1, 50, 3, 1}), data_error);
    CHECK_THROWS_AS(generate(StudySpec{1, 5, 10, 1}), data_error);
}

TEST_CASE("metrics on the exact truth") {
    const GeneratedData gen = generate(StudySpec{1, 60, 10, 3});
    const ReplicateMetrics m = metrics(gen.beta, gen.beta, gen.data.x());
    CHECK(m.tpr == 1.0);
    CHECK(m.fpr == 0.0);
    CHECK(m.corr == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metrics with full support flags every null variable") {
    const GeneratedData gen = generate(StudySpec{1, 60, 10, 3});
    const Eigen::VectorXd dense = Eigen::VectorXd::Constant(10, 0.4);
    const ReplicateMetrics m = metrics(dense, gen.beta, gen.data.x());
    CHECK(m.tpr == 1.0);
    CHECK(m.fpr == 1.0);
}

TEST_CASE("metrics are sign- and scale-invariant") {
    const GeneratedData gen = generate(StudySpec{2, 60, 8, 3});
    const ReplicateMetrics a = metrics(gen.beta, gen.beta, gen.data.x());
    const ReplicateMetrics b = metrics(-3.7 * gen.beta, gen.beta, gen.data.x());
    CHECK(a.tpr == b.tpr);
    CHECK(a.fpr == b.fpr);
    CHECK(a.corr == doctest::Approx(b.corr).epsilon(1e-12));
    CHECK(b.corr == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metrics truncate at the 1e-4 rule after normalization") {
    const GeneratedData gen = generate(StudySpec{1, 60, 10, 3});
    Eigen::VectorXd almost = gen.beta;
    almost(7) = 0.99e-4; // below the cut after normalization (norm > 1 shrinks it further)
    const ReplicateMetrics m = metrics(almost, gen.beta, gen.data.x());
    CHECK(m.fpr == 0.0);
    Eigen::VectorXd above = gen.beta;
    above(7) = 2e-4;
    const ReplicateMetrics m2 = metrics(above, gen.beta, gen.data.x());
    CHECK(m2.fpr == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("zero estimate is flagged with zero metrics") {
    const GeneratedData gen = generate(StudySpec{1, 60, 10, 3});
    const ReplicateMetrics m =
        metrics(Eigen::VectorXd::Zero(10), gen.beta, gen.data.x());
    CHECK(m.zero_estimate);
    CHECK(m.tpr == 0.0);
    CHECK(m.fpr == 0.0);
    CHECK(m.corr == 0.0);
}

TEST_CASE("single-replicate benchmark equals its one row") {
    StudySpec spec{2, 40, 6, 21};
    BenchmarkConfig config;
    config.replicates = 1;
    config.solver.outer_max = 25;
    config.tune.grid_size = 4;
    config.tune.folds = 3;
    const MetricsReport report = run_benchmark(spec, config);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.tpr_mean == report.rows[0].tpr);
    CHECK(report.fpr_mean == report.rows[0].fpr);
    CHECK(report.corr_mean == report.rows[0].corr);
    CHECK(report.failures == 0);
    CHECK(report.monotone_ok);
}

TEST_CASE("benchmark means are the arithmetic average of replicates") {
    StudySpec spec{1, 40, 6, 22};
    BenchmarkConfig config;
    config.replicates = 3;
    config.solver.outer_max = 20;
    config.tune.grid_size = 4;
    config.tune.folds = 3;
    const MetricsReport report = run_benchmark(spec, config);
    REQUIRE(report.rows.size() == 3);
    double tpr = 0.0;
    for (const ReplicateMetrics& m : report.rows) {
        CHECK_FALSE(m.failed);
        tpr += m.tpr;
    }
    CHECK(report.tpr_mean == doctest::Approx(tpr / 3.0).epsilon(1e-15));
}

} // TEST_SUITE
