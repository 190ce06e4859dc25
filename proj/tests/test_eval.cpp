#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "diffscm/eval.hpp"
#include "diffscm/rng.hpp"
#include "oracles.hpp"

using namespace diffscm;

namespace {

Eigen::MatrixXd gaussian_block(Rng& rng, int rows, int cols, double mean, double sd) {
    Eigen::MatrixXd out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out(r, c) = mean + sd * rng.normal();
    return out;
}

ExperimentConfig tiny_config(const std::string& benchmark, std::vector<std::string> methods) {
    ExperimentConfig cfg;
    cfg.benchmark.name = benchmark;
    cfg.benchmark.J = 1;
    cfg.n_list = {400};
    cfg.methods = std::move(methods);
    cfg.hyper.epochs = 80;
    cfg.sample_count = 400;
    cfg.cf_units_cap = 40;
    return cfg;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

TEST_SUITE("eval") {

TEST_CASE("mmd of a set against itself is exactly zero") {
    Rng rng(1);
    const auto A = gaussian_block(rng, 40, 3, 0.0, 1.0);
    CHECK(mmd2(A, A) == 0.0);
}

TEST_CASE("mmd separates shifted distributions and vanishes on the null") {
    Rng rng(2);
    const auto A = gaussian_block(rng, 500, 1, 0.0, 1.0);
    const auto B = gaussian_block(rng, 500, 1, 5.0, 1.0);
    const auto A2 = gaussian_block(rng, 500, 1, 0.0, 1.0);
    CHECK(mmd2(A, B) > 0.5);
    CHECK(mmd2(A, A2) < 0.02);
    CHECK(mmd2(A, A2) >= 0.0);
}

TEST_CASE("mmd agrees with the naive reference implementation") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 5 + static_cast<int>(rng.uniform_int(45));
        const int n = 5 + static_cast<int>(rng.uniform_int(45));
        const int d = 1 + static_cast<int>(rng.uniform_int(3));
        const auto A = gaussian_block(rng, m, d, rng.uniform(-1, 1), rng.uniform(0.5, 2.0));
        const auto B = gaussian_block(rng, n, d, rng.uniform(-1, 1), rng.uniform(0.5, 2.0));
        CHECK(std::abs(mmd2(A, B) - testoracle::mmd2_naive(A, B)) < 1e-12);
        CHECK(std::abs(mmd2(A, B) - mmd2(B, A)) < 1e-12); // symmetry
    }
}

TEST_CASE("mmd input validation and fixed bandwidth") {
    Rng rng(4);
    const auto A = gaussian_block(rng, 10, 2, 0, 1);
    CHECK_THROWS_AS(mmd2(Eigen::MatrixXd(0, 2), A), EmptySampleSet);
    CHECK_THROWS_AS(mmd2(A, gaussian_block(rng, 10, 3, 0, 1)), DimensionMismatch);
    MmdSpec fixed;
    fixed.bandwidth = 2.0;
    CHECK(mmd2(A, A, fixed) == 0.0);
}

TEST_CASE("mse basics and a hand-computed example") {
    std::vector<Eigen::VectorXd> p, t;
    p.push_back(Eigen::VectorXd::Constant(1, 1.0));
    t.push_back(Eigen::VectorXd::Constant(1, 1.0));
    CHECK(mse(p, t) == 0.0);

    // constant offset of 1 on every scalar coordinate
    std::vector<Eigen::VectorXd> p1, t1;
    for (int u = 0; u < 5; ++u) {
        p1.push_back(Eigen::VectorXd::Constant(1, u + 1.0));
        t1.push_back(Eigen::VectorXd::Constant(1, static_cast<double>(u)));
    }
    CHECK(mse(p1, t1) == 1.0);

    // worked three-unit example: ((0.5)^2 + (1.5)^2 + (1.0)^2) / 3
    std::vector<Eigen::VectorXd> p2, t2;
    p2.push_back(Eigen::VectorXd::Constant(1, 1.5));
    t2.push_back(Eigen::VectorXd::Constant(1, 1.0));
    p2.push_back(Eigen::VectorXd::Constant(1, -0.5));
    t2.push_back(Eigen::VectorXd::Constant(1, 1.0));
    p2.push_back(Eigen::VectorXd::Constant(1, 2.0));
    t2.push_back(Eigen::VectorXd::Constant(1, 1.0));
    CHECK(mse(p2, t2) == doctest::Approx((0.25 + 2.25 + 1.0) / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(mse(p1, t2), LengthMismatch);
    CHECK_THROWS_AS(mse(std::vector<Eigen::VectorXd>{}, std::vector<Eigen::VectorXd>{}),
                    LengthMismatch);
}

TEST_CASE("mse is invariant under consistent unit permutation") {
    Rng rng(5);
    std::vector<Eigen::VectorXd> p, t;
    for (int u = 0; u < 20; ++u) {
        p.push_back(Eigen::VectorXd::Constant(1, rng.normal()));
        t.push_back(Eigen::VectorXd::Constant(1, rng.normal()));
    }
    auto p2 = p;
    auto t2 = t;
    std::reverse(p2.begin(), p2.end());
    std::reverse(t2.begin(), t2.end());
    CHECK(mse(p, t) == doctest::Approx(mse(p2, t2)).epsilon(1e-15));
}

TEST_CASE("experiment runs are reproducible") {
    const auto cfg = tiny_config("triangle", {"bdcm"});
    const auto r1 = run_experiment(cfg, {7});
    const auto r2 = run_experiment(cfg, {7});
    REQUIRE(r1.rows.size() == r2.rows.size());
    for (std::size_t i = 0; i < r1.rows.size(); ++i) {
        CHECK(r1.rows[i].value == r2.rows[i].value);
        CHECK(r1.rows[i].query == r2.rows[i].query);
    }
    // identical apart from wall-clock timings
    auto j1 = r1.to_json()["rows"], j2 = r2.to_json()["rows"];
    for (auto& row : j1) row.erase("seconds");
    for (auto& row : j2) row.erase("seconds");
    CHECK(j1 == j2);
}

TEST_CASE("report aggregates are recomputable from the raw rows") {
    auto cfg = tiny_config("chain3", {"bdcm"});
    cfg.hyper.epochs = 40;
    const auto report = run_experiment(cfg, {1, 2, 3});
    for (const auto& agg : report.aggregate) {
        std::vector<double> vals;
        for (const auto& row : report.rows)
            if (row.n == agg.n && row.method == agg.method && row.query == agg.query)
                vals.push_back(row.value);
        REQUIRE(static_cast<int>(vals.size()) == 3);
        double mean = 0;
        for (const double v : vals) mean += v;
        mean /= vals.size();
        double sd = 0;
        for (const double v : vals) sd += (v - mean) * (v - mean);
        sd = std::sqrt(sd / (vals.size() - 1));
        CHECK(agg.mean == doctest::Approx(mean).epsilon(1e-12));
        CHECK(agg.sd == doctest::Approx(sd).epsilon(1e-12));
    }
}

TEST_CASE("worker count does not change the report") {
    auto cfg = tiny_config("pair", {"bdcm"});
    cfg.hyper.epochs = 30;
    cfg.sample_count = 200;
    const auto r1 = run_experiment(cfg, {4, 5}, 1);
    const auto r2 = run_experiment(cfg, {4, 5}, 2);
    REQUIRE(r1.rows.size() == r2.rows.size());
    for (std::size_t i = 0; i < r1.rows.size(); ++i)
        CHECK(r1.rows[i].value == r2.rows[i].value);
}

TEST_CASE("backdoor conditioning beats parents-only under hidden confounding") {
    // same generated data; the hidden variant drops the confounder from the
    // declared graph, so parents-only conditioning loses the adjustment
    auto adjusted = tiny_config("triangle", {"bdcm"});
    auto confounded = tiny_config("triangle_hidden", {"dcm"});
    const std::vector<std::uint64_t> seeds{11, 12, 13, 14, 15};
    const auto r_adj = run_experiment(adjusted, seeds);
    const auto r_conf = run_experiment(confounded, seeds);
    std::vector<double> int_adj, int_conf;
    for (const auto& row : r_adj.rows)
        if (row.query == "int") int_adj.push_back(row.value);
    for (const auto& row : r_conf.rows)
        if (row.query == "int") int_conf.push_back(row.value);
    REQUIRE(int_adj.size() == 5);
    REQUIRE(int_conf.size() == 5);
    CHECK(median(int_adj) < median(int_conf));
}

TEST_CASE("non-functional ablation drops the coefficient covariates") {
    ExperimentConfig cfg;
    cfg.benchmark.name = "pfst33";
    cfg.benchmark.J = 2;
    cfg.n_list = {60};
    cfg.methods = {"bdcm", "bdcm-nf"};
    cfg.hyper.epochs = 60;
    cfg.sample_count = 300;
    cfg.cf_units_cap = 20;
    const auto report = run_experiment(cfg, {3});
    // both methods produce finite metrics for every query type
    std::map<std::string, int> rows_per_method;
    for (const auto& row : report.rows) {
        CHECK(std::isfinite(row.value));
        CHECK(row.value >= 0.0);
        rows_per_method[row.method]++;
    }
    CHECK(rows_per_method["bdcm"] == 3);
    CHECK(rows_per_method["bdcm-nf"] == 3);
    // and they genuinely differ: the ablated conditionals exclude X4..X21
    double obs_f = -1, obs_nf = -1;
    for (const auto& row : report.rows) {
        if (row.query != "obs") continue;
        if (row.method == "bdcm") obs_f = row.value;
        if (row.method == "bdcm-nf") obs_nf = row.value;
    }
    CHECK(obs_f != obs_nf);
}

TEST_CASE("density grids are emitted when requested") {
    auto cfg = tiny_config("pair", {"bdcm"});
    cfg.hyper.epochs = 30;
    cfg.sample_count = 150;
    cfg.densities = true;
    const auto report = run_experiment(cfg, {9});
    REQUIRE(!report.densities.empty());
    const auto& g = report.densities.front();
    CHECK(g.node == 2);
    CHECK(g.x.size() == 129);
    // densities integrate to roughly one over the grid
    double mass = 0;
    for (std::size_t i = 0; i + 1 < g.x.size(); ++i)
        mass += 0.5 * (g.oracle_density[i] + g.oracle_density[i + 1]) * (g.x[i + 1] - g.x[i]);
    CHECK(mass == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("config validation happens before any work") {
    auto cfg = tiny_config("pair", {"nope-method"});
    CHECK_THROWS_AS(run_experiment(cfg, {1}), ConfigError);
    auto cfg2 = tiny_config("pair", {"bdcm"});
    cfg2.hyper.epochs = -1;
    CHECK_THROWS_AS(run_experiment(cfg2, {1}), InvalidHyper);
    CHECK_THROWS_AS(run_experiment(tiny_config("pair", {"bdcm"}), {}), ConfigError);
}

} // TEST_SUITE
