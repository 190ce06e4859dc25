#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "diffscm/cli.hpp"

using namespace diffscm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("diffscm_cli_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_SUITE("cli") {

TEST_CASE("do-expression parsing") {
    const auto scm = instantiate_benchmark({"chain3", 4, 1, 6, "fourier"}, 1);
    const auto dos = parse_do_expression("X1=0.5,2=-1.25", scm.graph);
    REQUIRE(dos.size() == 2);
    CHECK(dos.at(1)[0] == 0.5);
    CHECK(dos.at(2)[0] == -1.25);

    try {
        parse_do_expression("X1:0.5", scm.graph);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("X1:0.5") != std::string::npos);
    }
    try {
        parse_do_expression("X1=abc", scm.graph);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("abc") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_do_expression("X12=1", scm.graph), UnknownNode);
    CHECK_THROWS_AS(parse_do_expression("", scm.graph), ParseError);
}

TEST_CASE("record csv round trip") {
    TempDir dir;
    Record rec;
    rec[1] = Eigen::VectorXd::Constant(1, 0.123456789012345);
    rec[3] = Eigen::Vector2d(1.5, -2.5);
    save_record_csv(rec, dir.file("rec.csv"));
    const auto back = load_record_csv(dir.file("rec.csv"));
    REQUIRE(back.size() == 2);
    CHECK(back.at(1)[0] == rec.at(1)[0]);
    CHECK(back.at(3)[0] == 1.5);
    CHECK(back.at(3)[1] == -2.5);
}

TEST_CASE("generate writes deterministic files and validates the benchmark name") {
    TempDir dir;
    GenerateOptions opts;
    opts.benchmark = {"pair", 50, 1, 6, "fourier"};
    opts.seed = 7;
    opts.out_prefix = dir.file("ds");
    REQUIRE(cmd_generate(opts) == 0);
    const std::string first = slurp(dir.file("ds.csv"));
    REQUIRE(cmd_generate(opts) == 0);
    CHECK(slurp(dir.file("ds.csv")) == first); // byte-identical re-run

    GenerateOptions bad = opts;
    bad.benchmark.name = "not-a-benchmark";
    CHECK(cmd_generate(bad) == 1);
}

TEST_CASE("end-to-end: generate, fit, query, checkpoint reload") {
    TempDir dir;
    GenerateOptions gen;
    gen.benchmark = {"chain3", 150, 1, 6, "fourier"};
    gen.seed = 3;
    gen.out_prefix = dir.file("panel");
    REQUIRE(cmd_generate(gen) == 0);

    FitOptions fit;
    fit.dataset_prefix = dir.file("panel");
    fit.hyper.epochs = 25;
    fit.seed = 3;
    fit.checkpoint_out = dir.file("model.json");
    REQUIRE(cmd_fit(fit) == 0);

    QueryOptions q;
    q.checkpoint = dir.file("model.json");
    q.do_expr = "X1=0.5";
    q.count = 60;
    q.seed = 5;
    q.out_csv = dir.file("samples.csv");
    REQUIRE(cmd_query(q) == 0);
    // every sampled row keeps the clamped coordinate
    std::ifstream in(dir.file("samples.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "sample,node,component,value");
    int clamped = 0;
    while (std::getline(in, line)) {
        if (line.find(",1,0,") != std::string::npos) {
            CHECK(line.substr(line.rfind(',') + 1) == "0.5");
            ++clamped;
        }
    }
    CHECK(clamped == 60);

    // a second run from the same checkpoint is byte-identical
    QueryOptions q2 = q;
    q2.out_csv = dir.file("samples2.csv");
    REQUIRE(cmd_query(q2) == 0);
    CHECK(slurp(dir.file("samples.csv")) == slurp(dir.file("samples2.csv")));

    // counterfactual query against a factual record file
    Record factual;
    const auto loaded = load_dataset(dir.file("panel"));
    for (int k = 1; k <= 3; ++k) factual[k] = loaded.dataset.value(4, 0, k);
    save_record_csv(factual, dir.file("factual.csv"));
    QueryOptions cf;
    cf.checkpoint = dir.file("model.json");
    cf.counterfactual = true;
    cf.factual_csv = dir.file("factual.csv");
    cf.do_expr = "X2=0";
    cf.out_csv = dir.file("cf.csv");
    REQUIRE(cmd_query(cf) == 0);
    const auto rec = load_record_csv(dir.file("cf.csv"));
    CHECK(rec.at(2)[0] == 0.0);              // clamped
    CHECK(rec.at(1)[0] == factual.at(1)[0]); // non-descendant unchanged

    // malformed do-expression fails validation
    QueryOptions badq = q;
    badq.do_expr = "X1=zz";
    CHECK(cmd_query(badq) == 1);
}

TEST_CASE("fit validates the config before compute") {
    TempDir dir;
    GenerateOptions gen;
    gen.benchmark = {"pair", 20, 1, 6, "fourier"};
    gen.out_prefix = dir.file("p");
    REQUIRE(cmd_generate(gen) == 0);
    FitOptions fit;
    fit.dataset_prefix = dir.file("p");
    fit.hyper.epochs = 0;
    fit.checkpoint_out = dir.file("m.json");
    CHECK(cmd_fit(fit) == 1);
    CHECK_FALSE(fs::exists(dir.file("m.json")));
    FitOptions missing;
    missing.dataset_prefix = dir.file("nothere");
    CHECK(cmd_fit(missing) == 2); // io failure
}

TEST_CASE("evaluate writes report files with all query blocks") {
    TempDir dir;
    EvaluateOptions opts;
    opts.config.benchmark = {"pair", 0, 1, 6, "fourier"};
    opts.config.n_list = {120};
    opts.config.methods = {"bdcm"};
    opts.config.hyper.epochs = 20;
    opts.config.sample_count = 120;
    opts.config.cf_units_cap = 10;
    opts.seeds = {1, 2};
    opts.out_prefix = dir.file("report");
    REQUIRE(cmd_evaluate(opts) == 0);

    std::ifstream in(dir.file("report.json"));
    nlohmann::json j;
    in >> j;
    REQUIRE(j.contains("rows"));
    std::set<std::string> queries;
    for (const auto& row : j["rows"]) queries.insert(row.at("query").get<std::string>());
    CHECK(queries == std::set<std::string>{"obs", "int", "cf"});

    // aggregate mean/sd recompute from the csv matches the json
    std::ifstream csv(dir.file("report.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "seed,n,method,query,value,seconds");
    std::map<std::string, std::vector<double>> byq;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        std::string seed, n, method, query, value, seconds;
        std::getline(ss, seed, ',');
        std::getline(ss, n, ',');
        std::getline(ss, method, ',');
        std::getline(ss, query, ',');
        std::getline(ss, value, ',');
        byq[query].push_back(std::stod(value));
    }
    for (const auto& agg : j["aggregate"]) {
        const auto& vals = byq[agg.at("query").get<std::string>()];
        REQUIRE(vals.size() == 2);
        const double mean = (vals[0] + vals[1]) / 2;
        CHECK(std::abs(agg.at("mean").get<double>() - mean) < 1e-12);
        const double sd = std::sqrt((std::pow(vals[0] - mean, 2) + std::pow(vals[1] - mean, 2)) / 1);
        CHECK(std::abs(agg.at("sd").get<double>() - sd) < 1e-12);
    }
}

} // TEST_SUITE
