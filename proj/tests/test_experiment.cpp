#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spg/experiment.hpp"
#include "spg/trace_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace spg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("spg_exp_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentSpec parse(const std::string& text) {
    std::istringstream in(text);
    return read_experiment(in);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) row.push_back(cell);
        if (!line.empty() && line.back() == ',') row.emplace_back();
        rows.push_back(row);
    }
    return rows;
}

} // namespace

TEST_CASE("experiment spec parsing and defaults") {
    ExperimentSpec s = parse("gamma=0.9\nsize=1500\nalgo=npg\nmax_iter=50\nstop_mean=off\nstop_after=1,2\n"
                             "sizes=1000, 2000\netas=1e-3,5e-4\n");
    CHECK(s.instance.params.gamma == 0.9);
    CHECK(s.algorithm == Algorithm::npg);
    CHECK(s.max_iter == 50);
    CHECK_FALSE(s.stop_mean_error.has_value());
    CHECK(s.stop_sup_error == std::optional<double>(0.15));
    CHECK(s.stop_after == std::vector<int>{1, 2});
    CHECK(s.sizes == std::vector<std::size_t>{1000, 2000});
    CHECK(s.etas == std::vector<double>{1e-3, 5e-4});
    CHECK(s.effective_eta() == doctest::Approx(0.01 / 5));
    s.algorithm = Algorithm::pg;
    CHECK(s.effective_eta() == doctest::Approx(0.01 / 10));

    std::ostringstream out;
    write_experiment(out, s);
    const ExperimentSpec back = parse(out.str());
    std::ostringstream out2;
    write_experiment(out2, back);
    CHECK(out.str() == out2.str());
}

TEST_CASE("experiment spec errors") {
    CHECK_THROWS_AS(parse("bogus=1\n"), Error);
    CHECK_THROWS_AS(parse("max_iter=ten\n"), Error);
    CHECK_THROWS_AS(parse("stop_after=1,,2\n"), Error);
    CHECK_THROWS_AS(parse("algo=sgd\n"), Error);
    try {
        parse("max_iter=ten\n");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("max_iter") != std::string::npos);
        CHECK(e.code() == ErrorCode::parse);
    }
}

TEST_CASE("single-key overrides") {
    ExperimentSpec s;
    set_experiment_key(s, "gamma", "0.9");
    set_experiment_key(s, "collapse", "off");
    set_experiment_key(s, "eta", "0.002");
    CHECK(s.instance.params.gamma == 0.9);
    CHECK_FALSE(s.instance.collapse);
    CHECK(s.eta == std::optional<double>(0.002));
    CHECK_THROWS_AS(set_experiment_key(s, "gamma", "high"), Error);
    CHECK_THROWS_AS(set_experiment_key(s, "nope", "1"), Error);
    CHECK(s.instance.params.gamma == 0.9);
}

TEST_CASE("build output is byte-deterministic") {
    TempDir a("build_a"), b("build_b");
    ExperimentSpec s;
    s.instance.params.target_size = 1000;
    write_build(a.path, s);
    write_build(b.path, s);
    for (const char* f : {"mdp.txt", "layout.csv", "params.txt"}) {
        INFO(f);
        CHECK(slurp(a.path / f) == slurp(b.path / f));
        CHECK_FALSE(slurp(a.path / f).empty());
    }
    std::ifstream mdp(a.path / "mdp.txt");
    const TabularMdp back = read_mdp_text(mdp);
    CHECK(back.num_states() == 1000);
}

TEST_CASE("build surfaces sizing errors") {
    TempDir d("build_small");
    ExperimentSpec s;
    s.instance.params.target_size = 20;
    CHECK_THROWS_AS(write_build(d.path, s), SizingError);
}

TEST_CASE("modified build lists two-action boosters") {
    TempDir d("build_mod");
    ExperimentSpec s;
    s.instance.variant = Variant::modified;
    write_build(d.path, s);
    const auto rows = read_csv(d.path / "layout.csv");
    REQUIRE(rows.size() == 2001);
    CHECK(rows[0] == std::vector<std::string>{"state_id", "class", "index_within_class", "num_actions"});
    std::size_t two_action_boosters = 0;
    for (const auto& r : rows) {
        if (r[1].rfind("booster_", 0) == 0 && r[3] == "2") ++two_action_boosters;
    }
    CHECK(two_action_boosters > 0);
}

TEST_CASE("run_experiment honours stop_after and the collapse switch") {
    ExperimentSpec s;
    s.algorithm = Algorithm::npg;
    s.max_iter = 5000;
    s.stop_after = {2};
    const RunResult collapsed = run_experiment(s);
    CHECK(collapsed.stop_reason == StopReason::crossing_target);
    CHECK(collapsed.collapsed);
    s.instance.collapse = false;
    const RunResult full = run_experiment(s);
    CHECK_FALSE(full.collapsed);
    CHECK(full.total_iterations == collapsed.total_iterations);

    s.stop_after = {9};
    CHECK_THROWS_AS(run_experiment(s), Error);
}

TEST_CASE("verify_instance and verify_run on the desk instance") {
    ExperimentSpec s;
    s.policies = 20;
    const auto inst = verify_instance(s);
    REQUIRE(inst.size() == 3);
    CHECK(inst[0].status == CheckStatus::skipped); // gamma^{2H} below 2/3
    CHECK(inst[1].status == CheckStatus::pass);
    CHECK(inst[2].status == CheckStatus::pass);

    s.max_iter = 200;
    const auto runs = verify_run(run_experiment(s));
    CHECK_FALSE(any_failed(runs));

    s.instance.params.target_size = 300000;
    for (const auto& r : verify_instance(s)) CHECK(r.status == CheckStatus::skipped);
}

TEST_CASE("sweep writes one directory per point and an aggregate") {
    TempDir d("sweep");
    ExperimentSpec s;
    s.algorithm = Algorithm::npg;
    s.max_iter = 5000;
    s.stop_after = {1, 2};
    s.sizes = {1000, 2000, 4000};
    const SweepResult res = run_sweep(s, d.path, 2);
    REQUIRE(res.points.size() == 3);
    for (const auto& p : res.points) {
        CHECK(p.ok);
        CHECK(fs::exists(d.path / p.dir / kSummaryJson));
        CHECK(fs::exists(d.path / p.dir / "params.txt"));
    }
    const auto rows = read_csv(d.path / "aggregate.csv");
    REQUIRE(rows.size() == 4);
    CHECK(rows[0][0] == "point");
    CHECK(rows[1][1] == "1000");
    CHECK(rows[3][1] == "4000");
    CHECK(fs::exists(d.path / "fit.csv"));
    CHECK(fs::exists(d.path / "fits.json"));
    bool saw_scaling = false;
    for (const auto& f : res.fits) saw_scaling = saw_scaling || f.name.rfind("t1-scaling", 0) == 0;
    CHECK(saw_scaling);
}

TEST_CASE("sweep records failing points and keeps going") {
    TempDir d("sweep_fail");
    ExperimentSpec s;
    s.max_iter = 3;
    s.sizes = {20, 1000};
    const SweepResult res = run_sweep(s, d.path, 1);
    REQUIRE(res.points.size() == 2);
    CHECK_FALSE(res.points[0].ok);
    CHECK(res.points[0].error.find("minimum feasible size") != std::string::npos);
    CHECK(res.points[1].ok);
    const auto rows = read_csv(d.path / "aggregate.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][4] == "failed");
    CHECK(rows[2][4] == "ok");
}
