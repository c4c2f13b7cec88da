#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "crnpost/io.hpp"
#include "crnpost/pipeline.hpp"
#include "fixtures.hpp"

using namespace crnpost;

namespace {

EnsembleMember member(std::initializer_list<int> labels, double loglik, std::size_t n_obs, std::size_t n_lib) {
    EnsembleMember m;
    m.crn = Crn::from_labels(labels);
    m.mle_rates.assign(n_lib, 0.0);
    for (auto r : m.crn) m.mle_rates[r] = 0.5 + 0.1 * static_cast<double>(r);
    m.mle_sigma2 = {0.01, 0.01};
    m.max_loglik = loglik;
    m.bic = bic(loglik, m.crn.size(), static_cast<double>(n_obs));
    return m;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("crnpost_unit_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("pooling over penalties") {
    const std::size_t n_lib = 6, n_obs = 20;
    const std::vector<PenaltyMembers> runs{
        {PenaltyKind::LogL1, {member({1}, 10.0, n_obs, n_lib), member({1, 2}, 11.0, n_obs, n_lib)}},
        {PenaltyKind::ApproxL0, {member({1}, 10.5, n_obs, n_lib), member({3}, 2.0, n_obs, n_lib)}},
    };
    const auto pooled = pool_members(runs);
    REQUIRE(pooled.size() == 3);
    CHECK(pooled[0].member.crn == Crn::from_labels({1}));
    CHECK(pooled[0].member.max_loglik == 10.5);
    CHECK(pooled[0].found_by == std::vector<PenaltyKind>{PenaltyKind::LogL1, PenaltyKind::ApproxL0});

    const auto s = summarise(runs, n_lib, PriorConfig::uniform(), 0.05);
    CHECK(s.per_penalty.size() == 2);
    double total = 0.0;
    for (const auto& e : s.pooled.entries) {
        total += e.prob;
        const auto it = std::find_if(pooled.begin(), pooled.end(), [&](const PooledCrn& p) { return p.member.crn == e.crn; });
        REQUIRE(it != pooled.end());
        const double expect = log_prior(static_cast<int>(e.crn.size()), static_cast<int>(n_lib), PriorConfig::uniform()) -
                              0.5 * (-2.0 * it->member.max_loglik + e.crn.size() * std::log(20.0));
        CHECK(e.log_unnorm == doctest::Approx(expect).epsilon(1e-13));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const auto back = summary_from_json(nlohmann::json::parse(summary_to_json(s).dump()));
    CHECK(back.found_by == s.found_by);
    REQUIRE(back.pooled.entries.size() == s.pooled.entries.size());
    for (std::size_t i = 0; i < s.pooled.entries.size(); ++i) {
        CHECK(back.pooled.entries[i].crn == s.pooled.entries[i].crn);
        CHECK(back.pooled.entries[i].prob == s.pooled.entries[i].prob);
        CHECK(back.pooled.entries[i].hpd == s.pooled.entries[i].hpd);
    }
}

TEST_CASE("end-to-end run on a two-species system") {
    const auto ab = enumerate_library({"A", "B"}, {Complex({1, 0}), Complex({0, 1})}, {});
    const auto data = fixtures::noisy_dataset(ab, Crn::from_labels({1}), {1.0, 0.0}, {1, 0},
                                              fixtures::linspace(0, 3, 31), 0.01, 1);
    RunConfig cfg;
    cfg.penalties = {PenaltyKind::LogL1, PenaltyKind::ApproxL0};
    cfg.n_start = 4;
    cfg.n_hyp = 2;
    cfg.seed = 5;
    cfg.trajectory_points = 51;

    const auto dir_a = scratch("a"), dir_b = scratch("b");
    const auto a = run_pipeline(data, ab, cfg, {dir_a, false});
    const auto b = run_pipeline(data, ab, cfg, {dir_b, false});
    for (const auto* f : {"config.json", "estimates_logl1.json", "ensemble_l0.json", "posterior.json"})
        CHECK_MESSAGE(slurp(dir_a / f) == slurp(dir_b / f), f);
    CHECK(a.summary.pooled.entries.front().crn == Crn::from_labels({1}));

    // members reload from the stage files
    const auto loaded = load_members(dir_a, cfg, ab.size());
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded[0].members.size() == a.runs[0].ensemble.members.size());
    for (std::size_t i = 0; i < loaded[0].members.size(); ++i) {
        CHECK(loaded[0].members[i].crn == a.runs[0].ensemble.members[i].crn);
        CHECK(loaded[0].members[i].bic == a.runs[0].ensemble.members[i].bic);
    }

    cfg.out_dir = dir_a.string();
    ReportOptions opts;
    opts.novel_x0 = std::vector<double>{0.5, 0.5};
    const auto files = write_report(a.summary, a.pooled, data, ab, cfg, opts);
    CHECK(std::find(files.begin(), files.end(), "manifest.json") != files.end());

    const std::size_t hpd = a.summary.pooled.hpd_size();
    CHECK(count_lines(slurp(dir_a / "hpd_trajectories.csv")) == 1 + hpd * 51 * 2);
    CHECK(count_lines(slurp(dir_a / "hpd_trajectories_novel.csv")) == 1 + hpd * 51 * 2);

    std::istringstream errs(slurp(dir_a / "trajectory_errors.csv"));
    std::string line;
    std::getline(errs, line);
    CHECK(line == "rank,crn,prob,error_original,error_novel");
    std::getline(errs, line);
    CHECK(line.substr(line.size() - 4) == ",0,0");  // the mode against itself
    CHECK(count_lines(slurp(dir_a / "trajectory_errors.csv")) == 1 + hpd);

    const auto manifest = read_json_file(dir_a / "manifest.json");
    CHECK(manifest["config_hash"] == config_hash(cfg));
    CHECK(manifest["files"].contains("tree.dot"));
    CHECK(manifest["n_obs"] == 31);

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("stage errors name the stage") {
    const auto ab = enumerate_library({"A", "B"}, {Complex({1, 0}), Complex({0, 1})}, {});
    Dataset d;
    d.species = {"A", "C"};
    d.t = {0, 1};
    d.x0 = {1, 0};
    d.y = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_WITH_AS(run_pipeline(d, ab, RunConfig{}), doctest::Contains("[config]"), StageError);
}
