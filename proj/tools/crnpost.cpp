// crnpost: CRN inference with structural uncertainty.
//
//   crnpost simulate  --library lib.json --crn 1,13,18 --rates 1,1,1 --x0 0,0,1 --out data.csv
//   crnpost infer     --dataset data.csv --library lib.json --penalty logl1 --out run/
//   crnpost ensemble  --dataset data.csv --library lib.json --out run/
//   crnpost posterior --library lib.json --out run/
//   crnpost tree      --out run/
//   crnpost report    --dataset data.csv --library lib.json --out run/ [--novel-x0 1,0,0]
//   crnpost run       (all stages)
//
// Later stages read config.json and the artifacts of earlier stages from --out.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "crnpost/config.hpp"
#include "crnpost/io.hpp"
#include "crnpost/parallel.hpp"
#include "crnpost/pipeline.hpp"

using namespace crnpost;
namespace fs = std::filesystem;

namespace {

struct Args {
    std::string dataset;
    std::string library;
    std::string out = "out";
    std::string penalty;
    std::size_t n_start = 0;
    std::size_t n_hyp = 0;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    std::string prior;
    std::string floor;
    std::string novel_x0;
    bool debug = false;

    // simulate
    std::string crn;
    std::string rates;
    std::string x0;
    std::string times;
    double t_end = 10.0;
    std::size_t n_points = 101;
    double noise_frac = 0.01;
    std::string sigma;
};

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

SigmaFloor parse_floor(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("floor must be 'relative:<v>' or 'absolute:<v>'");
    SigmaFloor f;
    const auto mode = text.substr(0, colon);
    if (mode == "relative")
        f.mode = SigmaFloor::Mode::Relative;
    else if (mode == "absolute")
        f.mode = SigmaFloor::Mode::Absolute;
    else
        throw std::invalid_argument("floor mode must be 'relative' or 'absolute'");
    const auto v = parse_number_list(text.substr(colon + 1));
    if (v.size() != 1) throw std::invalid_argument("floor needs one value");
    f.value = v[0];
    return f;
}

// Flags given on the command line override the stored configuration.
RunConfig resolve_config(const Args& a, const CLI::App& cmd, bool fresh) {
    RunConfig cfg;
    const fs::path stored = fs::path(a.out) / "config.json";
    if (!fresh && fs::exists(stored)) cfg = config_from_json(read_json_file(stored));
    cfg.out_dir = a.out;
    auto given = [&cmd](const std::string& name) {
        const auto* opt = cmd.get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (given("--penalty")) cfg.penalties = parse_penalty_list(a.penalty);
    if (given("--n-start")) cfg.n_start = a.n_start;
    if (given("--n-hyp")) cfg.n_hyp = a.n_hyp;
    if (given("--seed")) cfg.seed = a.seed;
    if (given("--alpha")) cfg.alpha = a.alpha;
    if (given("--prior")) cfg.prior = parse_prior(a.prior);
    if (given("--floor")) cfg.floor = parse_floor(a.floor);
    cfg.workers = default_workers();
    cfg.validate();
    return cfg;
}

void add_run_flags(CLI::App* cmd, Args& a) {
    cmd->add_option("--penalty", a.penalty, "l1, logl1, l0, horseshoe, a comma list, or all");
    cmd->add_option("--n-start", a.n_start, "Optimisation starts per hyperparameter value");
    cmd->add_option("--n-hyp", a.n_hyp, "Hyperparameter values per penalty (1-10)");
    cmd->add_option("--seed", a.seed, "Seed for the scrambled Sobol starts");
    cmd->add_option("--floor", a.floor, "Noise floor, relative:<v> or absolute:<v>");
}

void add_posterior_flags(CLI::App* cmd, Args& a) {
    cmd->add_option("--alpha", a.alpha, "HPD level is 1 - alpha");
    cmd->add_option("--prior", a.prior, "uniform or beta:<mean>,<variance>");
}

nlohmann::json inputs(const Args& a) {
    nlohmann::json j = nlohmann::json::object();
    if (!a.dataset.empty()) j["dataset"] = a.dataset;
    if (!a.library.empty()) j["library"] = a.library;
    return j;
}

std::optional<std::vector<double>> novel(const Args& a) {
    if (a.novel_x0.empty()) return std::nullopt;
    return parse_number_list(a.novel_x0);
}

int cmd_simulate(const Args& a, const CLI::App& cmd) {
    const auto lib = load_library(a.library);
    SimConfig sim;
    const auto labels = parse_number_list(a.crn);
    const auto values = parse_number_list(a.rates);
    if (labels.size() != values.size()) throw std::invalid_argument("--crn and --rates need the same length");
    std::vector<std::size_t> members;
    sim.rates.assign(lib.size(), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto r = static_cast<long>(labels[i]);
        if (r < 1 || static_cast<std::size_t>(r) > lib.size() || labels[i] != static_cast<double>(r))
            throw std::invalid_argument("reaction label out of range in --crn");
        members.push_back(static_cast<std::size_t>(r - 1));
        sim.rates[static_cast<std::size_t>(r - 1)] = values[i];
    }
    sim.crn = Crn(members);
    sim.x0 = parse_number_list(a.x0);
    if (!a.times.empty()) {
        sim.t_grid = parse_number_list(a.times);
    } else {
        if (a.n_points < 2) throw std::invalid_argument("--n-points must be at least 2");
        sim.t_grid = uniform_grid(a.t_end, a.n_points);
    }
    sim.noise = cmd.count("--sigma") ? NoiseMode::explicit_sigma(parse_number_list(a.sigma))
                                     : NoiseMode::fraction_of_range(a.noise_frac);
    sim.seed = a.seed;
    save_dataset(simulate_dataset(lib, sim), a.out);
    log_line("wrote " + a.out);
    return 0;
}

int cmd_infer(const Args& a, const CLI::App& cmd) {
    const auto data = load_dataset(a.dataset);
    const auto lib = load_library(a.library);
    const auto cfg = resolve_config(a, cmd, true);
    write_json_file(fs::path(a.out) / "config.json", config_to_json(cfg));
    const auto problem = make_run_problem(data, lib, cfg);
    for (auto kind : cfg.penalties) {
        const auto est = run_inference_stage(problem, cfg, kind, log_line);
        write_json_file(fs::path(a.out) / estimates_file(kind), estimates_to_json(est));
    }
    return 0;
}

int cmd_ensemble(const Args& a, const CLI::App& cmd) {
    const auto data = load_dataset(a.dataset);
    const auto lib = load_library(a.library);
    const auto cfg = resolve_config(a, cmd, false);
    const auto problem = make_run_problem(data, lib, cfg);
    for (auto kind : cfg.penalties) {
        const auto est = estimates_from_json(read_json_file(fs::path(a.out) / estimates_file(kind)));
        const auto r = run_ensemble_stage(problem, est, cfg, kind, log_line);
        write_json_file(fs::path(a.out) / ensemble_file(kind),
                        {{"penalty", to_string(kind)}, {"members", members_to_json(r.members)}, {"diagnostics", r.diagnostics}});
        if (a.debug) {
            write_json_file(fs::path(a.out) / ("base_" + to_string(kind) + ".json"), mapped_to_json(r.base));
            write_json_file(fs::path(a.out) / ("pairs_" + to_string(kind) + ".json"), pairs_to_json(r.top_pairs));
            write_json_file(fs::path(a.out) / ("proposals_" + to_string(kind) + ".json"), proposals_to_json(r.proposals));
        }
    }
    return 0;
}

int cmd_posterior(const Args& a, const CLI::App& cmd) {
    const auto lib = load_library(a.library);
    const auto cfg = resolve_config(a, cmd, false);
    write_json_file(fs::path(a.out) / "config.json", config_to_json(cfg));
    const auto summary = summarise(load_members(a.out, cfg, lib.size()), lib.size(), cfg.prior, cfg.alpha);
    write_json_file(fs::path(a.out) / "posterior.json", summary_to_json(summary));
    log_line("posterior: " + std::to_string(summary.pooled.entries.size()) + " CRNs, HPD size " +
             std::to_string(summary.pooled.hpd_size()));
    return 0;
}

int cmd_tree(const Args& a) {
    const auto summary = summary_from_json(read_json_file(fs::path(a.out) / "posterior.json"));
    write_tree_files(a.out, summary);
    log_line("wrote tree files to " + a.out);
    return 0;
}

int cmd_report(const Args& a, const CLI::App& cmd) {
    const auto data = load_dataset(a.dataset);
    const auto lib = load_library(a.library);
    const auto cfg = resolve_config(a, cmd, false);
    const auto members = load_members(a.out, cfg, lib.size());
    const auto summary = summarise(members, lib.size(), cfg.prior, cfg.alpha);
    const auto files = write_report(summary, pool_members(members), data, lib, cfg, {novel(a), inputs(a)});
    log_line("wrote " + std::to_string(files.size()) + " report files to " + a.out);
    return 0;
}

int cmd_run(const Args& a, const CLI::App& cmd) {
    const auto data = load_dataset(a.dataset);
    const auto lib = load_library(a.library);
    const auto cfg = resolve_config(a, cmd, true);
    const auto result = run_pipeline(data, lib, cfg, {fs::path(a.out), a.debug}, log_line);
    const auto files = write_report(result.summary, result.pooled, data, lib, cfg, {novel(a), inputs(a)});
    log_line("wrote " + std::to_string(files.size()) + " report files to " + a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CRN inference with structural uncertainty"};
    app.require_subcommand(1);
    Args a;

    auto* simulate = app.add_subcommand("simulate", "Simulate a noisy dataset from a CRN");
    simulate->add_option("--library", a.library, "Library JSON")->required();
    simulate->add_option("--crn", a.crn, "Reaction labels, e.g. 1,13,18")->required();
    simulate->add_option("--rates", a.rates, "Rate constants matching --crn")->required();
    simulate->add_option("--x0", a.x0, "Initial state")->required();
    simulate->add_option("--times", a.times, "Observation times (overrides --t-end/--n-points)");
    simulate->add_option("--t-end", a.t_end, "Last observation time");
    simulate->add_option("--n-points", a.n_points, "Evenly spaced observation times from 0");
    simulate->add_option("--noise-frac", a.noise_frac, "Noise sd as a fraction of each species' range");
    simulate->add_option("--sigma", a.sigma, "Explicit per-species noise sd");
    simulate->add_option("--seed", a.seed, "Noise seed");
    simulate->add_option("--out", a.out, "Output CSV")->required();

    auto* infer = app.add_subcommand("infer", "Penalised multistart estimation");
    auto* ensemble = app.add_subcommand("ensemble", "Pruning, recombination and maximum likelihood refits");
    auto* posterior = app.add_subcommand("posterior", "Posterior over the ensemble");
    auto* tree = app.add_subcommand("tree", "Hierarchy trees of the HPD sets");
    auto* report = app.add_subcommand("report", "Report files and manifest");
    auto* run = app.add_subcommand("run", "All stages");

    for (auto* cmd : {infer, ensemble, report, run}) {
        cmd->add_option("--dataset", a.dataset, "Dataset CSV")->required()->check(CLI::ExistingFile);
        cmd->add_option("--library", a.library, "Library JSON")->required()->check(CLI::ExistingFile);
    }
    posterior->add_option("--library", a.library, "Library JSON")->required()->check(CLI::ExistingFile);
    for (auto* cmd : {infer, ensemble, posterior, tree, report, run})
        cmd->add_option("--out", a.out, "Run directory");
    for (auto* cmd : {infer, run}) add_run_flags(cmd, a);
    for (auto* cmd : {posterior, report, run}) add_posterior_flags(cmd, a);
    for (auto* cmd : {report, run}) cmd->add_option("--novel-x0", a.novel_x0, "Also simulate the HPD set from this state");
    for (auto* cmd : {ensemble, run}) cmd->add_flag("--debug-artifacts", a.debug, "Write pruned bases, pairs and proposals");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*simulate) return cmd_simulate(a, *simulate);
        if (*infer) return cmd_infer(a, *infer);
        if (*ensemble) return cmd_ensemble(a, *ensemble);
        if (*posterior) return cmd_posterior(a, *posterior);
        if (*tree) return cmd_tree(a);
        if (*report) return cmd_report(a, *report);
        if (*run) return cmd_run(a, *run);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
