#include "crnpost/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "crnpost/dynamics.hpp"
#include "crnpost/io.hpp"

namespace crnpost {

namespace {

void note(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

nlohmann::json penalty_names(const std::vector<PenaltyKind>& kinds) {
    auto j = nlohmann::json::array();
    for (auto k : kinds) j.push_back(to_string(k));
    return j;
}

nlohmann::json table_json(const PosteriorTable& t, std::size_t n) {
    auto j = posterior_to_json(t);
    j["reaction_probabilities"] = reaction_probabilities(t, n);
    return j;
}

std::string file_hash(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(ss.str());
    return hex.str();
}

}  // namespace

StageError::StageError(const std::string& stage, const std::string& what)
    : std::runtime_error("[" + stage + "] " + what), stage_(stage) {}

InferenceProblem make_run_problem(const Dataset& data, const ReactionLibrary& lib, const RunConfig& cfg) {
    ProblemSettings settings;
    settings.floor = cfg.floor;
    return make_problem(data, lib, settings);
}

MultistartConfig multistart_config(const RunConfig& cfg, PenaltyKind kind) {
    MultistartConfig m;
    m.kind = kind;
    m.n_start = cfg.n_start;
    m.lambda_indices = hyperparameter_subset(hyperparameter_grid(kind).size(), cfg.n_hyp);
    m.seed = cfg.seed;
    m.workers = cfg.workers;
    return m;
}

EnsembleConfig ensemble_config(const RunConfig& cfg) {
    EnsembleConfig e;
    e.prune.delta = cfg.delta;
    e.max_pairs = cfg.max_pairs;
    e.max_proposals = cfg.max_proposals;
    e.prior = cfg.prior;
    e.workers = cfg.workers;
    return e;
}

std::vector<PooledCrn> pool_members(const std::vector<PenaltyMembers>& runs) {
    std::map<Crn, PooledCrn> pooled;
    for (const auto& run : runs)
        for (const auto& m : run.members) {
            auto [it, fresh] = pooled.try_emplace(m.crn, PooledCrn{m, {}});
            if (!fresh && m.max_loglik > it->second.member.max_loglik) it->second.member = m;
            auto& flags = it->second.found_by;
            if (std::find(flags.begin(), flags.end(), run.kind) == flags.end()) flags.push_back(run.kind);
        }
    std::vector<PooledCrn> out;
    for (auto& [crn, p] : pooled) out.push_back(std::move(p));
    return out;
}

PosteriorSummary summarise(const std::vector<PenaltyMembers>& runs, std::size_t library_size, const PriorConfig& prior,
                           double alpha) {
    PosteriorSummary s;
    s.library_size = library_size;
    s.prior = prior;
    for (const auto& run : runs)
        s.per_penalty[run.kind] = compute_posterior(scored(run.members), library_size, prior, alpha);
    const auto pooled = pool_members(runs);
    std::vector<ScoredCrn> all;
    for (const auto& p : pooled) all.push_back({p.member.crn, p.member.bic});
    s.pooled = compute_posterior(all, library_size, prior, alpha);
    for (const auto& e : s.pooled.entries) {
        const auto it = std::lower_bound(pooled.begin(), pooled.end(), e.crn,
                                         [](const PooledCrn& p, const Crn& c) { return p.member.crn < c; });
        s.found_by.push_back(it->found_by);
    }
    return s;
}

nlohmann::json summary_to_json(const PosteriorSummary& s) {
    nlohmann::json j;
    j["library_size"] = s.library_size;
    j["prior"] = prior_to_json(s.prior);
    j["pooled"] = table_json(s.pooled, s.library_size);
    for (std::size_t i = 0; i < s.pooled.entries.size(); ++i)
        j["pooled"]["entries"][i]["found_by"] = penalty_names(s.found_by[i]);
    j["per_penalty"] = nlohmann::json::object();
    for (const auto& [kind, table] : s.per_penalty) j["per_penalty"][to_string(kind)] = table_json(table, s.library_size);
    return j;
}

PosteriorSummary summary_from_json(const nlohmann::json& j) {
    PosteriorSummary s;
    s.library_size = j.at("library_size").get<std::size_t>();
    s.prior = prior_from_json(j.at("prior"));
    s.pooled = posterior_from_json(j.at("pooled"));
    for (const auto& e : j.at("pooled").at("entries")) {
        std::vector<PenaltyKind> kinds;
        for (const auto& k : e.at("found_by")) kinds.push_back(parse_penalty(k.get<std::string>()));
        s.found_by.push_back(std::move(kinds));
    }
    for (const auto& [name, table] : j.at("per_penalty").items())
        s.per_penalty[parse_penalty(name)] = posterior_from_json(table);
    return s;
}

std::vector<WeightedCrn> hpd_weights(const PosteriorTable& table) {
    std::vector<WeightedCrn> out;
    for (const auto* e : table.hpd_set()) out.push_back({e->crn, e->prob});
    return out;
}

std::string estimates_file(PenaltyKind kind) { return "estimates_" + to_string(kind) + ".json"; }
std::string ensemble_file(PenaltyKind kind) { return "ensemble_" + to_string(kind) + ".json"; }

std::vector<ParamEstimate> run_inference_stage(const InferenceProblem& problem, const RunConfig& cfg, PenaltyKind kind,
                                               const Logger& log) {
    return in_stage("infer/" + to_string(kind), [&] {
        const auto mc = multistart_config(cfg, kind);
        note(log, "infer/" + to_string(kind) + ": " + std::to_string(mc.lambda_indices.size() * mc.n_start) +
                      " optimisations");
        return multistart_inference(problem, mc);
    });
}

EnsembleResult run_ensemble_stage(const InferenceProblem& problem, const std::vector<ParamEstimate>& estimates,
                                  const RunConfig& cfg, PenaltyKind kind, const Logger& log) {
    return in_stage("ensemble/" + to_string(kind), [&] {
        auto r = build_ensemble(problem, estimates, ensemble_config(cfg));
        note(log, "ensemble/" + to_string(kind) + ": " + std::to_string(r.base.size()) + " pruned, " +
                      std::to_string(r.proposals.size()) + " proposed, " + std::to_string(r.members.size()) +
                      " members");
        for (const auto& d : r.diagnostics) note(log, "ensemble/" + to_string(kind) + ": " + d);
        return r;
    });
}

PipelineResult run_pipeline(const Dataset& data, const ReactionLibrary& lib, const RunConfig& cfg,
                            const ArtifactOptions& artifacts, const Logger& log) {
    in_stage("config", [&] {
        cfg.validate();
        data.validate();
        if (data.species != lib.species()) throw std::invalid_argument("dataset and library species differ");
    });
    const auto& dir = artifacts.dir;
    if (dir) in_stage("config", [&] { write_json_file(*dir / "config.json", config_to_json(cfg)); });
    const auto problem = in_stage("setup", [&] { return make_run_problem(data, lib, cfg); });

    PipelineResult result;
    std::vector<PenaltyMembers> members;
    for (auto kind : cfg.penalties) {
        PenaltyRun run{kind, run_inference_stage(problem, cfg, kind, log), {}};
        if (dir)
            in_stage("infer/" + to_string(kind),
                     [&] { write_json_file(*dir / estimates_file(kind), estimates_to_json(run.estimates)); });
        run.ensemble = run_ensemble_stage(problem, run.estimates, cfg, kind, log);
        if (dir)
            in_stage("ensemble/" + to_string(kind), [&] {
                nlohmann::json j{{"penalty", to_string(kind)},
                                 {"members", members_to_json(run.ensemble.members)},
                                 {"diagnostics", run.ensemble.diagnostics}};
                write_json_file(*dir / ensemble_file(kind), j);
                if (artifacts.debug) {
                    write_json_file(*dir / ("base_" + to_string(kind) + ".json"), mapped_to_json(run.ensemble.base));
                    write_json_file(*dir / ("pairs_" + to_string(kind) + ".json"),
                                    pairs_to_json(run.ensemble.top_pairs));
                    write_json_file(*dir / ("proposals_" + to_string(kind) + ".json"),
                                    proposals_to_json(run.ensemble.proposals));
                }
            });
        members.push_back({kind, run.ensemble.members});
        result.runs.push_back(std::move(run));
    }
    in_stage("posterior", [&] {
        result.summary = summarise(members, lib.size(), cfg.prior, cfg.alpha);
        result.pooled = pool_members(members);
        if (dir) write_json_file(*dir / "posterior.json", summary_to_json(result.summary));
        note(log, "posterior: " + std::to_string(result.summary.pooled.entries.size()) + " CRNs, HPD size " +
                      std::to_string(result.summary.pooled.hpd_size()));
    });
    return result;
}

std::vector<HpdTrajectory> simulate_hpd(const PosteriorSummary& summary, const std::vector<PooledCrn>& pooled,
                                        const ReactionLibrary& lib, const Dataset& data,
                                        const std::optional<std::vector<double>>& novel_x0,
                                        const SolverConfig& solver) {
    std::vector<HpdTrajectory> out;
    for (const auto* e : summary.pooled.hpd_set()) {
        const auto it = std::lower_bound(pooled.begin(), pooled.end(), e->crn,
                                         [](const PooledCrn& p, const Crn& c) { return p.member.crn < c; });
        if (it == pooled.end() || it->member.crn != e->crn)
            throw std::invalid_argument("no fitted rates for HPD member " + to_string(e->crn));
        HpdTrajectory h{e->crn, e->prob, std::nullopt, std::nullopt};
        const MassActionSystem sys(lib, e->crn, it->member.mle_rates);
        h.original = try_simulate(sys, data.x0, data.t_end(), solver);
        if (novel_x0) h.novel = try_simulate(sys, *novel_x0, data.t_end(), solver);
        out.push_back(std::move(h));
    }
    return out;
}

void write_trajectory_bundle(std::ostream& os, const std::vector<HpdTrajectory>& hpd, bool novel,
                             const std::vector<double>& grid, const std::vector<std::string>& species) {
    os << std::setprecision(17) << "rank,crn,t,species,value\n";
    for (std::size_t i = 0; i < hpd.size(); ++i) {
        const auto& traj = novel ? hpd[i].novel : hpd[i].original;
        if (!traj) continue;
        const auto x = traj->sample(grid);
        const auto name = to_string(hpd[i].crn);
        for (std::size_t n = 0; n < grid.size(); ++n)
            for (std::size_t s = 0; s < species.size(); ++s)
                os << i + 1 << ",\"" << name << "\"," << grid[n] << ',' << species[s] << ','
                   << x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s)) << '\n';
    }
}

void write_tree_files(const std::filesystem::path& dir, const PosteriorSummary& summary) {
    const auto root = build_tree(hpd_weights(summary.pooled));
    write_json_file(dir / "tree.json", tree_to_json(root));
    write_text_file(dir / "tree.dot", tree_to_dot(root));
    for (const auto& [kind, table] : summary.per_penalty) {
        const auto t = build_tree(hpd_weights(table));
        write_json_file(dir / ("tree_" + to_string(kind) + ".json"), tree_to_json(t));
        write_text_file(dir / ("tree_" + to_string(kind) + ".dot"), tree_to_dot(t));
    }
}

std::vector<std::string> write_report(const PosteriorSummary& summary, const std::vector<PooledCrn>& pooled,
                                      const Dataset& data, const ReactionLibrary& lib, const RunConfig& cfg,
                                      const ReportOptions& opts) {
    return in_stage("report", [&] {
        const std::filesystem::path dir = cfg.out_dir;
        std::vector<std::string> files;
        std::vector<std::string> warnings;
        auto text = [&](const std::string& name, const std::string& body) {
            write_text_file(dir / name, body);
            files.push_back(name);
        };
        if (opts.novel_x0 && opts.novel_x0->size() != data.n_species())
            throw std::invalid_argument("novel initial state needs " + std::to_string(data.n_species()) + " entries");

        text("posterior.json", summary_to_json(summary).dump(2) + "\n");

        std::ostringstream probs;
        write_reaction_probabilities(probs, reaction_probabilities(summary.pooled, lib.size()), lib);
        text("reaction_probabilities.csv", probs.str());
        std::ostringstream corr;
        write_correlations(corr, reaction_correlations(summary.pooled, lib.size()));
        text("reaction_correlations.csv", corr.str());

        const auto hpd = simulate_hpd(summary, pooled, lib, data, opts.novel_x0);
        const auto grid = uniform_grid(data.t_end(), cfg.trajectory_points);
        for (const auto& h : hpd) {
            if (!h.original) warnings.push_back("simulation failed for " + to_string(h.crn));
            if (opts.novel_x0 && !h.novel) warnings.push_back("novel simulation failed for " + to_string(h.crn));
        }
        std::ostringstream bundle;
        write_trajectory_bundle(bundle, hpd, false, grid, data.species);
        text("hpd_trajectories.csv", bundle.str());
        if (opts.novel_x0) {
            std::ostringstream nb;
            write_trajectory_bundle(nb, hpd, true, grid, data.species);
            text("hpd_trajectories_novel.csv", nb.str());
        }

        std::ostringstream err;
        err << std::setprecision(17) << "rank,crn,prob,error_original" << (opts.novel_x0 ? ",error_novel" : "") << '\n';
        const auto& mode = hpd.front();
        for (std::size_t i = 0; i < hpd.size(); ++i) {
            err << i + 1 << ",\"" << to_string(hpd[i].crn) << "\"," << hpd[i].prob << ',';
            if (hpd[i].original && mode.original)
                err << trajectory_error(*hpd[i].original, *mode.original);
            else
                err << "nan";
            if (opts.novel_x0) {
                err << ',';
                if (hpd[i].novel && mode.novel)
                    err << trajectory_error(*hpd[i].novel, *mode.novel);
                else
                    err << "nan";
            }
            err << '\n';
        }
        text("trajectory_errors.csv", err.str());

        write_tree_files(dir, summary);
        files.insert(files.end(), {"tree.json", "tree.dot"});
        for (const auto& [kind, table] : summary.per_penalty) {
            files.push_back("tree_" + to_string(kind) + ".json");
            files.push_back("tree_" + to_string(kind) + ".dot");
        }

        nlohmann::json manifest;
        manifest["tool"] = "crnpost";
        manifest["version"] = kVersion;
        manifest["seed"] = cfg.seed;
        manifest["config_hash"] = config_hash(cfg);
        manifest["config"] = config_to_json(cfg);
        manifest["inputs"] = opts.inputs;
        manifest["library_size"] = lib.size();
        manifest["n_obs"] = data.n_obs();
        if (opts.novel_x0) manifest["novel_x0"] = *opts.novel_x0;
        manifest["warnings"] = warnings;
        nlohmann::json listed = nlohmann::json::object();
        for (const auto& f : files) listed[f] = file_hash(dir / f);
        manifest["files"] = listed;
        write_json_file(dir / "manifest.json", manifest);
        files.push_back("manifest.json");
        return files;
    });
}

std::vector<PenaltyMembers> load_members(const std::filesystem::path& dir, const RunConfig& cfg,
                                         std::size_t library_size) {
    std::vector<PenaltyMembers> out;
    for (auto kind : cfg.penalties) {
        const auto j = read_json_file(dir / ensemble_file(kind));
        out.push_back({kind, members_from_json(j.at("members"), library_size)});
    }
    return out;
}

}  // namespace crnpost
