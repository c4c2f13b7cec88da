#pragma once

// End-to-end orchestration: multistart inference, ensemble construction and
// posterior per penalty, a pooled ranking over penalties, and report files.
//
// Stage artifacts in an output directory:
//   config.json, estimates_<penalty>.json, ensemble_<penalty>.json,
//   posterior.json, reaction_probabilities.csv, reaction_correlations.csv,
//   hpd_trajectories.csv (+ hpd_trajectories_novel.csv), trajectory_errors.csv,
//   tree.json, tree.dot, manifest.json.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crnpost/config.hpp"
#include "crnpost/ensemble.hpp"
#include "crnpost/hierarchy.hpp"
#include "crnpost/inference.hpp"
#include "crnpost/posterior.hpp"

namespace crnpost {

/// Failure inside a named stage, e.g. "[ensemble/logl1] ...".
class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& what);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

using Logger = std::function<void(const std::string&)>;

InferenceProblem make_run_problem(const Dataset& data, const ReactionLibrary& lib, const RunConfig& cfg);
MultistartConfig multistart_config(const RunConfig& cfg, PenaltyKind kind);
EnsembleConfig ensemble_config(const RunConfig& cfg);

struct PenaltyMembers {
    PenaltyKind kind;
    std::vector<EnsembleMember> members;
};

struct PooledCrn {
    /// The fit with the highest maximised log-likelihood over penalties.
    EnsembleMember member;
    std::vector<PenaltyKind> found_by;
};

struct PosteriorSummary {
    std::size_t library_size = 0;
    PriorConfig prior;
    std::map<PenaltyKind, PosteriorTable> per_penalty;
    PosteriorTable pooled;
    /// Same order as pooled.entries.
    std::vector<std::vector<PenaltyKind>> found_by;
};

/// Distinct CRNs over all penalties, sorted by CRN.
std::vector<PooledCrn> pool_members(const std::vector<PenaltyMembers>& runs);
PosteriorSummary summarise(const std::vector<PenaltyMembers>& runs, std::size_t library_size, const PriorConfig& prior,
                           double alpha);

nlohmann::json summary_to_json(const PosteriorSummary& s);
PosteriorSummary summary_from_json(const nlohmann::json& j);

std::vector<WeightedCrn> hpd_weights(const PosteriorTable& table);

struct PenaltyRun {
    PenaltyKind kind;
    std::vector<ParamEstimate> estimates;
    EnsembleResult ensemble;
};

struct PipelineResult {
    std::vector<PenaltyRun> runs;
    PosteriorSummary summary;
    std::vector<PooledCrn> pooled;
};

/// Stage files written into an output directory as the run progresses, so a
/// failure keeps everything finished before it.
struct ArtifactOptions {
    std::optional<std::filesystem::path> dir;
    bool debug = false;
};

std::vector<ParamEstimate> run_inference_stage(const InferenceProblem& problem, const RunConfig& cfg, PenaltyKind kind,
                                               const Logger& log = {});
EnsembleResult run_ensemble_stage(const InferenceProblem& problem, const std::vector<ParamEstimate>& estimates,
                                  const RunConfig& cfg, PenaltyKind kind, const Logger& log = {});

PipelineResult run_pipeline(const Dataset& data, const ReactionLibrary& lib, const RunConfig& cfg,
                            const ArtifactOptions& artifacts = {}, const Logger& log = {});

std::string estimates_file(PenaltyKind kind);
std::string ensemble_file(PenaltyKind kind);

struct ReportOptions {
    std::optional<std::vector<double>> novel_x0;
    /// Extra key/value pairs recorded in the manifest (input paths etc).
    nlohmann::json inputs = nlohmann::json::object();
};

/// Posterior-mode-relative trajectory errors and simulated trajectories of
/// the pooled HPD set.
struct HpdTrajectory {
    Crn crn;
    double prob = 0.0;
    std::optional<Trajectory> original;
    std::optional<Trajectory> novel;
};

std::vector<HpdTrajectory> simulate_hpd(const PosteriorSummary& summary, const std::vector<PooledCrn>& pooled,
                                        const ReactionLibrary& lib, const Dataset& data,
                                        const std::optional<std::vector<double>>& novel_x0,
                                        const SolverConfig& solver = {});

/// Long-format CSV `rank,crn,t,species,value`: |HPD| x points x species rows.
void write_trajectory_bundle(std::ostream& os, const std::vector<HpdTrajectory>& hpd, bool novel,
                             const std::vector<double>& grid, const std::vector<std::string>& species);

void write_tree_files(const std::filesystem::path& dir, const PosteriorSummary& summary);

/// Writes every report file into cfg.out_dir and returns their names.
std::vector<std::string> write_report(const PosteriorSummary& summary, const std::vector<PooledCrn>& pooled,
                                      const Dataset& data, const ReactionLibrary& lib, const RunConfig& cfg,
                                      const ReportOptions& opts = {});

/// Members of every penalty stored in dir/ensemble_<penalty>.json.
std::vector<PenaltyMembers> load_members(const std::filesystem::path& dir, const RunConfig& cfg,
                                         std::size_t library_size);

}  // namespace crnpost
