#pragma once

// Dataset files, library descriptions, simulated data and JSON/CSV artifacts.
//
// Dataset CSV: a header `t,<species...>`, then one numeric row per
// observation time. A line `# x0=<v1>,<v2>,...` sets the initial state;
// without it the row at t = 0 is used. Other lines starting with `#` are
// ignored. All numbers are written with 17 significant digits.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crnpost/ensemble.hpp"
#include "crnpost/inference.hpp"
#include "crnpost/model.hpp"
#include "crnpost/posterior.hpp"

namespace crnpost {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `source` names the input in error messages.
Dataset parse_dataset(std::istream& in, const std::string& source = "<input>");
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& os, const Dataset& data);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

/// Library description:
///   {"species": [...],
///    "complexes": [[coeffs], ...] | "generate_complexes": {"min": 1, "max": 2},
///    "rules": {...}}
/// or {"species": [...], "reactions": [{"source": [...], "target": [...]}, ...]}.
/// Rules: allowed_sources / allowed_targets (1-based complex positions),
/// molecularity_pairs, excluded_reactants / excluded_products (species names),
/// disjoint_species, allow_zero_complex, formulas {element: [counts]}.
ReactionLibrary parse_library(const nlohmann::json& j);
ReactionLibrary load_library(const std::filesystem::path& path);
nlohmann::json library_to_json(const ReactionLibrary& lib);

struct NoiseMode {
    enum class Kind { FractionOfRange, Explicit };
    Kind kind = Kind::FractionOfRange;
    double fraction = 0.01;
    std::vector<double> sigma;

    static NoiseMode fraction_of_range(double f) { return {Kind::FractionOfRange, f, {}}; }
    static NoiseMode explicit_sigma(std::vector<double> s) { return {Kind::Explicit, 0.0, std::move(s)}; }
};

struct SimConfig {
    Crn crn;
    std::vector<double> rates;  // indexed by library reaction
    std::vector<double> x0;
    std::vector<double> t_grid;
    NoiseMode noise;
    std::uint64_t seed = 0;
    SolverConfig solver;
};

/// Per-species noise standard deviations; fraction-of-range uses the range of
/// the dense solver trajectory.
std::vector<double> noise_sigma(const Trajectory& traj, const NoiseMode& noise);
/// y = max(x(t_n) + xi, 0) with independent Gaussian xi. Throws
/// IntegrationFailure or std::invalid_argument on a bad config.
Dataset simulate_dataset(const ReactionLibrary& lib, const SimConfig& cfg);

nlohmann::json crn_to_json(const Crn& crn);
Crn crn_from_json(const nlohmann::json& j);
std::string format_crn(const Crn& crn, const ReactionLibrary& lib);

nlohmann::json estimates_to_json(const std::vector<ParamEstimate>& estimates);
std::vector<ParamEstimate> estimates_from_json(const nlohmann::json& j);

/// Rates are stored per CRN member in label order.
nlohmann::json members_to_json(const std::vector<EnsembleMember>& members);
std::vector<EnsembleMember> members_from_json(const nlohmann::json& j, std::size_t n_reactions);

nlohmann::json mapped_to_json(const std::vector<MappedCrn>& base);
nlohmann::json pairs_to_json(const std::vector<ExchangePair>& pairs);
nlohmann::json proposals_to_json(const std::vector<Proposal>& proposals);

nlohmann::json prior_to_json(const PriorConfig& prior);
PriorConfig prior_from_json(const nlohmann::json& j);
/// "uniform" or "beta:<mean>,<variance>".
PriorConfig parse_prior(const std::string& spec);

nlohmann::json posterior_to_json(const PosteriorTable& table);
PosteriorTable posterior_from_json(const nlohmann::json& j);

/// `reaction,label,probability` with 1-based reaction labels.
void write_reaction_probabilities(std::ostream& os, const std::vector<double>& probs, const ReactionLibrary& lib);
/// Square matrix with a `reaction` column and one column per reaction.
void write_correlations(std::ostream& os, const Eigen::MatrixXd& corr);

/// Writes `j` followed by a newline; throws if the file cannot be written.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Comma-separated numbers, e.g. "1,0,0".
std::vector<double> parse_number_list(const std::string& text);

}  // namespace crnpost
