#pragma once

// From parameter estimates to a CRN ensemble: pruning each estimate to
// candidate CRNs, recombining candidates through exchange pairs, and refitting
// maximum likelihood estimates for the BIC.

#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "crnpost/inference.hpp"
#include "crnpost/model.hpp"
#include "crnpost/posterior.hpp"

namespace crnpost {

struct PruneConfig {
    double delta = 13.815510557964274;  // log 1e6
    /// Prefixes are scanned only over reactions whose flux exceeds this
    /// fraction of the largest flux.
    double flux_cutoff = 1e-14;
};

struct PrunedCandidate {
    Crn crn;
    std::size_t m = 0;
    double b_value = 0.0;
    double loglik = 0.0;  // log-likelihood of the truncated estimate
};

struct PruneResult {
    /// Reactions by descending flux, ties by lower index.
    std::vector<std::size_t> order;
    std::vector<double> fluxes;
    /// b for m = 1..b.size(); +inf where the truncated estimate cannot be simulated.
    std::vector<double> b;
    std::size_t m_star = 0;
    std::vector<PrunedCandidate> candidates;
};

/// Number of observations |D| used in the BIC.
inline double bic_sample_size(const Dataset& data) { return static_cast<double>(data.n_obs()); }
inline double bic(double max_loglik, std::size_t n_reactions, double sample_size) {
    return -2.0 * max_loglik + static_cast<double>(n_reactions) * std::log(sample_size);
}

/// Maps one estimate to the nested top-flux CRNs whose b lies within delta of
/// the best. Returns no candidates if the full estimate cannot be simulated.
PruneResult prune_estimate(const InferenceProblem& problem, const ParamEstimate& est, const PruneConfig& cfg = {});

/// A base CRN with the estimate that attains its smallest b.
struct MappedCrn {
    Crn crn;
    std::vector<double> rates;  // k_map, zero outside crn
    std::vector<double> sigma2;
    double b_value = 0.0;
    double loglik = 0.0;  // l_map
    std::size_t source = 0;  // index of the estimate
};

/// Sorted by CRN. Ties in b keep the earlier estimate.
std::vector<MappedCrn> build_base_ensemble(const InferenceProblem& problem, const std::vector<ParamEstimate>& estimates,
                                           const PruneConfig& cfg = {}, std::size_t workers = 1);

/// (u, v) = (R1 \ R2, R2 \ R1) together with every ordered base pair inducing it.
struct ExchangePair {
    Crn u;
    Crn v;
    std::vector<std::pair<std::size_t, std::size_t>> witnesses;  // (R1, R2) positions in the base
    double score = 0.0;

    auto key() const { return std::tie(u, v); }
};

/// All exchange pairs with |u|, |v| <= max_size, sorted by (u, v).
std::vector<ExchangePair> enumerate_exchange_pairs(const std::vector<Crn>& base, std::size_t max_size = 2);
std::vector<ExchangePair> enumerate_exchange_pairs(const std::vector<MappedCrn>& base, std::size_t max_size = 2);

/// k_map(R) with entries in v zeroed and entries in u copied from k_map(R1).
std::vector<double> nominal_rates(std::span<const double> k_r, std::span<const double> k_r1, const Crn& u,
                                  const Crn& v);

/// Per-species mean squared residual of the prediction, clamped below at the
/// problem's noise floors.
std::vector<double> nominal_sigma2(const InferenceProblem& problem, const Eigen::MatrixXd& predicted);

struct NominalFit {
    Crn crn;
    std::vector<double> rates;
    std::vector<double> sigma2;
    double loglik = 0.0;
};

/// Nominal parameters of (R \ v) u u for the triple (R, R1, R2); nothing if
/// the nominal trajectory cannot be simulated.
std::optional<NominalFit> nominal_parameters(const InferenceProblem& problem, const MappedCrn& r, const MappedCrn& r1,
                                             const MappedCrn& r2);

/// Scores pairs by min over witnesses of l_map(R2) - l_nom(R2, R1, R2),
/// ascending with ties by (u, v), and keeps the first `limit`. Pairs with no
/// valid witness are dropped.
std::vector<ExchangePair> rank_exchange_pairs(const InferenceProblem& problem, std::vector<ExchangePair> pairs,
                                              const std::vector<MappedCrn>& base, std::size_t limit = 1000,
                                              std::size_t workers = 1);

struct Proposal {
    Crn crn;
    double score = 0.0;
    std::size_t base_index = 0;  // R
    std::size_t r1 = 0;
    std::size_t r2 = 0;
    NominalFit witness;
};

/// (R \ v) u u for every base R containing v and every top pair, scored by
/// the best witness of log p(R') + l_nom - |R'| log|D| / 2; the `limit`
/// highest-scoring distinct CRNs, ties by CRN.
std::vector<Proposal> recombine(const InferenceProblem& problem, const std::vector<MappedCrn>& base,
                                const std::vector<ExchangePair>& top_pairs, const PriorConfig& prior,
                                std::size_t limit = 1000, std::size_t workers = 1);

enum class Origin { Pruned, Recombined };
std::string to_string(Origin o);

struct EnsembleMember {
    Crn crn;
    std::vector<double> mle_rates;
    std::vector<double> mle_sigma2;
    double max_loglik = 0.0;
    double bic = 0.0;
    Origin origin = Origin::Pruned;
    OptimizeStatus status = OptimizeStatus::MaxIterations;
    /// Log-likelihood at the starting point that produced the kept fit.
    double start_loglik = 0.0;

    bool converged() const {
        return status == OptimizeStatus::GradientTolerance || status == OptimizeStatus::FunctionTolerance;
    }
};

struct FitStart {
    std::vector<double> rates;
    std::vector<double> sigma2;
};

/// Maximises the log-likelihood over the rates of `crn` and the noise
/// variances from each start and keeps the best fit. Nothing if no start can
/// be simulated.
std::optional<EnsembleMember> fit_mle(const InferenceProblem& problem, const Crn& crn,
                                      const std::vector<FitStart>& starts, Origin origin);

struct EnsembleConfig {
    PruneConfig prune;
    std::size_t max_pairs = 1000;
    std::size_t max_proposals = 1000;
    PriorConfig prior;
    std::size_t workers = 1;
};

struct EnsembleResult {
    std::vector<MappedCrn> base;
    std::vector<ExchangePair> top_pairs;
    std::vector<Proposal> proposals;
    /// Base CRNs then new proposals, each CRN once.
    std::vector<EnsembleMember> members;
    std::vector<std::string> diagnostics;
};

/// Full pruning, recombination and refitting for one collection of estimates.
EnsembleResult build_ensemble(const InferenceProblem& problem, const std::vector<ParamEstimate>& estimates,
                              const EnsembleConfig& cfg);
/// Recombination and refitting from a given base set.
EnsembleResult build_ensemble_from_base(const InferenceProblem& problem, std::vector<MappedCrn> base,
                                        const EnsembleConfig& cfg);

std::vector<ScoredCrn> scored(const std::vector<EnsembleMember>& members);

}  // namespace crnpost
