#pragma once

// Priors over CRNs, the BIC-based posterior over an ensemble, HPD sets and
// reaction-level summaries.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "crnpost/model.hpp"

namespace crnpost {

/// Each reaction is present independently with probability q. Uniform puts a
/// uniform distribution on q (so the reaction count is uniform); Beta uses a
/// beta distribution on q with the given mean and variance.
struct PriorConfig {
    enum class Kind { Uniform, Beta };
    Kind kind = Kind::Uniform;
    double mean = 0.5;
    double variance = 1.0 / 12.0;

    static PriorConfig uniform() { return {}; }
    static PriorConfig beta(double mean, double variance) { return {Kind::Beta, mean, variance}; }
    /// Beta(a, b) by its shape parameters.
    static PriorConfig beta_shapes(double a, double b);

    /// Shape parameters (a, b); (1, 1) for the uniform prior. Throws
    /// std::invalid_argument when the moments admit no beta distribution.
    std::pair<double, double> shapes() const;
};

/// log p(R) for a CRN with `size` reactions from a library of `full_size`.
double log_prior(std::size_t size, std::size_t full_size, const PriorConfig& cfg);

struct PosteriorEntry {
    Crn crn;
    double bic = 0.0;
    double log_prior = 0.0;
    double log_unnorm = 0.0;  // log_prior - bic / 2
    double prob = 0.0;
    bool hpd = false;
};

struct PosteriorTable {
    /// Sorted by descending probability, ties by lexicographic CRN.
    std::vector<PosteriorEntry> entries;
    double alpha = 0.05;
    double log_normaliser = 0.0;

    std::vector<const PosteriorEntry*> hpd_set() const;
    std::size_t hpd_size() const;
};

struct ScoredCrn {
    Crn crn;
    double bic = 0.0;
};

/// Throws on an empty ensemble or duplicate CRNs.
PosteriorTable compute_posterior(const std::vector<ScoredCrn>& ensemble, std::size_t full_size,
                                 const PriorConfig& prior, double alpha);

/// Smallest number of leading entries (probability order) whose cumulative
/// probability reaches 1 - alpha, up to a round-off allowance of 1e-12.
std::size_t hpd_count(const std::vector<double>& sorted_probs, double alpha);

/// P(r in R | data) for every library reaction.
std::vector<double> reaction_probabilities(const PosteriorTable& table, std::size_t n_reactions);
/// Pearson correlations of the inclusion indicators; zero where an indicator
/// has zero variance, including the diagonal.
Eigen::MatrixXd reaction_correlations(const PosteriorTable& table, std::size_t n_reactions);

}  // namespace crnpost
