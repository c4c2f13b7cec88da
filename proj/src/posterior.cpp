#include "crnpost/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace crnpost {

namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

}  // namespace

PriorConfig PriorConfig::beta_shapes(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta shape parameters must be positive");
    const double s = a + b;
    return beta(a / s, a * b / (s * s * (s + 1.0)));
}

std::pair<double, double> PriorConfig::shapes() const {
    if (kind == Kind::Uniform) return {1.0, 1.0};
    if (!(mean > 0.0 && mean < 1.0)) throw std::invalid_argument("beta prior mean must lie in (0, 1)");
    const double bound = mean * (1.0 - mean);
    if (!(variance > 0.0 && variance < bound)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "beta prior variance must lie in (0, " << bound << ") for mean " << mean;
        throw std::invalid_argument(msg.str());
    }
    const double c = bound / variance - 1.0;
    return {mean * c, (1.0 - mean) * c};
}

double log_prior(std::size_t size, std::size_t full_size, const PriorConfig& cfg) {
    if (size > full_size) throw std::invalid_argument("CRN is larger than the library");
    const auto m = static_cast<double>(size), n = static_cast<double>(full_size);
    if (cfg.kind == PriorConfig::Kind::Uniform) {
        // -log(n + 1) - log C(n, m)
        return -std::log(n + 1.0) - (std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0));
    }
    const auto [a, b] = cfg.shapes();
    return log_beta(a + m, b + n - m) - log_beta(a, b);
}

std::vector<const PosteriorEntry*> PosteriorTable::hpd_set() const {
    std::vector<const PosteriorEntry*> out;
    for (const auto& e : entries)
        if (e.hpd) out.push_back(&e);
    return out;
}

std::size_t PosteriorTable::hpd_size() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](auto& e) { return e.hpd; }));
}

std::size_t hpd_count(const std::vector<double>& sorted_probs, double alpha) {
    double cum = 0.0;
    for (std::size_t i = 0; i < sorted_probs.size(); ++i) {
        cum += sorted_probs[i];
        if (cum >= 1.0 - alpha - 1e-12) return i + 1;
    }
    return sorted_probs.size();
}

PosteriorTable compute_posterior(const std::vector<ScoredCrn>& ensemble, std::size_t full_size,
                                 const PriorConfig& prior, double alpha) {
    if (ensemble.empty()) throw std::invalid_argument("cannot form a posterior over an empty ensemble");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    std::set<Crn> seen;
    PosteriorTable table;
    table.alpha = alpha;
    for (const auto& m : ensemble) {
        if (!seen.insert(m.crn).second) throw std::invalid_argument("duplicate CRN in ensemble: " + to_string(m.crn));
        if (!std::isfinite(m.bic)) throw std::invalid_argument("non-finite BIC for " + to_string(m.crn));
        PosteriorEntry e;
        e.crn = m.crn;
        e.bic = m.bic;
        e.log_prior = log_prior(m.crn.size(), full_size, prior);
        e.log_unnorm = e.log_prior - 0.5 * m.bic;
        table.entries.push_back(std::move(e));
    }
    std::sort(table.entries.begin(), table.entries.end(), [](const PosteriorEntry& a, const PosteriorEntry& b) {
        if (a.log_unnorm != b.log_unnorm) return a.log_unnorm > b.log_unnorm;
        return a.crn < b.crn;
    });
    const double top = table.entries.front().log_unnorm;
    double sum = 0.0;
    for (const auto& e : table.entries) sum += std::exp(e.log_unnorm - top);
    table.log_normaliser = top + std::log(sum);
    std::vector<double> probs;
    for (auto& e : table.entries) {
        e.prob = std::exp(e.log_unnorm - table.log_normaliser);
        probs.push_back(e.prob);
    }
    const std::size_t k = hpd_count(probs, alpha);
    for (std::size_t i = 0; i < k; ++i) table.entries[i].hpd = true;
    return table;
}

std::vector<double> reaction_probabilities(const PosteriorTable& table, std::size_t n_reactions) {
    std::vector<double> p(n_reactions, 0.0);
    for (const auto& e : table.entries)
        for (auto r : e.crn) {
            if (r >= n_reactions) throw std::out_of_range("reaction index outside the library");
            p[r] += e.prob;
        }
    return p;
}

Eigen::MatrixXd reaction_correlations(const PosteriorTable& table, std::size_t n_reactions) {
    const auto n = static_cast<Eigen::Index>(n_reactions);
    const auto p = reaction_probabilities(table, n_reactions);
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : table.entries) {
        const auto& mem = e.crn.members();
        for (auto a : mem)
            for (auto b : mem) joint(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += e.prob;
    }
    Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const double pa = p[static_cast<std::size_t>(a)];
        const double va = pa * (1.0 - pa);
        if (va <= 1e-14) continue;
        for (Eigen::Index b = 0; b < n; ++b) {
            const double pb = p[static_cast<std::size_t>(b)];
            const double vb = pb * (1.0 - pb);
            if (vb <= 1e-14) continue;
            corr(a, b) = std::clamp((joint(a, b) - pa * pb) / std::sqrt(va * vb), -1.0, 1.0);
        }
    }
    return corr;
}

}  // namespace crnpost
