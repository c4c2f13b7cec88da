#include "crnpost/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "crnpost/parallel.hpp"

namespace crnpost {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Crn full_support(std::span<const double> rates) {
    std::vector<std::size_t> m;
    for (std::size_t r = 0; r < rates.size(); ++r)
        if (rates[r] > 0.0) m.push_back(r);
    return Crn(std::move(m));
}

Crn prefix(const std::vector<std::size_t>& order, std::size_t m) {
    return Crn(std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m)));
}

struct Triple {
    std::size_t r, r1, r2;
    auto operator<=>(const Triple&) const = default;
};

// log-likelihoods of nominal parameters for each triple, -inf when invalid
std::map<Triple, double> nominal_logliks(const InferenceProblem& problem, const std::vector<MappedCrn>& base,
                                         const std::set<Triple>& triples, std::size_t workers) {
    const std::vector<Triple> list(triples.begin(), triples.end());
    std::vector<double> ll(list.size(), -kInf);
    parallel_for(list.size(), workers, [&](std::size_t i) {
        const auto& t = list[i];
        if (auto fit = nominal_parameters(problem, base[t.r], base[t.r1], base[t.r2])) ll[i] = fit->loglik;
    });
    std::map<Triple, double> out;
    for (std::size_t i = 0; i < list.size(); ++i) out.emplace(list[i], ll[i]);
    return out;
}

}  // namespace

PruneResult prune_estimate(const InferenceProblem& problem, const ParamEstimate& est, const PruneConfig& cfg) {
    if (!(cfg.delta > 0.0)) throw std::invalid_argument("pruning threshold delta must be positive");
    const Dataset& data = *problem.data;
    const ReactionLibrary& lib = *problem.lib;
    const auto rates = est.rates(problem.kappa);
    const auto sigma2 = est.sigma2();
    const Crn support = full_support(rates);

    PruneResult res;
    const MassActionSystem sys(lib, support, rates);
    const auto traj = try_simulate(sys, data.x0, data.t_end(), problem.solver);
    if (!traj) return res;
    res.fluxes = reaction_fluxes(lib, support, rates, *traj);
    res.order.resize(lib.size());
    std::iota(res.order.begin(), res.order.end(), std::size_t{0});
    std::stable_sort(res.order.begin(), res.order.end(),
                     [&](std::size_t a, std::size_t b) { return res.fluxes[a] > res.fluxes[b]; });

    const double top = res.fluxes[res.order.front()];
    std::size_t count = 0;
    for (auto r : res.order)
        if (res.fluxes[r] > cfg.flux_cutoff * top && rates[r] > 0.0) ++count;
    count = std::max<std::size_t>(count, 1);

    const double log_n = std::log(bic_sample_size(data));
    std::vector<double> loglik(count, -kInf);
    res.b.assign(count, kInf);
    for (std::size_t m = 1; m <= count; ++m) {
        const Crn crn = prefix(res.order, m);
        std::vector<double> k(lib.size(), 0.0);
        for (auto r : crn) k[r] = rates[r];
        const double nll = neg_log_likelihood(data, lib, crn, k, sigma2, problem.solver);
        if (!std::isfinite(nll)) continue;
        loglik[m - 1] = -nll;
        res.b[m - 1] = 2.0 * nll + static_cast<double>(m) * log_n;
    }
    const auto best = std::min_element(res.b.begin(), res.b.end());
    if (!std::isfinite(*best)) return res;
    res.m_star = static_cast<std::size_t>(best - res.b.begin()) + 1;
    for (std::size_t m = 1; m <= count; ++m)
        if (res.b[m - 1] < *best + cfg.delta)
            res.candidates.push_back({prefix(res.order, m), m, res.b[m - 1], loglik[m - 1]});
    return res;
}

std::vector<MappedCrn> build_base_ensemble(const InferenceProblem& problem, const std::vector<ParamEstimate>& estimates,
                                           const PruneConfig& cfg, std::size_t workers) {
    if (estimates.empty()) throw std::invalid_argument("no estimates to prune");
    std::vector<PruneResult> pruned(estimates.size());
    parallel_for(estimates.size(), workers,
                 [&](std::size_t i) { pruned[i] = prune_estimate(problem, estimates[i], cfg); });

    std::map<Crn, MappedCrn> by_crn;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        for (const auto& c : pruned[i].candidates) {
            auto it = by_crn.find(c.crn);
            if (it != by_crn.end() && !(c.b_value < it->second.b_value)) continue;
            MappedCrn mc;
            mc.crn = c.crn;
            const auto rates = estimates[i].rates(problem.kappa);
            mc.rates.assign(rates.size(), 0.0);
            for (auto r : c.crn) mc.rates[r] = rates[r];
            mc.sigma2 = estimates[i].sigma2();
            mc.b_value = c.b_value;
            mc.loglik = c.loglik;
            mc.source = i;
            by_crn[c.crn] = std::move(mc);
        }
    }
    std::vector<MappedCrn> out;
    for (auto& [crn, mc] : by_crn) out.push_back(std::move(mc));
    return out;
}

std::vector<ExchangePair> enumerate_exchange_pairs(const std::vector<Crn>& base, std::size_t max_size) {
    std::map<std::pair<Crn, Crn>, std::vector<std::pair<std::size_t, std::size_t>>> found;
    for (std::size_t i = 0; i < base.size(); ++i)
        for (std::size_t j = 0; j < base.size(); ++j) {
            if (i == j) continue;
            Crn u = base[i].set_difference(base[j]);
            Crn v = base[j].set_difference(base[i]);
            if (u.size() > max_size || v.size() > max_size || (u.empty() && v.empty())) continue;
            found[{std::move(u), std::move(v)}].emplace_back(i, j);
        }
    std::vector<ExchangePair> out;
    for (auto& [key, w] : found) out.push_back({key.first, key.second, std::move(w), 0.0});
    return out;
}

std::vector<ExchangePair> enumerate_exchange_pairs(const std::vector<MappedCrn>& base, std::size_t max_size) {
    std::vector<Crn> crns;
    for (const auto& b : base) crns.push_back(b.crn);
    return enumerate_exchange_pairs(crns, max_size);
}

std::vector<double> nominal_rates(std::span<const double> k_r, std::span<const double> k_r1, const Crn& u,
                                  const Crn& v) {
    if (k_r.size() != k_r1.size()) throw std::invalid_argument("rate vectors differ in length");
    std::vector<double> k(k_r.begin(), k_r.end());
    for (auto r : v) k.at(r) = 0.0;
    for (auto r : u) k.at(r) = k_r1[r];
    return k;
}

std::vector<double> nominal_sigma2(const InferenceProblem& problem, const Eigen::MatrixXd& predicted) {
    const Dataset& data = *problem.data;
    std::vector<double> s2(data.n_species());
    for (std::size_t s = 0; s < s2.size(); ++s) {
        const auto col = static_cast<Eigen::Index>(s);
        const double mse = (data.y.col(col) - predicted.col(col)).squaredNorm() / static_cast<double>(data.n_obs());
        s2[s] = std::max(mse, std::exp(problem.varsigma_lower[s]));
    }
    return s2;
}

std::optional<NominalFit> nominal_parameters(const InferenceProblem& problem, const MappedCrn& r, const MappedCrn& r1,
                                             const MappedCrn& r2) {
    const Crn u = r1.crn.set_difference(r2.crn);
    const Crn v = r2.crn.set_difference(r1.crn);
    if (!r.crn.includes(v)) throw std::invalid_argument("exchange set is not contained in the target CRN");
    NominalFit fit;
    fit.crn = r.crn.set_difference(v).set_union(u);
    fit.rates = nominal_rates(r.rates, r1.rates, u, v);
    const auto pred = predict(*problem.data, *problem.lib, fit.crn, fit.rates, problem.solver);
    if (!pred) return std::nullopt;
    fit.sigma2 = nominal_sigma2(problem, *pred);
    fit.loglik = -neg_log_likelihood(*problem.data, *pred, fit.sigma2);
    if (!std::isfinite(fit.loglik)) return std::nullopt;
    return fit;
}

std::vector<ExchangePair> rank_exchange_pairs(const InferenceProblem& problem, std::vector<ExchangePair> pairs,
                                              const std::vector<MappedCrn>& base, std::size_t limit,
                                              std::size_t workers) {
    std::set<Triple> triples;
    for (const auto& p : pairs)
        for (auto [i1, i2] : p.witnesses) triples.insert({i2, i1, i2});
    const auto ll = nominal_logliks(problem, base, triples, workers);

    std::vector<ExchangePair> kept;
    for (auto& p : pairs) {
        double score = kInf;
        for (auto [i1, i2] : p.witnesses) {
            const double l = ll.at({i2, i1, i2});
            if (std::isfinite(l)) score = std::min(score, base[i2].loglik - l);
        }
        if (!std::isfinite(score)) continue;
        p.score = score;
        kept.push_back(std::move(p));
    }
    std::sort(kept.begin(), kept.end(), [](const ExchangePair& a, const ExchangePair& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.key() < b.key();
    });
    if (kept.size() > limit) kept.resize(limit);
    return kept;
}

std::vector<Proposal> recombine(const InferenceProblem& problem, const std::vector<MappedCrn>& base,
                                const std::vector<ExchangePair>& top_pairs, const PriorConfig& prior,
                                std::size_t limit, std::size_t workers) {
    std::set<Triple> triples;
    for (const auto& p : top_pairs)
        for (std::size_t r = 0; r < base.size(); ++r) {
            if (!base[r].crn.includes(p.v)) continue;
            for (auto [i1, i2] : p.witnesses) triples.insert({r, i1, i2});
        }
    const auto ll = nominal_logliks(problem, base, triples, workers);

    const double log_n = std::log(bic_sample_size(*problem.data));
    std::map<Crn, Proposal> best;
    for (const auto& [t, l] : ll) {
        if (!std::isfinite(l)) continue;
        const Crn& u_src = base[t.r1].crn;
        const Crn& v_src = base[t.r2].crn;
        const Crn crn = base[t.r].crn.set_difference(v_src.set_difference(u_src)).set_union(u_src.set_difference(v_src));
        const double score = log_prior(crn.size(), problem.n_reactions(), prior) + l -
                             0.5 * static_cast<double>(crn.size()) * log_n;
        auto it = best.find(crn);
        if (it != best.end() && !(score > it->second.score)) continue;
        Proposal p;
        p.crn = crn;
        p.score = score;
        p.base_index = t.r;
        p.r1 = t.r1;
        p.r2 = t.r2;
        best[crn] = std::move(p);
    }
    std::vector<Proposal> out;
    for (auto& [crn, p] : best) out.push_back(std::move(p));
    std::sort(out.begin(), out.end(), [](const Proposal& a, const Proposal& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.crn < b.crn;
    });
    if (out.size() > limit) out.resize(limit);
    // recover the witnesses of the kept proposals
    parallel_for(out.size(), workers, [&](std::size_t i) {
        auto& p = out[i];
        p.witness = *nominal_parameters(problem, base[p.base_index], base[p.r1], base[p.r2]);
    });
    return out;
}

std::string to_string(Origin o) { return o == Origin::Pruned ? "pruned" : "recombined"; }

std::optional<EnsembleMember> fit_mle(const InferenceProblem& problem, const Crn& crn,
                                      const std::vector<FitStart>& starts, Origin origin) {
    const LossEvaluator loss(problem, crn, std::nullopt, 0.0);
    const Objective f = [&loss](const Eigen::VectorXd& x) { return loss(x); };
    const GradientFn g = [&loss](const Eigen::VectorXd& x, double fx, Eigen::VectorXd& grad) {
        return loss.gradient(x, fx, grad);
    };
    const Eigen::VectorXd lo = loss.lower_bounds();

    std::optional<EnsembleMember> best;
    for (const auto& start : starts) {
        std::vector<double> eta(problem.n_reactions(), problem.eta_lower());
        for (auto r : crn) {
            const double k = start.rates.at(r);
            eta[r] = k > 0.0 ? std::max(std::log(k / problem.kappa[r]), problem.eta_lower()) : problem.eta_lower();
        }
        std::vector<double> vs(problem.n_species());
        for (std::size_t s = 0; s < vs.size(); ++s)
            vs[s] = std::max(std::log(start.sigma2.at(s)), problem.varsigma_lower[s]);
        const Eigen::VectorXd x0 = loss.pack(eta, vs);
        const double f0 = loss(x0);
        if (!std::isfinite(f0)) continue;
        const auto res = minimize_bounded(f, x0, lo, problem.optimizer, std::nullopt, g);
        if (best && !(-res.f > best->max_loglik)) continue;
        EnsembleMember m;
        m.crn = crn;
        const auto eta_hat = loss.unpack_eta(res.x);
        m.mle_rates.assign(problem.n_reactions(), 0.0);
        for (auto r : crn) m.mle_rates[r] = std::exp(eta_hat[r]) * problem.kappa[r];
        for (double v : loss.unpack_varsigma(res.x)) m.mle_sigma2.push_back(std::exp(v));
        m.max_loglik = -res.f;
        m.bic = bic(m.max_loglik, crn.size(), bic_sample_size(*problem.data));
        m.origin = origin;
        m.status = res.status;
        m.start_loglik = -f0;
        best = std::move(m);
    }
    return best;
}

EnsembleResult build_ensemble_from_base(const InferenceProblem& problem, std::vector<MappedCrn> base,
                                        const EnsembleConfig& cfg) {
    EnsembleResult out;
    out.base = std::move(base);
    if (out.base.size() >= 2) {
        out.top_pairs = rank_exchange_pairs(problem, enumerate_exchange_pairs(out.base), out.base, cfg.max_pairs,
                                            cfg.workers);
        out.proposals = recombine(problem, out.base, out.top_pairs, cfg.prior, cfg.max_proposals, cfg.workers);
    }

    struct Job {
        Crn crn;
        Origin origin;
        std::vector<FitStart> starts;
    };
    std::vector<Job> jobs;
    std::map<Crn, std::size_t> index;
    for (const auto& b : out.base) {
        index[b.crn] = jobs.size();
        jobs.push_back({b.crn, Origin::Pruned, {{b.rates, b.sigma2}}});
    }
    for (const auto& p : out.proposals) {
        const FitStart s{p.witness.rates, p.witness.sigma2};
        if (auto it = index.find(p.crn); it != index.end()) {
            jobs[it->second].starts.push_back(s);
            continue;
        }
        index[p.crn] = jobs.size();
        jobs.push_back({p.crn, Origin::Recombined, {s}});
    }

    std::vector<std::optional<EnsembleMember>> fits(jobs.size());
    parallel_for(jobs.size(), cfg.workers,
                 [&](std::size_t i) { fits[i] = fit_mle(problem, jobs[i].crn, jobs[i].starts, jobs[i].origin); });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (fits[i])
            out.members.push_back(std::move(*fits[i]));
        else
            out.diagnostics.push_back("dropped " + to_string(jobs[i].crn) + ": no simulable starting point");
    }
    return out;
}

EnsembleResult build_ensemble(const InferenceProblem& problem, const std::vector<ParamEstimate>& estimates,
                              const EnsembleConfig& cfg) {
    return build_ensemble_from_base(problem, build_base_ensemble(problem, estimates, cfg.prune, cfg.workers), cfg);
}

std::vector<ScoredCrn> scored(const std::vector<EnsembleMember>& members) {
    std::vector<ScoredCrn> out;
    for (const auto& m : members) out.push_back({m.crn, m.bic});
    return out;
}

}  // namespace crnpost
