#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "crnpost/ensemble.hpp"
#include "fixtures.hpp"

using namespace crnpost;

namespace {

ReactionLibrary two_species() {
    return enumerate_library({"A", "B"}, {Complex({1, 0}), Complex({0, 1})}, {});
}

// truth X1 -> X2 (k=1) and X3 -> X1 (k=0.3)
struct PruneFixture {
    ReactionLibrary lib = fixtures::three_species_library();
    std::vector<double> k = fixtures::rates_for(lib, {{1, 1.0}, {11, 0.3}});
    Dataset data = fixtures::noisy_dataset(lib, Crn::from_labels({1, 11}), k, {1, 0, 1}, fixtures::linspace(0, 10, 51),
                                           0.01, 2);
    InferenceProblem problem = make_problem(data, lib);

    ParamEstimate estimate(double noise_scale = 1.0) const {
        ParamEstimate e;
        e.eta.assign(lib.size(), problem.eta_lower());
        for (std::size_t r = 0; r < lib.size(); ++r)
            if (k[r] > 0) e.eta[r] = std::log(k[r] / problem.kappa[r]);
        for (double v : problem.varsigma_init) e.varsigma.push_back(v + std::log(noise_scale));
        return e;
    }
};

double loglik_at(const InferenceProblem& p, const Crn& crn, const std::vector<double>& rates) {
    const auto pred = predict(*p.data, *p.lib, crn, rates, p.solver);
    const auto s2 = nominal_sigma2(p, *pred);
    return -neg_log_likelihood(*p.data, *pred, s2);
}

MappedCrn mapped(const InferenceProblem& p, const Crn& crn, const std::vector<double>& rates) {
    MappedCrn m;
    m.crn = crn;
    m.rates.assign(rates.size(), 0.0);
    for (auto r : crn) m.rates[r] = rates[r];
    const auto pred = predict(*p.data, *p.lib, crn, m.rates, p.solver);
    m.sigma2 = nominal_sigma2(p, *pred);
    m.loglik = -neg_log_likelihood(*p.data, *pred, m.sigma2);
    return m;
}

}  // namespace

TEST_CASE("pruning an estimate") {
    const PruneFixture f;
    const auto est = f.estimate();
    const auto res = prune_estimate(f.problem, est);
    REQUIRE(res.m_star == 2);
    CHECK(Crn({res.order[0], res.order[1]}) == Crn::from_labels({1, 11}));
    CHECK(res.fluxes[res.order[1]] > 1e6 * res.fluxes[res.order[2]]);

    // b over every prefix without the flux cutoff
    const auto rates = est.rates(f.problem.kappa);
    const auto sigma2 = est.sigma2();
    std::vector<double> b_all;
    for (std::size_t m = 1; m <= f.lib.size(); ++m) {
        const Crn crn(std::vector<std::size_t>(res.order.begin(), res.order.begin() + static_cast<long>(m)));
        std::vector<double> k(f.lib.size(), 0.0);
        for (auto r : crn) k[r] = rates[r];
        b_all.push_back(2 * neg_log_likelihood(f.data, f.lib, crn, k, sigma2) + m * std::log(51.0));
    }
    const auto best = std::min_element(b_all.begin(), b_all.end()) - b_all.begin();
    CHECK(best == 1);
    for (std::size_t m = 0; m < res.b.size(); ++m) CHECK(res.b[m] == doctest::Approx(b_all[m]).epsilon(1e-12));

    bool has_two = false;
    for (std::size_t i = 0; i < res.candidates.size(); ++i) {
        const auto& c = res.candidates[i];
        CHECK(c.b_value < res.b[1] + PruneConfig{}.delta);
        has_two |= c.m == 2;
        if (i) CHECK(c.crn.includes(res.candidates[i - 1].crn));
    }
    CHECK(has_two);

    PruneConfig tight;
    tight.delta = 1e-12;
    const auto only = prune_estimate(f.problem, est, tight);
    REQUIRE(only.candidates.size() == 1);
    CHECK(only.candidates[0].m == 2);
    CHECK_THROWS(prune_estimate(f.problem, est, PruneConfig{0.0, 1e-14}));

    ParamEstimate floor_est = est;
    std::fill(floor_est.eta.begin(), floor_est.eta.end(), f.problem.eta_lower());
    const auto flat = prune_estimate(f.problem, floor_est);
    CHECK(flat.m_star >= 1);
    REQUIRE_FALSE(flat.candidates.empty());
    for (std::size_t i = 0; i < flat.candidates.size(); ++i) {
        CHECK(flat.candidates[i].crn.size() == flat.candidates[i].m);
        if (i) CHECK(flat.candidates[i].crn.includes(flat.candidates[i - 1].crn));
    }
}

TEST_CASE("base ensemble keeps the best estimate per CRN") {
    const PruneFixture f;
    const auto good = f.estimate();
    const auto worse = f.estimate(0.05);
    PruneConfig tight;
    tight.delta = 1e-9;
    const auto base = build_base_ensemble(f.problem, {worse, good}, tight);
    REQUIRE(base.size() == 1);
    CHECK(base[0].crn == Crn::from_labels({1, 11}));
    CHECK(base[0].source == 1);
    const auto pr_good = prune_estimate(f.problem, good, tight);
    CHECK(base[0].b_value == pr_good.candidates[0].b_value);
    CHECK(base[0].rates[12] == 0.0);
    CHECK(base[0].rates[0] == doctest::Approx(1.0).epsilon(1e-12));

    const auto single = build_base_ensemble(f.problem, {good});
    const auto direct = prune_estimate(f.problem, good);
    REQUIRE(single.size() == direct.candidates.size());
    std::set<Crn> a, b;
    for (const auto& m : single) a.insert(m.crn);
    for (const auto& c : direct.candidates) b.insert(c.crn);
    CHECK(a == b);
    CHECK_THROWS(build_base_ensemble(f.problem, {}));
}

TEST_CASE("exchange pairs") {
    const auto pairs = enumerate_exchange_pairs(std::vector<Crn>{Crn::from_labels({2, 3, 5}), Crn::from_labels({4, 5})});
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].u == Crn::from_labels({2, 3}));
    CHECK(pairs[0].v == Crn::from_labels({4}));
    CHECK(pairs[1].u == Crn::from_labels({4}));
    CHECK(pairs[1].v == Crn::from_labels({2, 3}));
    CHECK(pairs[0].witnesses == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});

    CHECK(enumerate_exchange_pairs(std::vector<Crn>{Crn::from_labels({1, 2}), Crn::from_labels({1, 2})}).empty());
    CHECK(enumerate_exchange_pairs(std::vector<Crn>{Crn::from_labels({1, 2, 3}), Crn::from_labels({4, 5, 6})}).empty());

    // several base pairs can induce one exchange pair
    const auto shared = enumerate_exchange_pairs(
        std::vector<Crn>{Crn::from_labels({1, 2}), Crn::from_labels({1, 3}), Crn::from_labels({2, 4}),
                         Crn::from_labels({3, 4})});
    for (const auto& p : shared)
        if (p.u == Crn::from_labels({2}) && p.v == Crn::from_labels({3})) CHECK(p.witnesses.size() == 2);
}

TEST_CASE("nominal parameters") {
    const std::vector<double> k_r{1, 1, 0, 1, 0}, k_r1{0, 1.2, 1.3, 0, 1.5};
    const auto k = nominal_rates(k_r, k_r1, Crn::from_labels({2, 3}), Crn::from_labels({4}));
    CHECK(k == std::vector<double>{1, 1.2, 1.3, 0, 0});

    Dataset d;
    d.species = {"A"};
    d.t = {1, 2, 3, 4};
    d.y = Eigen::MatrixXd(4, 1);
    d.y << 1, 1, 2, 0;
    d.x0 = {0};
    InferenceProblem p;
    p.data = &d;
    p.varsigma_lower = {std::log(0.1)};
    Eigen::MatrixXd pred(4, 1);
    pred << 0, 2, 0, 0;
    CHECK(nominal_sigma2(p, pred)[0] == doctest::Approx(1.5));
    p.varsigma_lower = {std::log(2.0)};
    CHECK(nominal_sigma2(p, pred)[0] == doctest::Approx(2.0));
}

TEST_CASE("ranking exchange pairs between equivalent reaction sets") {
    const auto lib = fixtures::three_species_library();
    const auto k = fixtures::rates_for(lib, {{1, 1.0}, {13, 1.0}, {18, 1.0}});
    const auto data = fixtures::noisy_dataset(lib, Crn::from_labels({1, 13, 18}), k, {0, 0, 1},
                                              fixtures::linspace(0, 10, 51), 0.01, 6);
    const auto problem = make_problem(data, lib);
    const auto k_alt = fixtures::rates_for(lib, {{1, 1.0}, {12, 1.0}, {15, 1.0}, {18, 1.0}});
    const std::vector<MappedCrn> base{mapped(problem, Crn::from_labels({1, 13, 18}), k),
                                      mapped(problem, Crn::from_labels({1, 12, 15, 18}), k_alt),
                                      mapped(problem, Crn::from_labels({1, 18}), k)};
    const auto pairs = enumerate_exchange_pairs(base);
    const auto ranked = rank_exchange_pairs(problem, pairs, base);
    REQUIRE(ranked.size() == pairs.size());
    const Crn swap_in = Crn::from_labels({12, 15}), swap_out = Crn::from_labels({13});
    std::size_t pos_equiv = 99, pos_drop = 99;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (i) CHECK(ranked[i].score >= ranked[i - 1].score);
        if (ranked[i].u == swap_in && ranked[i].v == swap_out) {
            pos_equiv = i;
            CHECK(std::abs(ranked[i].score) <= 1e-3);
        }
        if (ranked[i].u.empty() && ranked[i].v == swap_out) pos_drop = i;
    }
    REQUIRE(pos_equiv < ranked.size());
    REQUIRE(pos_drop < ranked.size());
    CHECK(pos_equiv < pos_drop);
    CHECK(ranked[pos_drop].score > 1.0);

    const auto top1 = rank_exchange_pairs(problem, pairs, base, 1);
    CHECK(top1.size() == 1);
}

TEST_CASE("recombination matches exhaustive scoring") {
    const auto lib = fixtures::three_species_library();
    const auto k_r = fixtures::rates_for(lib, {{1, 0.5}, {2, 0.4}, {4, 0.3}});
    const auto data = fixtures::noisy_dataset(lib, Crn::from_labels({1, 2, 4}), k_r, {1, 1, 1},
                                              fixtures::linspace(0, 5, 26), 0.01, 1);
    const auto problem = make_problem(data, lib);
    const std::vector<MappedCrn> base{
        mapped(problem, Crn::from_labels({1, 2, 4}), k_r),
        mapped(problem, Crn::from_labels({2, 3, 5}), fixtures::rates_for(lib, {{2, 0.2}, {3, 0.6}, {5, 0.1}})),
        mapped(problem, Crn::from_labels({4, 5}), fixtures::rates_for(lib, {{4, 0.7}, {5, 0.2}}))};
    const auto pairs = rank_exchange_pairs(problem, enumerate_exchange_pairs(base), base);
    const auto prior = PriorConfig::uniform();
    const auto props = recombine(problem, base, pairs, prior);

    std::map<Crn, double> oracle;
    for (std::size_t r = 0; r < base.size(); ++r)
        for (std::size_t i = 0; i < base.size(); ++i)
            for (std::size_t j = 0; j < base.size(); ++j) {
                if (i == j) continue;
                const Crn u = base[i].crn.set_difference(base[j].crn), v = base[j].crn.set_difference(base[i].crn);
                if (u.size() > 2 || v.size() > 2 || !base[r].crn.includes(v)) continue;
                const Crn next = base[r].crn.set_difference(v).set_union(u);
                auto rates = base[r].rates;
                for (auto x : v) rates[x] = 0.0;
                for (auto x : u) rates[x] = base[i].rates[x];
                const double score = log_prior(next.size(), lib.size(), prior) + loglik_at(problem, next, rates) -
                                     0.5 * next.size() * std::log(26.0);
                auto it = oracle.find(next);
                if (it == oracle.end() || score > it->second) oracle[next] = score;
            }
    REQUIRE(props.size() == oracle.size());
    bool proposes_123 = false;
    for (std::size_t i = 0; i < props.size(); ++i) {
        CHECK(props[i].score == doctest::Approx(oracle.at(props[i].crn)).epsilon(1e-12));
        CHECK(props[i].witness.crn == props[i].crn);
        if (i) CHECK(props[i].score <= props[i - 1].score);
        proposes_123 |= props[i].crn == Crn::from_labels({1, 2, 3});
    }
    CHECK(proposes_123);
    CHECK(recombine(problem, base, pairs, prior, 2).size() == 2);
}

TEST_CASE("maximum likelihood refit") {
    const auto ab = two_species();
    const auto data = fixtures::noisy_dataset(ab, Crn::from_labels({1}), {1.0, 0.0}, {1, 0},
                                              fixtures::linspace(0, 5, 41), 0.0, 1);
    ProblemSettings settings;
    settings.floor = {SigmaFloor::Mode::Absolute, 1e-4};
    settings.solver.rel_tol = 1e-10;
    settings.solver.abs_tol = 1e-12;
    const auto problem = make_problem(data, ab, settings);
    const auto fit = fit_mle(problem, Crn::from_labels({1}), {{{0.5, 0.0}, {1e-2, 1e-2}}}, Origin::Recombined);
    REQUIRE(fit.has_value());
    CHECK(fit->mle_rates[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(fit->mle_rates[1] == 0.0);
    CHECK(fit->max_loglik >= fit->start_loglik);
    CHECK(fit->bic == -2 * fit->max_loglik + std::log(41.0));
    CHECK(fit->origin == Origin::Recombined);
    for (double s2 : fit->mle_sigma2) CHECK(s2 >= 1e-8 * (1 - 1e-12));

    CHECK(bic(-50.0, 3, 100.0) == doctest::Approx(100 + 3 * std::log(100.0)).epsilon(1e-15));
    CHECK(bic(-50.0, 3, 100.0) == doctest::Approx(113.8155).epsilon(1e-6));
    CHECK(bic(-50.0, 4, 100.0) - bic(-50.0, 3, 100.0) == doctest::Approx(std::log(100.0)));

    // the better of two starts is kept
    const auto two = fit_mle(problem, Crn::from_labels({1, 2}), {{{0.5, 0.5}, {1e-2, 1e-2}}, {{1.0, 1e-6}, {1e-2, 1e-2}}},
                             Origin::Pruned);
    REQUIRE(two.has_value());
    CHECK(two->max_loglik >= fit->max_loglik - 1e-6);
}

TEST_CASE("ensemble on a two-species system") {
    const auto ab = two_species();
    const auto data = fixtures::noisy_dataset(ab, Crn::from_labels({1}), {1.0, 0.0}, {1, 0},
                                              fixtures::linspace(0, 3, 31), 0.01, 1);
    const auto problem = make_problem(data, ab);
    MultistartConfig mc;
    mc.kind = PenaltyKind::ApproxL0;
    mc.n_start = 8;
    mc.lambda_indices = {2, 5};
    mc.seed = 3;
    const auto ests = multistart_inference(problem, mc);
    const auto ens = build_ensemble(problem, ests, {});
    REQUIRE_FALSE(ens.members.empty());
    std::set<Crn> seen;
    for (const auto& m : ens.members) {
        CHECK(seen.insert(m.crn).second);
        CHECK(m.bic == -2 * m.max_loglik + m.crn.size() * std::log(31.0));
    }
    CHECK(seen.count(Crn::from_labels({1})) == 1);
    const auto post = compute_posterior(scored(ens.members), ab.size(), PriorConfig::uniform(), 0.05);
    CHECK(post.entries[0].crn == Crn::from_labels({1}));
}
