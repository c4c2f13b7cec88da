#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "crnpost/posterior.hpp"

using namespace crnpost;

namespace {

double log_choose(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// BICs that give the requested probabilities under equal priors
std::vector<ScoredCrn> from_probs(const std::vector<double>& probs) {
    std::vector<ScoredCrn> out;
    for (std::size_t i = 0; i < probs.size(); ++i) out.push_back({Crn({i}), -2.0 * std::log(probs[i])});
    return out;
}

}  // namespace

TEST_CASE("uniform prior on the reaction count") {
    CHECK(log_prior(3, 30, PriorConfig::uniform()) == doctest::Approx(-std::log(31.0 * 4060.0)).epsilon(1e-13));
    CHECK(log_prior(3, 30, PriorConfig::uniform()) == doctest::Approx(-11.7429).epsilon(1e-5));
    double total = 0.0;
    for (int m = 0; m <= 30; ++m) total += std::exp(log_choose(30, m) + log_prior(m, 30, PriorConfig::uniform()));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(log_prior(31, 30, PriorConfig::uniform()));
}

TEST_CASE("beta prior") {
    const auto b11 = PriorConfig::beta(0.5, 1.0 / 12.0);
    for (int m = 0; m <= 30; ++m)
        CHECK(std::abs(log_prior(m, 30, b11) - log_prior(m, 30, PriorConfig::uniform())) <= 1e-12);

    const auto b25 = PriorConfig::beta_shapes(2.0, 5.0);
    const auto [a, b] = b25.shapes();
    CHECK(a == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(b == doctest::Approx(5.0).epsilon(1e-12));
    double total = 0.0;
    for (int m = 0; m <= 30; ++m) total += std::exp(log_choose(30, m) + log_prior(m, 30, b25));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // small library: sum over every subset with the beta-binomial integral done numerically
    const int n = 4;
    for (int m = 0; m <= n; ++m) {
        double integral = 0.0;
        const int steps = 200000;
        for (int i = 0; i < steps; ++i) {
            const double q = (i + 0.5) / steps;
            integral += std::pow(q, m) * std::pow(1 - q, n - m) * 30.0 * q * std::pow(1 - q, 4) / steps;
        }
        CHECK(std::exp(log_prior(m, n, b25)) == doctest::Approx(integral).epsilon(1e-6));
    }

    CHECK_THROWS_WITH_AS(PriorConfig::beta(0.5, 0.3).shapes(), doctest::Contains("0.25"), std::invalid_argument);
    CHECK_THROWS(PriorConfig::beta(1.5, 0.01).shapes());
}

TEST_CASE("posterior probabilities") {
    const auto even = compute_posterior({{Crn({0}), 10.0}, {Crn({1}), 10.0}}, 5, PriorConfig::uniform(), 0.05);
    CHECK(even.entries[0].prob == doctest::Approx(0.5));
    CHECK(even.entries[1].prob == doctest::Approx(0.5));
    CHECK(even.entries[0].crn == Crn({0}));

    const double b = 123.4, l10 = std::log(10.0);
    const auto three = compute_posterior({{Crn({2}), b + 4 * l10}, {Crn({0}), b}, {Crn({1}), b + 2 * l10}}, 5,
                                         PriorConfig::uniform(), 0.05);
    const double z = 1.0 + 0.1 + 0.01;
    CHECK(three.entries[0].prob == doctest::Approx(1.0 / z).epsilon(1e-13));
    CHECK(three.entries[1].prob == doctest::Approx(0.1 / z).epsilon(1e-13));
    CHECK(three.entries[2].prob == doctest::Approx(0.01 / z).epsilon(1e-13));

    const auto hpd = compute_posterior(from_probs({0.5, 0.3, 0.15, 0.05}), 5, PriorConfig::uniform(), 0.05);
    CHECK(hpd.hpd_size() == 3);
    CHECK(hpd.entries[2].hpd);
    CHECK_FALSE(hpd.entries[3].hpd);

    CHECK_THROWS(compute_posterior({}, 5, PriorConfig::uniform(), 0.05));
    CHECK_THROWS(compute_posterior({{Crn({0}), 1.0}, {Crn({0}), 2.0}}, 5, PriorConfig::uniform(), 0.05));
    CHECK_THROWS(compute_posterior({{Crn({0}), 1.0}}, 5, PriorConfig::uniform(), 1.0));
}

TEST_CASE("posterior invariants on random tables") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> bic(-500.0, 500.0);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ScoredCrn> ens;
        std::set<Crn> seen;
        while (ens.size() < 30) {
            std::vector<std::size_t> m;
            for (std::size_t r = 0; r < 8; ++r)
                if (coin(rng)) m.push_back(r);
            if (seen.insert(Crn(m)).second) ens.push_back({Crn(m), bic(rng) * 0.05});
        }
        const auto prior = trial % 2 ? PriorConfig::uniform() : PriorConfig::beta_shapes(2, 5);
        const auto t = compute_posterior(ens, 8, prior, 0.05);
        double sum = 0.0;
        for (std::size_t i = 0; i < t.entries.size(); ++i) {
            sum += t.entries[i].prob;
            if (i) {
                CHECK(t.entries[i].prob <= t.entries[i - 1].prob);
                CHECK(t.entries[i].log_unnorm <= t.entries[i - 1].log_unnorm);
            }
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

        auto shifted = ens;
        for (auto& e : shifted) e.bic += 1000.0;
        const auto ts = compute_posterior(shifted, 8, prior, 0.05);
        for (std::size_t i = 0; i < t.entries.size(); ++i) {
            CHECK(ts.entries[i].crn == t.entries[i].crn);
            CHECK(std::abs(ts.entries[i].prob - t.entries[i].prob) <= 1e-12);
        }

        const auto loose = compute_posterior(ens, 8, prior, 0.2);
        CHECK(loose.hpd_size() <= t.hpd_size());
        for (std::size_t i = 0; i < loose.entries.size(); ++i)
            if (loose.entries[i].hpd) CHECK(t.entries[i].hpd);
    }
}

TEST_CASE("reaction probabilities and correlations") {
    const auto t = compute_posterior(from_probs({0.6, 0.4}), 3, PriorConfig::uniform(), 0.05);
    const auto p = reaction_probabilities(t, 3);
    CHECK(p[0] == doctest::Approx(0.6));
    CHECK(p[1] == doctest::Approx(0.4));
    CHECK(p[2] == 0.0);

    const auto half = compute_posterior(from_probs({0.5, 0.5}), 2, PriorConfig::uniform(), 0.05);
    const auto c = reaction_correlations(half, 2);
    CHECK(c(0, 1) == doctest::Approx(-1.0));
    CHECK(c(0, 0) == doctest::Approx(1.0));

    // reaction 0 everywhere: zero variance row
    const auto always =
        compute_posterior({{Crn({0, 1}), 1.0}, {Crn({0, 2}), 2.0}, {Crn({0}), 3.0}}, 3, PriorConfig::uniform(), 0.05);
    CHECK(reaction_probabilities(always, 3)[0] == doctest::Approx(1.0));
    const auto ca = reaction_correlations(always, 3);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(ca(0, j) == 0.0);

    // Pearson correlation of weighted indicator samples as the oracle
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<ScoredCrn> ens;
    for (std::size_t mask = 1; mask < 32; mask += 2) {
        std::vector<std::size_t> m;
        for (std::size_t r = 0; r < 5; ++r)
            if (mask >> r & 1) m.push_back(r);
        ens.push_back({Crn(m), u(rng)});
    }
    const auto rt = compute_posterior(ens, 5, PriorConfig::uniform(), 0.05);
    const auto rc = reaction_correlations(rt, 5);
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
            double ea = 0, eb = 0, eab = 0, eaa = 0, ebb = 0;
            for (const auto& e : rt.entries) {
                const double ia = e.crn.contains(a), ib = e.crn.contains(b);
                ea += e.prob * ia;
                eb += e.prob * ib;
                eab += e.prob * ia * ib;
                eaa += e.prob * ia * ia;
                ebb += e.prob * ib * ib;
            }
            const double va = eaa - ea * ea, vb = ebb - eb * eb;
            const double expect = (va < 1e-12 || vb < 1e-12) ? 0.0 : (eab - ea * eb) / std::sqrt(va * vb);
            CHECK(rc(a, b) == doctest::Approx(expect).epsilon(1e-9));
            CHECK(rc(a, b) == rc(b, a));
            CHECK(std::abs(rc(a, b)) <= 1.0);
        }
    CHECK(rc(0, 0) == 0.0);  // reaction 0 is in every member
    CHECK(rc(1, 1) == doctest::Approx(1.0));
}
