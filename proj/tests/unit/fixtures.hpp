#pragma once

#include <vector>

#include "crnpost/model.hpp"

namespace fixtures {

// Three species, complexes X1, X2, X3, X1+X2, X2+X3, X1+X3 and all 30
// ordered pairs. Reaction 1 is X1 -> X2, 13 is X3 -> X1 + X2, 18 is
// X1 + X2 -> X3 and 30 is X1 + X3 -> X2 + X3.
inline crnpost::ReactionLibrary three_species_library() {
    using crnpost::Complex;
    std::vector<Complex> complexes{Complex({1, 0, 0}), Complex({0, 1, 0}), Complex({0, 0, 1}),
                                   Complex({1, 1, 0}), Complex({0, 1, 1}), Complex({1, 0, 1})};
    return crnpost::enumerate_library({"X1", "X2", "X3"}, complexes, {});
}

inline std::vector<double> rates_for(const crnpost::ReactionLibrary& lib, std::initializer_list<std::pair<int, double>> labelled) {
    std::vector<double> k(lib.size(), 0.0);
    for (auto [label, v] : labelled) k[static_cast<std::size_t>(label - 1)] = v;
    return k;
}

}  // namespace fixtures

#include <algorithm>
#include <random>

#include "crnpost/dynamics.hpp"
#include "crnpost/inference.hpp"

namespace fixtures {

// Observations of a simulated trajectory with Gaussian noise of standard
// deviation `frac` times each species' range, clipped at zero.
inline crnpost::Dataset noisy_dataset(const crnpost::ReactionLibrary& lib, const crnpost::Crn& crn,
                                      const std::vector<double>& rates, const std::vector<double>& x0,
                                      const std::vector<double>& times, double frac, unsigned seed) {
    crnpost::Dataset d;
    d.species = lib.species();
    d.t = times;
    d.x0 = x0;
    const auto traj = crnpost::simulate(lib, crn, rates, x0, times.back());
    d.y = traj.sample(times);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto dense = traj.sample(crnpost::uniform_grid(times.back(), 2001));
    for (Eigen::Index s = 0; s < d.y.cols(); ++s) {
        const double sd = frac * (dense.col(s).maxCoeff() - dense.col(s).minCoeff());
        for (Eigen::Index n = 0; n < d.y.rows(); ++n) d.y(n, s) = std::max(d.y(n, s) + sd * z(rng), 0.0);
    }
    return d;
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return v;
}

}  // namespace fixtures
