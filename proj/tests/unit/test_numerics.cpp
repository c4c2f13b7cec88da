#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "crnpost/optimize.hpp"
#include "crnpost/sobol.hpp"
#include "crnpost/spline.hpp"

using namespace crnpost;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return v;
}

// Exact L-infinity star discrepancy in two dimensions by checking all boxes
// anchored at point coordinates (and 1).
double star_discrepancy_2d(const std::vector<std::vector<double>>& pts) {
    std::vector<double> xs{1.0}, ys{1.0};
    for (const auto& p : pts) {
        xs.push_back(p[0]);
        ys.push_back(p[1]);
    }
    const double n = static_cast<double>(pts.size());
    double worst = 0.0;
    for (double a : xs)
        for (double b : ys) {
            int open = 0, closed = 0;
            for (const auto& p : pts) {
                open += p[0] < a && p[1] < b;
                closed += p[0] <= a && p[1] <= b;
            }
            worst = std::max({worst, a * b - open / n, closed / n - a * b});
        }
    return worst;
}

}  // namespace

TEST_CASE("smoothing spline reproduces simple functions") {
    const auto t = linspace(0, 10, 11);
    std::vector<double> y(t);
    const auto sp = SmoothingSpline::fit(t, y);
    for (double s : linspace(0, 10, 101)) CHECK(std::abs(sp.derivative(s) - 1.0) <= 1e-3);

    const std::vector<double> c(11, 3.0);
    const auto sc = SmoothingSpline::fit(t, c);
    for (double s : linspace(0, 10, 101)) {
        CHECK(std::abs(sc.derivative(s)) <= 1e-6);
        CHECK(std::abs(sc(s) - 3.0) <= 1e-9);
    }

    const auto te = linspace(0, 10, 101);
    std::vector<double> ye;
    for (double s : te) ye.push_back(std::exp(-s));
    const auto se = SmoothingSpline::fit(te, ye);
    double worst = 0.0;
    for (double s : linspace(0, 10, 1001)) worst = std::max(worst, std::abs(se(s) - std::exp(-s)));
    CHECK(worst <= 1e-3);
}

TEST_CASE("smoothing spline with noise and fixed lambda") {
    const auto t = linspace(0, 1, 41);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<double> y;
    for (double s : t) y.push_back(std::sin(3 * s) + noise(rng));
    const auto sp = SmoothingSpline::fit(t, y);
    CHECK(sp.effective_dof() > 2.0);
    CHECK(sp.effective_dof() < 20.0);
    double worst = 0.0;
    for (double s : linspace(0, 1, 101)) worst = std::max(worst, std::abs(sp(s) - std::sin(3 * s)));
    CHECK(worst < 0.1);

    // a huge lambda gives the least-squares line
    const auto line = SmoothingSpline::fit(t, y, 1e12);
    CHECK(std::abs(line.derivative(0.1) - line.derivative(0.9)) < 1e-6);
    // lambda zero interpolates
    const auto interp = SmoothingSpline::fit(t, y, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(interp(t[i]) == doctest::Approx(y[i]).epsilon(1e-8));
}

TEST_CASE("smoothing spline keeps residual freedom on a sharp transient") {
    // rise then slow decay, sampled too coarsely for the initial corner
    const auto t = linspace(0, 10, 51);
    const double sigma = 0.003;
    int ok = 0;
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, sigma);
        std::vector<double> y;
        for (double s : t) y.push_back(0.4 * (std::exp(-0.3 * s) - std::exp(-8.0 * s)) + noise(rng));
        const auto sp = SmoothingSpline::fit(t, y);
        double rss = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) rss += std::pow(y[i] - sp.fitted()[i], 2);
        const double var = rss / 51.0;
        CHECK(51.0 - sp.effective_dof() >= 5.1);
        ok += var > sigma * sigma / 3 && var < sigma * sigma * 3;
    }
    CHECK(ok >= 9);
}

TEST_CASE("smoothing spline input errors") {
    const std::vector<double> four{0, 1, 2, 3};
    CHECK_THROWS(SmoothingSpline::fit(four, four));
    const std::vector<double> same(6, 1.0);
    CHECK_THROWS(SmoothingSpline::fit(same, same));
}

TEST_CASE("unscrambled Sobol prefix") {
    const SobolSequence s(1, false, 0);
    const auto p = s.take(2);
    CHECK(p[0][0] == 0.0);
    CHECK(p[1][0] == 0.5);
    // second dimension of the standard sequence
    const SobolSequence s2(2, false, 0);
    CHECK(s2.point(2) == std::vector<double>{0.25, 0.75});
    CHECK(s2.point(3) == std::vector<double>{0.75, 0.25});
    CHECK_THROWS_AS(SobolSequence(SobolSequence::max_dimension() + 1, false, 0), std::invalid_argument);
}

TEST_CASE("scrambled Sobol points") {
    const SobolSequence s(30, true, 11);
    const auto pts = s.take(64);
    std::set<std::vector<double>> distinct(pts.begin(), pts.end());
    CHECK(distinct.size() == 64);
    for (const auto& p : pts)
        for (double v : p) CHECK((v >= 0.0 && v < 1.0));
    // each one-dimensional projection stays stratified: one point per 1/64 cell
    for (std::size_t d = 0; d < 30; ++d) {
        std::set<int> cells;
        for (const auto& p : pts) cells.insert(static_cast<int>(p[d] * 64));
        CHECK(cells.size() == 64);
    }
    // deterministic for a seed, different across seeds
    CHECK(SobolSequence(30, true, 11).take(64) == pts);
    CHECK(SobolSequence(30, true, 12).take(64) != pts);
}

TEST_CASE("scrambled Sobol beats uniform random on star discrepancy") {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto sob = SobolSequence(2, true, seed).take(64);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<std::vector<double>> rnd;
        for (int i = 0; i < 64; ++i) rnd.push_back({u(rng), u(rng)});
        wins += star_discrepancy_2d(sob) < star_discrepancy_2d(rnd);
    }
    CHECK(wins == 20);
}

TEST_CASE("bounded BFGS") {
    const Objective quad = [](const Eigen::VectorXd& x) { return (x(0) - 3) * (x(0) - 3); };
    auto r = minimize_bounded(quad, Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 0.0));
    CHECK(r.converged());
    CHECK(r.x(0) == doctest::Approx(3.0).epsilon(1e-6));

    r = minimize_bounded(quad, Eigen::VectorXd::Constant(1, 7.0), Eigen::VectorXd::Constant(1, 5.0));
    CHECK(r.status == OptimizeStatus::GradientTolerance);
    CHECK(r.x(0) == 5.0);

    const Objective rosen = [](const Eigen::VectorXd& x) {
        return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2);
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    r = minimize_bounded(rosen, x0, Eigen::VectorXd::Constant(2, -10.0));
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.f <= rosen(x0));

    // upper bounds
    Eigen::VectorXd hi(2);
    hi << 0.5, 10.0;
    r = minimize_bounded(rosen, x0, Eigen::VectorXd::Constant(2, -10.0), {}, hi);
    CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.x(1) == doctest::Approx(0.25).epsilon(1e-4));
}

TEST_CASE("optimizer failure modes") {
    const Objective inf = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::infinity(); };
    const auto r = minimize_bounded(inf, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, -1.0));
    CHECK(r.status == OptimizeStatus::NonFiniteStart);
    CHECK_FALSE(r.converged());
    CHECK(r.x == Eigen::VectorXd::Zero(2));

    // finite only at the start point: the gradient cannot be formed
    const Objective spike = [](const Eigen::VectorXd& x) {
        return x.norm() == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
    };
    CHECK(minimize_bounded(spike, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, -1.0)).status ==
          OptimizeStatus::NaNGradient);

    // a barrier beyond which the objective is infinite is respected
    const Objective wall = [](const Eigen::VectorXd& x) {
        return x(0) > 2.0 ? std::numeric_limits<double>::infinity() : -x(0);
    };
    const auto w = minimize_bounded(wall, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, -5.0));
    CHECK(w.x(0) <= 2.0);
    CHECK(w.x(0) > 1.9);
}

TEST_CASE("finite-difference gradient") {
    const Objective f = [](const Eigen::VectorXd& x) { return std::sin(x(0)) * std::exp(x(1)); };
    Eigen::VectorXd x(2), g;
    x << 0.3, -0.2;
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -1.0), hi = Eigen::VectorXd::Constant(2, 1.0);
    finite_difference_gradient(f, x, f(x), lo, hi, 1e-6, g);
    CHECK(g(0) == doctest::Approx(std::cos(0.3) * std::exp(-0.2)).epsilon(1e-8));
    CHECK(g(1) == doctest::Approx(std::sin(0.3) * std::exp(-0.2)).epsilon(1e-8));
    // at the lower bound the difference is one-sided
    x(0) = -1.0;
    finite_difference_gradient(f, x, f(x), lo, hi, 1e-6, g);
    CHECK(g(0) == doctest::Approx(std::cos(-1.0) * std::exp(-0.2)).epsilon(1e-5));
}
