#include "crnpost/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace crnpost {

namespace {

struct Gcv {
    double score;
    double edf;
};

// z holds the data in the eigenbasis of the penalty matrix K, mu its eigenvalues
Gcv gcv(double lambda, const Eigen::VectorXd& z, const Eigen::VectorXd& mu) {
    const double n = static_cast<double>(z.size());
    double rss = 0.0, tr = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double s = 1.0 / (1.0 + lambda * mu(i));
        const double r = (1.0 - s) * z(i);
        rss += r * r;
        tr += s;
    }
    const double denom = n - tr;
    if (denom <= 1e-8 * n) return {std::numeric_limits<double>::infinity(), tr};
    return {n * rss / (denom * denom), tr};
}

// mean squared residual of the fit at lambda
double mean_square_residual(double lambda, const Eigen::VectorXd& z, const Eigen::VectorXd& mu) {
    double rss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double r = lambda * mu(i) / (1.0 + lambda * mu(i)) * z(i);
        rss += r * r;
    }
    return rss / static_cast<double>(z.size());
}

// Gasser-Sroka-Jennen-Steinmetz pseudo-residuals with neighbours `lag` apart;
// the median of their squares over that of chi-square(1) resists sharp features
double difference_variance(std::span<const double> t, std::span<const double> y, std::size_t lag) {
    std::vector<double> sq;
    for (std::size_t i = lag; i + lag < t.size(); ++i) {
        const double a = (t[i + lag] - t[i]) / (t[i + lag] - t[i - lag]);
        const double b = 1.0 - a;
        const double e = a * y[i - lag] + b * y[i + lag] - y[i];
        sq.push_back(e * e / (a * a + b * b + 1.0));
    }
    const auto mid = sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2);
    std::nth_element(sq.begin(), mid, sq.end());
    return *mid / 0.45493642311957283;
}

// Noise variance from differences, or zero when curvature rather than noise
// dominates them (for pure noise both lags agree, smooth curves scale as h^4).
double noise_variance(std::span<const double> t, std::span<const double> y) {
    if (t.size() < 5) return 0.0;
    const double v1 = difference_variance(t, y, 1), v2 = difference_variance(t, y, 2);
    if (!(v2 < 4.0 * v1)) return 0.0;
    return std::max(0.0, (16.0 * v1 - v2) / 15.0);
}

}  // namespace

SmoothingSpline SmoothingSpline::fit(std::span<const double> t, std::span<const double> y,
                                     std::optional<double> lambda) {
    const std::size_t n = t.size();
    if (n != y.size()) throw std::invalid_argument("spline input lengths differ");
    if (n < 5) throw std::invalid_argument("smoothing spline needs at least 5 points");
    for (std::size_t i = 1; i < n; ++i)
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("spline abscissae must be strictly increasing");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(y[i]) || !std::isfinite(t[i])) throw std::invalid_argument("spline input is not finite");

    const auto N = static_cast<Eigen::Index>(n);
    std::vector<double> h(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) h[i] = t[i + 1] - t[i];

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(N, N - 2);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(N - 2, N - 2);
    for (Eigen::Index j = 1; j + 1 < N; ++j) {
        const auto c = j - 1;
        const double hl = h[static_cast<std::size_t>(j - 1)], hr = h[static_cast<std::size_t>(j)];
        Q(j - 1, c) = 1.0 / hl;
        Q(j, c) = -1.0 / hl - 1.0 / hr;
        Q(j + 1, c) = 1.0 / hr;
        R(c, c) = (hl + hr) / 3.0;
        if (c + 1 < N - 2) {
            R(c, c + 1) = hr / 6.0;
            R(c + 1, c) = hr / 6.0;
        }
    }
    const Eigen::LLT<Eigen::MatrixXd> r_llt(R);
    const Eigen::MatrixXd K = Q * r_llt.solve(Q.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (K + K.transpose()));
    const Eigen::VectorXd mu = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), N);
    const Eigen::VectorXd z = eig.eigenvectors().transpose() * yv;

    SmoothingSpline sp;
    if (lambda) {
        if (!(*lambda >= 0.0)) throw std::invalid_argument("smoothing parameter must be nonnegative");
        sp.lambda_ = *lambda;
    } else {
        const double mu_max = mu.maxCoeff();
        double mu_min = mu_max;
        for (Eigen::Index i = 0; i < N; ++i)
            if (mu(i) > 1e-12 * mu_max) mu_min = std::min(mu_min, mu(i));
        const double lo = std::log(1e-6 / mu_max), hi = std::log(1e6 / mu_min);
        // coarse scan from the smooth end so that flat GCV curves keep the smoothest fit
        const int n_grid = 121;
        double best_x = hi, best_v = gcv(std::exp(hi), z, mu).score;
        for (int i = n_grid - 1; i >= 0; --i) {
            const double x = lo + (hi - lo) * i / (n_grid - 1);
            const double v = gcv(std::exp(x), z, mu).score;
            if (v < best_v * (1.0 - 1e-12)) {
                best_v = v;
                best_x = x;
            }
        }
        // golden-section refinement within one grid cell either side
        const double step = (hi - lo) / (n_grid - 1);
        double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
        double f1 = gcv(std::exp(x1), z, mu).score, f2 = gcv(std::exp(x2), z, mu).score;
        for (int it = 0; it < 60; ++it) {
            if (f1 < f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = gcv(std::exp(x1), z, mu).score;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = gcv(std::exp(x2), z, mu).score;
            }
        }
        const double refined = 0.5 * (a + b);
        sp.lambda_ = gcv(std::exp(refined), z, mu).score < best_v ? std::exp(refined) : std::exp(best_x);

        // GCV can run off to interpolation when a sharp feature dominates the
        // roughness; then pick the fit whose mean squared residual matches a
        // difference estimate of the noise variance
        if (n - gcv(sp.lambda_, z, mu).edf < 0.1 * n) {
            const double target = noise_variance(t, y);
            if (target > 0.0 && mean_square_residual(std::exp(hi), z, mu) > target) {
                double a_lo = std::log(sp.lambda_), b_hi = hi;
                for (int it = 0; it < 100; ++it) {
                    const double mid = 0.5 * (a_lo + b_hi);
                    (mean_square_residual(std::exp(mid), z, mu) < target ? a_lo : b_hi) = mid;
                }
                sp.lambda_ = std::exp(0.5 * (a_lo + b_hi));
            }
        }
    }

    Eigen::VectorXd shrink(N);
    for (Eigen::Index i = 0; i < N; ++i) shrink(i) = 1.0 / (1.0 + sp.lambda_ * mu(i));
    const Eigen::VectorXd g = eig.eigenvectors() * shrink.cwiseProduct(z);
    const Eigen::VectorXd gamma = r_llt.solve(Q.transpose() * g);

    sp.edf_ = shrink.sum();
    sp.t_.assign(t.begin(), t.end());
    sp.g_.assign(g.data(), g.data() + N);
    sp.m_.assign(n, 0.0);
    for (Eigen::Index j = 1; j + 1 < N; ++j) sp.m_[static_cast<std::size_t>(j)] = gamma(j - 1);
    return sp;
}

std::size_t SmoothingSpline::interval(double t) const {
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - t_.begin() - 1, 0));
    return std::min(i, t_.size() - 2);
}

double SmoothingSpline::operator()(double t) const {
    if (t < t_.front()) return g_.front() + (t - t_.front()) * derivative(t_.front());
    if (t > t_.back()) return g_.back() + (t - t_.back()) * derivative(t_.back());
    const std::size_t i = interval(t);
    const double h = t_[i + 1] - t_[i];
    const double a = t_[i + 1] - t, b = t - t_[i];
    return m_[i] * a * a * a / (6 * h) + m_[i + 1] * b * b * b / (6 * h) + (g_[i] / h - m_[i] * h / 6) * a +
           (g_[i + 1] / h - m_[i + 1] * h / 6) * b;
}

double SmoothingSpline::derivative(double t) const {
    // natural spline: linear outside the knots
    t = std::clamp(t, t_.front(), t_.back());
    const std::size_t i = interval(t);
    const double h = t_[i + 1] - t_[i];
    const double a = t_[i + 1] - t, b = t - t_[i];
    return -m_[i] * a * a / (2 * h) + m_[i + 1] * b * b / (2 * h) - (g_[i] / h - m_[i] * h / 6) +
           (g_[i + 1] / h - m_[i + 1] * h / 6);
}

}  // namespace crnpost
