#include "crnpost/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace crnpost {

std::string to_string(OptimizeStatus s) {
    switch (s) {
    case OptimizeStatus::GradientTolerance: return "gradient_tolerance";
    case OptimizeStatus::FunctionTolerance: return "function_tolerance";
    case OptimizeStatus::LineSearchStalled: return "line_search_stalled";
    case OptimizeStatus::MaxIterations: return "max_iterations";
    case OptimizeStatus::NonFiniteStart: return "non_finite_start";
    case OptimizeStatus::NaNGradient: return "nan_gradient";
    }
    return "unknown";
}

long finite_difference_gradient(const Objective& f, const Eigen::VectorXd& x, double fx,
                                const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double h,
                                Eigen::VectorXd& grad) {
    const Eigen::Index n = x.size();
    grad.resize(n);
    long calls = 0;
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool can_down = x(i) - h >= lower(i);
        const bool can_up = x(i) + h <= upper(i);
        double fp = std::numeric_limits<double>::quiet_NaN(), fm = fp;
        if (can_up) {
            xp(i) = x(i) + h;
            fp = f(xp);
            ++calls;
        }
        if (can_down) {
            xp(i) = x(i) - h;
            fm = f(xp);
            ++calls;
        }
        xp(i) = x(i);
        const bool up_ok = std::isfinite(fp), down_ok = std::isfinite(fm);
        if (up_ok && down_ok)
            grad(i) = (fp - fm) / (2 * h);
        else if (up_ok)
            grad(i) = (fp - fx) / h;
        else if (down_ok)
            grad(i) = (fx - fm) / h;
        else
            grad(i) = std::numeric_limits<double>::quiet_NaN();
    }
    return calls;
}

namespace {

Eigen::VectorXd project(Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

// Coordinates pinned at a bound with the gradient pointing outward.
std::vector<bool> active_set(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi) {
    std::vector<bool> active(static_cast<std::size_t>(x.size()), false);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        active[static_cast<std::size_t>(i)] = (x(i) <= lo(i) && g(i) > 0.0) || (x(i) >= hi(i) && g(i) < 0.0);
    return active;
}

}  // namespace

OptimizeResult minimize_bounded(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                const OptimizerOptions& opts, const std::optional<Eigen::VectorXd>& upper,
                                const GradientFn& gradient) {
    const Eigen::Index n = x0.size();
    if (lower.size() != n) throw std::invalid_argument("bound vector has the wrong length");
    const Eigen::VectorXd hi =
        upper ? *upper : Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    if (hi.size() != n) throw std::invalid_argument("bound vector has the wrong length");

    OptimizeResult res;
    res.x = project(x0, lower, hi);
    res.f = f(res.x);
    res.evaluations = 1;
    if (!std::isfinite(res.f)) {
        res.status = OptimizeStatus::NonFiniteStart;
        return res;
    }

    auto grad_at = [&](const Eigen::VectorXd& x, double fx, Eigen::VectorXd& g) {
        if (gradient)
            res.evaluations += gradient(x, fx, g);
        else
            res.evaluations += finite_difference_gradient(f, x, fx, lower, hi, opts.fd_step, g);
        return g.allFinite();
    };

    Eigen::VectorXd g;
    if (!grad_at(res.x, res.f, g)) {
        res.status = OptimizeStatus::NaNGradient;
        return res;
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool h_is_identity = true;

    for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
        const auto active = active_set(res.x, g, lower, hi);
        Eigen::VectorXd pg = g;
        for (Eigen::Index i = 0; i < n; ++i)
            if (active[static_cast<std::size_t>(i)]) pg(i) = 0.0;
        if (pg.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
            res.status = OptimizeStatus::GradientTolerance;
            return res;
        }

        bool accepted = false;
        Eigen::VectorXd x_new, s;
        double f_new = res.f;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            // quasi-Newton direction restricted to the free coordinates
            Eigen::VectorXd d = -(H * pg);
            for (Eigen::Index i = 0; i < n; ++i)
                if (active[static_cast<std::size_t>(i)]) d(i) = 0.0;
            if (!(pg.dot(d) < 0.0)) {
                H.setIdentity();
                h_is_identity = true;
                d = -pg;
            }
            // without curvature information the first trial step has unit length
            if (h_is_identity && d.norm() > 1.0) d /= d.norm();
            const double dn = d.lpNorm<Eigen::Infinity>();
            if (dn > opts.max_step) d *= opts.max_step / dn;

            double alpha = 1.0;
            for (int bt = 0; bt < opts.max_backtracks; ++bt, alpha *= 0.5) {
                x_new = project(res.x + alpha * d, lower, hi);
                s = x_new - res.x;
                if (s.lpNorm<Eigen::Infinity>() == 0.0) break;
                f_new = f(x_new);
                ++res.evaluations;
                if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * g.dot(s) && f_new < res.f) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (h_is_identity) break;
                H.setIdentity();
                h_is_identity = true;
            }
        }
        if (!accepted) {
            res.status = OptimizeStatus::LineSearchStalled;
            return res;
        }

        const double f_old = res.f;
        Eigen::VectorXd g_new;
        const bool grad_ok = grad_at(x_new, f_new, g_new);
        res.x = x_new;
        res.f = f_new;
        if (!grad_ok) {
            res.status = OptimizeStatus::NaNGradient;
            ++res.iterations;
            return res;
        }
        if (f_old - f_new <= opts.f_rel_tol * std::max({std::abs(f_old), std::abs(f_new), 1.0})) {
            g = g_new;
            ++res.iterations;
            res.status = OptimizeStatus::FunctionTolerance;
            return res;
        }

        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            if (h_is_identity) H *= sy / y.dot(y);
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = H * y;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            H += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
            h_is_identity = false;
        }
        g = g_new;
    }
    res.status = OptimizeStatus::MaxIterations;
    return res;
}

}  // namespace crnpost
