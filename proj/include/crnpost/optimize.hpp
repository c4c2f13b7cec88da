#pragma once

// Bound-constrained BFGS with a projected gradient and finite-difference
// derivatives.

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace crnpost {

struct OptimizerOptions {
    int max_iter = 1000;
    /// Stop when the projected gradient infinity-norm falls below this.
    double grad_tol = 1e-6;
    /// Stop when an accepted step lowers f by less than this relative amount.
    double f_rel_tol = 1e-12;
    double fd_step = 1e-6;
    /// Largest infinity-norm of a trial step.
    double max_step = 5.0;
    int max_backtracks = 40;
};

enum class OptimizeStatus {
    GradientTolerance,
    FunctionTolerance,
    LineSearchStalled,
    MaxIterations,
    NonFiniteStart,
    NaNGradient,
};

std::string to_string(OptimizeStatus s);

struct OptimizeResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    long evaluations = 0;
    OptimizeStatus status = OptimizeStatus::MaxIterations;

    bool converged() const {
        return status == OptimizeStatus::GradientTolerance || status == OptimizeStatus::FunctionTolerance;
    }
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
/// Fills `grad` at `x` given f(x) = fx; returns the number of objective calls used.
using GradientFn = std::function<long(const Eigen::VectorXd& x, double fx, Eigen::VectorXd& grad)>;

/// Central differences with step h; one-sided where a bound or a non-finite
/// value blocks one side. Entries are NaN if neither side is finite.
long finite_difference_gradient(const Objective& f, const Eigen::VectorXd& x, double fx,
                                const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double h,
                                Eigen::VectorXd& grad);

/// Minimise f subject to lower <= x <= upper. `upper` defaults to +inf.
OptimizeResult minimize_bounded(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                const OptimizerOptions& opts = {},
                                const std::optional<Eigen::VectorXd>& upper = std::nullopt,
                                const GradientFn& gradient = {});

}  // namespace crnpost
