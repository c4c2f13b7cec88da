#pragma once

#include <optional>
#include <span>
#include <vector>

namespace crnpost {

/// Cubic smoothing spline minimising
///   sum_i (y_i - g(t_i))^2 + lambda * integral g''(t)^2 dt,
/// a natural cubic spline with knots at the data sites. Without an explicit
/// lambda the roughness weight is chosen by generalised cross-validation.
/// When GCV leaves fewer than n/10 residual degrees of freedom the weight is
/// instead set so that the mean squared residual equals a robust
/// difference-based estimate of the noise variance.
class SmoothingSpline {
public:
    SmoothingSpline() = default;

    static SmoothingSpline fit(std::span<const double> t, std::span<const double> y,
                               std::optional<double> lambda = std::nullopt);

    double operator()(double t) const;
    double derivative(double t) const;

    double lambda() const { return lambda_; }
    /// Trace of the smoother matrix.
    double effective_dof() const { return edf_; }
    const std::vector<double>& fitted() const { return g_; }

private:
    std::size_t interval(double t) const;

    std::vector<double> t_;
    std::vector<double> g_;
    std::vector<double> m_;  // second derivatives at the knots
    double lambda_ = 0.0;
    double edf_ = 0.0;
};

}  // namespace crnpost
