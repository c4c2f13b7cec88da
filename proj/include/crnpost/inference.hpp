#pragma once

// Penalised estimation of rate constants and noise variances.
//
// Rate constants are optimised as eta_r = log(k_r / kappa_r) and noise
// variances as varsigma_s = log(sigma_s^2).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crnpost/dynamics.hpp"
#include "crnpost/model.hpp"
#include "crnpost/optimize.hpp"
#include "crnpost/spline.hpp"

namespace crnpost {

struct Dataset {
    std::vector<std::string> species;
    std::vector<double> t;
    Eigen::MatrixXd y;  // n_obs x n_species
    std::vector<double> x0;

    std::size_t n_obs() const { return t.size(); }
    std::size_t n_species() const { return species.size(); }
    double t_end() const { return t.back(); }
    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
};

enum class PenaltyKind { L1, LogL1, ApproxL0, Horseshoe };

/// "l1", "logl1", "l0", "horseshoe".
std::string to_string(PenaltyKind kind);
PenaltyKind parse_penalty(const std::string& name);
inline constexpr PenaltyKind kAllPenalties[] = {PenaltyKind::L1, PenaltyKind::LogL1, PenaltyKind::ApproxL0,
                                                 PenaltyKind::Horseshoe};

struct PenaltyConstants {
    double epsilon = 1e-10;
    double rho = 0.1;
};

/// Penalty on a dimensionless rate constant k/kappa. Throws if k < epsilon.
double penalty(PenaltyKind kind, double k_scaled, double lambda, const PenaltyConstants& c = {});

/// The ten geometric hyperparameter values for a penalty, ascending.
std::vector<double> hyperparameter_grid(PenaltyKind kind);
/// n indices spread evenly over a grid of `grid_size` values, always
/// including both ends (all indices when n >= grid_size).
std::vector<std::size_t> hyperparameter_subset(std::size_t grid_size, std::size_t n);

/// Gaussian negative log-likelihood of observations given predictions at the
/// observation times (same shape as dataset.y).
double neg_log_likelihood(const Dataset& data, const Eigen::MatrixXd& predicted, std::span<const double> sigma2);
/// Simulates the CRN from dataset.x0; +inf if the integration fails.
double neg_log_likelihood(const Dataset& data, const ReactionLibrary& lib, const Crn& crn,
                          std::span<const double> rates, std::span<const double> sigma2,
                          const SolverConfig& solver = {});
/// Predictions at the observation times, or nothing on integration failure.
std::optional<Eigen::MatrixXd> predict(const Dataset& data, const ReactionLibrary& lib, const Crn& crn,
                                       std::span<const double> rates, const SolverConfig& solver = {});

/// One GCV smoothing spline per species.
std::vector<SmoothingSpline> smooth_trajectories(const Dataset& data);

/// kappa_r from the spline estimates of x and x' (see README for the exact rule).
std::vector<double> estimate_scaling_factors(const Dataset& data, const ReactionLibrary& lib,
                                             const std::vector<SmoothingSpline>& splines);
std::vector<double> initial_varsigma(const Dataset& data, const std::vector<SmoothingSpline>& splines);

/// n scrambled Sobol points mapped affinely to [lo, hi]^dim.
std::vector<std::vector<double>> sobol_starts(std::size_t n, std::size_t dim, double lo, double hi,
                                              std::uint64_t seed, bool scramble = true);

struct SigmaFloor {
    enum class Mode { Relative, Absolute };
    /// Relative: sigma_s >= value * sqrt(exp(varsigma_init_s)); Absolute: sigma_s >= value.
    Mode mode = Mode::Relative;
    double value = 0.01;
};

/// Everything fixed across optimisation runs on one dataset and library.
struct InferenceProblem {
    const Dataset* data = nullptr;
    const ReactionLibrary* lib = nullptr;
    std::vector<double> kappa;
    std::vector<double> varsigma_init;
    std::vector<double> varsigma_lower;
    SolverConfig solver;
    OptimizerOptions optimizer;
    PenaltyConstants constants;

    double eta_lower() const;
    std::size_t n_reactions() const { return lib->size(); }
    std::size_t n_species() const { return data->n_species(); }
};

struct ProblemSettings {
    SigmaFloor floor;
    /// Replace estimated scaling factors by reaction index.
    std::vector<std::pair<std::size_t, double>> kappa_overrides;
    SolverConfig solver;
    OptimizerOptions optimizer;
    PenaltyConstants constants;
};

InferenceProblem make_problem(const Dataset& data, const ReactionLibrary& lib, const ProblemSettings& settings = {});

struct ParamEstimate {
    std::vector<double> eta;
    std::vector<double> varsigma;
    double loss = 0.0;
    PenaltyKind kind = PenaltyKind::LogL1;
    double lambda = 0.0;
    std::size_t lambda_index = 0;
    std::size_t start_id = 0;
    OptimizeStatus status = OptimizeStatus::MaxIterations;
    int iterations = 0;

    bool converged() const {
        return status == OptimizeStatus::GradientTolerance || status == OptimizeStatus::FunctionTolerance;
    }
    std::vector<double> rates(std::span<const double> kappa) const;
    std::vector<double> sigma2() const;
};

/// Loss over x = (eta restricted to `support`, varsigma). Reactions outside
/// the support have rate zero and no penalty. With no penalty this is the
/// negative log-likelihood. Keeps the last prediction so that derivatives in
/// varsigma need no new simulation; one evaluator per thread.
class LossEvaluator {
public:
    LossEvaluator(const InferenceProblem& problem, Crn support, std::optional<PenaltyKind> kind, double lambda);

    std::size_t dim() const { return support_.size() + problem_->n_species(); }
    const Crn& support() const { return support_; }

    double operator()(const Eigen::VectorXd& x) const;
    long gradient(const Eigen::VectorXd& x, double fx, Eigen::VectorXd& grad) const;

    Eigen::VectorXd pack(std::span<const double> eta_full, std::span<const double> varsigma) const;
    std::vector<double> unpack_eta(const Eigen::VectorXd& x) const;
    std::vector<double> unpack_varsigma(const Eigen::VectorXd& x) const;
    Eigen::VectorXd lower_bounds() const;

private:
    const Eigen::MatrixXd* predictions(const Eigen::VectorXd& x) const;
    double penalty_sum(const Eigen::VectorXd& x) const;
    double nll(const Eigen::MatrixXd& pred, const Eigen::VectorXd& x) const;

    const InferenceProblem* problem_;
    Crn support_;
    std::optional<PenaltyKind> kind_;
    double lambda_;
    mutable Eigen::VectorXd cached_eta_;
    mutable std::optional<Eigen::MatrixXd> cached_pred_;
    mutable bool cache_valid_ = false;
};

/// A single penalised optimisation over the full library.
ParamEstimate optimize_estimate(const InferenceProblem& problem, PenaltyKind kind, double lambda,
                                std::span<const double> eta0, std::span<const double> varsigma0);

struct MultistartConfig {
    PenaltyKind kind = PenaltyKind::LogL1;
    std::size_t n_start = 64;
    /// Indices into hyperparameter_grid(kind); empty means all ten.
    std::vector<std::size_t> lambda_indices;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    double start_lo = -9.210340371976184;  // log 1e-4
    double start_hi = 0.0;
};

/// n_lambda x n_start estimates ordered by (lambda position, start index);
/// every lambda uses the same starting points.
std::vector<ParamEstimate> multistart_inference(const InferenceProblem& problem, const MultistartConfig& cfg);

}  // namespace crnpost
