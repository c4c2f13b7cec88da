#include "crnpost/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "crnpost/parallel.hpp"
#include "crnpost/sobol.hpp"

namespace crnpost {

void Dataset::validate() const {
    if (species.empty()) throw std::invalid_argument("dataset has no species");
    if (t.empty()) throw std::invalid_argument("dataset has no observations");
    if (static_cast<std::size_t>(y.rows()) != t.size() || static_cast<std::size_t>(y.cols()) != species.size())
        throw std::invalid_argument("observation matrix shape does not match times and species");
    if (x0.size() != species.size()) throw std::invalid_argument("initial state has the wrong number of species");
    if (t.front() < 0.0) throw std::invalid_argument("observation times must be nonnegative");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("observation times must be strictly increasing");
    if (!(t.back() > 0.0)) throw std::invalid_argument("last observation time must be positive");
    if (!y.allFinite() || (y.array() < 0.0).any())
        throw std::invalid_argument("observations must be finite and nonnegative");
    for (double v : x0)
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("initial state must be nonnegative");
}

std::string to_string(PenaltyKind kind) {
    switch (kind) {
    case PenaltyKind::L1: return "l1";
    case PenaltyKind::LogL1: return "logl1";
    case PenaltyKind::ApproxL0: return "l0";
    case PenaltyKind::Horseshoe: return "horseshoe";
    }
    return "unknown";
}

PenaltyKind parse_penalty(const std::string& name) {
    for (auto k : kAllPenalties)
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown penalty '" + name + "' (expected l1, logl1, l0 or horseshoe)");
}

double penalty(PenaltyKind kind, double k, double lambda, const PenaltyConstants& c) {
    if (!(k >= c.epsilon * (1.0 - 1e-9)))
        throw std::invalid_argument("scaled rate constant below the lower bound epsilon");
    switch (kind) {
    case PenaltyKind::L1: return lambda * k;
    case PenaltyKind::LogL1: return lambda * std::abs(std::log(k) - std::log(c.epsilon));
    case PenaltyKind::ApproxL0: return lambda * std::pow(k, c.rho);
    case PenaltyKind::Horseshoe: {
        const double lk = lambda * k;
        return -std::log(std::log1p(1.0 / (lk * lk)));
    }
    }
    return 0.0;
}

std::vector<double> hyperparameter_grid(PenaltyKind kind) {
    double base = 2.0, scale = 1.0;
    switch (kind) {
    case PenaltyKind::ApproxL0: break;
    case PenaltyKind::LogL1: scale = 1.0 / std::log(1e10); break;
    case PenaltyKind::L1: base = 4.0; break;
    case PenaltyKind::Horseshoe: base = 32.0; break;
    }
    std::vector<double> grid;
    for (int e = -3; e <= 6; ++e) grid.push_back(scale * std::pow(base, e));
    return grid;
}

std::vector<std::size_t> hyperparameter_subset(std::size_t grid_size, std::size_t n) {
    if (grid_size == 0 || n == 0) throw std::invalid_argument("empty hyperparameter selection");
    std::vector<std::size_t> out;
    if (n >= grid_size) {
        for (std::size_t i = 0; i < grid_size; ++i) out.push_back(i);
        return out;
    }
    if (n == 1) return {(grid_size - 1) / 2};
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(static_cast<std::size_t>(
            std::lround(static_cast<double>(i * (grid_size - 1)) / static_cast<double>(n - 1))));
    return out;
}

double neg_log_likelihood(const Dataset& data, const Eigen::MatrixXd& predicted, std::span<const double> sigma2) {
    if (predicted.rows() != data.y.rows() || predicted.cols() != data.y.cols())
        throw std::invalid_argument("prediction shape does not match the dataset");
    if (sigma2.size() != data.n_species()) throw std::invalid_argument("one noise variance per species is required");
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double acc = 0.0;
    for (Eigen::Index s = 0; s < data.y.cols(); ++s) {
        const double v = sigma2[static_cast<std::size_t>(s)];
        if (!(v > 0.0)) throw std::invalid_argument("noise variances must be positive");
        const double rss = (data.y.col(s) - predicted.col(s)).squaredNorm();
        acc += static_cast<double>(data.y.rows()) * (log2pi + std::log(v)) + rss / v;
    }
    return 0.5 * acc;
}

std::optional<Eigen::MatrixXd> predict(const Dataset& data, const ReactionLibrary& lib, const Crn& crn,
                                       std::span<const double> rates, const SolverConfig& solver) {
    const MassActionSystem sys(lib, crn, rates);
    auto traj = try_simulate(sys, data.x0, data.t_end(), solver);
    if (!traj) return std::nullopt;
    Eigen::MatrixXd pred = traj->sample(data.t);
    if (!pred.allFinite()) return std::nullopt;
    return pred;
}

double neg_log_likelihood(const Dataset& data, const ReactionLibrary& lib, const Crn& crn,
                          std::span<const double> rates, std::span<const double> sigma2, const SolverConfig& solver) {
    const auto pred = predict(data, lib, crn, rates, solver);
    if (!pred) return std::numeric_limits<double>::infinity();
    return neg_log_likelihood(data, *pred, sigma2);
}

std::vector<SmoothingSpline> smooth_trajectories(const Dataset& data) {
    std::vector<SmoothingSpline> out;
    std::vector<double> col(data.n_obs());
    for (std::size_t s = 0; s < data.n_species(); ++s) {
        for (std::size_t n = 0; n < data.n_obs(); ++n)
            col[n] = data.y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s));
        out.push_back(SmoothingSpline::fit(data.t, col));
    }
    return out;
}

std::vector<double> estimate_scaling_factors(const Dataset& data, const ReactionLibrary& lib,
                                             const std::vector<SmoothingSpline>& splines) {
    if (splines.size() != data.n_species()) throw std::invalid_argument("one spline per species is required");
    const auto grid = uniform_grid(data.t_end());
    const std::size_t S = data.n_species();
    std::vector<std::vector<double>> x(S), dx(S);
    std::vector<double> dx_range(S);
    for (std::size_t s = 0; s < S; ++s) {
        for (double t : grid) {
            x[s].push_back(std::max(splines[s](t), 0.0));
            dx[s].push_back(splines[s].derivative(t));
        }
        const auto [lo, hi] = std::minmax_element(dx[s].begin(), dx[s].end());
        dx_range[s] = *hi - *lo;
    }

    std::vector<double> kappa(lib.size(), 1.0);
    for (std::size_t r = 0; r < lib.size(); ++r) {
        const auto& src = lib[r].source;
        double mono_lo = std::numeric_limits<double>::infinity(), mono_hi = -mono_lo;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double m = 1.0;
            for (std::size_t s = 0; s < S; ++s)
                for (int e = 0; e < src[s]; ++e) m *= x[s][i];
            mono_lo = std::min(mono_lo, m);
            mono_hi = std::max(mono_hi, m);
        }
        const double mono_range = mono_hi - mono_lo;
        if (!(mono_range > 0.0)) continue;
        const auto net = net_stoichiometry(lib[r]);
        bool any = false;
        double best = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            if (net[s] == 0) continue;
            const double term = dx_range[s] / (std::abs(static_cast<double>(net[s])) * mono_range);
            if (!std::isfinite(term)) continue;
            best = any ? std::max(best, term) : term;
            any = true;
        }
        if (any) kappa[r] = std::clamp(best, 1e-6, 1e6);
    }
    return kappa;
}

std::vector<double> initial_varsigma(const Dataset& data, const std::vector<SmoothingSpline>& splines) {
    std::vector<double> out(data.n_species());
    for (std::size_t s = 0; s < data.n_species(); ++s) {
        double acc = 0.0;
        for (std::size_t n = 0; n < data.n_obs(); ++n) {
            const double r = data.y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s)) - splines[s](data.t[n]);
            acc += r * r;
        }
        const double mse = acc / static_cast<double>(data.n_obs());
        out[s] = std::log(std::max(mse, 1e-12));
    }
    return out;
}

std::vector<std::vector<double>> sobol_starts(std::size_t n, std::size_t dim, double lo, double hi,
                                              std::uint64_t seed, bool scramble) {
    if (!(lo < hi)) throw std::invalid_argument("start interval must satisfy lo < hi");
    auto pts = SobolSequence(dim, scramble, seed).take(n);
    for (auto& p : pts)
        for (auto& v : p) v = lo + (hi - lo) * v;
    return pts;
}

double InferenceProblem::eta_lower() const { return std::log(constants.epsilon); }

InferenceProblem make_problem(const Dataset& data, const ReactionLibrary& lib, const ProblemSettings& settings) {
    data.validate();
    if (lib.n_species() != data.n_species()) throw std::invalid_argument("library and dataset species differ");
    InferenceProblem p;
    p.data = &data;
    p.lib = &lib;
    p.solver = settings.solver;
    p.optimizer = settings.optimizer;
    p.constants = settings.constants;
    const auto splines = smooth_trajectories(data);
    p.kappa = estimate_scaling_factors(data, lib, splines);
    for (const auto& [r, v] : settings.kappa_overrides) {
        if (r >= lib.size() || !(v > 0.0)) throw std::invalid_argument("invalid scaling factor override");
        p.kappa[r] = v;
    }
    p.varsigma_init = initial_varsigma(data, splines);
    for (double vs : p.varsigma_init) {
        if (!(settings.floor.value > 0.0)) throw std::invalid_argument("noise floor must be positive");
        if (settings.floor.mode == SigmaFloor::Mode::Relative)
            p.varsigma_lower.push_back(vs + 2.0 * std::log(settings.floor.value));
        else
            p.varsigma_lower.push_back(2.0 * std::log(settings.floor.value));
    }
    return p;
}

std::vector<double> ParamEstimate::rates(std::span<const double> kappa) const {
    std::vector<double> k(eta.size());
    for (std::size_t r = 0; r < eta.size(); ++r) k[r] = std::exp(eta[r]) * kappa[r];
    return k;
}

std::vector<double> ParamEstimate::sigma2() const {
    std::vector<double> v(varsigma.size());
    for (std::size_t s = 0; s < v.size(); ++s) v[s] = std::exp(varsigma[s]);
    return v;
}

LossEvaluator::LossEvaluator(const InferenceProblem& problem, Crn support, std::optional<PenaltyKind> kind,
                             double lambda)
    : problem_(&problem), support_(std::move(support)), kind_(kind), lambda_(lambda) {}

const Eigen::MatrixXd* LossEvaluator::predictions(const Eigen::VectorXd& x) const {
    const auto m = static_cast<Eigen::Index>(support_.size());
    const Eigen::VectorXd eta = x.head(m);
    if (cache_valid_ && cached_eta_.size() == m && cached_eta_ == eta) return cached_pred_ ? &*cached_pred_ : nullptr;
    std::vector<double> rates(problem_->n_reactions(), 0.0);
    Eigen::Index i = 0;
    for (auto r : support_) rates[r] = std::exp(eta(i++)) * problem_->kappa[r];
    cached_eta_ = eta;
    cached_pred_ = predict(*problem_->data, *problem_->lib, support_, rates, problem_->solver);
    cache_valid_ = true;
    return cached_pred_ ? &*cached_pred_ : nullptr;
}

double LossEvaluator::penalty_sum(const Eigen::VectorXd& x) const {
    if (!kind_) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(support_.size()); ++i)
        acc += penalty(*kind_, std::exp(x(i)), lambda_, problem_->constants);
    return acc;
}

double LossEvaluator::nll(const Eigen::MatrixXd& pred, const Eigen::VectorXd& x) const {
    const auto m = static_cast<Eigen::Index>(support_.size());
    std::vector<double> s2(problem_->n_species());
    for (std::size_t s = 0; s < s2.size(); ++s) s2[s] = std::exp(x(m + static_cast<Eigen::Index>(s)));
    return neg_log_likelihood(*problem_->data, pred, s2);
}

double LossEvaluator::operator()(const Eigen::VectorXd& x) const {
    const Eigen::MatrixXd* pred = predictions(x);
    if (!pred) return std::numeric_limits<double>::infinity();
    const double v = nll(*pred, x) + penalty_sum(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
}

long LossEvaluator::gradient(const Eigen::VectorXd& x, double fx, Eigen::VectorXd& grad) const {
    const auto m = static_cast<Eigen::Index>(support_.size());
    const auto n = static_cast<Eigen::Index>(dim());
    const Eigen::VectorXd lo = lower_bounds();
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    const Objective f = [this](const Eigen::VectorXd& z) { return (*this)(z); };
    // noise coordinates first, while the prediction at x is still cached
    Eigen::VectorXd g_noise, g_eta;
    const Eigen::VectorXd eta = x.head(m);
    const Objective f_noise = [&](const Eigen::VectorXd& vs) {
        Eigen::VectorXd z(n);
        z << eta, vs;
        return f(z);
    };
    const Objective f_eta = [&](const Eigen::VectorXd& e) {
        Eigen::VectorXd z(n);
        z << e, x.tail(n - m);
        return f(z);
    };
    long calls = finite_difference_gradient(f_noise, x.tail(n - m), fx, lo.tail(n - m), hi.tail(n - m),
                                            problem_->optimizer.fd_step, g_noise);
    calls += finite_difference_gradient(f_eta, eta, fx, lo.head(m), hi.head(m), problem_->optimizer.fd_step, g_eta);
    grad.resize(n);
    grad << g_eta, g_noise;
    return calls;
}

Eigen::VectorXd LossEvaluator::pack(std::span<const double> eta_full, std::span<const double> varsigma) const {
    const auto m = static_cast<Eigen::Index>(support_.size());
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim()));
    Eigen::Index i = 0;
    for (auto r : support_) x(i++) = eta_full[r];
    for (std::size_t s = 0; s < varsigma.size(); ++s) x(m + static_cast<Eigen::Index>(s)) = varsigma[s];
    return x;
}

std::vector<double> LossEvaluator::unpack_eta(const Eigen::VectorXd& x) const {
    std::vector<double> eta(problem_->n_reactions(), -std::numeric_limits<double>::infinity());
    Eigen::Index i = 0;
    for (auto r : support_) eta[r] = x(i++);
    return eta;
}

std::vector<double> LossEvaluator::unpack_varsigma(const Eigen::VectorXd& x) const {
    const auto m = static_cast<Eigen::Index>(support_.size());
    std::vector<double> vs(problem_->n_species());
    for (std::size_t s = 0; s < vs.size(); ++s) vs[s] = x(m + static_cast<Eigen::Index>(s));
    return vs;
}

Eigen::VectorXd LossEvaluator::lower_bounds() const {
    const auto m = static_cast<Eigen::Index>(support_.size());
    Eigen::VectorXd lo(static_cast<Eigen::Index>(dim()));
    lo.head(m).setConstant(problem_->eta_lower());
    for (std::size_t s = 0; s < problem_->n_species(); ++s)
        lo(m + static_cast<Eigen::Index>(s)) = problem_->varsigma_lower[s];
    return lo;
}

ParamEstimate optimize_estimate(const InferenceProblem& problem, PenaltyKind kind, double lambda,
                                std::span<const double> eta0, std::span<const double> varsigma0) {
    std::vector<std::size_t> all(problem.n_reactions());
    for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
    const LossEvaluator loss(problem, Crn(all), kind, lambda);
    const Objective f = [&loss](const Eigen::VectorXd& x) { return loss(x); };
    const GradientFn g = [&loss](const Eigen::VectorXd& x, double fx, Eigen::VectorXd& grad) {
        return loss.gradient(x, fx, grad);
    };
    const auto res = minimize_bounded(f, loss.pack(eta0, varsigma0), loss.lower_bounds(), problem.optimizer,
                                      std::nullopt, g);
    ParamEstimate est;
    est.eta = loss.unpack_eta(res.x);
    est.varsigma = loss.unpack_varsigma(res.x);
    est.loss = res.f;
    est.kind = kind;
    est.lambda = lambda;
    est.status = res.status;
    est.iterations = res.iterations;
    return est;
}

std::vector<ParamEstimate> multistart_inference(const InferenceProblem& problem, const MultistartConfig& cfg) {
    if (cfg.n_start == 0) throw std::invalid_argument("at least one start is required");
    const auto grid = hyperparameter_grid(cfg.kind);
    std::vector<std::size_t> lambdas = cfg.lambda_indices;
    if (lambdas.empty())
        for (std::size_t i = 0; i < grid.size(); ++i) lambdas.push_back(i);
    for (auto li : lambdas)
        if (li >= grid.size()) throw std::invalid_argument("hyperparameter index out of range");

    const auto starts = sobol_starts(cfg.n_start, problem.n_reactions(), cfg.start_lo, cfg.start_hi, cfg.seed);
    std::vector<ParamEstimate> out(lambdas.size() * cfg.n_start);
    parallel_for(out.size(), cfg.workers, [&](std::size_t task) {
        const std::size_t li = task / cfg.n_start, si = task % cfg.n_start;
        ParamEstimate est = optimize_estimate(problem, cfg.kind, grid[lambdas[li]], starts[si], problem.varsigma_init);
        est.lambda_index = lambdas[li];
        est.start_id = si;
        out[task] = std::move(est);
    });
    return out;
}

}  // namespace crnpost
