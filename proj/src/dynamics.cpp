#include "crnpost/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

namespace crnpost {

namespace {

double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

double monomial(const Complex& source, const double* x) {
    double m = 1.0;
    for (std::size_t s = 0; s < source.n_species(); ++s)
        if (source[s] > 0) m *= ipow(std::max(x[s], 0.0), source[s]);
    return m;
}

void check_rates(const ReactionLibrary& lib, std::span<const double> rates) {
    if (rates.size() != lib.size()) throw std::invalid_argument("rate vector length must match the library size");
}

}  // namespace

MassActionSystem::MassActionSystem(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates)
    : n_species_(lib.n_species()) {
    check_rates(lib, rates);
    std::map<Complex, std::vector<double>> by_source;
    for (auto r : crn) {
        if (rates[r] == 0.0) continue;
        auto& c = by_source.try_emplace(lib[r].source, n_species_, 0.0).first->second;
        const auto net = net_stoichiometry(lib[r]);
        for (std::size_t s = 0; s < n_species_; ++s) c[s] += rates[r] * net[s];
    }
    for (const auto& [src, c] : by_source) {
        for (std::size_t s = 0; s < n_species_; ++s)
            if (src[s] > 0) reactants_.emplace_back(s, src[s]);
        offsets_.push_back(reactants_.size());
        coef_.insert(coef_.end(), c.begin(), c.end());
    }
}

void MassActionSystem::rhs(const double* x, double* dx) const {
    std::fill(dx, dx + n_species_, 0.0);
    const std::size_t n_src = offsets_.size() - 1;
    for (std::size_t c = 0; c < n_src; ++c) {
        double v = 1.0;
        for (std::size_t i = offsets_[c]; i < offsets_[c + 1]; ++i) {
            const auto [s, e] = reactants_[i];
            const double xs = x[s] > 0.0 ? x[s] : 0.0;
            v *= e == 1 ? xs : ipow(xs, e);
        }
        const double* k = coef_.data() + c * n_species_;
        for (std::size_t s = 0; s < n_species_; ++s) dx[s] += k[s] * v;
    }
}

void MassActionSystem::jacobian(const double* x, double* jac) const {
    const std::size_t n = n_species_;
    std::fill(jac, jac + n * n, 0.0);
    const std::size_t n_src = offsets_.size() - 1;
    for (std::size_t c = 0; c < n_src; ++c) {
        const double* k = coef_.data() + c * n;
        for (std::size_t a = offsets_[c]; a < offsets_[c + 1]; ++a) {
            double d = 1.0;
            for (std::size_t b = offsets_[c]; b < offsets_[c + 1]; ++b) {
                const auto [s, e] = reactants_[b];
                const double xs = x[s] > 0.0 ? x[s] : 0.0;
                d *= a == b ? e * ipow(xs, e - 1) : ipow(xs, e);
            }
            const std::size_t col = reactants_[a].first;
            for (std::size_t s = 0; s < n; ++s) jac[s * n + col] += k[s] * d;
        }
    }
}

Trajectory::Trajectory(std::size_t n_species, std::vector<double> t, std::vector<double> states,
                       std::vector<double> derivs)
    : n_species_(n_species), t_(std::move(t)), x_(std::move(states)), dx_(std::move(derivs)) {
    if (t_.empty() || x_.size() != t_.size() * n_species_ || dx_.size() != x_.size())
        throw std::invalid_argument("inconsistent trajectory storage");
}

std::span<const double> Trajectory::node_state(std::size_t i) const {
    return {x_.data() + i * n_species_, n_species_};
}

void Trajectory::eval(double t, double* out) const {
    const std::size_t n = t_.size();
    if (n == 1 || t <= t_.front()) {
        std::copy_n(x_.data(), n_species_, out);
        return;
    }
    if (t >= t_.back()) {
        std::copy_n(x_.data() + (n - 1) * n_species_, n_species_, out);
        return;
    }
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
    const double h = t_[i + 1] - t_[i];
    const double u = (t - t_[i]) / h;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
    const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
    const double* x0 = x_.data() + i * n_species_;
    const double* x1 = x0 + n_species_;
    const double* d0 = dx_.data() + i * n_species_;
    const double* d1 = d0 + n_species_;
    for (std::size_t s = 0; s < n_species_; ++s)
        out[s] = h00 * x0[s] + h * h10 * d0[s] + h01 * x1[s] + h * h11 * d1[s];
}

Eigen::VectorXd Trajectory::operator()(double t) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(n_species_));
    eval(t, out.data());
    return out;
}

Eigen::MatrixXd Trajectory::sample(std::span<const double> times) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(n_species_));
    std::vector<double> buf(n_species_);
    for (std::size_t i = 0; i < times.size(); ++i) {
        eval(times[i], buf.data());
        for (std::size_t s = 0; s < n_species_; ++s)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = buf[s];
    }
    return out;
}

std::vector<double> reaction_rates(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates,
                                   std::span<const double> state) {
    check_rates(lib, rates);
    std::vector<double> out;
    out.reserve(crn.size());
    for (auto r : crn) out.push_back(rates[r] * monomial(lib[r].source, state.data()));
    return out;
}

std::vector<double> rhs(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates,
                        std::span<const double> state) {
    MassActionSystem sys(lib, crn, rates);
    std::vector<double> dx(lib.n_species());
    sys.rhs(state.data(), dx.data());
    return dx;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// continuous extension of order 4, used to place a midpoint node per step
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct Integration {
    std::optional<Trajectory> traj;
    std::string error;
};

// Accepted nodes (step ends and midpoints) with their slopes.
struct Nodes {
    std::vector<double> t, x, dx;

    void add(double time, const double* state, const double* slope, std::size_t n) {
        t.push_back(time);
        x.insert(x.end(), state, state + n);
        dx.insert(dx.end(), slope, slope + n);
    }
};

enum class Outcome { Done, Stiff, Failed };

struct Progress {
    double t = 0.0;
    double h = 0.0;
    long steps = 0;
    std::vector<double> y;
    std::string error;
};

double error_norm(const std::vector<double>& err, const std::vector<double>& y0, const std::vector<double>& y1,
                  const SolverConfig& cfg) {
    double acc = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double v = err[i] / sc;
        acc += v * v;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

void check_inputs(const MassActionSystem& sys, std::span<const double> x0, double t_end, const SolverConfig& cfg) {
    const std::size_t n = sys.n_species();
    if (x0.size() != n) throw std::invalid_argument("initial state has the wrong number of species");
    if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
    if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0)) throw std::invalid_argument("solver tolerances must be positive");
    for (double v : x0)
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("initial state must be finite and nonnegative");
}

// Initial step after Hairer, Norsett & Wanner.
double initial_step(const MassActionSystem& sys, const std::vector<double>& y, const std::vector<double>& f0,
                    double t_end, const SolverConfig& cfg) {
    const std::size_t n = y.size();
    std::vector<double> ytmp(n), f1(n);
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
        d0 += (y[i] / sc) * (y[i] / sc);
        d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t_end);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h0 * f0[i];
    sys.rhs(ytmp.data(), f1.data());
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
        d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
    }
    d2 = std::sqrt(d2 / n) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
    return std::min({100 * h0, h1, t_end});
}

// Stops early with Outcome::Stiff once the step count passes
// cfg.stiff_switch_steps, or when the step size has sat on the stability
// boundary for 15 accepted steps.
Outcome dormand_prince(const MassActionSystem& sys, double t_end, const SolverConfig& cfg, Progress& p, Nodes& nodes) {
    const std::size_t n = sys.n_species();
    std::vector<double>& y = p.y;
    std::vector<double> ynew(n), ytmp(n), err(n);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ymid(n), kmid(n);
    sys.rhs(y.data(), k1.data());
    double h = initial_step(sys, y, k1, t_end, cfg);
    const bool may_switch = cfg.stiff_switch_steps > 0;
    int stiff_run = 0;

    double& t = p.t;
    bool last_rejected = false;
    while (t < t_end) {
        if (++p.steps > cfg.max_steps) {
            p.error = "maximum number of steps exceeded at t=" + std::to_string(t);
            return Outcome::Failed;
        }
        if (may_switch && p.steps > cfg.stiff_switch_steps) {
            p.h = h;
            return Outcome::Stiff;
        }
        if (h < 1e-14 * std::max(1.0, std::abs(t))) {
            p.error = "step size underflow at t=" + std::to_string(t);
            return may_switch ? Outcome::Stiff : Outcome::Failed;
        }
        bool final_step = false;
        if (t + h >= t_end) {
            h = t_end - t;
            final_step = true;
        }

        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        sys.rhs(ytmp.data(), k2.data());
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        sys.rhs(ytmp.data(), k3.data());
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        sys.rhs(ytmp.data(), k4.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        sys.rhs(ytmp.data(), k5.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        sys.rhs(ytmp.data(), k6.data());
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        sys.rhs(ynew.data(), k7.data());
        for (std::size_t i = 0; i < n; ++i)
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

        const double en = error_norm(err, y, ynew, cfg);
        if (!std::isfinite(en)) {
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        if (en <= 1.0) {
            if (may_switch) {
                // h * |lambda| estimated from the last two stages
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    num += (k7[i] - k6[i]) * (k7[i] - k6[i]);
                    den += (ynew[i] - ytmp[i]) * (ynew[i] - ytmp[i]);
                }
                stiff_run = (den > 0.0 && h * h * num > 3.25 * 3.25 * den) ? stiff_run + 1 : 0;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double r2 = ynew[i] - y[i];
                const double r3 = h * k1[i] - r2;
                const double r4 = r2 - h * k7[i] - r3;
                const double r5 =
                    h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
                ymid[i] = y[i] + 0.5 * (r2 + 0.5 * (r3 + 0.5 * (r4 + 0.5 * r5)));
            }
            sys.rhs(ymid.data(), kmid.data());
            nodes.add(t + 0.5 * h, ymid.data(), kmid.data(), n);
            t = final_step ? t_end : t + h;
            y.swap(ynew);
            k1.swap(k7);
            nodes.add(t, y.data(), k1.data(), n);
            double fac = en == 0.0 ? 5.0 : 0.9 * std::pow(en, -0.2);
            fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
            h *= fac;
            last_rejected = false;
            if (stiff_run >= 15 && t < t_end) {
                p.h = h;
                return Outcome::Stiff;
            }
        } else {
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            last_rejected = true;
        }
    }
    return Outcome::Done;
}

// Shampine's stiffly accurate fourth-order Rosenbrock scheme with an embedded
// third-order error estimate and continuous extension (as in Numerical Recipes
// and Boost.odeint).
namespace ros {
constexpr double gamma = 0.25;
constexpr double a21 = 1.544, a31 = 0.9466785280815826, a32 = 0.2557011698983284;
constexpr double a41 = 3.314825187068521, a42 = 2.896124015972201, a43 = 0.9986419139977817;
constexpr double a51 = 1.221224509226641, a52 = 6.019134481288629, a53 = 12.53708332932087,
                 a54 = -0.687886036105895;
constexpr double c21 = -5.6688;
constexpr double c31 = -2.430093356833875, c32 = -0.2063599157091915;
constexpr double c41 = -0.1073529058151375, c42 = -9.594562251023355, c43 = -20.47028614809616;
constexpr double c51 = 7.496443313967647, c52 = -10.24680431464352, c53 = -33.99990352819905,
                 c54 = 11.7089089320616;
constexpr double c61 = 8.083246795921522, c62 = -7.981132988064893, c63 = -31.52159432874371,
                 c64 = 16.31930543123136, c65 = -6.058818238834054;
constexpr double d21 = 10.12623508344586, d22 = -7.487995877610167, d23 = -34.80091861555747,
                 d24 = -7.992771707568823, d25 = 1.025137723295662;
constexpr double d31 = -0.6762803392801253, d32 = 6.087714651680015, d33 = 16.43084320892478,
                 d34 = 24.76722511418386, d35 = -6.594389125716872;
}  // namespace ros

Outcome rosenbrock(const MassActionSystem& sys, double t_end, const SolverConfig& cfg, Progress& p, Nodes& nodes) {
    using Vec = Eigen::VectorXd;
    const auto n = static_cast<Eigen::Index>(sys.n_species());
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> jrow(n, n);
    Eigen::MatrixXd w(n, n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(n);
    Vec x = Eigen::Map<const Vec>(p.y.data(), n);
    Vec f(n), xtmp(n), g1(n), g2(n), g3(n), g4(n), g5(n), err(n), xnew(n), xmid(n), dx(n), cont3(n), cont4(n);
    auto rhs = [&](const Vec& in, Vec& out) { sys.rhs(in.data(), out.data()); };

    double& t = p.t;
    double h = p.h > 0.0 ? p.h : 1e-6 * t_end;
    bool last_rejected = false;
    while (t < t_end) {
        if (++p.steps > cfg.max_steps) {
            p.error = "maximum number of steps exceeded at t=" + std::to_string(t);
            return Outcome::Failed;
        }
        if (!(h > 1e-14 * std::max(1.0, t))) {
            p.error = "step size underflow at t=" + std::to_string(t);
            return Outcome::Failed;
        }
        const bool final_step = t + h >= t_end;
        if (final_step) h = t_end - t;

        sys.jacobian(x.data(), jrow.data());
        w = -jrow;
        w.diagonal().array() += 1.0 / (ros::gamma * h);
        lu.compute(w);

        rhs(x, f);
        g1 = lu.solve(f);
        xtmp = x + ros::a21 * g1;
        rhs(xtmp, f);
        g2 = lu.solve(f + ros::c21 * g1 / h);
        xtmp = x + ros::a31 * g1 + ros::a32 * g2;
        rhs(xtmp, f);
        g3 = lu.solve(f + (ros::c31 * g1 + ros::c32 * g2) / h);
        xtmp = x + ros::a41 * g1 + ros::a42 * g2 + ros::a43 * g3;
        rhs(xtmp, f);
        g4 = lu.solve(f + (ros::c41 * g1 + ros::c42 * g2 + ros::c43 * g3) / h);
        xtmp = x + ros::a51 * g1 + ros::a52 * g2 + ros::a53 * g3 + ros::a54 * g4;
        rhs(xtmp, f);
        g5 = lu.solve(f + (ros::c51 * g1 + ros::c52 * g2 + ros::c53 * g3 + ros::c54 * g4) / h);
        xtmp += g5;
        rhs(xtmp, f);
        err = lu.solve(f + (ros::c61 * g1 + ros::c62 * g2 + ros::c63 * g3 + ros::c64 * g4 + ros::c65 * g5) / h);
        xnew = xtmp + err;

        double en = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x[i]), std::abs(xnew[i]));
            en += (err[i] / sc) * (err[i] / sc);
        }
        en = std::sqrt(en / static_cast<double>(n));
        if (!std::isfinite(en) || !xnew.allFinite()) {
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        const double fac = std::clamp(std::pow(en, 0.25) / 0.9, 1.0 / 6.0, 5.0);
        if (en > 1.0) {
            h /= fac;
            last_rejected = true;
            continue;
        }

        cont3 = ros::d21 * g1 + ros::d22 * g2 + ros::d23 * g3 + ros::d24 * g4 + ros::d25 * g5;
        cont4 = ros::d31 * g1 + ros::d32 * g2 + ros::d33 * g3 + ros::d34 * g4 + ros::d35 * g5;
        xmid = 0.5 * x + 0.5 * (xnew + 0.5 * (cont3 + 0.5 * cont4));
        rhs(xmid, dx);
        nodes.add(t + 0.5 * h, xmid.data(), dx.data(), static_cast<std::size_t>(n));
        t = final_step ? t_end : t + h;
        x = xnew;
        rhs(x, dx);
        nodes.add(t, x.data(), dx.data(), static_cast<std::size_t>(n));
        h /= last_rejected ? std::max(fac, 1.0) : fac;
        last_rejected = false;
    }
    return Outcome::Done;
}

Integration integrate(const MassActionSystem& sys, std::span<const double> x0, double t_end,
                      const SolverConfig& cfg) {
    check_inputs(sys, x0, t_end, cfg);
    const std::size_t n = sys.n_species();
    if (n == 0) return {Trajectory(0, {0.0, t_end}, {}, {}), {}};
    Progress p;
    p.y.assign(x0.begin(), x0.end());
    Nodes nodes;
    std::vector<double> f0(n);
    sys.rhs(p.y.data(), f0.data());
    nodes.add(0.0, p.y.data(), f0.data(), n);

    auto outcome = dormand_prince(sys, t_end, cfg, p, nodes);
    if (outcome == Outcome::Stiff) outcome = rosenbrock(sys, t_end, cfg, p, nodes);
    if (outcome == Outcome::Failed) return {std::nullopt, p.error};
    return {Trajectory(n, std::move(nodes.t), std::move(nodes.x), std::move(nodes.dx)), {}};
}

}  // namespace

Trajectory simulate(const MassActionSystem& sys, std::span<const double> x0, double t_end, const SolverConfig& cfg) {
    auto res = integrate(sys, x0, t_end, cfg);
    if (!res.traj) throw IntegrationFailure(res.error);
    return std::move(*res.traj);
}

Trajectory simulate(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates,
                    std::span<const double> x0, double t_end, const SolverConfig& cfg) {
    return simulate(MassActionSystem(lib, crn, rates), x0, t_end, cfg);
}

std::optional<Trajectory> try_simulate(const MassActionSystem& sys, std::span<const double> x0, double t_end,
                                       const SolverConfig& cfg) {
    return integrate(sys, x0, t_end, cfg).traj;
}

std::vector<double> uniform_grid(double t_end, std::size_t n) {
    if (n < 2) throw std::invalid_argument("a grid needs at least two points");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = t_end * static_cast<double>(i) / static_cast<double>(n - 1);
    g.back() = t_end;
    return g;
}

namespace {

template <class F>
double trapezoid(const std::vector<double>& grid, F&& f) {
    double acc = 0.0;
    double prev = f(0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = f(i);
        acc += 0.5 * (grid[i] - grid[i - 1]) * (prev + cur);
        prev = cur;
    }
    return acc;
}

}  // namespace

double reaction_flux(const ReactionLibrary& lib, std::size_t r, std::span<const double> rates,
                     const Trajectory& traj) {
    check_rates(lib, rates);
    if (rates[r] == 0.0) return 0.0;
    const auto grid = uniform_grid(traj.t_end());
    std::vector<double> x(traj.n_species());
    return trapezoid(grid, [&](std::size_t i) {
        traj.eval(grid[i], x.data());
        return rates[r] * monomial(lib[r].source, x.data());
    });
}

std::vector<double> reaction_fluxes(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates,
                                    const Trajectory& traj) {
    check_rates(lib, rates);
    const auto grid = uniform_grid(traj.t_end());
    const Eigen::MatrixXd x = traj.sample(grid);
    std::vector<double> out(lib.size(), 0.0);
    std::vector<double> row(lib.n_species());
    for (auto r : crn) {
        if (rates[r] == 0.0) continue;
        out[r] = trapezoid(grid, [&](std::size_t i) {
            for (std::size_t s = 0; s < row.size(); ++s)
                row[s] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
            return rates[r] * monomial(lib[r].source, row.data());
        });
    }
    return out;
}

double trajectory_error(const Trajectory& a, const Trajectory& b) {
    if (a.n_species() != b.n_species()) throw std::invalid_argument("trajectories have different species counts");
    const double t_n = std::min(a.t_end(), b.t_end());
    const auto grid = uniform_grid(t_n);
    const Eigen::MatrixXd xa = a.sample(grid), xb = b.sample(grid);
    const Eigen::VectorXd diff = (xa - xb).cwiseAbs().rowwise().sum();
    return trapezoid(grid, [&](std::size_t i) { return diff(static_cast<Eigen::Index>(i)); }) / t_n;
}

double trajectory_error(const ReactionLibrary& lib, std::span<const double> rates_a, std::span<const double> rates_b,
                        const Crn& crn_a, const Crn& crn_b, std::span<const double> x0, double t_n,
                        const SolverConfig& cfg) {
    const Trajectory a = simulate(lib, crn_a, rates_a, x0, t_n, cfg);
    const Trajectory b = simulate(lib, crn_b, rates_b, x0, t_n, cfg);
    return trajectory_error(a, b);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::span<const std::string> species,
                          std::span<const double> grid) {
    if (species.size() != traj.n_species()) throw std::invalid_argument("species names do not match trajectory");
    os << 't';
    for (const auto& s : species) os << ',' << s;
    os << '\n';
    const auto old_precision = os.precision(17);
    std::vector<double> x(traj.n_species());
    for (double t : grid) {
        traj.eval(t, x.data());
        os << t;
        for (double v : x) os << ',' << v;
        os << '\n';
    }
    os.precision(old_precision);
}

}  // namespace crnpost
