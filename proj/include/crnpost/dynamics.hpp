#pragma once

// Mass-action ODEs, an adaptive Dormand-Prince integrator with cubic Hermite
// dense output (falling back to a Rosenbrock method on stiff problems),
// reaction fluxes and trajectory comparison.
//
// Rate vectors are always indexed by library reaction; entries outside the
// CRN are ignored.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crnpost/model.hpp"

namespace crnpost {

struct SolverConfig {
    double rel_tol = 1e-6;
    double abs_tol = 1e-8;
    long max_steps = 1'000'000;
    /// Dormand-Prince hands over to a Rosenbrock method at the current time
    /// once it detects stiffness or has taken this many steps; 0 disables
    /// the switch.
    long stiff_switch_steps = 150;
};

class IntegrationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Compiled right-hand side of the mass-action ODEs of one parameterised CRN.
/// Reactions with a zero rate constant are dropped.
class MassActionSystem {
public:
    MassActionSystem(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates);

    std::size_t n_species() const { return n_species_; }
    /// dx/dt at `x`; negative entries of `x` count as zero in the monomials.
    void rhs(const double* x, double* dx) const;
    /// Row-major n x n Jacobian of rhs, with the same clamping.
    void jacobian(const double* x, double* jac) const;

private:
    std::size_t n_species_;
    /// Per distinct source complex: its reactants (flattened, delimited by
    /// offsets_) and the rate-weighted net stoichiometry of its reactions.
    std::vector<std::size_t> offsets_{0};
    std::vector<std::pair<std::size_t, int>> reactants_;
    std::vector<double> coef_;
};

/// Solution on [0, t_end] stored at the accepted integrator steps and at the
/// midpoint of each step (from the solver's continuous extension); evaluation
/// between nodes uses the cubic Hermite interpolant through states and slopes.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::size_t n_species, std::vector<double> t, std::vector<double> states, std::vector<double> derivs);

    std::size_t n_species() const { return n_species_; }
    std::size_t n_nodes() const { return t_.size(); }
    const std::vector<double>& nodes() const { return t_; }
    double t_end() const { return t_.back(); }
    /// State stored at node i.
    std::span<const double> node_state(std::size_t i) const;

    void eval(double t, double* out) const;
    Eigen::VectorXd operator()(double t) const;
    /// Rows are the requested times, columns species.
    Eigen::MatrixXd sample(std::span<const double> times) const;

private:
    std::size_t n_species_ = 0;
    std::vector<double> t_;
    std::vector<double> x_;
    std::vector<double> dx_;
};

/// k_r * prod_s x_s^{m-_rs} for each member of `crn`, in member order.
std::vector<double> reaction_rates(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates,
                                   std::span<const double> state);
std::vector<double> rhs(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates,
                        std::span<const double> state);

/// Throws IntegrationFailure on step-size underflow, non-finite states or
/// when max_steps is exceeded.
Trajectory simulate(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates,
                    std::span<const double> x0, double t_end, const SolverConfig& cfg = {});
Trajectory simulate(const MassActionSystem& sys, std::span<const double> x0, double t_end,
                    const SolverConfig& cfg = {});
std::optional<Trajectory> try_simulate(const MassActionSystem& sys, std::span<const double> x0, double t_end,
                                       const SolverConfig& cfg = {});

/// n evenly spaced points from 0 to t_end inclusive.
std::vector<double> uniform_grid(double t_end, std::size_t n = 1000);

/// Time-integrated rate of reaction r over [0, t_end] by the trapezoid rule
/// on a 1000-point grid.
double reaction_flux(const ReactionLibrary& lib, std::size_t r, std::span<const double> rates,
                     const Trajectory& traj);
/// Fluxes of every library reaction (zero outside `crn`).
std::vector<double> reaction_fluxes(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates,
                                    const Trajectory& traj);

/// (1/t_N) * integral of sum_s |x_a - x_b| over [0, t_N], trapezoid on 1000 points.
double trajectory_error(const Trajectory& a, const Trajectory& b);
double trajectory_error(const ReactionLibrary& lib, std::span<const double> rates_a, std::span<const double> rates_b,
                        const Crn& crn_a, const Crn& crn_b, std::span<const double> x0, double t_n,
                        const SolverConfig& cfg = {});

/// CSV with header `t,<species...>`, one row per grid time.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::span<const std::string> species,
                          std::span<const double> grid);

}  // namespace crnpost
