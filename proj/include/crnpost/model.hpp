#pragma once

// Complexes, reactions, candidate libraries and CRN structures.
//
// Reaction indices are 0-based inside the library. Everything that is shown to
// a user (printing, JSON, CSV) uses 1-based reaction labels so that numbering
// matches the usual listings of candidate reactions.

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crnpost {

/// A nonnegative integer combination of species.
class Complex {
public:
    Complex() = default;
    explicit Complex(std::vector<int> coeffs);

    std::size_t n_species() const { return coeffs_.size(); }
    int operator[](std::size_t s) const { return coeffs_[s]; }
    const std::vector<int>& coeffs() const { return coeffs_; }

    /// Total number of molecules.
    int molecularity() const;
    bool is_zero() const { return molecularity() == 0; }

    auto operator<=>(const Complex&) const = default;

private:
    std::vector<int> coeffs_;
};

struct Reaction {
    Complex source;
    Complex target;

    bool operator==(const Reaction&) const = default;
};

/// Net change m+ - m- per species.
std::vector<int> net_stoichiometry(const Reaction& r);

/// Rules applied when enumerating ordered complex pairs into reactions.
struct LibraryRules {
    /// Complex positions (into the complex list) allowed as sources / targets.
    std::optional<std::vector<std::size_t>> allowed_sources;
    std::optional<std::vector<std::size_t>> allowed_targets;
    /// Allowed (source molecularity, target molecularity) combinations.
    std::optional<std::vector<std::pair<int, int>>> molecularity_pairs;
    std::vector<std::size_t> excluded_reactants;
    std::vector<std::size_t> excluded_products;
    /// No species may appear on both sides of a reaction.
    bool disjoint_species = false;
    bool allow_zero_complex = false;
    /// Per conserved element, the count of that element in each species.
    std::map<std::string, std::vector<int>> formulas;
};

class ReactionLibrary {
public:
    ReactionLibrary() = default;
    ReactionLibrary(std::vector<std::string> species, std::vector<Reaction> reactions);

    std::size_t size() const { return reactions_.size(); }
    std::size_t n_species() const { return species_.size(); }
    const Reaction& operator[](std::size_t r) const { return reactions_[r]; }
    const std::vector<Reaction>& reactions() const { return reactions_; }
    const std::vector<std::string>& species() const { return species_; }

    /// Position of the species with this name; throws if unknown.
    std::size_t species_index(const std::string& name) const;
    std::optional<std::size_t> find(const Reaction& r) const;

private:
    std::vector<std::string> species_;
    std::vector<Reaction> reactions_;
};

/// Every ordered pair (source, target) of distinct complexes that satisfies the
/// rules, source-major then target-minor in the order of `complexes`.
ReactionLibrary enumerate_library(std::vector<std::string> species, const std::vector<Complex>& complexes,
                                  const LibraryRules& rules);

/// Complexes with between `min_molecules` and `max_molecules` molecules:
/// by molecularity, single-species complexes first, then mixed complexes in
/// lexicographic order of their species.
std::vector<Complex> generate_complexes(std::size_t n_species, int min_molecules, int max_molecules);

/// A CRN as a sorted set of 0-based reaction indices into a library.
class Crn {
public:
    Crn() = default;
    explicit Crn(std::vector<std::size_t> members);
    /// From 1-based reaction labels.
    static Crn from_labels(std::initializer_list<int> labels);
    static Crn from_labels(std::span<const int> labels);

    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    bool contains(std::size_t r) const;
    bool includes(const Crn& other) const;
    auto begin() const { return members_.begin(); }
    auto end() const { return members_.end(); }
    const std::vector<std::size_t>& members() const { return members_; }
    std::vector<int> labels() const;

    Crn set_union(const Crn& other) const;
    Crn set_difference(const Crn& other) const;
    Crn set_intersection(const Crn& other) const;
    Crn with(std::size_t r) const;

    /// Lexicographic order on the sorted member lists.
    auto operator<=>(const Crn&) const = default;

private:
    std::vector<std::size_t> members_;
};

/// "{1, 13, 18}"; the empty set prints as "∅".
std::string to_string(const Crn& crn);
std::string format_complex(const Complex& c, std::span<const std::string> species);
/// "X1 + X2 -> X3".
std::string format_reaction(const Reaction& r, std::span<const std::string> species);

using CoefficientMap = std::map<Complex, std::vector<double>>;

/// Per distinct source complex, the rate-weighted sum of net stoichiometries.
/// Two parameterised CRNs share their ODEs exactly when these maps agree.
CoefficientMap ode_coefficient_map(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates);

/// Nonnegative rates on `crn_b` reproducing the ODE coefficients of
/// (`crn_a`, `rates_a`), or nothing if no such rates exist. Rate vectors are
/// indexed by library reaction.
std::optional<std::vector<double>> check_dynamical_equivalence(const ReactionLibrary& lib, const Crn& crn_a,
                                                               std::span<const double> rates_a, const Crn& crn_b,
                                                               double tolerance = 1e-10);

}  // namespace crnpost
