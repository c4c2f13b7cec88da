#include "crnpost/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "crnpost/nnls.hpp"

namespace crnpost {

Complex::Complex(std::vector<int> coeffs) : coeffs_(std::move(coeffs)) {
    for (int c : coeffs_)
        if (c < 0) throw std::invalid_argument("complex coefficients must be nonnegative");
}

int Complex::molecularity() const { return std::accumulate(coeffs_.begin(), coeffs_.end(), 0); }

std::vector<int> net_stoichiometry(const Reaction& r) {
    std::vector<int> net(r.source.n_species());
    for (std::size_t s = 0; s < net.size(); ++s) net[s] = r.target[s] - r.source[s];
    return net;
}

ReactionLibrary::ReactionLibrary(std::vector<std::string> species, std::vector<Reaction> reactions)
    : species_(std::move(species)), reactions_(std::move(reactions)) {
    for (std::size_t i = 0; i < reactions_.size(); ++i) {
        const auto& r = reactions_[i];
        if (r.source.n_species() != species_.size() || r.target.n_species() != species_.size())
            throw std::invalid_argument("reaction " + std::to_string(i + 1) + " has the wrong number of species");
        if (r.source == r.target)
            throw std::invalid_argument("reaction " + std::to_string(i + 1) + " has identical source and target");
        for (std::size_t j = 0; j < i; ++j)
            if (reactions_[j] == r)
                throw std::invalid_argument("reaction " + std::to_string(i + 1) + " duplicates reaction " +
                                            std::to_string(j + 1));
    }
}

std::size_t ReactionLibrary::species_index(const std::string& name) const {
    auto it = std::find(species_.begin(), species_.end(), name);
    if (it == species_.end()) throw std::invalid_argument("unknown species '" + name + "'");
    return static_cast<std::size_t>(it - species_.begin());
}

std::optional<std::size_t> ReactionLibrary::find(const Reaction& r) const {
    auto it = std::find(reactions_.begin(), reactions_.end(), r);
    if (it == reactions_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - reactions_.begin());
}

namespace {

bool allowed(const std::optional<std::vector<std::size_t>>& list, std::size_t i) {
    return !list || std::find(list->begin(), list->end(), i) != list->end();
}

bool balanced(const LibraryRules& rules, const Complex& a, const Complex& b) {
    for (const auto& [element, counts] : rules.formulas) {
        long lhs = 0, rhs = 0;
        for (std::size_t s = 0; s < counts.size(); ++s) {
            lhs += static_cast<long>(counts[s]) * a[s];
            rhs += static_cast<long>(counts[s]) * b[s];
        }
        if (lhs != rhs) return false;
    }
    return true;
}

}  // namespace

ReactionLibrary enumerate_library(std::vector<std::string> species, const std::vector<Complex>& complexes,
                                  const LibraryRules& rules) {
    if (complexes.empty()) throw std::invalid_argument("complex list is empty");
    const std::size_t n_species = species.size();
    for (std::size_t i = 0; i < complexes.size(); ++i) {
        if (complexes[i].n_species() != n_species)
            throw std::invalid_argument("complex " + std::to_string(i) + " has the wrong number of species");
        for (std::size_t j = 0; j < i; ++j)
            if (complexes[i] == complexes[j]) throw std::invalid_argument("complex list contains duplicates");
    }
    for (const auto& [element, counts] : rules.formulas)
        if (counts.size() != n_species)
            throw std::invalid_argument("formula vector for '" + element + "' has the wrong length");

    std::vector<Reaction> reactions;
    for (std::size_t i = 0; i < complexes.size(); ++i) {
        const Complex& src = complexes[i];
        if (!allowed(rules.allowed_sources, i)) continue;
        if (src.is_zero() && !rules.allow_zero_complex) continue;
        bool bad_reactant = false;
        for (std::size_t s : rules.excluded_reactants) bad_reactant |= src[s] > 0;
        if (bad_reactant) continue;

        for (std::size_t j = 0; j < complexes.size(); ++j) {
            if (i == j || !allowed(rules.allowed_targets, j)) continue;
            const Complex& tgt = complexes[j];
            if (tgt.is_zero() && !rules.allow_zero_complex) continue;
            bool bad_product = false;
            for (std::size_t s : rules.excluded_products) bad_product |= tgt[s] > 0;
            if (bad_product) continue;
            if (rules.disjoint_species) {
                bool shared = false;
                for (std::size_t s = 0; s < n_species; ++s) shared |= src[s] > 0 && tgt[s] > 0;
                if (shared) continue;
            }
            if (rules.molecularity_pairs) {
                const std::pair<int, int> mol{src.molecularity(), tgt.molecularity()};
                const auto& pairs = *rules.molecularity_pairs;
                if (std::find(pairs.begin(), pairs.end(), mol) == pairs.end()) continue;
            }
            if (!balanced(rules, src, tgt)) continue;
            reactions.push_back({src, tgt});
        }
    }
    return ReactionLibrary(std::move(species), std::move(reactions));
}

std::vector<Complex> generate_complexes(std::size_t n_species, int min_molecules, int max_molecules) {
    if (min_molecules < 0 || max_molecules < min_molecules)
        throw std::invalid_argument("invalid molecularity range");
    std::vector<Complex> out;
    for (int m = min_molecules; m <= max_molecules; ++m) {
        if (m == 0) {
            out.emplace_back(std::vector<int>(n_species, 0));
            continue;
        }
        for (std::size_t s = 0; s < n_species; ++s) {
            std::vector<int> c(n_species, 0);
            c[s] = m;
            out.emplace_back(std::move(c));
        }
        // nondecreasing species tuples of length m using at least two species
        std::vector<std::size_t> tuple(static_cast<std::size_t>(m), 0);
        while (true) {
            if (tuple.front() != tuple.back()) {
                std::vector<int> c(n_species, 0);
                for (std::size_t s : tuple) ++c[s];
                out.emplace_back(std::move(c));
            }
            int pos = m - 1;
            while (pos >= 0 && tuple[static_cast<std::size_t>(pos)] == n_species - 1) --pos;
            if (pos < 0) break;
            const std::size_t v = tuple[static_cast<std::size_t>(pos)] + 1;
            for (std::size_t k = static_cast<std::size_t>(pos); k < tuple.size(); ++k) tuple[k] = v;
        }
    }
    return out;
}

Crn::Crn(std::vector<std::size_t> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

Crn Crn::from_labels(std::initializer_list<int> labels) {
    return from_labels(std::span<const int>(labels.begin(), labels.size()));
}

Crn Crn::from_labels(std::span<const int> labels) {
    std::vector<std::size_t> m;
    m.reserve(labels.size());
    for (int l : labels) {
        if (l < 1) throw std::invalid_argument("reaction labels are 1-based");
        m.push_back(static_cast<std::size_t>(l - 1));
    }
    return Crn(std::move(m));
}

bool Crn::contains(std::size_t r) const { return std::binary_search(members_.begin(), members_.end(), r); }

bool Crn::includes(const Crn& other) const {
    return std::includes(members_.begin(), members_.end(), other.members_.begin(), other.members_.end());
}

std::vector<int> Crn::labels() const {
    std::vector<int> out;
    out.reserve(members_.size());
    for (auto r : members_) out.push_back(static_cast<int>(r) + 1);
    return out;
}

Crn Crn::set_union(const Crn& other) const {
    std::vector<std::size_t> out;
    std::set_union(begin(), end(), other.begin(), other.end(), std::back_inserter(out));
    Crn c;
    c.members_ = std::move(out);
    return c;
}

Crn Crn::set_difference(const Crn& other) const {
    std::vector<std::size_t> out;
    std::set_difference(begin(), end(), other.begin(), other.end(), std::back_inserter(out));
    Crn c;
    c.members_ = std::move(out);
    return c;
}

Crn Crn::set_intersection(const Crn& other) const {
    std::vector<std::size_t> out;
    std::set_intersection(begin(), end(), other.begin(), other.end(), std::back_inserter(out));
    Crn c;
    c.members_ = std::move(out);
    return c;
}

Crn Crn::with(std::size_t r) const {
    auto m = members_;
    m.push_back(r);
    return Crn(std::move(m));
}

std::string to_string(const Crn& crn) {
    if (crn.empty()) return "∅";
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (auto r : crn) {
        if (!first) os << ", ";
        os << r + 1;
        first = false;
    }
    os << '}';
    return os.str();
}

std::string format_complex(const Complex& c, std::span<const std::string> species) {
    if (c.is_zero()) return "0";
    std::ostringstream os;
    bool first = true;
    for (std::size_t s = 0; s < c.n_species(); ++s) {
        if (c[s] == 0) continue;
        if (!first) os << " + ";
        if (c[s] > 1) os << c[s];
        os << (s < species.size() ? species[s] : "X" + std::to_string(s + 1));
        first = false;
    }
    return os.str();
}

std::string format_reaction(const Reaction& r, std::span<const std::string> species) {
    return format_complex(r.source, species) + " -> " + format_complex(r.target, species);
}

CoefficientMap ode_coefficient_map(const ReactionLibrary& lib, const Crn& crn, std::span<const double> rates) {
    if (rates.size() != lib.size()) throw std::invalid_argument("rate vector length must match the library size");
    CoefficientMap out;
    for (auto r : crn) {
        if (rates[r] < 0.0 || std::isnan(rates[r]))
            throw std::invalid_argument("negative rate constant for reaction " + std::to_string(r + 1));
        const auto net = net_stoichiometry(lib[r]);
        auto& acc = out.try_emplace(lib[r].source, std::vector<double>(lib.n_species(), 0.0)).first->second;
        for (std::size_t s = 0; s < net.size(); ++s) acc[s] += rates[r] * net[s];
    }
    return out;
}

std::optional<std::vector<double>> check_dynamical_equivalence(const ReactionLibrary& lib, const Crn& crn_a,
                                                               std::span<const double> rates_a, const Crn& crn_b,
                                                               double tolerance) {
    const CoefficientMap target = ode_coefficient_map(lib, crn_a, rates_a);
    const std::size_t n_species = lib.n_species();

    std::map<Complex, std::vector<std::size_t>> b_by_source;
    for (auto r : crn_b) b_by_source[lib[r].source].push_back(r);

    std::vector<double> rates_b(lib.size(), 0.0);
    std::vector<double> zero(n_species, 0.0);

    // every source complex of either network must balance
    std::vector<Complex> sources;
    for (const auto& [c, v] : target) sources.push_back(c);
    for (const auto& [c, v] : b_by_source)
        if (!target.count(c)) sources.push_back(c);

    for (const auto& source : sources) {
        auto it = target.find(source);
        const std::vector<double>& want = it == target.end() ? zero : it->second;
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(n_species));
        for (std::size_t s = 0; s < n_species; ++s) rhs(static_cast<Eigen::Index>(s)) = want[s];

        auto bit = b_by_source.find(source);
        if (bit == b_by_source.end()) {
            if (rhs.lpNorm<Eigen::Infinity>() > tolerance) return std::nullopt;
            continue;
        }
        const auto& cols = bit->second;
        Eigen::MatrixXd a(static_cast<Eigen::Index>(n_species), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const auto net = net_stoichiometry(lib[cols[j]]);
            for (std::size_t s = 0; s < n_species; ++s)
                a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = net[s];
        }
        const NnlsResult sol = nnls(a, rhs);
        const Eigen::VectorXd residual = a * sol.x - rhs;
        if (residual.lpNorm<Eigen::Infinity>() > tolerance) return std::nullopt;
        for (std::size_t j = 0; j < cols.size(); ++j) rates_b[cols[j]] = sol.x(static_cast<Eigen::Index>(j));
    }
    return rates_b;
}

}  // namespace crnpost
