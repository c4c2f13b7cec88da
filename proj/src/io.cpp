#include "crnpost/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "crnpost/dynamics.hpp"

namespace crnpost {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::optional<double> to_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    if (*first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
    throw ParseError(source + ":" + std::to_string(line) + ": " + what);
}

std::string num_str(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

nlohmann::json num_json(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double json_num(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::invalid_argument("expected a number, got '" + s + "'");
}

nlohmann::json nums_json(const std::vector<double>& v) {
    auto j = nlohmann::json::array();
    for (double x : v) j.push_back(num_json(x));
    return j;
}

std::vector<double> json_nums(const nlohmann::json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(json_num(x));
    return v;
}

OptimizeStatus parse_status(const std::string& s) {
    for (auto st : {OptimizeStatus::GradientTolerance, OptimizeStatus::FunctionTolerance,
                    OptimizeStatus::LineSearchStalled, OptimizeStatus::MaxIterations, OptimizeStatus::NonFiniteStart,
                    OptimizeStatus::NaNGradient})
        if (to_string(st) == s) return st;
    throw std::invalid_argument("unknown optimiser status '" + s + "'");
}

Origin parse_origin(const std::string& s) {
    if (s == to_string(Origin::Pruned)) return Origin::Pruned;
    if (s == to_string(Origin::Recombined)) return Origin::Recombined;
    throw std::invalid_argument("unknown origin '" + s + "'");
}

std::vector<double> member_values(const Crn& crn, const std::vector<double>& full) {
    std::vector<double> v;
    for (auto r : crn) v.push_back(full.at(r));
    return v;
}

std::vector<double> expand_values(const Crn& crn, const std::vector<double>& packed, std::size_t n) {
    if (packed.size() != crn.size()) throw std::invalid_argument("rate list does not match the CRN size");
    std::vector<double> full(n, 0.0);
    std::size_t i = 0;
    for (auto r : crn) {
        if (r >= n) throw std::invalid_argument("reaction label outside the library");
        full[r] = packed[i++];
    }
    return full;
}

std::vector<std::size_t> complex_positions(const nlohmann::json& j, std::size_t n_complexes) {
    std::vector<std::size_t> out;
    for (const auto& v : j) {
        const int p = v.get<int>();
        if (p < 1 || static_cast<std::size_t>(p) > n_complexes)
            throw std::invalid_argument("complex position " + std::to_string(p) + " out of range");
        out.push_back(static_cast<std::size_t>(p - 1));
    }
    return out;
}

std::vector<std::size_t> species_positions(const nlohmann::json& j, const std::vector<std::string>& species) {
    std::vector<std::size_t> out;
    for (const auto& v : j) {
        const auto name = v.get<std::string>();
        std::size_t s = 0;
        while (s < species.size() && species[s] != name) ++s;
        if (s == species.size()) throw std::invalid_argument("unknown species '" + name + "' in library rules");
        out.push_back(s);
    }
    return out;
}

Complex complex_from_json(const nlohmann::json& j, std::size_t n_species) {
    auto c = j.get<std::vector<int>>();
    if (c.size() != n_species) throw std::invalid_argument("complex has the wrong number of species");
    for (int v : c)
        if (v < 0) throw std::invalid_argument("complex coefficients must be nonnegative");
    return Complex(std::move(c));
}

}  // namespace

Dataset parse_dataset(std::istream& in, const std::string& source) {
    Dataset d;
    std::string line;
    std::size_t lineno = 0;
    std::optional<std::vector<double>> x0;
    std::vector<std::vector<double>> rows;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = trim(line);
        if (text.empty()) continue;
        if (text[0] == '#') {
            const auto body = trim(text.substr(1));
            if (body.rfind("x0=", 0) == 0) {
                std::vector<double> v;
                for (const auto& f : split_fields(body.substr(3))) {
                    const auto x = to_number(f);
                    if (!x) fail(source, lineno, "initial state entry '" + f + "' is not a number");
                    v.push_back(*x);
                }
                x0 = std::move(v);
            }
            continue;
        }
        const auto fields = split_fields(text);
        if (!have_header) {
            if (fields.size() < 2 || fields[0] != "t")
                fail(source, lineno, "header must be 't' followed by at least one species name");
            for (std::size_t i = 1; i < fields.size(); ++i) {
                if (fields[i].empty()) fail(source, lineno, "empty species name in header");
                d.species.push_back(fields[i]);
            }
            have_header = true;
            continue;
        }
        if (fields.size() != d.species.size() + 1)
            fail(source, lineno,
                 "expected " + std::to_string(d.species.size() + 1) + " fields, found " + std::to_string(fields.size()));
        std::vector<double> row;
        for (const auto& f : fields) {
            const auto x = to_number(f);
            if (!x || !std::isfinite(*x)) fail(source, lineno, "'" + f + "' is not a finite number");
            row.push_back(*x);
        }
        if (!d.t.empty() && !(row[0] > d.t.back()))
            fail(source, lineno, "time " + num_str(row[0]) + " does not increase on " + num_str(d.t.back()));
        if (row[0] < 0.0) fail(source, lineno, "negative time " + num_str(row[0]));
        for (std::size_t s = 1; s < row.size(); ++s)
            if (row[s] < 0.0) fail(source, lineno, "negative observation for " + d.species[s - 1]);
        d.t.push_back(row[0]);
        rows.push_back(std::move(row));
    }
    if (!have_header) throw ParseError(source + ": missing header line");
    if (rows.empty()) throw ParseError(source + ": no observations");
    d.y.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.species.size()));
    for (std::size_t n = 0; n < rows.size(); ++n)
        for (std::size_t s = 0; s < d.species.size(); ++s)
            d.y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s)) = rows[n][s + 1];
    if (x0) {
        if (x0->size() != d.species.size())
            throw ParseError(source + ": initial state has " + std::to_string(x0->size()) + " entries for " +
                             std::to_string(d.species.size()) + " species");
        d.x0 = *x0;
    } else if (d.t.front() == 0.0) {
        d.x0 = rows.front();
        d.x0.erase(d.x0.begin());
    } else {
        throw ParseError(source + ": no '# x0=' line and no observation at t = 0");
    }
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(source + ": " + e.what());
    }
    return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    return parse_dataset(in, path.string());
}

void write_dataset(std::ostream& os, const Dataset& data) {
    os << std::setprecision(17);
    os << "# x0=";
    for (std::size_t s = 0; s < data.x0.size(); ++s) os << (s ? "," : "") << data.x0[s];
    os << "\nt";
    for (const auto& s : data.species) os << ',' << s;
    os << '\n';
    for (std::size_t n = 0; n < data.n_obs(); ++n) {
        os << data.t[n];
        for (Eigen::Index s = 0; s < data.y.cols(); ++s) os << ',' << data.y(static_cast<Eigen::Index>(n), s);
        os << '\n';
    }
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ostringstream os;
    write_dataset(os, data);
    write_text_file(path, os.str());
}

ReactionLibrary parse_library(const nlohmann::json& j) {
    auto species = j.at("species").get<std::vector<std::string>>();
    if (species.empty()) throw std::invalid_argument("library has no species");
    const std::size_t n = species.size();
    if (j.contains("reactions")) {
        std::vector<Reaction> reactions;
        for (const auto& r : j.at("reactions"))
            reactions.push_back({complex_from_json(r.at("source"), n), complex_from_json(r.at("target"), n)});
        return ReactionLibrary(std::move(species), std::move(reactions));
    }
    std::vector<Complex> complexes;
    if (j.contains("complexes")) {
        for (const auto& c : j.at("complexes")) complexes.push_back(complex_from_json(c, n));
    } else if (j.contains("generate_complexes")) {
        const auto& g = j.at("generate_complexes");
        complexes = generate_complexes(n, g.value("min", 1), g.value("max", 2));
    } else {
        throw std::invalid_argument("library needs 'reactions', 'complexes' or 'generate_complexes'");
    }
    LibraryRules rules;
    if (j.contains("rules")) {
        const auto& r = j.at("rules");
        if (r.contains("allowed_sources")) rules.allowed_sources = complex_positions(r.at("allowed_sources"), complexes.size());
        if (r.contains("allowed_targets")) rules.allowed_targets = complex_positions(r.at("allowed_targets"), complexes.size());
        if (r.contains("molecularity_pairs")) {
            std::vector<std::pair<int, int>> pairs;
            for (const auto& p : r.at("molecularity_pairs")) pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
            rules.molecularity_pairs = std::move(pairs);
        }
        if (r.contains("excluded_reactants")) rules.excluded_reactants = species_positions(r.at("excluded_reactants"), species);
        if (r.contains("excluded_products")) rules.excluded_products = species_positions(r.at("excluded_products"), species);
        rules.disjoint_species = r.value("disjoint_species", false);
        rules.allow_zero_complex = r.value("allow_zero_complex", false);
        if (r.contains("formulas"))
            for (const auto& [element, counts] : r.at("formulas").items()) {
                auto v = counts.get<std::vector<int>>();
                if (v.size() != n) throw std::invalid_argument("formula for '" + element + "' has the wrong length");
                rules.formulas[element] = std::move(v);
            }
    }
    return enumerate_library(std::move(species), complexes, rules);
}

ReactionLibrary load_library(const std::filesystem::path& path) {
    try {
        return parse_library(read_json_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

nlohmann::json library_to_json(const ReactionLibrary& lib) {
    nlohmann::json j;
    j["species"] = lib.species();
    j["reactions"] = nlohmann::json::array();
    for (const auto& r : lib.reactions())
        j["reactions"].push_back({{"source", r.source.coeffs()}, {"target", r.target.coeffs()}});
    return j;
}

std::vector<double> noise_sigma(const Trajectory& traj, const NoiseMode& noise) {
    const std::size_t S = traj.n_species();
    if (noise.kind == NoiseMode::Kind::Explicit) {
        if (noise.sigma.size() != S) throw std::invalid_argument("need one noise level per species");
        for (double s : noise.sigma)
            if (!(s >= 0.0)) throw std::invalid_argument("noise levels must be nonnegative");
        return noise.sigma;
    }
    if (!(noise.fraction >= 0.0)) throw std::invalid_argument("noise fraction must be nonnegative");
    std::vector<double> lo(S, std::numeric_limits<double>::infinity()), hi(S, -lo[0]);
    for (std::size_t i = 0; i < traj.n_nodes(); ++i) {
        const auto x = traj.node_state(i);
        for (std::size_t s = 0; s < S; ++s) {
            lo[s] = std::min(lo[s], x[s]);
            hi[s] = std::max(hi[s], x[s]);
        }
    }
    std::vector<double> sigma(S);
    for (std::size_t s = 0; s < S; ++s) sigma[s] = noise.fraction * (hi[s] - lo[s]);
    return sigma;
}

Dataset simulate_dataset(const ReactionLibrary& lib, const SimConfig& cfg) {
    if (cfg.t_grid.empty()) throw std::invalid_argument("empty time grid");
    for (std::size_t i = 1; i < cfg.t_grid.size(); ++i)
        if (!(cfg.t_grid[i] > cfg.t_grid[i - 1])) throw std::invalid_argument("time grid must be increasing");
    if (cfg.rates.size() != lib.size()) throw std::invalid_argument("rate vector must cover the library");
    if (cfg.x0.size() != lib.n_species()) throw std::invalid_argument("initial state has the wrong size");
    const auto traj = simulate(lib, cfg.crn, cfg.rates, cfg.x0, cfg.t_grid.back(), cfg.solver);
    const auto sigma = noise_sigma(traj, cfg.noise);

    Dataset d;
    d.species = lib.species();
    d.t = cfg.t_grid;
    d.x0 = cfg.x0;
    d.y = traj.sample(cfg.t_grid);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (Eigen::Index n = 0; n < d.y.rows(); ++n)
        for (Eigen::Index s = 0; s < d.y.cols(); ++s) {
            const double xi = z(rng) * sigma[static_cast<std::size_t>(s)];
            d.y(n, s) = std::max(d.y(n, s) + xi, 0.0);
        }
    return d;
}

nlohmann::json crn_to_json(const Crn& crn) { return crn.labels(); }

Crn crn_from_json(const nlohmann::json& j) {
    const auto labels = j.get<std::vector<int>>();
    for (int l : labels)
        if (l < 1) throw std::invalid_argument("reaction labels start at 1");
    return Crn::from_labels(labels);
}

std::string format_crn(const Crn& crn, const ReactionLibrary& lib) {
    std::string out;
    for (auto r : crn) {
        if (!out.empty()) out += "; ";
        out += std::to_string(r + 1) + ": " + format_reaction(lib[r], lib.species());
    }
    return out.empty() ? "∅" : out;
}

nlohmann::json estimates_to_json(const std::vector<ParamEstimate>& estimates) {
    auto j = nlohmann::json::array();
    for (const auto& e : estimates)
        j.push_back({{"penalty", to_string(e.kind)},
                     {"lambda", num_json(e.lambda)},
                     {"lambda_index", e.lambda_index},
                     {"start_id", e.start_id},
                     {"loss", num_json(e.loss)},
                     {"status", to_string(e.status)},
                     {"iterations", e.iterations},
                     {"eta", nums_json(e.eta)},
                     {"varsigma", nums_json(e.varsigma)}});
    return j;
}

std::vector<ParamEstimate> estimates_from_json(const nlohmann::json& j) {
    std::vector<ParamEstimate> out;
    for (const auto& e : j) {
        ParamEstimate p;
        p.kind = parse_penalty(e.at("penalty").get<std::string>());
        p.lambda = json_num(e.at("lambda"));
        p.lambda_index = e.at("lambda_index").get<std::size_t>();
        p.start_id = e.at("start_id").get<std::size_t>();
        p.loss = json_num(e.at("loss"));
        p.status = parse_status(e.at("status").get<std::string>());
        p.iterations = e.at("iterations").get<int>();
        p.eta = json_nums(e.at("eta"));
        p.varsigma = json_nums(e.at("varsigma"));
        out.push_back(std::move(p));
    }
    return out;
}

nlohmann::json members_to_json(const std::vector<EnsembleMember>& members) {
    auto j = nlohmann::json::array();
    for (const auto& m : members)
        j.push_back({{"crn", crn_to_json(m.crn)},
                     {"rates", nums_json(member_values(m.crn, m.mle_rates))},
                     {"sigma2", nums_json(m.mle_sigma2)},
                     {"max_loglik", num_json(m.max_loglik)},
                     {"bic", num_json(m.bic)},
                     {"origin", to_string(m.origin)},
                     {"status", to_string(m.status)},
                     {"start_loglik", num_json(m.start_loglik)}});
    return j;
}

std::vector<EnsembleMember> members_from_json(const nlohmann::json& j, std::size_t n_reactions) {
    std::vector<EnsembleMember> out;
    for (const auto& e : j) {
        EnsembleMember m;
        m.crn = crn_from_json(e.at("crn"));
        m.mle_rates = expand_values(m.crn, json_nums(e.at("rates")), n_reactions);
        m.mle_sigma2 = json_nums(e.at("sigma2"));
        m.max_loglik = json_num(e.at("max_loglik"));
        m.bic = json_num(e.at("bic"));
        m.origin = parse_origin(e.at("origin").get<std::string>());
        m.status = parse_status(e.at("status").get<std::string>());
        m.start_loglik = json_num(e.at("start_loglik"));
        out.push_back(std::move(m));
    }
    return out;
}

nlohmann::json mapped_to_json(const std::vector<MappedCrn>& base) {
    auto j = nlohmann::json::array();
    for (const auto& m : base)
        j.push_back({{"crn", crn_to_json(m.crn)},
                     {"rates", nums_json(member_values(m.crn, m.rates))},
                     {"sigma2", nums_json(m.sigma2)},
                     {"b", num_json(m.b_value)},
                     {"loglik", num_json(m.loglik)},
                     {"source", m.source}});
    return j;
}

nlohmann::json pairs_to_json(const std::vector<ExchangePair>& pairs) {
    auto j = nlohmann::json::array();
    for (const auto& p : pairs) {
        auto w = nlohmann::json::array();
        for (auto [r1, r2] : p.witnesses) w.push_back({r1, r2});
        j.push_back({{"u", crn_to_json(p.u)}, {"v", crn_to_json(p.v)}, {"score", num_json(p.score)}, {"witnesses", w}});
    }
    return j;
}

nlohmann::json proposals_to_json(const std::vector<Proposal>& proposals) {
    auto j = nlohmann::json::array();
    for (const auto& p : proposals)
        j.push_back({{"crn", crn_to_json(p.crn)},
                     {"score", num_json(p.score)},
                     {"base", p.base_index},
                     {"r1", p.r1},
                     {"r2", p.r2},
                     {"nominal_loglik", num_json(p.witness.loglik)}});
    return j;
}

nlohmann::json prior_to_json(const PriorConfig& prior) {
    if (prior.kind == PriorConfig::Kind::Uniform) return {{"kind", "uniform"}};
    return {{"kind", "beta"}, {"mean", prior.mean}, {"variance", prior.variance}};
}

PriorConfig prior_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "uniform") return PriorConfig::uniform();
    if (kind == "beta") {
        auto p = PriorConfig::beta(j.at("mean").get<double>(), j.at("variance").get<double>());
        p.shapes();
        return p;
    }
    throw std::invalid_argument("unknown prior kind '" + kind + "'");
}

PriorConfig parse_prior(const std::string& spec) {
    if (spec == "uniform") return PriorConfig::uniform();
    if (spec.rfind("beta:", 0) == 0) {
        const auto v = parse_number_list(spec.substr(5));
        if (v.size() != 2) throw std::invalid_argument("beta prior needs 'beta:<mean>,<variance>'");
        auto p = PriorConfig::beta(v[0], v[1]);
        p.shapes();
        return p;
    }
    throw std::invalid_argument("prior must be 'uniform' or 'beta:<mean>,<variance>', got '" + spec + "'");
}

nlohmann::json posterior_to_json(const PosteriorTable& table) {
    nlohmann::json j;
    j["alpha"] = table.alpha;
    j["log_normaliser"] = num_json(table.log_normaliser);
    j["hpd_size"] = table.hpd_size();
    j["entries"] = nlohmann::json::array();
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        const auto& e = table.entries[i];
        j["entries"].push_back({{"rank", i + 1},
                                {"crn", crn_to_json(e.crn)},
                                {"size", e.crn.size()},
                                {"bic", num_json(e.bic)},
                                {"log_prior", num_json(e.log_prior)},
                                {"log_unnorm", num_json(e.log_unnorm)},
                                {"prob", e.prob},
                                {"hpd", e.hpd}});
    }
    return j;
}

PosteriorTable posterior_from_json(const nlohmann::json& j) {
    PosteriorTable t;
    t.alpha = j.at("alpha").get<double>();
    t.log_normaliser = json_num(j.at("log_normaliser"));
    for (const auto& e : j.at("entries")) {
        PosteriorEntry p;
        p.crn = crn_from_json(e.at("crn"));
        p.bic = json_num(e.at("bic"));
        p.log_prior = json_num(e.at("log_prior"));
        p.log_unnorm = json_num(e.at("log_unnorm"));
        p.prob = e.at("prob").get<double>();
        p.hpd = e.at("hpd").get<bool>();
        t.entries.push_back(std::move(p));
    }
    return t;
}

void write_reaction_probabilities(std::ostream& os, const std::vector<double>& probs, const ReactionLibrary& lib) {
    os << std::setprecision(17) << "reaction,label,probability\n";
    for (std::size_t r = 0; r < probs.size(); ++r)
        os << r + 1 << ",\"" << format_reaction(lib[r], lib.species()) << "\"," << probs[r] << '\n';
}

void write_correlations(std::ostream& os, const Eigen::MatrixXd& corr) {
    os << std::setprecision(17) << "reaction";
    for (Eigen::Index c = 0; c < corr.cols(); ++c) os << ',' << c + 1;
    os << '\n';
    for (Eigen::Index r = 0; r < corr.rows(); ++r) {
        os << r + 1;
        for (Eigen::Index c = 0; c < corr.cols(); ++c) os << ',' << corr(r, c);
        os << '\n';
    }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> v;
    for (const auto& f : split_fields(text)) {
        const auto x = to_number(f);
        if (!x) throw std::invalid_argument("'" + f + "' is not a number");
        v.push_back(*x);
    }
    return v;
}

}  // namespace crnpost
