#include "crnpost/config.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "crnpost/io.hpp"

namespace crnpost {

void RunConfig::validate() const {
    if (penalties.empty()) throw std::invalid_argument("at least one penalty is required");
    if (n_start < 1) throw std::invalid_argument("n_start must be at least 1");
    if (n_hyp < 1) throw std::invalid_argument("n_hyp must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (!(floor.value >= 0.0)) throw std::invalid_argument("sigma floor must be nonnegative");
    if (max_pairs < 1 || max_proposals < 1) throw std::invalid_argument("truncation limits must be at least 1");
    if (trajectory_points < 2) throw std::invalid_argument("trajectory_points must be at least 2");
    prior.shapes();
}

std::vector<PenaltyKind> parse_penalty_list(const std::string& text) {
    if (text == "all") return {std::begin(kAllPenalties), std::end(kAllPenalties)};
    std::vector<PenaltyKind> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto k = parse_penalty(item);
        for (auto seen : out)
            if (seen == k) throw std::invalid_argument("penalty '" + item + "' listed twice");
        out.push_back(k);
    }
    if (out.empty()) throw std::invalid_argument("empty penalty list");
    return out;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["penalties"] = nlohmann::json::array();
    for (auto k : cfg.penalties) j["penalties"].push_back(to_string(k));
    j["n_start"] = cfg.n_start;
    j["n_hyp"] = cfg.n_hyp;
    j["seed"] = cfg.seed;
    j["prior"] = prior_to_json(cfg.prior);
    j["alpha"] = cfg.alpha;
    j["sigma_floor"] = {{"mode", cfg.floor.mode == SigmaFloor::Mode::Relative ? "relative" : "absolute"},
                        {"value", cfg.floor.value}};
    j["delta"] = cfg.delta;
    j["max_pairs"] = cfg.max_pairs;
    j["max_proposals"] = cfg.max_proposals;
    j["trajectory_points"] = cfg.trajectory_points;
    j["out_dir"] = cfg.out_dir;
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("penalties")) {
        cfg.penalties.clear();
        for (const auto& p : j.at("penalties")) cfg.penalties.push_back(parse_penalty(p.get<std::string>()));
    }
    cfg.n_start = j.value("n_start", cfg.n_start);
    cfg.n_hyp = j.value("n_hyp", cfg.n_hyp);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("prior")) cfg.prior = prior_from_json(j.at("prior"));
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (j.contains("sigma_floor")) {
        const auto& f = j.at("sigma_floor");
        const auto mode = f.value("mode", std::string("relative"));
        if (mode == "relative")
            cfg.floor.mode = SigmaFloor::Mode::Relative;
        else if (mode == "absolute")
            cfg.floor.mode = SigmaFloor::Mode::Absolute;
        else
            throw std::invalid_argument("sigma_floor mode must be 'relative' or 'absolute'");
        cfg.floor.value = f.value("value", cfg.floor.value);
    }
    cfg.delta = j.value("delta", cfg.delta);
    cfg.max_pairs = j.value("max_pairs", cfg.max_pairs);
    cfg.max_proposals = j.value("max_proposals", cfg.max_proposals);
    cfg.trajectory_points = j.value("trajectory_points", cfg.trajectory_points);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.validate();
    return cfg;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash(const RunConfig& cfg) {
    auto j = config_to_json(cfg);
    j.erase("out_dir");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

}  // namespace crnpost
