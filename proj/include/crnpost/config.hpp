#pragma once

// Run configuration shared by every pipeline stage.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "crnpost/inference.hpp"
#include "crnpost/posterior.hpp"

namespace crnpost {

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    std::vector<PenaltyKind> penalties{PenaltyKind::LogL1};
    std::size_t n_start = 64;
    /// Hyperparameter values used per penalty, spread over the grid of ten.
    std::size_t n_hyp = 10;
    std::uint64_t seed = 0;
    PriorConfig prior;
    double alpha = 0.05;
    SigmaFloor floor;
    double delta = 13.815510557964274;
    std::size_t max_pairs = 1000;
    std::size_t max_proposals = 1000;
    /// Points per HPD trajectory in the report.
    std::size_t trajectory_points = 201;
    std::string out_dir = "out";
    /// Not part of the hash: results do not depend on it.
    std::size_t workers = 1;

    /// Throws std::invalid_argument naming the first bad field.
    void validate() const;
};

/// "l1,logl1" or "all".
std::vector<PenaltyKind> parse_penalty_list(const std::string& text);

nlohmann::json config_to_json(const RunConfig& cfg);
/// Missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
/// FNV-1a (64 bit) of the canonical JSON of every field except out_dir and workers,
/// as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace crnpost
