#pragma once

// Hierarchy trees over an HPD set: each node splits its CRNs on the most
// probable reaction not yet included.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crnpost/model.hpp"

namespace crnpost {

struct WeightedCrn {
    Crn crn;
    double prob = 0.0;
};

struct TreeNode {
    enum class Leaf { No, SingleCarrier, IncludedSet };

    Crn inc;
    Crn exc;
    /// Positions into the HPD list.
    std::vector<std::size_t> members;
    double prob_mass = 0.0;
    std::optional<std::size_t> split;
    /// Children in order (included, excluded); the excluded child may be absent.
    std::vector<TreeNode> children;
    Leaf leaf = Leaf::No;
    /// For single-carrier leaves: member CRNs minus `inc`, by descending probability.
    std::vector<Crn> leaf_label;

    bool is_leaf() const { return children.empty(); }
};

/// Throws on an empty set or non-positive probabilities.
TreeNode build_tree(const std::vector<WeightedCrn>& hpd);

/// Node records {inc, exc, prob_mass, count, split, leaf, label, children}
/// with 1-based reaction labels.
nlohmann::json tree_to_json(const TreeNode& root);
TreeNode tree_from_json(const nlohmann::json& j);
/// Graphviz digraph: one node per tree node labelled "p (n)", edges labelled
/// "r ∈ R" or "r ∉ R".
std::string tree_to_dot(const TreeNode& root);

std::size_t count_nodes(const TreeNode& root);

}  // namespace crnpost
