#include "crnpost/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace crnpost {

namespace {

void expand(TreeNode& node, const std::vector<WeightedCrn>& hpd) {
    node.prob_mass = 0.0;
    for (auto i : node.members) node.prob_mass += hpd[i].prob;

    for (auto i : node.members)
        if (hpd[i].crn == node.inc) {
            node.leaf = TreeNode::Leaf::IncludedSet;
            return;
        }

    // conditional inclusion mass of each reaction outside inc
    std::map<std::size_t, double> mass;
    for (auto i : node.members)
        for (auto r : hpd[i].crn)
            if (!node.inc.contains(r)) mass[r] += hpd[i].prob;
    std::size_t r_mode = mass.begin()->first;
    double best = -1.0;
    for (const auto& [r, m] : mass)
        if (m > best) {
            best = m;
            r_mode = r;
        }
    node.split = r_mode;

    std::vector<std::size_t> with, without;
    for (auto i : node.members) (hpd[i].crn.contains(r_mode) ? with : without).push_back(i);

    if (with.size() == 1) {
        node.leaf = TreeNode::Leaf::SingleCarrier;
        std::vector<std::size_t> order = node.members;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return hpd[a].prob > hpd[b].prob; });
        for (auto i : order) node.leaf_label.push_back(hpd[i].crn.set_difference(node.inc));
        return;
    }

    TreeNode left;
    left.inc = node.inc.with(r_mode);
    left.exc = node.exc;
    left.members = std::move(with);
    expand(left, hpd);
    node.children.push_back(std::move(left));
    if (!without.empty()) {
        TreeNode right;
        right.inc = node.inc;
        right.exc = node.exc.with(r_mode);
        right.members = std::move(without);
        expand(right, hpd);
        node.children.push_back(std::move(right));
    }
}

nlohmann::json labels_json(const Crn& c) { return c.labels(); }

Crn crn_from_json(const nlohmann::json& j) { return Crn::from_labels(j.get<std::vector<int>>()); }

std::string leaf_name(TreeNode::Leaf l) {
    switch (l) {
    case TreeNode::Leaf::No: return "internal";
    case TreeNode::Leaf::SingleCarrier: return "single_carrier";
    case TreeNode::Leaf::IncludedSet: return "included_set";
    }
    return "internal";
}

TreeNode::Leaf leaf_from_name(const std::string& s) {
    if (s == "internal") return TreeNode::Leaf::No;
    if (s == "single_carrier") return TreeNode::Leaf::SingleCarrier;
    if (s == "included_set") return TreeNode::Leaf::IncludedSet;
    throw std::invalid_argument("unknown leaf kind '" + s + "'");
}

std::string format_prob(double p) {
    std::ostringstream os;
    os.precision(3);
    os << p;
    return os.str();
}

void dot_node(std::ostringstream& os, const TreeNode& node, std::size_t& next_id, std::size_t total) {
    const std::size_t id = next_id++;
    os << "  n" << id << " [label=\"" << format_prob(node.prob_mass) << " (" << node.members.size() << ")";
    if (node.leaf == TreeNode::Leaf::SingleCarrier) {
        os << "\\n";
        for (std::size_t i = 0; i < node.leaf_label.size(); ++i)
            os << (i ? "\\n" : "") << to_string(node.leaf_label[i]);
    }
    const double width = 0.5 + 1.5 * static_cast<double>(node.members.size()) / static_cast<double>(total);
    os << "\", width=" << width << "];\n";
    for (std::size_t c = 0; c < node.children.size(); ++c) {
        const std::size_t child = next_id;
        dot_node(os, node.children[c], next_id, total);
        os << "  n" << id << " -> n" << child << " [label=\"" << (*node.split + 1) << (c == 0 ? " ∈ R" : " ∉ R")
           << "\"];\n";
    }
}

}  // namespace

TreeNode build_tree(const std::vector<WeightedCrn>& hpd) {
    if (hpd.empty()) throw std::invalid_argument("cannot build a tree over an empty set");
    for (const auto& w : hpd)
        if (!(w.prob > 0.0)) throw std::invalid_argument("tree members need positive probability");
    TreeNode root;
    for (std::size_t i = 0; i < hpd.size(); ++i) root.members.push_back(i);
    expand(root, hpd);
    return root;
}

nlohmann::json tree_to_json(const TreeNode& node) {
    nlohmann::json j;
    j["inc"] = labels_json(node.inc);
    j["exc"] = labels_json(node.exc);
    j["members"] = node.members;
    j["prob_mass"] = node.prob_mass;
    j["count"] = node.members.size();
    j["split"] = node.split ? nlohmann::json(*node.split + 1) : nlohmann::json(nullptr);
    j["leaf"] = leaf_name(node.leaf);
    j["label"] = nlohmann::json::array();
    for (const auto& c : node.leaf_label) j["label"].push_back(labels_json(c));
    j["children"] = nlohmann::json::array();
    for (const auto& c : node.children) j["children"].push_back(tree_to_json(c));
    return j;
}

TreeNode tree_from_json(const nlohmann::json& j) {
    TreeNode node;
    node.inc = crn_from_json(j.at("inc"));
    node.exc = crn_from_json(j.at("exc"));
    node.members = j.at("members").get<std::vector<std::size_t>>();
    node.prob_mass = j.at("prob_mass").get<double>();
    if (!j.at("split").is_null()) node.split = j.at("split").get<std::size_t>() - 1;
    node.leaf = leaf_from_name(j.at("leaf").get<std::string>());
    for (const auto& c : j.at("label")) node.leaf_label.push_back(crn_from_json(c));
    for (const auto& c : j.at("children")) node.children.push_back(tree_from_json(c));
    return node;
}

std::string tree_to_dot(const TreeNode& root) {
    std::ostringstream os;
    os << "digraph hierarchy {\n  node [shape=box];\n";
    std::size_t next_id = 0;
    dot_node(os, root, next_id, std::max<std::size_t>(root.members.size(), 1));
    os << "}\n";
    return os.str();
}

std::size_t count_nodes(const TreeNode& root) {
    std::size_t n = 1;
    for (const auto& c : root.children) n += count_nodes(c);
    return n;
}

}  // namespace crnpost
