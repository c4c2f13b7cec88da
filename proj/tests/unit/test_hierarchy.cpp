#include <doctest.h>

#include <functional>
#include <random>
#include <set>

#include "crnpost/hierarchy.hpp"

using namespace crnpost;

namespace {

void collect_leaves(const TreeNode& n, std::vector<const TreeNode*>& out) {
    if (n.is_leaf()) out.push_back(&n);
    for (const auto& c : n.children) collect_leaves(c, out);
}

std::size_t count_edges(const std::string& dot) {
    std::size_t n = 0;
    for (std::size_t pos = dot.find("->"); pos != std::string::npos; pos = dot.find("->", pos + 1)) ++n;
    return n;
}

std::size_t count_labels(const std::string& dot) {
    std::size_t n = 0;
    for (std::size_t pos = dot.find("width="); pos != std::string::npos; pos = dot.find("width=", pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("tree over a nested pair") {
    const auto root = build_tree({{Crn::from_labels({1}), 0.6}, {Crn::from_labels({1, 2}), 0.4}});
    REQUIRE(root.split.has_value());
    CHECK(*root.split == 0);
    REQUIRE(root.children.size() == 1);
    const auto& child = root.children[0];
    CHECK(child.inc == Crn::from_labels({1}));
    CHECK(child.is_leaf());
    CHECK(child.leaf == TreeNode::Leaf::IncludedSet);
    CHECK(child.leaf_label.empty());
    CHECK(child.prob_mass == doctest::Approx(1.0));

    const auto dot = tree_to_dot(root);
    CHECK(count_labels(dot) == 2);
    CHECK(count_edges(dot) == 1);
    CHECK(dot.find("1 ∈ R") != std::string::npos);
}

TEST_CASE("tree over two disjoint CRNs stops at the root") {
    // reaction 1 is the tie-broken mode and only one CRN carries it
    const auto root = build_tree({{Crn::from_labels({1}), 0.5}, {Crn::from_labels({2}), 0.5}});
    CHECK(*root.split == 0);
    CHECK(root.is_leaf());
    CHECK(root.leaf == TreeNode::Leaf::SingleCarrier);
    REQUIRE(root.leaf_label.size() == 2);
    CHECK(root.leaf_label[0] == Crn::from_labels({1}));
    CHECK(root.leaf_label[1] == Crn::from_labels({2}));
}

TEST_CASE("single-carrier leaf with several CRNs") {
    const std::vector<WeightedCrn> hpd{{Crn::from_labels({13, 16, 19, 1, 2}), 0.002},
                                       {Crn::from_labels({13, 16, 19, 1, 4}), 0.002},
                                       {Crn::from_labels({13, 16, 19, 1, 5}), 0.003},
                                       {Crn::from_labels({13, 16, 19, 1, 24}), 0.001},
                                       {Crn::from_labels({13, 16, 19, 7}), 0.001}};
    const auto root = build_tree(hpd);
    std::vector<const TreeNode*> leaves;
    collect_leaves(root, leaves);
    const TreeNode* four = nullptr;
    for (auto* l : leaves)
        if (l->members.size() == 4) four = l;
    REQUIRE(four != nullptr);
    CHECK(four->leaf == TreeNode::Leaf::SingleCarrier);
    CHECK(four->inc == Crn::from_labels({1, 13, 16, 19}));
    CHECK(four->prob_mass == doctest::Approx(0.008));
    REQUIRE(four->leaf_label.size() == 4);
    CHECK(four->leaf_label[0] == Crn::from_labels({5}));
    CHECK(four->leaf_label[3] == Crn::from_labels({24}));

    const auto single = build_tree({{Crn::from_labels({3, 4}), 1.0}});
    CHECK(single.is_leaf());
    CHECK(count_edges(tree_to_dot(single)) == 0);
    CHECK(count_labels(tree_to_dot(single)) == 1);

    const auto empty_label = build_tree({{Crn::from_labels({1, 2}), 0.7}, {Crn::from_labels({1, 3}), 0.3}});
    CHECK(tree_to_dot(empty_label).find("∅") == std::string::npos);
    CHECK_THROWS(build_tree({}));
    CHECK_THROWS(build_tree({{Crn::from_labels({1}), 0.0}}));
}

TEST_CASE("tree invariants on random HPD sets") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> n_crn(1, 30), n_react(2, 12);
    std::uniform_real_distribution<double> w(0.01, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int R = n_react(rng);
        std::bernoulli_distribution coin(0.4);
        std::set<Crn> seen;
        std::vector<WeightedCrn> hpd;
        const int target = n_crn(rng);
        for (int attempt = 0; attempt < 500 && static_cast<int>(hpd.size()) < target; ++attempt) {
            std::vector<std::size_t> m;
            for (int r = 0; r < R; ++r)
                if (coin(rng)) m.push_back(static_cast<std::size_t>(r));
            if (seen.insert(Crn(m)).second) hpd.push_back({Crn(m), w(rng)});
        }
        const auto root = build_tree(hpd);
        std::vector<const TreeNode*> leaves;
        collect_leaves(root, leaves);
        double leaf_mass = 0.0;
        std::vector<int> hits(hpd.size(), 0);
        for (auto* l : leaves) {
            leaf_mass += l->prob_mass;
            for (auto i : l->members) ++hits[i];
        }
        double total = 0.0;
        for (const auto& h : hpd) total += h.prob;
        CHECK(root.prob_mass == doctest::Approx(total).epsilon(1e-12));
        CHECK(std::abs(leaf_mass - root.prob_mass) <= 1e-12);
        for (int h : hits) CHECK(h == 1);

        std::function<void(const TreeNode&)> check = [&](const TreeNode& n) {
            CHECK(n.inc.set_intersection(n.exc).empty());
            std::size_t expected = 0;
            for (const auto& h : hpd)
                if (h.crn.includes(n.inc) && h.crn.set_intersection(n.exc).empty()) ++expected;
            CHECK(n.members.size() == expected);
            std::size_t child_total = 0;
            for (const auto& c : n.children) {
                child_total += c.members.size();
                check(c);
            }
            if (!n.is_leaf()) CHECK(child_total == n.members.size());
        };
        check(root);

        const auto back = tree_from_json(nlohmann::json::parse(tree_to_json(root).dump()));
        CHECK(count_nodes(back) == count_nodes(root));
        std::vector<const TreeNode*> back_leaves;
        collect_leaves(back, back_leaves);
        REQUIRE(back_leaves.size() == leaves.size());
        for (std::size_t i = 0; i < leaves.size(); ++i) CHECK(back_leaves[i]->prob_mass == leaves[i]->prob_mass);
        CHECK(back.prob_mass == root.prob_mass);
    }
}
