#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "martsel/scenario.hpp"

using namespace martsel;

namespace {

Vec rv(std::initializer_list<long> xs) {
    Vec v;
    for (long x : xs) v.push_back(Rational(x));
    return v;
}

/// Random tree and random measure with full support, for property checks.
ScenarioTree random_tree(std::mt19937& gen, std::size_t max_depth, std::size_t max_branch) {
    std::uniform_int_distribution<std::size_t> depth(1, max_depth);
    std::uniform_int_distribution<std::size_t> branch(1, max_branch);
    const std::size_t T = depth(gen);
    std::vector<std::vector<std::size_t>> parents;
    std::size_t width = 1;
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<std::size_t> level;
        for (std::size_t p = 0; p < width; ++p) {
            const std::size_t k = branch(gen);
            for (std::size_t c = 0; c < k; ++c) level.push_back(p);
        }
        width = level.size();
        parents.push_back(std::move(level));
    }
    return ScenarioTree(std::move(parents));
}

FiniteMeasure random_measure(const ScenarioTree& tree, std::mt19937& gen) {
    std::uniform_int_distribution<long> w(1, 9);
    std::map<std::size_t, Rational> raw;
    Rational total = 0;
    for (std::size_t i = 0; i < tree.level_size(tree.horizon()); ++i) {
        raw[i] = Rational(w(gen));
        total += raw[i];
    }
    for (auto& [leaf, v] : raw) v /= total;
    return FiniteMeasure(tree, std::move(raw));
}

}  // namespace

TEST_CASE("tree construction and navigation") {
    // Root with two children; left child has two children, right child one.
    const ScenarioTree tree({{0, 0}, {0, 0, 1}});
    CHECK(tree.horizon() == 2);
    CHECK(tree.level_size(0) == 1);
    CHECK(tree.level_size(1) == 2);
    CHECK(tree.level_size(2) == 3);
    CHECK(tree.children({0, 0}) == std::vector<NodeId>{{1, 0}, {1, 1}});
    CHECK(tree.children({1, 0}) == std::vector<NodeId>{{2, 0}, {2, 1}});
    CHECK(tree.children({1, 1}) == std::vector<NodeId>{{2, 2}});
    CHECK(tree.parent({2, 2}) == NodeId{1, 1});
    CHECK(tree.parent({1, 0}) == NodeId{0, 0});
    CHECK_THROWS_AS(tree.parent({0, 0}), InputError);
    CHECK(tree.is_leaf({2, 0}));
    CHECK_FALSE(tree.is_leaf({1, 0}));
    CHECK(tree.subtree_leaves({1, 0}) == std::vector<std::size_t>{0, 1});
    CHECK(tree.subtree_leaves({0, 0}) == std::vector<std::size_t>{0, 1, 2});
    CHECK(tree.subtree_leaves({2, 1}) == std::vector<std::size_t>{1});
    CHECK(tree.is_ancestor_or_self({1, 0}, {2, 1}));
    CHECK_FALSE(tree.is_ancestor_or_self({1, 1}, {2, 1}));
    CHECK(tree.is_ancestor_or_self({2, 1}, {2, 1}));
    CHECK(tree.all_nodes().size() == 6);
    CHECK(tree.leaves().size() == 3);
    CHECK_FALSE(tree.valid({3, 0}));
    CHECK_FALSE(tree.valid({1, 2}));
    CHECK_THROWS_AS(tree.require_valid({1, 5}), InputError);
    CHECK(format_node({2, 1}) == "2:1");
}

TEST_CASE("tree validation rejects malformed input") {
    using Parents = std::vector<std::vector<std::size_t>>;
    // Parent index out of range.
    CHECK_THROWS_AS(ScenarioTree(Parents{{0}, {1}}), InputError);
    // A node below the horizon with no children.
    CHECK_THROWS_AS(ScenarioTree(Parents{{0, 0}, {0}}), InputError);
    // An empty level.
    CHECK_THROWS_AS(ScenarioTree(Parents{{0}, {}}), InputError);
    // Label shape mismatches.
    const std::vector<std::vector<std::size_t>> one_level = {{0}};
    CHECK_THROWS_AS(ScenarioTree(one_level, {{"a"}}), InputError);
    CHECK_THROWS_AS(ScenarioTree(one_level, {{"a"}, {"b", "c"}}), InputError);
    const ScenarioTree ok(one_level, {{"root"}, {"leaf"}});
    CHECK(ok.label({0, 0}) == "root");
    CHECK(ok.label({1, 0}) == "leaf");
    CHECK(ok.has_labels());
    // Horizon-zero tree: a single root that is also the leaf.
    const ScenarioTree trivial{std::vector<std::vector<std::size_t>>{}};
    CHECK(trivial.horizon() == 0);
    CHECK(trivial.is_leaf({0, 0}));
}

TEST_CASE("uniform and single path builders") {
    const auto path = ScenarioTree::single_path(3);
    CHECK(path.horizon() == 3);
    for (std::size_t t = 0; t <= 3; ++t) CHECK(path.level_size(t) == 1);
    const auto full = ScenarioTree::uniform(2, 3);
    CHECK(full.level_size(1) == 3);
    CHECK(full.level_size(2) == 9);
    CHECK(full.parent({2, 7}) == NodeId{1, 2});
    CHECK_THROWS_AS(ScenarioTree::uniform(1, 0), InputError);
}

TEST_CASE("measure validation") {
    const auto tree = ScenarioTree::uniform(2, 2);
    CHECK_THROWS_AS(FiniteMeasure(tree, {{0, Rational(1, 2)}}), InputError);
    CHECK_THROWS_AS(FiniteMeasure(tree, {{0, Rational(1)}, {1, Rational(0)}}), InputError);
    CHECK_THROWS_AS(FiniteMeasure(tree, {{9, Rational(1)}}), InputError);
    CHECK_THROWS_AS(FiniteMeasure(tree, {{0, Rational(3, 2)}, {1, Rational(-1, 2)}}),
                    InputError);
    const auto q = FiniteMeasure(tree, {{0, Rational(1, 4)}, {3, Rational(3, 4)}});
    CHECK(q.leaf_weight(0) == Rational(1, 4));
    CHECK(q.leaf_weight(1) == 0);
    CHECK(q.leaf_weight(3) == Rational(3, 4));
    CHECK(q.support().size() == 2);
}

TEST_CASE("node_mass on the uniform four-leaf tree") {
    const auto tree = ScenarioTree::uniform(2, 2);
    std::map<std::size_t, Rational> w;
    for (std::size_t i = 0; i < 4; ++i) w[i] = Rational(1, 4);
    const FiniteMeasure uniform(tree, w);
    CHECK(node_mass(tree, uniform, {0, 0}) == 1);
    CHECK(node_mass(tree, uniform, {2, 2}) == Rational(1, 4));
    CHECK(node_mass(tree, uniform, {1, 0}) == Rational(1, 2));

    const auto delta = FiniteMeasure::dirac(tree, 3);
    CHECK(node_mass(tree, delta, {1, 0}) == 0);
    CHECK(node_mass(tree, delta, {1, 1}) == 1);
    CHECK(node_mass(tree, delta, {2, 0}) == 0);
}

TEST_CASE("conditional expectation basics") {
    const auto tree = ScenarioTree::uniform(1, 2);
    AdaptedProcess x(tree);
    x.set({1, 0}, rv({0}));
    x.set({1, 1}, rv({1}));
    const FiniteMeasure half(tree, {{0, Rational(1, 2)}, {1, Rational(1, 2)}});
    CHECK(conditional_expectation(tree, x, half, {0, 0}) == Vec{Rational(1, 2)});

    // Only one child in the support: the expectation is that child's value.
    const auto delta = FiniteMeasure::dirac(tree, 1);
    CHECK(conditional_expectation(tree, x, delta, {0, 0}) == rv({1}));

    // Weights 1/3 and 2/3 with values 2 and 1/2 average to exactly 1.
    AdaptedProcess y(tree);
    y.set({1, 0}, rv({2}));
    y.set({1, 1}, Vec{Rational(1, 2)});
    const FiniteMeasure skew(tree, {{0, Rational(1, 3)}, {1, Rational(2, 3)}});
    CHECK(conditional_expectation(tree, y, skew, {0, 0}) == rv({1}));

    CHECK_THROWS_AS(conditional_expectation(tree, x, delta, {1, 1}), InputError);
}

TEST_CASE("conditional expectation requires positive mass") {
    const auto tree = ScenarioTree::uniform(2, 2);
    AdaptedProcess x(tree);
    for (std::size_t i = 0; i < 4; ++i) x.set({2, i}, rv({long(i)}));
    const auto delta = FiniteMeasure::dirac(tree, 3);
    CHECK_THROWS_AS(conditional_expectation(tree, x, delta, {1, 0}), ZeroMassError);
    CHECK(conditional_expectation(tree, x, delta, {1, 1}) == rv({3}));
}

TEST_CASE("mix_measures combines supports") {
    const auto tree = ScenarioTree::uniform(1, 3);
    const auto da = FiniteMeasure::dirac(tree, 0);
    const auto db = FiniteMeasure::dirac(tree, 2);
    const auto mixed = mix_measures(tree, {{Rational(1, 2), da}, {Rational(1, 2), db}});
    CHECK(mixed.leaf_weight(0) == Rational(1, 2));
    CHECK(mixed.leaf_weight(1) == 0);
    CHECK(mixed.leaf_weight(2) == Rational(1, 2));

    // A single full-weight term is the identity.
    const auto same = mix_measures(tree, {{Rational(1), da}});
    CHECK(same == da);

    // Two disjoint uniforms: union with halved weights.
    const FiniteMeasure u01(tree, {{0, Rational(1, 2)}, {1, Rational(1, 2)}});
    const auto spread = mix_measures(tree, {{Rational(1, 2), u01}, {Rational(1, 2), db}});
    CHECK(spread.leaf_weight(0) == Rational(1, 4));
    CHECK(spread.leaf_weight(1) == Rational(1, 4));
    CHECK(spread.leaf_weight(2) == Rational(1, 2));

    CHECK_THROWS_AS(mix_measures(tree, {{Rational(1, 2), da}}), InputError);
    CHECK_THROWS_AS(mix_measures(tree, {{Rational(2), da}, {Rational(-1), db}}), InputError);
}

TEST_CASE("node map stores partial adapted data") {
    const auto tree = ScenarioTree::uniform(1, 2);
    AdaptedProcess x(tree);
    CHECK_FALSE(x.defined({0, 0}));
    x.set({0, 0}, rv({1, 2}));
    CHECK(x.defined({0, 0}));
    CHECK(x.at({0, 0}) == rv({1, 2}));
    CHECK_THROWS_AS(x.at({1, 0}), InputError);
    CHECK_THROWS_AS(x.set({4, 0}, rv({0})), InputError);
    CHECK(x.defined_nodes() == std::vector<NodeId>{{0, 0}});
}

TEST_CASE("mass additivity and tower property on random trees") {
    std::mt19937 gen(91);
    for (int trial = 0; trial < 40; ++trial) {
        const auto tree = random_tree(gen, 3, 3);
        const auto q = random_measure(tree, gen);
        // Additivity over children at every interior node.
        for (const NodeId& n : tree.all_nodes()) {
            if (tree.is_leaf(n)) continue;
            Rational total = 0;
            for (const NodeId& c : tree.children(n)) total += node_mass(tree, q, c);
            CHECK(total == node_mass(tree, q, n));
        }
        CHECK(node_mass(tree, q, {0, 0}) == 1);

        // Constant processes have constant expectations.
        AdaptedProcess c(tree);
        for (const NodeId& n : tree.all_nodes()) c.set(n, rv({7, -3}));
        for (const NodeId& n : tree.all_nodes())
            if (!tree.is_leaf(n))
                CHECK(conditional_expectation(tree, c, q, n) == rv({7, -3}));

        // Tower property for a random process two levels down.
        if (tree.horizon() < 2) continue;
        std::uniform_int_distribution<long> val(-5, 5);
        for (std::size_t t = 0; t + 2 <= tree.horizon(); ++t) {
            AdaptedProcess x(tree);
            for (std::size_t i = 0; i < tree.level_size(t + 2); ++i)
                x.set({t + 2, i}, rv({val(gen), val(gen)}));
            AdaptedProcess inner(tree);
            for (std::size_t i = 0; i < tree.level_size(t + 1); ++i)
                inner.set({t + 1, i}, conditional_expectation(tree, x, q, {t + 1, i}));
            for (std::size_t i = 0; i < tree.level_size(t); ++i) {
                const NodeId n{t, i};
                // Direct two-step expectation at n.
                Vec direct = zero_vec(2);
                const Rational m = node_mass(tree, q, n);
                for (const NodeId& child : tree.children(n))
                    for (const NodeId& gc : tree.children(child)) {
                        const Rational gm = node_mass(tree, q, gc);
                        if (gm != 0) direct = add(direct, scale(x.at(gc), gm / m));
                    }
                CHECK(conditional_expectation(tree, inner, q, n) == direct);
            }
        }
    }
}

TEST_CASE("unreduced weights are accepted and stored reduced") {
    const auto tree = ScenarioTree::uniform(1, 2);
    const FiniteMeasure q(tree, {{0, Rational(2, 4)}, {1, Rational(3, 6)}});
    CHECK(q.leaf_weight(0) == rat(1, 2));
    CHECK(q.leaf_weight(1) == rat(1, 2));
    CHECK(q == FiniteMeasure(tree, {{0, rat(1, 2)}, {1, rat(1, 2)}}));
}
