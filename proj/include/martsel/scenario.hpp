#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "martsel/errors.hpp"
#include "martsel/rational.hpp"

namespace martsel {

/// Coordinates of one node in a scenario tree: (level, index within level).
struct NodeId {
    std::size_t level = 0;
    std::size_t index = 0;

    friend bool operator==(const NodeId& a, const NodeId& b) {
        return a.level == b.level && a.index == b.index;
    }
    friend bool operator!=(const NodeId& a, const NodeId& b) { return !(a == b); }
    friend bool operator<(const NodeId& a, const NodeId& b) {
        if (a.level != b.level) return a.level < b.level;
        return a.index < b.index;
    }
};

inline std::string format_node(const NodeId& n) {
    return std::to_string(n.level) + ":" + std::to_string(n.index);
}

/// A finite event tree over time steps 0..T. Level 0 holds the single root;
/// every node below the horizon has at least one child. Nodes may carry an
/// opaque text label.
class ScenarioTree {
  public:
    /// parents[t] lists, for each node at level t+1, the index of its parent
    /// at level t. An empty outer vector gives the one-node, horizon-zero tree.
    explicit ScenarioTree(std::vector<std::vector<std::size_t>> parents,
                          std::vector<std::vector<std::string>> labels = {})
        : parents_(std::move(parents)) {
        level_sizes_.push_back(1);
        for (std::size_t t = 0; t < parents_.size(); ++t) {
            if (parents_[t].empty())
                throw InputError("scenario tree: level " + std::to_string(t + 1) +
                                 " has no nodes");
            for (std::size_t i = 0; i < parents_[t].size(); ++i)
                if (parents_[t][i] >= level_sizes_.back())
                    throw InputError("scenario tree: node " +
                                     format_node({t + 1, i}) + " names parent " +
                                     std::to_string(parents_[t][i]) +
                                     " outside level " + std::to_string(t));
            level_sizes_.push_back(parents_[t].size());
        }
        children_.resize(level_sizes_.size());
        for (std::size_t t = 0; t + 1 < level_sizes_.size(); ++t) {
            children_[t].resize(level_sizes_[t]);
            for (std::size_t i = 0; i < parents_[t].size(); ++i)
                children_[t][parents_[t][i]].push_back(i);
            for (std::size_t p = 0; p < level_sizes_[t]; ++p)
                if (children_[t][p].empty())
                    throw InputError("scenario tree: node " + format_node({t, p}) +
                                     " below the horizon has no children");
        }
        if (!labels.empty()) {
            if (labels.size() != level_sizes_.size())
                throw InputError("scenario tree: label levels do not match tree levels");
            for (std::size_t t = 0; t < labels.size(); ++t)
                if (labels[t].size() != level_sizes_[t])
                    throw InputError("scenario tree: label count mismatch at level " +
                                     std::to_string(t));
            labels_ = std::move(labels);
        }
    }

    /// One node per level, depth T.
    static ScenarioTree single_path(std::size_t horizon) {
        std::vector<std::vector<std::size_t>> parents(horizon, std::vector<std::size_t>{0});
        return ScenarioTree(std::move(parents));
    }

    /// Full tree where every node below the horizon has `branching` children.
    static ScenarioTree uniform(std::size_t horizon, std::size_t branching) {
        if (branching == 0) throw InputError("scenario tree: branching must be positive");
        std::vector<std::vector<std::size_t>> parents;
        std::size_t width = 1;
        for (std::size_t t = 0; t < horizon; ++t) {
            std::vector<std::size_t> level;
            for (std::size_t p = 0; p < width; ++p)
                for (std::size_t c = 0; c < branching; ++c) level.push_back(p);
            parents.push_back(std::move(level));
            width *= branching;
        }
        return ScenarioTree(std::move(parents));
    }

    std::size_t horizon() const { return level_sizes_.size() - 1; }
    std::size_t num_levels() const { return level_sizes_.size(); }
    std::size_t level_size(std::size_t t) const {
        require_level(t);
        return level_sizes_[t];
    }

    bool valid(const NodeId& n) const {
        return n.level < level_sizes_.size() && n.index < level_sizes_[n.level];
    }
    void require_valid(const NodeId& n) const {
        if (!valid(n))
            throw InputError("scenario tree: no node " + format_node(n));
    }

    bool is_leaf(const NodeId& n) const {
        require_valid(n);
        return n.level == horizon();
    }

    NodeId parent(const NodeId& n) const {
        require_valid(n);
        if (n.level == 0) throw InputError("scenario tree: root has no parent");
        return {n.level - 1, parents_[n.level - 1][n.index]};
    }

    std::vector<NodeId> children(const NodeId& n) const {
        require_valid(n);
        std::vector<NodeId> out;
        if (n.level == horizon()) return out;
        for (std::size_t c : children_[n.level][n.index]) out.push_back({n.level + 1, c});
        return out;
    }

    /// All nodes in level-major order.
    std::vector<NodeId> all_nodes() const {
        std::vector<NodeId> out;
        for (std::size_t t = 0; t < level_sizes_.size(); ++t)
            for (std::size_t i = 0; i < level_sizes_[t]; ++i) out.push_back({t, i});
        return out;
    }

    std::vector<NodeId> leaves() const {
        std::vector<NodeId> out;
        for (std::size_t i = 0; i < level_sizes_.back(); ++i) out.push_back({horizon(), i});
        return out;
    }

    /// Leaf indices of the subtree rooted at n.
    std::vector<std::size_t> subtree_leaves(const NodeId& n) const {
        require_valid(n);
        std::vector<std::size_t> frontier = {n.index};
        for (std::size_t t = n.level; t < horizon(); ++t) {
            std::vector<std::size_t> next;
            for (std::size_t i : frontier)
                for (std::size_t c : children_[t][i]) next.push_back(c);
            frontier = std::move(next);
        }
        return frontier;
    }

    /// Is `anc` equal to or an ancestor of `n`?
    bool is_ancestor_or_self(const NodeId& anc, const NodeId& n) const {
        require_valid(anc);
        require_valid(n);
        if (anc.level > n.level) return false;
        NodeId cur = n;
        while (cur.level > anc.level) cur = parent(cur);
        return cur.index == anc.index;
    }

    std::string label(const NodeId& n) const {
        require_valid(n);
        if (labels_.empty()) return {};
        return labels_[n.level][n.index];
    }
    bool has_labels() const { return !labels_.empty(); }

    const std::vector<std::vector<std::size_t>>& parent_table() const { return parents_; }

    friend bool operator==(const ScenarioTree& a, const ScenarioTree& b) {
        return a.parents_ == b.parents_ && a.labels_ == b.labels_;
    }

  private:
    void require_level(std::size_t t) const {
        if (t >= level_sizes_.size())
            throw InputError("scenario tree: no level " + std::to_string(t));
    }

    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::size_t> level_sizes_;
    std::vector<std::vector<std::vector<std::size_t>>> children_;
    std::vector<std::vector<std::string>> labels_;
};

/// Per-node storage for adapted data; entries may be left undefined.
template <typename T>
class NodeMap {
  public:
    NodeMap() = default;
    explicit NodeMap(const ScenarioTree& tree) {
        slots_.resize(tree.num_levels());
        for (std::size_t t = 0; t < tree.num_levels(); ++t)
            slots_[t].resize(tree.level_size(t));
    }

    void set(const NodeId& n, T value) {
        slot(n) = std::move(value);
    }

    bool defined(const NodeId& n) const {
        if (n.level >= slots_.size() || n.index >= slots_[n.level].size()) return false;
        return slots_[n.level][n.index].has_value();
    }

    const T& at(const NodeId& n) const {
        if (!defined(n))
            throw InputError("node map: no value at node " + format_node(n));
        return *slots_[n.level][n.index];
    }

    std::vector<NodeId> defined_nodes() const {
        std::vector<NodeId> out;
        for (std::size_t t = 0; t < slots_.size(); ++t)
            for (std::size_t i = 0; i < slots_[t].size(); ++i)
                if (slots_[t][i]) out.push_back({t, i});
        return out;
    }

  private:
    std::optional<T>& slot(const NodeId& n) {
        if (n.level >= slots_.size() || n.index >= slots_[n.level].size())
            throw InputError("node map: node " + format_node(n) + " out of range");
        return slots_[n.level][n.index];
    }

    std::vector<std::vector<std::optional<T>>> slots_;
};

using AdaptedProcess = NodeMap<Vec>;

/// A probability measure with finite support on the leaves of a tree,
/// stored as strictly positive leaf weights summing to one.
class FiniteMeasure {
  public:
    FiniteMeasure(const ScenarioTree& tree, std::map<std::size_t, Rational> leaf_weights)
        : num_leaves_(tree.level_size(tree.horizon())), weights_(std::move(leaf_weights)) {
        for (auto& [leaf, w] : weights_) w.canonicalize();
        Rational total = 0;
        for (const auto& [leaf, w] : weights_) {
            if (leaf >= num_leaves_)
                throw InputError("measure: leaf index " + std::to_string(leaf) +
                                 " out of range");
            if (w <= 0)
                throw InputError("measure: weight at leaf " + std::to_string(leaf) +
                                 " is not positive");
            total += w;
        }
        if (total != 1) throw InputError("measure: weights sum to " + format_rational(total));
    }

    static FiniteMeasure dirac(const ScenarioTree& tree, std::size_t leaf_index) {
        return FiniteMeasure(tree, {{leaf_index, Rational(1)}});
    }

    std::size_t num_leaves() const { return num_leaves_; }
    const std::map<std::size_t, Rational>& support() const { return weights_; }

    /// Weight of one leaf; zero off the support.
    Rational leaf_weight(std::size_t leaf_index) const {
        const auto it = weights_.find(leaf_index);
        return it == weights_.end() ? Rational(0) : it->second;
    }

    friend bool operator==(const FiniteMeasure& a, const FiniteMeasure& b) {
        return a.num_leaves_ == b.num_leaves_ && a.weights_ == b.weights_;
    }

  private:
    std::size_t num_leaves_;
    std::map<std::size_t, Rational> weights_;
};

/// Total mass of the subtree below n.
inline Rational node_mass(const ScenarioTree& tree, const FiniteMeasure& q, const NodeId& n) {
    tree.require_valid(n);
    if (q.num_leaves() != tree.level_size(tree.horizon()))
        throw MismatchError("node_mass: measure does not match tree");
    Rational total = 0;
    for (std::size_t leaf : tree.subtree_leaves(n)) total += q.leaf_weight(leaf);
    return total;
}

/// E_Q[X | F_t] at node n, where X lives on the children of n: the
/// mass-weighted average of X over the positive-mass children.
inline Vec conditional_expectation(const ScenarioTree& tree, const AdaptedProcess& x,
                                   const FiniteMeasure& q, const NodeId& n) {
    tree.require_valid(n);
    if (tree.is_leaf(n))
        throw InputError("conditional_expectation: node " + format_node(n) + " is a leaf");
    const Rational m = node_mass(tree, q, n);
    if (m == 0)
        throw ZeroMassError("conditional_expectation: node " + format_node(n) +
                            " has mass zero");
    Vec total;
    for (const NodeId& child : tree.children(n)) {
        const Rational cm = node_mass(tree, q, child);
        if (cm == 0) continue;
        const Vec& v = x.at(child);
        if (total.empty())
            total = scale(v, cm / m);
        else
            total = add(total, scale(v, cm / m));
    }
    return total;
}

/// Convex combination of measures: leafwise mixture, support is the union.
inline FiniteMeasure mix_measures(const ScenarioTree& tree,
                                  const std::vector<std::pair<Rational, FiniteMeasure>>& terms) {
    if (terms.empty()) throw InputError("mix_measures: no terms");
    Rational total = 0;
    std::map<std::size_t, Rational> mixed;
    for (const auto& [lambda, q] : terms) {
        const Rational lam = canonical(lambda);
        if (lam <= 0 || lam > 1)
            throw InputError("mix_measures: weight " + format_rational(lam) +
                             " outside (0, 1]");
        if (q.num_leaves() != tree.level_size(tree.horizon()))
            throw MismatchError("mix_measures: measure does not match tree");
        total += lam;
        for (const auto& [leaf, w] : q.support()) mixed[leaf] += lam * w;
    }
    if (total != 1) throw InputError("mix_measures: weights sum to " + format_rational(total));
    return FiniteMeasure(tree, std::move(mixed));
}

}  // namespace martsel
