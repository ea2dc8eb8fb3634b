#pragma once

#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "martsel/decompose.hpp"
#include "martsel/scenario.hpp"
#include "martsel/semi_open.hpp"

namespace martsel {

using AdaptedSemiOpen = NodeMap<SemiOpenPolyhedron>;
using AdaptedClosed = NodeMap<ClosedPolyhedron>;

/// Table of admissible-value sets produced by the backward recursion.
using WTable = NodeMap<SemiOpenPolyhedron>;

/// A selection problem on a scenario tree: target sets V (semi-open convex)
/// and drift sets C (closed convex) at every node, in a common dimension.
/// The conical flag asserts every V and C is a cone, which the market
/// reductions rely on; it is checked by validate().
struct MspInstance {
    ScenarioTree tree = ScenarioTree::single_path(0);
    AdaptedSemiOpen V;
    AdaptedClosed C;
    std::size_t dim = 0;
    bool conical = false;

    void validate() const {
        for (const NodeId& n : tree.all_nodes()) {
            if (!V.defined(n))
                throw InputError("instance: V missing at node " + format_node(n));
            if (V.at(n).dim() != dim)
                throw MismatchError("instance: V at node " + format_node(n) +
                                    " has wrong dimension");
            if (!tree.is_leaf(n)) {
                if (!C.defined(n))
                    throw InputError("instance: C missing at node " + format_node(n));
                if (C.at(n).dim() != dim)
                    throw MismatchError("instance: C at node " + format_node(n) +
                                        " has wrong dimension");
            }
            if (conical) {
                if (!V.at(n).is_empty() && !V.at(n).closure_poly().is_cone())
                    throw NotAConeError("instance: V at node " + format_node(n) +
                                        " is not a cone");
                if (!tree.is_leaf(n) && !C.at(n).is_empty() && !C.at(n).is_cone())
                    throw NotAConeError("instance: C at node " + format_node(n) +
                                        " is not a cone");
            }
        }
    }
};

/// A candidate answer: selection values on the supported nodes, a measure,
/// and the anchor node whose positive mass the construction guarantees.
struct Solution {
    AdaptedProcess xi;
    FiniteMeasure Q;
    NodeId anchor;
};

/// Result of checking a solution, with a human-readable violation report.
struct VerificationReport {
    bool ok = true;
    std::string details;
    explicit operator bool() const { return ok; }
};

namespace detail {

/// How the backward recursion combines the children before sweeping by -C.
enum class HullKind { Mixture, Union, UnionInterior, InteriorOfSum };

/// Shared backward recursion. Leaves get V; an interior node combines its
/// children (mixture hull, plain convex union, or the union's relative
/// interior), sweeps by -C (optionally taking the relative interior of the
/// swept sum instead), and intersects with V.
inline WTable backward_table(const MspInstance& inst, HullKind kind) {
    inst.validate();
    WTable table(inst.tree);
    const std::size_t T = inst.tree.horizon();
    for (std::size_t i = 0; i < inst.tree.level_size(T); ++i)
        table.set({T, i}, inst.V.at({T, i}));
    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t i = 0; i < inst.tree.level_size(t); ++i) {
            const NodeId n{t, i};
            std::vector<SemiOpenPolyhedron> kids;
            for (const NodeId& c : inst.tree.children(n)) kids.push_back(table.at(c));
            SemiOpenPolyhedron combined = kind == HullKind::Mixture
                                              ? mixture_hull(kids)
                                              : convex_union(kids);
            if (kind == HullKind::UnionInterior) combined = combined.relative_interior();
            if (combined.is_empty() || inst.C.at(n).is_empty()) {
                table.set(n, SemiOpenPolyhedron::empty_set(inst.dim));
                continue;
            }
            SemiOpenPolyhedron swept = minkowski_sum(combined, inst.C.at(n).negated());
            if (kind == HullKind::InteriorOfSum) swept = swept.relative_interior();
            table.set(n, intersect(inst.V.at(n), swept));
        }
    }
    return table;
}

}  // namespace detail

/// The backward recursion with the mixture hull: a node's set is
/// V intersected with (mixture of children) swept by -C.
inline WTable compute_W(const MspInstance& inst) {
    return detail::backward_table(inst, detail::HullKind::Mixture);
}

/// Variant recursion used by the cone markets: V intersected with the
/// relative interior of (convex union of children swept by -C). Separators
/// and polar decompositions are extracted at this table's failure nodes,
/// because the identity w* = K + ((w-sharp)* cap -C*) holds in exactly this
/// bracketing. The ri-before-sweep variant (HullKind::UnionInterior) stays
/// available for comparison; both under-approximate compute_W.
inline WTable compute_w_ri(const MspInstance& inst) {
    return detail::backward_table(inst, detail::HullKind::InteriorOfSum);
}

/// The problem is solvable exactly when every node's set is nonempty.
inline bool is_solvable(const MspInstance& inst, const WTable& table) {
    for (const NodeId& n : inst.tree.all_nodes())
        if (table.at(n).is_empty()) return false;
    return true;
}

inline bool is_solvable(const MspInstance& inst) {
    return is_solvable(inst, compute_W(inst));
}

/// The highest level carrying an empty set, lowest index first; the origin of
/// unsolvability, since emptiness only propagates toward the root.
inline std::optional<NodeId> find_failure(const MspInstance& inst, const WTable& table) {
    for (std::size_t t = inst.tree.num_levels(); t-- > 0;)
        for (std::size_t i = 0; i < inst.tree.level_size(t); ++i)
            if (table.at({t, i}).is_empty()) return NodeId{t, i};
    return std::nullopt;
}

inline std::optional<NodeId> find_failure(const MspInstance& inst) {
    return find_failure(inst, compute_W(inst));
}

/// Builds a full-support solution by forward pasting: start from a point of
/// the root set, and at each node split the chosen mean over all children
/// with positive weights. Every node ends up in the support, so any anchor's
/// mass is positive. A supplied start must belong to the root set.
inline Solution build_local_solution(const MspInstance& inst, const NodeId& anchor,
                                     const std::optional<Vec>& start = std::nullopt) {
    inst.tree.require_valid(anchor);
    const WTable table = compute_W(inst);
    if (const auto fail = find_failure(inst, table))
        throw UnsolvableError("build_local_solution: empty set at node " +
                              format_node(*fail));
    const NodeId root{0, 0};
    Vec x0;
    if (start) {
        if (start->size() != inst.dim)
            throw MismatchError("build_local_solution: start has wrong dimension");
        if (!table.at(root).member(*start))
            throw InvalidStartError("build_local_solution: start point is not admissible");
        x0 = *start;
    } else {
        x0 = table.at(root).sample_ri_point();
    }

    AdaptedProcess xi(inst.tree);
    std::map<std::size_t, Rational> leaf_weights;
    // Depth-first pasting carrying the path probability.
    const std::function<void(const NodeId&, const Vec&, const Rational&)> paste =
        [&](const NodeId& n, const Vec& x, const Rational& mass) {
            xi.set(n, x);
            if (inst.tree.is_leaf(n)) {
                leaf_weights[n.index] += mass;
                return;
            }
            const std::vector<NodeId> kids = inst.tree.children(n);
            std::vector<SemiOpenPolyhedron> kid_sets;
            for (const NodeId& c : kids) kid_sets.push_back(table.at(c));
            // x = w - c with w in the mixture of the children and c in C:
            // w ranges over mixture  intersected with (x + C).
            const SemiOpenPolyhedron reachable =
                intersect(mixture_hull(kid_sets), inst.C.at(n).translated(x));
            if (reachable.is_empty())
                throw HardError("build_local_solution: no admissible mean at node " +
                                format_node(n));
            const Vec w = reachable.sample_ri_point();
            const ChildDecomposition dec = decompose_all_children(w, kid_sets);
            for (std::size_t k = 0; k < kids.size(); ++k)
                paste(kids[k], dec.points[k], mass * dec.weights[k]);
        };
    paste(root, x0, Rational(1));
    return Solution{std::move(xi), FiniteMeasure(inst.tree, std::move(leaf_weights)), anchor};
}

/// Convex combination of two solutions: measures mix leafwise and selections
/// mix with posterior weights; nodes outside the mixed support stay undefined.
inline Solution mix_solutions(const MspInstance& inst, const Solution& s1, const Solution& s2,
                              const Rational& mu) {
    if (mu <= 0 || mu >= 1)
        throw InputError("mix_solutions: weight " + format_rational(mu) + " outside (0, 1)");
    if (s1.Q.num_leaves() != s2.Q.num_leaves() ||
        s1.Q.num_leaves() != inst.tree.level_size(inst.tree.horizon()))
        throw MismatchError("mix_solutions: solutions disagree with the tree");
    const FiniteMeasure q =
        mix_measures(inst.tree, {{mu, s1.Q}, {1 - mu, s2.Q}});
    AdaptedProcess xi(inst.tree);
    for (const NodeId& n : inst.tree.all_nodes()) {
        const Rational m = node_mass(inst.tree, q, n);
        if (m == 0) continue;
        const Rational m1 = node_mass(inst.tree, s1.Q, n);
        const Rational m2 = node_mass(inst.tree, s2.Q, n);
        Vec v = zero_vec(inst.dim);
        if (m1 != 0) v = add(v, scale(s1.xi.at(n), mu * m1 / m));
        if (m2 != 0) v = add(v, scale(s2.xi.at(n), (1 - mu) * m2 / m));
        xi.set(n, v);
    }
    return Solution{std::move(xi), q, s1.anchor};
}

/// Exact check of the defining conditions on the support: values lie in V,
/// and at every positive-mass interior node the expected step lies in C.
inline VerificationReport verify_solution(const MspInstance& inst, const Solution& s) {
    VerificationReport report;
    std::ostringstream out;
    const auto complain = [&](const NodeId& n, const std::string& what) {
        report.ok = false;
        out << "node " << format_node(n) << ": " << what << "\n";
    };
    if (s.Q.num_leaves() != inst.tree.level_size(inst.tree.horizon())) {
        complain({0, 0}, "measure does not match the tree");
        report.details = out.str();
        return report;
    }
    if (node_mass(inst.tree, s.Q, s.anchor) == 0)
        complain(s.anchor, "anchor has mass zero");
    for (const NodeId& n : inst.tree.all_nodes()) {
        const Rational m = node_mass(inst.tree, s.Q, n);
        if (m == 0) continue;
        if (!s.xi.defined(n)) {
            complain(n, "selection undefined on a supported node");
            continue;
        }
        const Vec& x = s.xi.at(n);
        if (x.size() != inst.dim) {
            complain(n, "selection has wrong dimension");
            continue;
        }
        if (!inst.V.at(n).member(x)) complain(n, "selection value outside V");
        if (inst.tree.is_leaf(n)) continue;
        bool kids_ok = true;
        for (const NodeId& c : inst.tree.children(n))
            if (node_mass(inst.tree, s.Q, c) != 0 && !s.xi.defined(c)) kids_ok = false;
        if (!kids_ok) continue;  // reported when the child itself is visited
        const Vec mean = conditional_expectation(inst.tree, s.xi, s.Q, n);
        if (!inst.C.at(n).contains(sub(mean, x))) complain(n, "expected step outside C");
    }
    report.details = out.str();
    return report;
}

}  // namespace martsel
