#pragma once

#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "martsel/markets.hpp"

namespace martsel {

/// Upper bound on the number of pattern LPs one oracle query may solve.
/// Overridable through the MARTSEL_ORACLE_CAP environment variable (intended
/// for tests); anything unparsable or nonpositive falls back to the default.
inline std::size_t oracle_pattern_budget() {
    if (const char* env = std::getenv("MARTSEL_ORACLE_CAP")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return 20000;
}

namespace detail {

/// Is `node` equal to `anchor` or strictly below it in the tree?
inline bool under_node(const ScenarioTree& tree, const NodeId& anchor, const NodeId& node) {
    if (node.level < anchor.level) return false;
    NodeId p = node;
    while (p.level > anchor.level) p = tree.parent(p);
    return p == anchor;
}

/// The scale-invariance arguments below need every constraint offset to be
/// zero, which any irredundant description of a cone satisfies. Guard it.
inline void require_homogeneous_rows(const ClosedPolyhedron& p, const std::string& where) {
    for (const auto& h : p.equalities())
        if (h.b != 0) throw UnsupportedError("oracle: inhomogeneous cone row at " + where);
    for (const auto& h : p.inequalities())
        if (h.b != 0) throw UnsupportedError("oracle: inhomogeneous cone row at " + where);
}

/// The ways a moment vector can sit inside one node's semi-open value set:
/// either the set is closed (plain closure membership, one way) or the vector
/// lies in the relative interior of one of the included faces.
struct ValueChoices {
    bool whole = false;
    std::vector<std::size_t> faces;  // indices into the closure's face lattice

    std::size_t count() const { return whole ? 1 : faces.size(); }
};

inline ValueChoices value_choices(const SemiOpenPolyhedron& v) {
    ValueChoices out;
    if (v.is_closed_set()) {
        out.whole = true;
        return out;
    }
    const FaceLattice& lat = v.lattice();
    for (const FaceId& id : v.included_faces()) out.faces.push_back(lat.index_of(id));
    return out;
}

/// Hard structural limits: the oracle is a cross-check for tiny instances,
/// not a solver, and it refuses anything outside its design envelope.
inline void check_oracle_caps(const ScenarioTree& tree, std::size_t dim) {
    if (tree.horizon() > 3) throw UnsupportedError("oracle: horizon exceeds 3");
    if (dim > 3) throw UnsupportedError("oracle: dimension exceeds 3");
    for (const NodeId& n : tree.all_nodes())
        if (!tree.is_leaf(n) && tree.children(n).size() > 3)
            throw UnsupportedError("oracle: branching exceeds 3");
}

}  // namespace detail

/// Search exhaustively for a solution whose measure puts positive mass below
/// `anchor`, and return one as a checkable witness if any exists. Only
/// meaningful for conical instances: there the defining conditions are
/// invariant under positive scaling, so each candidate support-and-face
/// pattern reduces to one exact LP over mass-weighted selection vectors
/// m(n) = q(n) * xi(n), with a shared slack variable standing in for every
/// strict inequality.
inline std::optional<Solution> oracle_solution(const MspInstance& inst, const NodeId& anchor) {
    inst.validate();
    if (!inst.conical) throw UnsupportedError("oracle: instance is not conical");
    detail::check_oracle_caps(inst.tree, inst.dim);
    if (!inst.tree.valid(anchor)) throw InputError("oracle: anchor is not a tree node");

    const ScenarioTree& tree = inst.tree;
    const std::size_t d = inst.dim;

    // A solution selects a value at every node, even the zero-mass ones, so
    // one empty value set anywhere rules out solutions at every anchor.
    for (const NodeId& n : tree.all_nodes())
        if (inst.V.at(n).is_empty()) return std::nullopt;

    for (const NodeId& n : tree.all_nodes()) {
        detail::require_homogeneous_rows(inst.V.at(n).closure_poly(),
                                         "V " + format_node(n));
        if (!tree.is_leaf(n) && !inst.C.at(n).is_empty())
            detail::require_homogeneous_rows(inst.C.at(n), "C " + format_node(n));
    }

    const std::vector<NodeId> leaves = tree.leaves();
    const std::size_t L = leaves.size();
    std::size_t below = 0;
    for (const NodeId& leaf : leaves)
        if (detail::under_node(tree, anchor, leaf)) ++below;
    // `anchor` itself sits above at least one leaf on a well-formed tree.
    if (below == 0) throw HardError("oracle: anchor has no leaves below it");

    const std::size_t budget = oracle_pattern_budget();
    // Every support is a nonempty leaf subset meeting the anchor's subtree,
    // and each contributes at least one LP, so this closed form is a lower
    // bound on the work; refusing here keeps the enumeration itself bounded.
    if (L >= 63 || ((std::size_t{1} << L) - (std::size_t{1} << (L - below))) > budget)
        throw UnsupportedError("oracle: support patterns exceed the budget");

    std::map<NodeId, detail::ValueChoices> choices;
    for (const NodeId& n : tree.all_nodes()) choices.emplace(n, detail::value_choices(inst.V.at(n)));

    // First pass: price every admissible support by its face-pattern count.
    struct SupportPlan {
        std::vector<NodeId> nodes;           // the support, sorted
        std::vector<std::size_t> radix;      // face choices per support node
        std::size_t patterns = 1;
    };
    std::vector<SupportPlan> plans;
    std::size_t total_patterns = 0;
    for (std::size_t mask = 1; mask < (std::size_t{1} << L); ++mask) {
        bool meets_anchor = false;
        std::vector<NodeId> support;
        for (std::size_t i = 0; i < L; ++i) {
            if (!(mask & (std::size_t{1} << i))) continue;
            if (detail::under_node(tree, anchor, leaves[i])) meets_anchor = true;
            NodeId p = leaves[i];
            support.push_back(p);
            while (p.level > 0) {
                p = tree.parent(p);
                support.push_back(p);
            }
        }
        if (!meets_anchor) continue;
        std::sort(support.begin(), support.end());
        support.erase(std::unique(support.begin(), support.end()), support.end());

        SupportPlan plan;
        bool viable = true;
        for (const NodeId& n : support) {
            if (!tree.is_leaf(n) && inst.C.at(n).is_empty()) {
                viable = false;  // a massive node needs its drift set
                break;
            }
            plan.radix.push_back(choices.at(n).count());
            plan.patterns *= plan.radix.back();
        }
        if (!viable || plan.patterns == 0) continue;
        plan.nodes = std::move(support);
        total_patterns += plan.patterns;
        if (total_patterns > budget)
            throw UnsupportedError("oracle: face patterns exceed the budget");
        plans.push_back(std::move(plan));
    }

    // Second pass: one LP per (support, face assignment) pattern.
    for (const SupportPlan& plan : plans) {
        const std::size_t m = plan.nodes.size();
        std::map<NodeId, std::size_t> pos;
        for (std::size_t i = 0; i < m; ++i) pos.emplace(plan.nodes[i], i);
        const std::size_t qbase = m * d;
        const std::size_t slack = m * d + m;
        const std::size_t nvars = slack + 1;

        std::vector<std::size_t> digits(m, 0);
        for (std::size_t iter = 0; iter < plan.patterns; ++iter) {
            std::vector<LpRow> rows;

            for (std::size_t i = 0; i < m; ++i) {
                const NodeId& n = plan.nodes[i];
                const SemiOpenPolyhedron& v = inst.V.at(n);
                const detail::ValueChoices& ch = choices.at(n);
                if (ch.whole) {
                    detail::append_closed_rows(rows, v.closure_poly(), nvars, i * d);
                } else {
                    const FaceLattice& lat = v.lattice();
                    detail::append_ri_face_rows(rows, v.closure_poly(),
                                                lat.faces()[ch.faces[digits[i]]], nvars, i * d,
                                                slack);
                }

                if (!tree.is_leaf(n)) {
                    // Mass-weighted drift: sum of child moments minus the
                    // node's moment must land in the (conical) drift set.
                    std::vector<std::size_t> kids;
                    for (const NodeId& c : tree.children(n)) {
                        auto it = pos.find(c);
                        if (it != pos.end()) kids.push_back(it->second);
                    }
                    const ClosedPolyhedron& drift = inst.C.at(n);
                    auto drift_row = [&](const auto& h, bool eq) {
                        LpRow row;
                        row.a = zero_vec(nvars);
                        for (std::size_t k = 0; k < d; ++k) {
                            for (std::size_t j : kids) row.a[j * d + k] += h.a[k];
                            row.a[i * d + k] -= h.a[k];
                        }
                        row.b = 0;
                        row.eq = eq;
                        rows.push_back(std::move(row));
                    };
                    for (const auto& h : drift.equalities()) drift_row(h, true);
                    for (const auto& h : drift.inequalities()) drift_row(h, false);

                    // Mass flows: a node's weight is the sum over children.
                    LpRow flow;
                    flow.a = zero_vec(nvars);
                    flow.a[qbase + i] = 1;
                    for (std::size_t j : kids) flow.a[qbase + j] -= 1;
                    flow.b = 0;
                    flow.eq = true;
                    rows.push_back(std::move(flow));
                }

                LpRow positive;  // q(n) >= s keeps the whole support charged
                positive.a = zero_vec(nvars);
                positive.a[qbase + i] = 1;
                positive.a[slack] = -1;
                positive.b = 0;
                rows.push_back(std::move(positive));
            }

            LpRow at_anchor;  // pins the scale: unit mass below the anchor
            at_anchor.a = zero_vec(nvars);
            at_anchor.a[qbase + pos.at(anchor)] = 1;
            at_anchor.b = 1;
            rows.push_back(std::move(at_anchor));
            rows.push_back(detail::slack_cap(nvars, slack));

            Vec obj = zero_vec(nvars);
            obj[slack] = 1;
            const LpResult res = solve_lp(nvars, rows, obj);
            if (positive_optimum(res)) {
                if (res.status != LpStatus::Optimal)
                    throw HardError("oracle: capped slack program came back unbounded");
                // Rebuild the witness: leaf weights normalize to the total
                // mass, and each supported node's selection is its moment
                // vector divided by its own mass.
                const Rational total = res.x[qbase + pos.at(NodeId{0, 0})];
                std::map<std::size_t, Rational> leaf_weights;
                AdaptedProcess xi(tree);
                for (std::size_t i = 0; i < m; ++i) {
                    const NodeId& n = plan.nodes[i];
                    const Rational q = res.x[qbase + i];
                    if (tree.is_leaf(n)) leaf_weights[n.index] = q / total;
                    Vec value;
                    for (std::size_t k = 0; k < d; ++k) value.push_back(res.x[i * d + k] / q);
                    xi.set(n, std::move(value));
                }
                return Solution{std::move(xi), FiniteMeasure(tree, std::move(leaf_weights)),
                                anchor};
            }

            for (std::size_t i = 0; i < m; ++i) {  // next face assignment
                if (++digits[i] < plan.radix[i]) break;
                digits[i] = 0;
            }
        }
    }
    return std::nullopt;
}

/// Decide local solvability at `anchor` by exhaustive search.
inline bool oracle_solvable(const MspInstance& inst, const NodeId& anchor) {
    return oracle_solution(inst, anchor).has_value();
}

/// Exhaustive arbitrage search in a frictionless market: maximize the summed
/// terminal wealth over all constraint-respecting strategies with terminal
/// wealth nonnegative in every scenario and a unit bound on total holdings.
/// By positive homogeneity an arbitrage exists iff the optimum is positive.
inline bool oracle_frictionless_arbitrage(const FrictionlessModel& m) {
    m.validate();
    if (m.tree.horizon() > 3) throw UnsupportedError("oracle: horizon exceeds 3");
    if (m.tree.horizon() == 0) return false;  // no trading dates at all

    const ScenarioTree& tree = m.tree;
    const std::size_t d = m.assets;
    std::vector<NodeId> interior;
    for (const NodeId& n : tree.all_nodes())
        if (!tree.is_leaf(n)) interior.push_back(n);
    std::map<NodeId, std::size_t> pos;
    for (std::size_t i = 0; i < interior.size(); ++i) pos.emplace(interior[i], i);

    const std::size_t hbase = 0;                      // holdings h(n)
    const std::size_t tbase = interior.size() * d;    // |h(n)| majorants
    const std::size_t nvars = 2 * interior.size() * d;

    for (const NodeId& n : interior)
        detail::require_homogeneous_rows(m.A.at(n), "A " + format_node(n));

    std::vector<LpRow> rows;
    Vec obj = zero_vec(nvars);
    for (const NodeId& leaf : tree.leaves()) {
        LpRow wealth;  // terminal gain along this scenario's path
        wealth.a = zero_vec(nvars);
        NodeId v = leaf;
        while (v.level > 0) {
            const NodeId u = tree.parent(v);
            const std::size_t i = pos.at(u);
            for (std::size_t k = 0; k < d; ++k)
                wealth.a[hbase + i * d + k] += m.S.at(v)[k] - m.S.at(u)[k];
            v = u;
        }
        wealth.b = 0;
        for (std::size_t c = 0; c < nvars; ++c) obj[c] += wealth.a[c];
        rows.push_back(std::move(wealth));
    }

    for (std::size_t i = 0; i < interior.size(); ++i) {
        detail::append_closed_rows(rows, m.A.at(interior[i]), nvars, hbase + i * d);
        for (std::size_t k = 0; k < d; ++k) {
            LpRow above;  // t >= h
            above.a = zero_vec(nvars);
            above.a[tbase + i * d + k] = 1;
            above.a[hbase + i * d + k] = -1;
            rows.push_back(std::move(above));
            LpRow below;  // t >= -h
            below.a = zero_vec(nvars);
            below.a[tbase + i * d + k] = 1;
            below.a[hbase + i * d + k] = 1;
            rows.push_back(std::move(below));
        }
    }
    LpRow bound;  // sum of majorants at most one
    bound.a = zero_vec(nvars);
    for (std::size_t c = tbase; c < nvars; ++c) bound.a[c] = -1;
    bound.b = -1;
    rows.push_back(std::move(bound));

    return positive_optimum(solve_lp(nvars, rows, obj));
}

/// Exhaustive weak-arbitrage search under proportional frictions: look for
/// holdings built from solvency-cone transfers, admissible throughout, that
/// end componentwise nonnegative with positive total. Cones make the search
/// scale-free, so a unit normalization and plain feasibility decide it.
inline bool oracle_kabanov_arbitrage(const KabanovModel& m) {
    m.validate();
    if (m.tree.horizon() > 3) throw UnsupportedError("oracle: horizon exceeds 3");

    const ScenarioTree& tree = m.tree;
    const std::size_t d = m.assets;
    const std::vector<NodeId> nodes = tree.all_nodes();
    std::map<NodeId, std::size_t> pos;
    for (std::size_t i = 0; i < nodes.size(); ++i) pos.emplace(nodes[i], i);
    const std::size_t nvars = nodes.size() * d;

    for (const NodeId& n : nodes) {
        detail::require_homogeneous_rows(m.K.at(n), "K " + format_node(n));
        detail::require_homogeneous_rows(m.A.at(n), "A " + format_node(n));
    }

    std::vector<LpRow> rows;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const NodeId& n = nodes[i];
        // The rebalance at n pays out of the solvency cone: h(n) - h(parent)
        // lies in -K(n), meaning every K row evaluates nonpositively on it.
        const long long parent_index =
            n.level == 0 ? -1 : static_cast<long long>(pos.at(tree.parent(n)));
        auto transfer_row = [&](const auto& h, bool eq) {
            LpRow row;
            row.a = zero_vec(nvars);
            for (std::size_t k = 0; k < d; ++k) {
                row.a[i * d + k] -= h.a[k];
                if (parent_index >= 0)
                    row.a[static_cast<std::size_t>(parent_index) * d + k] += h.a[k];
            }
            row.b = 0;
            row.eq = eq;
            rows.push_back(std::move(row));
        };
        for (const auto& h : m.K.at(n).equalities()) transfer_row(h, true);
        for (const auto& h : m.K.at(n).inequalities()) transfer_row(h, false);

        detail::append_closed_rows(rows, m.A.at(n), nvars, i * d);

        if (tree.is_leaf(n)) {
            for (std::size_t k = 0; k < d; ++k) {
                LpRow nonneg;
                nonneg.a = zero_vec(nvars);
                nonneg.a[i * d + k] = 1;
                rows.push_back(std::move(nonneg));
            }
        }
    }
    LpRow total;  // something must actually be left on the table
    total.a = zero_vec(nvars);
    for (const NodeId& leaf : tree.leaves())
        for (std::size_t k = 0; k < d; ++k) total.a[pos.at(leaf) * d + k] = 1;
    total.b = 1;
    rows.push_back(std::move(total));

    return lp_feasible_point(nvars, rows).has_value();
}

}  // namespace martsel
