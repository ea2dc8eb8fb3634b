#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "martsel/msp.hpp"

namespace martsel {

/// Which market formulation a strategy or certificate belongs to.
enum class ModelKind { Frictionless, Kabanov, Cost };

inline std::string model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Frictionless: return "frictionless";
        case ModelKind::Kabanov: return "kabanov";
        case ModelKind::Cost: return "cost";
    }
    return "?";
}

/// One affine piece x -> <a, x> + b of a max-affine convex function.
struct AffinePiece {
    Vec a;
    Rational b;
};

/// A convex piecewise-linear function given as the max of affine pieces.
using MaxAffine = std::vector<AffinePiece>;

inline Rational evaluate_max_affine(const MaxAffine& f, const Vec& x) {
    if (f.empty()) throw InputError("max-affine function with no pieces");
    Rational best = dot(f.front().a, x) + f.front().b;
    for (std::size_t i = 1; i < f.size(); ++i) {
        const Rational v = dot(f[i].a, x) + f[i].b;
        if (v > best) best = v;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Market models
// ---------------------------------------------------------------------------

/// A market with exogenous prices and no trading friction: an adapted price
/// vector S and closed conical portfolio constraints A on every node.
struct FrictionlessModel {
    ScenarioTree tree = ScenarioTree::single_path(0);
    AdaptedProcess S;
    AdaptedClosed A;
    std::size_t assets = 0;

    void validate() const {
        for (const NodeId& n : tree.all_nodes()) {
            if (!S.defined(n))
                throw InputError("frictionless model: price missing at node " + format_node(n));
            if (S.at(n).size() != assets)
                throw MismatchError("frictionless model: price at node " + format_node(n) +
                                    " has wrong dimension");
            if (!A.defined(n))
                throw InputError("frictionless model: constraint cone missing at node " +
                                 format_node(n));
            if (A.at(n).dim() != assets)
                throw MismatchError("frictionless model: constraint cone at node " +
                                    format_node(n) + " has wrong dimension");
            if (A.at(n).is_empty() || !A.at(n).is_cone())
                throw NotAConeError("frictionless model: constraint set at node " +
                                    format_node(n) + " is not a nonempty closed cone");
        }
    }

    /// Convenience: the same prices with unconstrained trading at every node.
    static FrictionlessModel unconstrained(const ScenarioTree& tree, const AdaptedProcess& S,
                                           std::size_t assets) {
        FrictionlessModel m;
        m.tree = tree;
        m.S = S;
        m.assets = assets;
        m.A = AdaptedClosed(tree);
        for (const NodeId& n : tree.all_nodes()) m.A.set(n, ClosedPolyhedron::full_space(assets));
        return m;
    }
};

/// A market described by solvency cones: K(n) is the closed cone of
/// positions that can be liquidated to zero at node n, A(n) the closed
/// conical portfolio constraint.
struct KabanovModel {
    ScenarioTree tree = ScenarioTree::single_path(0);
    AdaptedClosed K;
    AdaptedClosed A;
    std::size_t assets = 0;

    void validate() const {
        for (const NodeId& n : tree.all_nodes()) {
            if (!K.defined(n))
                throw InputError("solvency-cone model: cone missing at node " + format_node(n));
            if (K.at(n).dim() != assets)
                throw MismatchError("solvency-cone model: cone at node " + format_node(n) +
                                    " has wrong dimension");
            if (K.at(n).is_empty() || !K.at(n).is_cone())
                throw NotAConeError("solvency-cone model: K at node " + format_node(n) +
                                    " is not a nonempty closed cone");
            if (!A.defined(n))
                throw InputError("solvency-cone model: constraint cone missing at node " +
                                 format_node(n));
            if (A.at(n).dim() != assets)
                throw MismatchError("solvency-cone model: constraint cone at node " +
                                    format_node(n) + " has wrong dimension");
            if (A.at(n).is_empty() || !A.at(n).is_cone())
                throw NotAConeError("solvency-cone model: A at node " + format_node(n) +
                                    " is not a nonempty closed cone");
        }
    }
};

/// A market where trades are paid for through a convex cost: executing the
/// order x at node n costs S(n)(x) units of cash, with S max-affine,
/// S(0) = 0. Positions are (cash, risky holdings); only the risky holdings
/// are constrained by A.
struct CostModel {
    ScenarioTree tree = ScenarioTree::single_path(0);
    NodeMap<MaxAffine> S;
    AdaptedClosed A;
    std::size_t assets = 0;

    void validate() const {
        for (const NodeId& n : tree.all_nodes()) {
            if (!S.defined(n))
                throw InputError("cost model: cost function missing at node " + format_node(n));
            const MaxAffine& f = S.at(n);
            if (f.empty())
                throw InvalidCostError("cost model: no affine pieces at node " + format_node(n));
            Rational maxb = f.front().b;
            for (const AffinePiece& p : f) {
                if (p.a.size() != assets)
                    throw MismatchError("cost model: piece at node " + format_node(n) +
                                        " has wrong dimension");
                if (p.b > maxb) maxb = p.b;
            }
            if (maxb != Rational(0))
                throw InvalidCostError("cost model: zero order must cost zero at node " +
                                       format_node(n));
            if (!A.defined(n))
                throw InputError("cost model: constraint cone missing at node " + format_node(n));
            if (A.at(n).dim() != assets)
                throw MismatchError("cost model: constraint cone at node " + format_node(n) +
                                    " has wrong dimension");
            if (A.at(n).is_empty() || !A.at(n).is_cone())
                throw NotAConeError("cost model: A at node " + format_node(n) +
                                    " is not a nonempty closed cone");
        }
    }
};

// ---------------------------------------------------------------------------
// Strategies, price systems, certificates
// ---------------------------------------------------------------------------

/// A trading strategy: holdings after trading at each node. Frictionless and
/// cost strategies hold risky assets only and carry a cash account implied by
/// self-financing from the initial capital; solvency-cone strategies hold the
/// full position vector and have no separate cash account.
struct Strategy {
    AdaptedProcess h;
    Rational initial_capital = Rational(0);
    ModelKind model = ModelKind::Frictionless;
};

/// A consistent price system: a selection xi of the value cones that is a
/// martingale under Q relative to the constraint polars, together with the
/// node whose subtree is guaranteed positive mass.
struct PriceSystem {
    AdaptedProcess xi;
    FiniteMeasure Q;
    NodeId anchor;
};

/// An adapted decomposition of a separating vector z over the subtree of a
/// failure node: k(v) in the solvency cone at v, summing to z along every
/// path from just below the failure node to the leaves. The remainder at v
/// is z minus the path sum through v; remainders vanish at leaves. By
/// convention k(failure node) = -z, so the full path sums from the failure
/// node vanish. Slack sites are the nodes whose k leaves the lineality part
/// of the cone, listed in (level, index) order.
struct ZDecomposition {
    Vec z;
    NodeId failure;
    NodeMap<Vec> k;
    NodeMap<Vec> remainders;
    std::vector<NodeId> slack_sites;
};

/// A verifiable witness of arbitrage: the strategy, the node where the
/// backward recursion failed, a leaf where the payoff is strictly positive,
/// the separating vector, and (for the friction tracks) the adapted
/// decomposition plus the enlarged solvency cones that make the strict gain
/// checkable.
struct ArbitrageCertificate {
    ModelKind model = ModelKind::Frictionless;
    Strategy strategy;
    NodeId failure;
    NodeId witness;
    Vec z;
    NodeMap<Vec> k;
    NodeMap<Vec> remainders;
    NodeId slack_site;
    bool has_decomposition = false;
    AdaptedClosed K_hat;
};

/// Outcome of a fundamental-theorem query: either consistent price systems
/// anchored at the queried nodes, or an arbitrage certificate. The
/// robust_equivalence flag records whether the model satisfies the structural
/// assumption under which no-arbitrage in every dominating model is exactly
/// characterized; when it is false the certificate direction still holds but
/// the converse is not guaranteed by the theory.
struct FtapResult {
    bool arbitrage_free = false;
    bool robust_equivalence = true;
    std::vector<PriceSystem> systems;
    std::optional<ArbitrageCertificate> certificate;
};

namespace detail {

inline Vec tail(const Vec& v) {
    if (v.empty()) throw MismatchError("tail of an empty vector");
    return Vec(v.begin() + 1, v.end());
}

inline Vec lift(const Rational& head, const Vec& rest) {
    Vec out;
    out.reserve(rest.size() + 1);
    out.push_back(head);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

inline Vec unit_vec(std::size_t dim, std::size_t i) {
    Vec e = zero_vec(dim);
    e[i] = Rational(1);
    return e;
}

/// Embed a d-dimensional polyhedron as {0} x P inside dimension 1 + d.
inline ClosedPolyhedron lift_zero_first(const ClosedPolyhedron& p) {
    if (p.is_empty()) return ClosedPolyhedron::empty_set(p.dim() + 1);
    std::vector<Vec> pts, rays, lin;
    for (const Vec& v : p.points()) pts.push_back(lift(Rational(0), v));
    for (const Vec& v : p.rays()) rays.push_back(lift(Rational(0), v));
    for (const Vec& v : p.lineality()) lin.push_back(lift(Rational(0), v));
    return ClosedPolyhedron::from_vrep(p.dim() + 1, pts, rays, lin);
}

/// True exactly when x lies in the topological interior of p: p must be
/// full-dimensional (no equality constraints) and every facet inequality
/// must hold strictly at x.
inline bool interior_member(const ClosedPolyhedron& p, const Vec& x) {
    if (p.is_empty()) return false;
    if (!p.equalities().empty()) return false;
    for (const Halfspace& h : p.inequalities())
        if (dot(h.a, x) <= h.b) return false;
    return true;
}

/// A point of A in the standard simplex, if one exists: x in A, x >= 0
/// componentwise, coordinates summing to one.
inline std::optional<Vec> positive_cone_witness(const ClosedPolyhedron& A) {
    if (A.is_empty()) return std::nullopt;
    const std::size_t d = A.dim();
    std::vector<LpRow> rows;
    append_closed_rows(rows, A, d, 0);
    for (std::size_t i = 0; i < d; ++i) rows.push_back({unit_vec(d, i), Rational(0), false});
    rows.push_back({Vec(d, Rational(1)), Rational(1), true});
    return lp_feasible_point(d, rows);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Translations into selection problems
// ---------------------------------------------------------------------------

/// Frictionless market as a selection problem on price lines: the value set
/// at node n is the open ray spanned by (1, S(n)) inside dimension
/// 1 + assets, and the conditional sweep is {0} x (-A(n)^*).
inline MspInstance frictionless_to_msp(const FrictionlessModel& m) {
    m.validate();
    MspInstance inst;
    inst.tree = m.tree;
    inst.dim = m.assets + 1;
    inst.conical = true;
    inst.V = AdaptedSemiOpen(m.tree);
    inst.C = AdaptedClosed(m.tree);
    for (const NodeId& n : m.tree.all_nodes()) {
        const Vec gen = detail::lift(Rational(1), m.S.at(n));
        inst.V.set(n, SemiOpenPolyhedron::relatively_open(
                          ClosedPolyhedron::cone_from_rays(inst.dim, {gen})));
        if (!m.tree.is_leaf(n))
            inst.C.set(n, detail::lift_zero_first(m.A.at(n).polar().negated()));
    }
    inst.validate();
    return inst;
}

/// Solvency-cone market as a selection problem: the value set at node n is
/// the relative interior of K(n)^*, the sweep is -A(n)^*. Raises
/// AssumptionViolated unless every solvency cone has the unit directions in
/// its interior and every constraint cone meets the positive orthant.
inline MspInstance kabanov_to_msp(const KabanovModel& m) {
    m.validate();
    for (const NodeId& n : m.tree.all_nodes()) {
        for (std::size_t i = 0; i < m.assets; ++i)
            if (!detail::interior_member(m.K.at(n), detail::unit_vec(m.assets, i)))
                throw AssumptionViolated("free disposal (unit directions interior to the solvency cone)",
                                         "node " + format_node(n));
        if (!detail::positive_cone_witness(m.A.at(n)))
            throw AssumptionViolated("constraint cone meets the positive orthant",
                                     "node " + format_node(n));
    }
    MspInstance inst;
    inst.tree = m.tree;
    inst.dim = m.assets;
    inst.conical = true;
    inst.V = AdaptedSemiOpen(m.tree);
    inst.C = AdaptedClosed(m.tree);
    for (const NodeId& n : m.tree.all_nodes()) {
        inst.V.set(n, SemiOpenPolyhedron::relatively_open(m.K.at(n).polar()));
        if (!m.tree.is_leaf(n)) inst.C.set(n, m.A.at(n).polar().negated());
    }
    inst.validate();
    return inst;
}

/// Whether the equivalence between robust no-arbitrage and solvability is
/// theorem-backed for this model: either trading is unconstrained everywhere
/// or every solvency cone is pointed.
inline bool kabanov_robust_equivalence(const KabanovModel& m) {
    bool unconstrained = true, pointed = true;
    for (const NodeId& n : m.tree.all_nodes()) {
        if (!m.A.at(n).equals(ClosedPolyhedron::full_space(m.assets))) unconstrained = false;
        if (!m.K.at(n).lineality().empty()) pointed = false;
    }
    return unconstrained || pointed;
}

/// The solvency cone induced by a max-affine cost at one node: positions
/// (cash, order book) whose liquidation never loses money against the
/// asymptotic per-unit prices. Equals the positive polar of the cone
/// spanned by (1, a_i) over the pieces.
inline ClosedPolyhedron cost_solvency_cone(const MaxAffine& f, std::size_t assets) {
    std::vector<Halfspace> ineqs;
    for (const AffinePiece& p : f)
        ineqs.push_back({detail::lift(Rational(1), p.a), Rational(0)});
    return ClosedPolyhedron::from_hrep(assets + 1, ineqs, {});
}

/// Cost market as a selection problem in dimension 1 + assets: the value set
/// at node n is the relative interior of the cone spanned by (1, a_i) over
/// the affine pieces, the sweep is {0} x (-A(n)^*). Raises
/// AssumptionViolated unless every induced solvency cone has the unit
/// directions interior (equivalently: every piece has strictly positive
/// slopes in every asset).
inline MspInstance cost_to_msp(const CostModel& m) {
    m.validate();
    MspInstance inst;
    inst.tree = m.tree;
    inst.dim = m.assets + 1;
    inst.conical = true;
    inst.V = AdaptedSemiOpen(m.tree);
    inst.C = AdaptedClosed(m.tree);
    for (const NodeId& n : m.tree.all_nodes()) {
        const ClosedPolyhedron K = cost_solvency_cone(m.S.at(n), m.assets);
        for (std::size_t i = 0; i < inst.dim; ++i)
            if (!detail::interior_member(K, detail::unit_vec(inst.dim, i)))
                throw AssumptionViolated(
                    "free disposal (unit directions interior to the induced solvency cone)",
                    "node " + format_node(n));
        std::vector<Vec> gens;
        for (const AffinePiece& p : m.S.at(n)) gens.push_back(detail::lift(Rational(1), p.a));
        inst.V.set(n, SemiOpenPolyhedron::relatively_open(
                          ClosedPolyhedron::cone_from_rays(inst.dim, gens)));
        if (!m.tree.is_leaf(n))
            inst.C.set(n, detail::lift_zero_first(m.A.at(n).polar().negated()));
    }
    inst.validate();
    return inst;
}

/// Whether the no-scalable-arbitrage equivalence is theorem-backed for this
/// cost model: unconstrained trading everywhere, or every induced solvency
/// cone pointed.
inline bool cost_robust_equivalence(const CostModel& m) {
    bool unconstrained = true, pointed = true;
    for (const NodeId& n : m.tree.all_nodes()) {
        if (!m.A.at(n).equals(ClosedPolyhedron::full_space(m.assets))) unconstrained = false;
        if (!cost_solvency_cone(m.S.at(n), m.assets).lineality().empty()) pointed = false;
    }
    return unconstrained || pointed;
}

// ---------------------------------------------------------------------------
// Replay: exact strategy valuation
// ---------------------------------------------------------------------------

/// Terminal value of a frictionless self-financing strategy on every leaf:
/// initial capital plus the accumulated price gains along the path. Raises
/// InadmissibleError when holdings leave the constraint cone.
inline NodeMap<Rational> replay_frictionless(const FrictionlessModel& m, const Strategy& s) {
    m.validate();
    for (const NodeId& n : m.tree.all_nodes()) {
        if (!s.h.defined(n))
            throw InputError("replay: holdings missing at node " + format_node(n));
        if (s.h.at(n).size() != m.assets)
            throw MismatchError("replay: holdings at node " + format_node(n) +
                                " have wrong dimension");
        if (!m.A.at(n).contains(s.h.at(n)))
            throw InadmissibleError("holdings leave the constraint cone at node " +
                                    format_node(n));
    }
    NodeMap<Rational> values(m.tree);
    std::function<void(const NodeId&, const Rational&)> walk = [&](const NodeId& n,
                                                                   const Rational& acc) {
        if (m.tree.is_leaf(n)) {
            values.set(n, acc);
            return;
        }
        for (const NodeId& c : m.tree.children(n)) {
            const Rational gain = dot(s.h.at(n), sub(m.S.at(c), m.S.at(n)));
            walk(c, acc + gain);
        }
    };
    walk(NodeId{0, 0}, s.initial_capital);
    return values;
}

/// Terminal cash of a cost-market strategy on every leaf: initial capital
/// minus the cost of each rebalancing order along the path. Holdings must
/// stay in the constraint cones and liquidate (vanish) at the leaves.
inline NodeMap<Rational> replay_cost(const CostModel& m, const Strategy& s) {
    m.validate();
    for (const NodeId& n : m.tree.all_nodes()) {
        if (!s.h.defined(n))
            throw InputError("replay: holdings missing at node " + format_node(n));
        if (s.h.at(n).size() != m.assets)
            throw MismatchError("replay: holdings at node " + format_node(n) +
                                " have wrong dimension");
        if (!m.A.at(n).contains(s.h.at(n)))
            throw InadmissibleError("holdings leave the constraint cone at node " +
                                    format_node(n));
        if (m.tree.is_leaf(n) && !is_zero(s.h.at(n)))
            throw InadmissibleError("terminal holdings not liquidated at node " +
                                    format_node(n));
    }
    NodeMap<Rational> values(m.tree);
    std::function<void(const NodeId&, const Vec&, const Rational&)> walk =
        [&](const NodeId& n, const Vec& prev, const Rational& acc) {
            const Vec order = sub(s.h.at(n), prev);
            const Rational cash = acc - evaluate_max_affine(m.S.at(n), order);
            if (m.tree.is_leaf(n)) {
                values.set(n, cash);
                return;
            }
            for (const NodeId& c : m.tree.children(n)) walk(c, s.h.at(n), cash);
        };
    walk(NodeId{0, 0}, zero_vec(m.assets), s.initial_capital);
    return values;
}

/// Exact value of the positively homogeneous cost induced by a solvency
/// cone: S(x) = inf { delta : (delta, -x) in K }. Returns nullopt when the
/// infimum is +infinity (the order cannot be executed). Raises
/// InvalidCostError when the infimum is -infinity.
inline std::optional<Rational> cone_cost(const ClosedPolyhedron& K, const Vec& x) {
    if (K.is_empty()) throw EmptySetError("cone_cost: empty solvency cone");
    if (!K.is_cone()) throw NotAConeError("cone_cost: solvency set is not a cone");
    if (K.dim() != x.size() + 1)
        throw MismatchError("cone_cost: order dimension does not match the cone");
    std::optional<Rational> pinned;
    for (const Halfspace& g : K.equalities()) {
        const Rational g0 = g.a[0];
        const Rational rest = dot(detail::tail(g.a), x);
        if (g0 == Rational(0)) {
            if (rest != Rational(0)) return std::nullopt;
        } else {
            const Rational delta = rest / g0;
            if (pinned && *pinned != delta) return std::nullopt;
            pinned = delta;
        }
    }
    std::optional<Rational> lower;
    for (const Halfspace& f : K.inequalities()) {
        const Rational f0 = f.a[0];
        const Rational rest = dot(detail::tail(f.a), x);
        if (f0 == Rational(0)) {
            if (rest > Rational(0)) return std::nullopt;
        } else if (f0 > Rational(0)) {
            const Rational bound = rest / f0;
            if (!lower || bound > *lower) lower = bound;
        } else {
            // Cash deposits must always be solvent, so no facet can cap the
            // cash coordinate from above.
            throw InvalidCostError("cone_cost: solvency cone rejects cash deposits");
        }
    }
    if (pinned) {
        Vec probe = detail::lift(*pinned, negate(x));
        return K.contains(probe) ? std::optional<Rational>(*pinned) : std::nullopt;
    }
    if (!lower) throw InvalidCostError("cone_cost: execution cost unbounded below");
    return lower;
}

namespace detail {

/// Leaf values of a cost-track strategy replayed through per-node solvency
/// cones instead of the model's own cost functions.
inline NodeMap<Rational> replay_cost_in_cones(const ScenarioTree& tree, const AdaptedClosed& K,
                                              const Strategy& s, std::size_t assets) {
    NodeMap<Rational> values(tree);
    std::function<void(const NodeId&, const Vec&, const Rational&)> walk =
        [&](const NodeId& n, const Vec& prev, const Rational& acc) {
            const Vec order = sub(s.h.at(n), prev);
            const std::optional<Rational> cost = cone_cost(K.at(n), order);
            if (!cost)
                throw InadmissibleError("order has infinite execution cost at node " +
                                        format_node(n));
            const Rational cash = acc - *cost;
            if (tree.is_leaf(n)) {
                values.set(n, cash);
                return;
            }
            for (const NodeId& c : tree.children(n)) walk(c, s.h.at(n), cash);
        };
    walk(NodeId{0, 0}, zero_vec(assets), s.initial_capital);
    return values;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cone enlargement and domination
// ---------------------------------------------------------------------------

/// Whether K_hat dominates K: K is contained in K_hat and everything in K
/// outside its lineality space lies in the relative interior of K_hat.
/// Decided exactly on the generators of K against the facets of K_hat.
inline bool dominates(const ClosedPolyhedron& K_hat, const ClosedPolyhedron& K) {
    if (K_hat.dim() != K.dim()) throw MismatchError("dominates: dimension mismatch");
    if (!K_hat.is_cone() || !K.is_cone())
        throw NotAConeError("dominates: both arguments must be cones");
    if (K.is_empty()) return true;
    for (const Halfspace& g : K_hat.equalities()) {
        for (const Vec& r : K.rays())
            if (dot(g.a, r) != Rational(0)) return false;
        for (const Vec& l : K.lineality())
            if (dot(g.a, l) != Rational(0)) return false;
    }
    for (const Halfspace& f : K_hat.inequalities()) {
        for (const Vec& l : K.lineality())
            if (dot(f.a, l) != Rational(0)) return false;
        for (const Vec& r : K.rays())
            if (dot(f.a, r) <= Rational(0)) return false;
    }
    return true;
}

/// Enlarge a closed cone by fanning every generator ray into a small
/// pyramid: each ray r is replaced by r +/- eps * |r|_inf * e_i over all
/// coordinates. The lineality space is kept. The result contains K, and
/// every point of K outside its lineality space is interior to the result.
/// A cone with no rays (a subspace) is returned unchanged.
inline ClosedPolyhedron blunt_cone(const ClosedPolyhedron& K, const Rational& eps) {
    if (!K.is_cone()) throw NotAConeError("blunt_cone: input is not a cone");
    if (eps <= Rational(0)) throw InputError("blunt_cone: the widening must be positive");
    if (K.is_empty() || K.rays().empty()) return K;
    const std::size_t d = K.dim();
    std::vector<Vec> rays;
    for (const Vec& r : K.rays()) {
        Rational norm(0);
        for (const Rational& c : r) {
            const Rational a = c >= Rational(0) ? c : Rational(-c);
            if (a > norm) norm = a;
        }
        const Rational step = eps * norm;
        for (std::size_t i = 0; i < d; ++i) {
            Vec up = r, down = r;
            up[i] = up[i] + step;
            down[i] = down[i] - step;
            rays.push_back(up);
            rays.push_back(down);
        }
    }
    return ClosedPolyhedron::cone_from_rays(d, rays, K.lineality());
}

// ---------------------------------------------------------------------------
// Separator decomposition at a failure node
// ---------------------------------------------------------------------------

namespace detail {

/// The solvency cone of an instance node, recovered as the polar of the
/// closed value cone.
inline ClosedPolyhedron instance_solvency_cone(const MspInstance& inst, const NodeId& n) {
    return inst.V.at(n).closure_poly().polar();
}

/// Polar of (union of the children's table sets, swept by -C at n):
/// the intersection of the polar of the hull of the children's closures
/// with the reflected polar of C.
inline ClosedPolyhedron swept_union_polar(const MspInstance& inst, const WTable& table,
                                          const NodeId& n) {
    std::vector<ClosedPolyhedron> closures;
    for (const NodeId& c : inst.tree.children(n)) {
        if (table.at(c).is_empty())
            throw NotInPolarError("decomposition: the table is empty below node " +
                                  format_node(n));
        closures.push_back(table.at(c).closure_poly());
    }
    return ClosedPolyhedron::hull(closures).polar().intersect(
        inst.C.at(n).polar().negated());
}

}  // namespace detail

/// Decompose a separating vector z at a failure node of the interior-form
/// backward table into an adapted family k(v) over the strict subtree with
/// k(v) in the solvency cone at v and path sums equal to z at every leaf.
/// Requires z in the polar of (union of children table sets - C); raises
/// NotInPolarError otherwise. Also records k(failure) = -z and scans for
/// slack sites: nodes whose k lies in the cone but not in its lineality
/// space.
inline ZDecomposition decompose_z(const MspInstance& inst, const WTable& table,
                                  const NodeId& node, const Vec& z) {
    inst.tree.require_valid(node);
    if (inst.tree.is_leaf(node))
        throw InputError("decompose_z: the failure node must have children");
    if (z.size() != inst.dim)
        throw MismatchError("decompose_z: separator has wrong dimension");

    const ClosedPolyhedron target = detail::swept_union_polar(inst, table, node);
    if (!target.contains(z))
        throw NotInPolarError("decompose_z: the separator is not in the polar of the swept union at node " +
                              format_node(node));

    ZDecomposition out;
    out.z = z;
    out.failure = node;
    out.k = NodeMap<Vec>(inst.tree);
    out.remainders = NodeMap<Vec>(inst.tree);
    out.k.set(node, negate(z));
    out.remainders.set(node, z);

    std::function<void(const NodeId&, const Vec&)> split = [&](const NodeId& v,
                                                               const Vec& carried) {
        for (const NodeId& c : inst.tree.children(v)) {
            const ClosedPolyhedron Kc = detail::instance_solvency_cone(inst, c);
            if (inst.tree.is_leaf(c)) {
                if (!Kc.contains(carried))
                    throw NotInPolarError(
                        "decompose_z: terminal remainder escapes the solvency cone at node " +
                        format_node(c));
                out.k.set(c, carried);
                out.remainders.set(c, zero_vec(inst.dim));
            } else {
                const ClosedPolyhedron G = detail::swept_union_polar(inst, table, c);
                const auto parts = split_over_sum(carried, Kc, G);
                if (!parts)
                    throw NotInPolarError(
                        "decompose_z: the remainder does not split over cone plus polar at node " +
                        format_node(c));
                out.k.set(c, parts->first);
                out.remainders.set(c, parts->second);
                split(c, parts->second);
            }
        }
    };
    split(node, z);

    const auto slack_at = [&](const NodeId& v, const Vec& kv) {
        const ClosedPolyhedron Kv = detail::instance_solvency_cone(inst, v);
        return Kv.contains(kv) && !Kv.contains(negate(kv));
    };
    if (slack_at(node, out.k.at(node))) out.slack_sites.push_back(node);
    for (const NodeId& v : inst.tree.all_nodes()) {
        if (v.level <= node.level) continue;
        if (!inst.tree.is_ancestor_or_self(node, v)) continue;
        if (slack_at(v, out.k.at(v))) out.slack_sites.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Arbitrage assembly for the solvency-cone track
// ---------------------------------------------------------------------------

namespace detail {

/// Pick a positive admissible direction y (in A, componentwise nonnegative,
/// nonzero) and a step size lambda such that k_hat - lambda * y stays
/// interior to K_hat. The step is found by an exact ratio test against the
/// facets of K_hat. Returns lambda * y.
inline Vec positive_interior_step(const ClosedPolyhedron& K_hat, const ClosedPolyhedron& A,
                                  const Vec& k_hat, const NodeId& where) {
    const std::size_t d = k_hat.size();
    if (!K_hat.equalities().empty())
        throw HardError("interior step: the enlarged cone is not full-dimensional at node " +
                        format_node(where));
    std::vector<Vec> candidates;
    for (std::size_t i = 0; i < d; ++i) candidates.push_back(unit_vec(d, i));
    if (const auto w = positive_cone_witness(A)) candidates.push_back(*w);
    for (const Vec& y : candidates) {
        if (is_zero(y)) continue;
        bool nonneg = true;
        for (const Rational& c : y)
            if (c < Rational(0)) nonneg = false;
        if (!nonneg || !A.contains(y)) continue;
        Rational lambda(1);
        for (const Halfspace& f : K_hat.inequalities()) {
            const Rational fy = dot(f.a, y);
            if (fy > Rational(0)) {
                const Rational cap = dot(f.a, k_hat) / fy / Rational(2);
                if (cap < lambda) lambda = cap;
            }
        }
        if (lambda <= Rational(0))
            throw HardError("interior step: no room inside the enlarged cone at node " +
                            format_node(where));
        return scale(y, lambda);
    }
    throw AssumptionViolated("constraint cone meets the positive orthant",
                             "node " + format_node(where));
}

}  // namespace detail

/// Turn a separator decomposition into an explicit arbitrage for the
/// enlarged solvency cones K_hat: holdings follow the remainders of the
/// decomposition, and from the first slack site a positive admissible
/// withdrawal is carried down one branch so the terminal position there is
/// nonnegative and nonzero while every rebalancing stays inside -K_hat.
/// Returns the strategy and the witness leaf.
inline std::pair<Strategy, NodeId> assemble_arbitrage(const ScenarioTree& tree,
                                                      const ZDecomposition& dec,
                                                      const AdaptedClosed& K_hat,
                                                      const AdaptedClosed& A) {
    if (dec.slack_sites.empty())
        throw InputError("assemble_arbitrage: the decomposition has no slack site");
    const NodeId start = dec.slack_sites.front();
    const std::size_t d = dec.z.size();

    Strategy s;
    s.model = ModelKind::Kabanov;
    s.initial_capital = Rational(0);
    s.h = AdaptedProcess(tree);
    for (const NodeId& v : tree.all_nodes()) {
        if (v.level >= dec.failure.level && tree.is_ancestor_or_self(dec.failure, v))
            s.h.set(v, dec.remainders.at(v));
        else
            s.h.set(v, zero_vec(d));
    }

    std::vector<NodeId> path{start};
    while (!tree.is_leaf(path.back())) path.push_back(tree.children(path.back()).front());

    Vec carried = zero_vec(d);
    for (const NodeId& p : path) {
        const Vec k_hat = add(dec.k.at(p), carried);
        if (!detail::interior_member(K_hat.at(p), k_hat))
            throw HardError("assemble_arbitrage: slack was lost on the way down at node " +
                            format_node(p));
        const Vec step = detail::positive_interior_step(K_hat.at(p), A.at(p), k_hat, p);
        s.h.set(p, add(s.h.at(p), step));
        carried = step;
    }
    return {s, path.back()};
}

// ---------------------------------------------------------------------------
// Price systems
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<PriceSystem> price_systems(const MspInstance& inst,
                                              const std::vector<NodeId>& queried) {
    std::vector<PriceSystem> out;
    for (const NodeId& q : queried) {
        Solution sol = build_local_solution(inst, q);
        out.push_back(PriceSystem{sol.xi, sol.Q, q});
    }
    return out;
}

}  // namespace detail

/// The probability measure induced by a lifted price system: leaf weights of
/// Q reweighted by the terminal over initial first coordinate. Under this
/// measure the (normalized) risky part of xi is a constrained martingale.
inline FiniteMeasure price_measure(const ScenarioTree& tree, const PriceSystem& ps) {
    const Vec& root = ps.xi.at(NodeId{0, 0});
    if (root.empty() || root[0] <= Rational(0))
        throw InputError("price_measure: the root weight must be positive");
    std::map<std::size_t, Rational> weights;
    for (const auto& [leaf, qw] : ps.Q.support()) {
        const NodeId n{tree.horizon(), leaf};
        const Vec& xi = ps.xi.at(n);
        const Rational w = qw * xi[0] / root[0];
        if (w != Rational(0)) weights[leaf] = w;
    }
    return FiniteMeasure(tree, weights);
}

// ---------------------------------------------------------------------------
// Fundamental-theorem drivers
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<NodeId> default_queried(std::vector<NodeId> queried) {
    if (queried.empty()) queried.push_back(NodeId{0, 0});
    return queried;
}

}  // namespace detail

/// Fundamental theorem for a frictionless market: either consistent price
/// systems anchored at each queried node, or a one-shot arbitrage at the
/// failure node of the backward recursion, with the strict gain verified by
/// replay.
inline FtapResult frictionless_ftap(const FrictionlessModel& m,
                                    std::vector<NodeId> queried = {}) {
    const MspInstance inst = frictionless_to_msp(m);
    const WTable W = compute_W(inst);
    FtapResult res;
    res.robust_equivalence = true;
    const auto failure = find_failure(inst, W);
    if (!failure) {
        res.arbitrage_free = true;
        res.systems = detail::price_systems(inst, detail::default_queried(std::move(queried)));
        return res;
    }

    const NodeId n = *failure;
    if (inst.tree.is_leaf(n))
        throw HardError("frictionless arbitrage: the recursion cannot fail at a leaf");
    std::vector<SemiOpenPolyhedron> kids;
    for (const NodeId& c : inst.tree.children(n)) kids.push_back(W.at(c));
    const SemiOpenPolyhedron flat = mixture_hull(kids);
    if (flat.is_empty())
        throw HardError("frictionless arbitrage: no child set survives below node " +
                        format_node(n));
    const SemiOpenPolyhedron B = minkowski_sum(flat, inst.C.at(n).negated());
    const ClosedPolyhedron Z =
        inst.V.at(n).closure_poly().negated().polar().intersect(B.closure_poly().polar());
    const Vec z = Z.relative_interior_point();
    if (is_zero(z))
        throw HardError("frictionless arbitrage: no separating direction at node " +
                        format_node(n));
    const Vec zbar = detail::tail(z);

    const Rational own = z[0] + dot(m.S.at(n), zbar);
    std::optional<NodeId> strict_child;
    if (own < Rational(0)) {
        strict_child = inst.tree.children(n).front();
    } else {
        for (const NodeId& c : inst.tree.children(n)) {
            if (z[0] + dot(m.S.at(c), zbar) > Rational(0)) {
                strict_child = c;
                break;
            }
        }
    }
    if (!strict_child)
        throw HardError("frictionless arbitrage: the separator has no strict branch at node " +
                        format_node(n));
    const NodeId witness{inst.tree.horizon(),
                         inst.tree.subtree_leaves(*strict_child).front()};

    Strategy s;
    s.model = ModelKind::Frictionless;
    s.initial_capital = Rational(0);
    s.h = AdaptedProcess(m.tree);
    for (const NodeId& v : m.tree.all_nodes())
        s.h.set(v, v == n ? zbar : zero_vec(m.assets));

    const NodeMap<Rational> values = replay_frictionless(m, s);
    for (const NodeId& leaf : m.tree.leaves())
        if (values.at(leaf) < Rational(0))
            throw HardError("frictionless arbitrage: replay went negative at node " +
                            format_node(leaf));
    if (values.at(witness) <= Rational(0))
        throw HardError("frictionless arbitrage: replay is not strict at the witness");

    ArbitrageCertificate cert;
    cert.model = ModelKind::Frictionless;
    cert.strategy = s;
    cert.failure = n;
    cert.witness = witness;
    cert.z = z;
    cert.has_decomposition = false;
    res.arbitrage_free = false;
    res.certificate = std::move(cert);
    return res;
}

namespace detail {

/// Separating vector at a failure node of the interior-form table: a
/// relative interior point of the polar wedge between the closed value cone
/// and the closure of (union of children sets - C).
inline Vec separating_vector(const MspInstance& inst, const WTable& table, const NodeId& n) {
    std::vector<SemiOpenPolyhedron> kids;
    for (const NodeId& c : inst.tree.children(n)) kids.push_back(table.at(c));
    const SemiOpenPolyhedron sharp = convex_union(kids);
    if (sharp.is_empty())
        throw HardError("separation: no child set survives below node " + format_node(n));
    const SemiOpenPolyhedron B = minkowski_sum(sharp, inst.C.at(n).negated());
    const ClosedPolyhedron Z =
        inst.V.at(n).closure_poly().negated().polar().intersect(B.closure_poly().polar());
    const Vec z = Z.relative_interior_point();
    if (is_zero(z))
        throw HardError("separation: no separating direction at node " + format_node(n));
    return z;
}

}  // namespace detail

/// Fundamental theorem for a solvency-cone market: consistent price systems
/// when the selection problem is solvable; otherwise an arbitrage
/// certificate against the epsilon-enlarged cones, assembled from a
/// separator decomposition at the failure node of the interior-form table.
inline FtapResult kabanov_ftap(const KabanovModel& m, std::vector<NodeId> queried = {}) {
    const MspInstance inst = kabanov_to_msp(m);
    FtapResult res;
    res.robust_equivalence = kabanov_robust_equivalence(m);
    const WTable W = compute_W(inst);
    if (!find_failure(inst, W)) {
        res.arbitrage_free = true;
        res.systems = detail::price_systems(inst, detail::default_queried(std::move(queried)));
        return res;
    }

    const WTable w = compute_w_ri(inst);
    const auto failure = find_failure(inst, w);
    if (!failure)
        throw HardError("solvency-cone arbitrage: the closed table fails but the interior table does not");
    const NodeId n = *failure;
    if (inst.tree.is_leaf(n))
        throw HardError("solvency-cone arbitrage: the recursion cannot fail at a leaf");

    const Vec z = detail::separating_vector(inst, w, n);
    ZDecomposition dec = decompose_z(inst, w, n, z);
    if (dec.slack_sites.empty())
        throw HardError("solvency-cone arbitrage: the decomposition has no slack site at node " +
                        format_node(n));

    AdaptedClosed K_hat(m.tree);
    for (const NodeId& v : m.tree.all_nodes()) {
        const ClosedPolyhedron hat = blunt_cone(m.K.at(v), rat(1, 100));
        if (!dominates(hat, m.K.at(v)))
            throw HardError("solvency-cone arbitrage: the enlarged cone fails to dominate at node " +
                            format_node(v));
        K_hat.set(v, hat);
    }

    auto assembled = assemble_arbitrage(m.tree, dec, K_hat, m.A);

    ArbitrageCertificate cert;
    cert.model = ModelKind::Kabanov;
    cert.strategy = std::move(assembled.first);
    cert.failure = n;
    cert.witness = assembled.second;
    cert.z = z;
    cert.k = dec.k;
    cert.remainders = dec.remainders;
    cert.slack_site = dec.slack_sites.front();
    cert.has_decomposition = true;
    cert.K_hat = K_hat;
    res.arbitrage_free = false;
    res.certificate = std::move(cert);
    return res;
}

/// Fundamental theorem for a cost market: consistent price systems in the
/// lifted cone when solvable; otherwise a scalable arbitrage whose orders
/// follow the separator decomposition directly (the cash coordinate absorbs
/// the slack), strict against every cost process dominated by the
/// epsilon-enlarged induced cones.
inline FtapResult cost_ftap(const CostModel& m, std::vector<NodeId> queried = {}) {
    const MspInstance inst = cost_to_msp(m);
    FtapResult res;
    res.robust_equivalence = cost_robust_equivalence(m);
    const WTable W = compute_W(inst);
    if (!find_failure(inst, W)) {
        res.arbitrage_free = true;
        res.systems = detail::price_systems(inst, detail::default_queried(std::move(queried)));
        return res;
    }

    const WTable w = compute_w_ri(inst);
    const auto failure = find_failure(inst, w);
    if (!failure)
        throw HardError("cost arbitrage: the closed table fails but the interior table does not");
    const NodeId n = *failure;
    if (inst.tree.is_leaf(n))
        throw HardError("cost arbitrage: the recursion cannot fail at a leaf");

    const Vec z = detail::separating_vector(inst, w, n);
    ZDecomposition dec = decompose_z(inst, w, n, z);
    if (dec.slack_sites.empty())
        throw HardError("cost arbitrage: the decomposition has no slack site at node " +
                        format_node(n));
    const NodeId slack = dec.slack_sites.front();

    AdaptedClosed K_hat(m.tree);
    for (const NodeId& v : m.tree.all_nodes()) {
        const ClosedPolyhedron K = cost_solvency_cone(m.S.at(v), m.assets);
        std::optional<ClosedPolyhedron> hat;
        Rational eps = rat(1, 100);
        for (int attempt = 0; attempt < 20; ++attempt) {
            ClosedPolyhedron candidate = blunt_cone(K, eps);
            const bool cash_priced = std::any_of(
                candidate.inequalities().begin(), candidate.inequalities().end(),
                [](const Halfspace& f) { return f.a[0] > Rational(0); });
            if (cash_priced && dominates(candidate, K)) {
                hat = std::move(candidate);
                break;
            }
            eps = eps / Rational(2);
        }
        if (!hat)
            throw HardError("cost arbitrage: no valid enlargement of the solvency cone at node " +
                            format_node(v));
        K_hat.set(v, *hat);
    }

    Strategy s;
    s.model = ModelKind::Cost;
    s.initial_capital = Rational(0);
    s.h = AdaptedProcess(m.tree);
    for (const NodeId& v : m.tree.all_nodes()) {
        if (v.level >= n.level && m.tree.is_ancestor_or_self(n, v))
            s.h.set(v, detail::tail(dec.remainders.at(v)));
        else
            s.h.set(v, zero_vec(m.assets));
    }
    const NodeId witness{m.tree.horizon(), m.tree.subtree_leaves(slack).front()};

    const NodeMap<Rational> own_values = replay_cost(m, s);
    for (const NodeId& leaf : m.tree.leaves())
        if (own_values.at(leaf) < Rational(0))
            throw HardError("cost arbitrage: replay went negative at node " + format_node(leaf));
    const NodeMap<Rational> hat_values =
        detail::replay_cost_in_cones(m.tree, K_hat, s, m.assets);
    for (const NodeId& leaf : m.tree.leaves())
        if (hat_values.at(leaf) < Rational(0))
            throw HardError("cost arbitrage: enlarged replay went negative at node " +
                            format_node(leaf));
    if (hat_values.at(witness) <= Rational(0))
        throw HardError("cost arbitrage: enlarged replay is not strict at the witness");

    ArbitrageCertificate cert;
    cert.model = ModelKind::Cost;
    cert.strategy = std::move(s);
    cert.failure = n;
    cert.witness = witness;
    cert.z = z;
    cert.k = dec.k;
    cert.remainders = dec.remainders;
    cert.slack_site = slack;
    cert.has_decomposition = true;
    cert.K_hat = K_hat;
    res.arbitrage_free = false;
    res.certificate = std::move(cert);
    return res;
}

// ---------------------------------------------------------------------------
// Dominating-model construction
// ---------------------------------------------------------------------------

/// Build a model with strictly wider solvency cones whose selection problem
/// is solvable, witnessing that a solvable model stays arbitrage-free under
/// a uniform enlargement. Every node's value cone is approximated from
/// inside by an increasing family of closed subcones; a backward search
/// picks the approximation level per tree level so that the shrunken
/// backward recursion stays nonempty. The returned model's cones each
/// dominate the original ones.
inline KabanovModel construct_dominating_model(const KabanovModel& m) {
    const MspInstance inst = kabanov_to_msp(m);
    if (!is_solvable(inst))
        throw UnsolvableError("construct_dominating_model: the selection problem is unsolvable");
    const std::size_t levels = m.tree.num_levels();
    const std::size_t horizon = m.tree.horizon();

    // Inner approximation of the value cone at node v with sharpness j:
    // the conical hull of the truncated closure blended toward a relative
    // interior point by weight 1/(j+1).
    const auto inner_cone = [&](const NodeId& v, std::size_t j) {
        const SemiOpenPolyhedron& V = inst.V.at(v);
        const ClosedPolyhedron closed = V.closure_poly();
        const Vec xi = V.sample_ri_point();
        const Vec lo(inst.dim, Rational(-1));
        const Vec hi(inst.dim, Rational(1));
        const ClosedPolyhedron truncated = closed.intersect(ClosedPolyhedron::box(lo, hi));
        const ClosedPolyhedron blended =
            truncated.scaled(rat(static_cast<long>(j), static_cast<long>(j) + 1))
                .translated(scale(xi, rat(1, static_cast<long>(j) + 1)));
        return blended.conical_hull();
    };

    const auto hatted_instance = [&](const std::vector<std::size_t>& sharpness) {
        MspInstance hat = inst;
        for (const NodeId& v : m.tree.all_nodes())
            hat.V.set(v, SemiOpenPolyhedron::relatively_open(inner_cone(v, sharpness[v.level])));
        return hat;
    };

    std::vector<std::size_t> sharpness(levels, 1);
    for (std::size_t stage = horizon; stage-- > 0;) {
        bool found = false;
        for (std::size_t bump = 1; bump <= 64 && !found; ++bump) {
            std::vector<std::size_t> candidate = sharpness;
            for (std::size_t s = stage; s < levels; ++s) candidate[s] += bump;
            const MspInstance hat = hatted_instance(candidate);
            const WTable table = compute_W(hat);
            bool ok = true;
            for (const NodeId& v : m.tree.all_nodes()) {
                if (v.level < stage) continue;
                if (table.at(v).is_empty()) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                sharpness = std::move(candidate);
                found = true;
            }
        }
        if (!found)
            throw HardError("construct_dominating_model: no approximation level restores solvability at stage " +
                            std::to_string(stage));
    }

    KabanovModel out;
    out.tree = m.tree;
    out.assets = m.assets;
    out.A = m.A;
    out.K = AdaptedClosed(m.tree);
    for (const NodeId& v : m.tree.all_nodes()) {
        const ClosedPolyhedron hat_K = inner_cone(v, sharpness[v.level]).polar();
        if (!dominates(hat_K, m.K.at(v)))
            throw HardError("construct_dominating_model: the widened cone fails to dominate at node " +
                            format_node(v));
        out.K.set(v, hat_K);
    }
    out.validate();
    if (!is_solvable(kabanov_to_msp(out)))
        throw HardError("construct_dominating_model: the widened model lost solvability");
    return out;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

inline VerificationReport verify_price_system(const FrictionlessModel& m,
                                              const PriceSystem& ps) {
    return verify_solution(frictionless_to_msp(m), Solution{ps.xi, ps.Q, ps.anchor});
}

inline VerificationReport verify_price_system(const KabanovModel& m, const PriceSystem& ps) {
    return verify_solution(kabanov_to_msp(m), Solution{ps.xi, ps.Q, ps.anchor});
}

inline VerificationReport verify_price_system(const CostModel& m, const PriceSystem& ps) {
    return verify_solution(cost_to_msp(m), Solution{ps.xi, ps.Q, ps.anchor});
}

namespace detail {

inline void report_fail(VerificationReport& rep, const std::string& what) {
    rep.ok = false;
    rep.details += what;
    rep.details += "\n";
}

/// Checks shared by the decomposition-backed certificates: the separator is
/// nonzero and opposite-solvent at the failure node, the family k lies in
/// the per-node solvency cones and telescopes to z along every path below
/// the failure node, the slack site has genuine slack, and every enlarged
/// cone dominates the corresponding solvency cone.
inline void check_decomposition(VerificationReport& rep, const ScenarioTree& tree,
                                const std::function<ClosedPolyhedron(const NodeId&)>& K_of,
                                const ArbitrageCertificate& cert, std::size_t dim) {
    if (!cert.has_decomposition) {
        report_fail(rep, "certificate carries no decomposition");
        return;
    }
    if (cert.z.size() != dim || is_zero(cert.z)) {
        report_fail(rep, "separator is zero or has the wrong dimension");
        return;
    }
    const NodeId n = cert.failure;
    if (n.level >= tree.horizon()) {
        report_fail(rep, "failure node is a leaf");
        return;
    }
    if (!K_of(n).contains(negate(cert.z)))
        report_fail(rep, "the negated separator is not solvent at the failure node");
    if (!cert.k.defined(n) || cert.k.at(n) != negate(cert.z))
        report_fail(rep, "k at the failure node must be the negated separator");

    for (const NodeId& v : tree.all_nodes()) {
        if (v.level <= n.level || !tree.is_ancestor_or_self(n, v)) continue;
        if (!cert.k.defined(v)) {
            report_fail(rep, "decomposition missing at node " + format_node(v));
            continue;
        }
        if (cert.k.at(v).size() != dim) {
            report_fail(rep, "decomposition has wrong dimension at node " + format_node(v));
            continue;
        }
        if (!K_of(v).contains(cert.k.at(v)))
            report_fail(rep, "decomposition leaves the solvency cone at node " + format_node(v));
    }
    for (std::size_t leaf : tree.subtree_leaves(n)) {
        Vec sum = zero_vec(dim);
        NodeId v{tree.horizon(), leaf};
        while (v != n) {
            if (cert.k.defined(v)) sum = add(sum, cert.k.at(v));
            v = tree.parent(v);
        }
        if (sum != cert.z) {
            report_fail(rep, "path sums of the decomposition miss the separator below leaf " +
                                 format_node(NodeId{tree.horizon(), leaf}));
            break;
        }
    }

    const NodeId u = cert.slack_site;
    if (!(u == n || (u.level > n.level && tree.is_ancestor_or_self(n, u)))) {
        report_fail(rep, "slack site is outside the failure subtree");
    } else if (!cert.k.defined(u)) {
        report_fail(rep, "slack site has no decomposition entry");
    } else {
        const ClosedPolyhedron Ku = K_of(u);
        if (!Ku.contains(cert.k.at(u)) || Ku.contains(negate(cert.k.at(u))))
            report_fail(rep, "slack site has no genuine slack");
    }

    for (const NodeId& v : tree.all_nodes()) {
        if (!cert.K_hat.defined(v)) {
            report_fail(rep, "enlarged cone missing at node " + format_node(v));
            continue;
        }
        if (!dominates(cert.K_hat.at(v), K_of(v)))
            report_fail(rep, "enlarged cone fails to dominate at node " + format_node(v));
    }
}

}  // namespace detail

/// Check a frictionless arbitrage certificate: replay the strategy exactly
/// and require nonnegative terminal value on every leaf and a strictly
/// positive value at the witness leaf, from zero initial capital.
inline VerificationReport verify_arbitrage_certificate(const FrictionlessModel& m,
                                                       const ArbitrageCertificate& cert) {
    VerificationReport rep;
    if (cert.model != ModelKind::Frictionless)
        detail::report_fail(rep, "certificate is for a different market formulation");
    if (cert.strategy.initial_capital != Rational(0))
        detail::report_fail(rep, "arbitrage must start from zero capital");
    if (cert.witness.level != m.tree.horizon())
        detail::report_fail(rep, "witness is not a leaf");
    if (!rep.ok) return rep;
    try {
        const NodeMap<Rational> values = replay_frictionless(m, cert.strategy);
        for (const NodeId& leaf : m.tree.leaves())
            if (values.at(leaf) < Rational(0))
                detail::report_fail(rep, "terminal value negative at node " + format_node(leaf));
        if (values.at(cert.witness) <= Rational(0))
            detail::report_fail(rep, "terminal value not strictly positive at the witness");
    } catch (const Error& e) {
        detail::report_fail(rep, std::string("replay failed: ") + e.what());
    }
    return rep;
}

/// Check a solvency-cone arbitrage certificate: the decomposition checks,
/// plus an exact replay against the enlarged cones: every rebalancing lies
/// in -K_hat, holdings respect the constraints, terminal holdings are
/// nonnegative everywhere and nonzero at the witness leaf.
inline VerificationReport verify_arbitrage_certificate(const KabanovModel& m,
                                                       const ArbitrageCertificate& cert) {
    VerificationReport rep;
    if (cert.model != ModelKind::Kabanov)
        detail::report_fail(rep, "certificate is for a different market formulation");
    try {
        m.validate();
    } catch (const Error& e) {
        detail::report_fail(rep, std::string("model invalid: ") + e.what());
        return rep;
    }
    detail::check_decomposition(
        rep, m.tree, [&](const NodeId& v) { return m.K.at(v); }, cert, m.assets);

    const Strategy& s = cert.strategy;
    for (const NodeId& v : m.tree.all_nodes()) {
        if (!s.h.defined(v) || s.h.at(v).size() != m.assets) {
            detail::report_fail(rep, "holdings missing or mis-sized at node " + format_node(v));
            return rep;
        }
        if (!m.A.at(v).contains(s.h.at(v)))
            detail::report_fail(rep, "holdings leave the constraint cone at node " +
                                         format_node(v));
        if (!cert.K_hat.defined(v)) return rep;
        const Vec prev = v.level == 0 ? zero_vec(m.assets) : s.h.at(m.tree.parent(v));
        const Vec increment = sub(s.h.at(v), prev);
        if (!cert.K_hat.at(v).contains(negate(increment)))
            detail::report_fail(rep, "rebalancing is not solvent in the enlarged cone at node " +
                                         format_node(v));
    }
    for (const NodeId& leaf : m.tree.leaves()) {
        for (const Rational& c : s.h.at(leaf))
            if (c < Rational(0))
                detail::report_fail(rep, "terminal holdings negative at node " +
                                             format_node(leaf));
    }
    if (cert.witness.level != m.tree.horizon() || is_zero(s.h.at(cert.witness)))
        detail::report_fail(rep, "terminal holdings vanish at the witness leaf");
    return rep;
}

/// Check a cost-market arbitrage certificate: the decomposition checks on
/// the induced solvency cones, a replay through the model's own costs that
/// must stay nonnegative, and replays through the enlarged cones at scales
/// 1, 2 and 10 that must stay nonnegative everywhere and strictly positive
/// at the witness leaf.
inline VerificationReport verify_arbitrage_certificate(const CostModel& m,
                                                       const ArbitrageCertificate& cert) {
    VerificationReport rep;
    if (cert.model != ModelKind::Cost)
        detail::report_fail(rep, "certificate is for a different market formulation");
    try {
        m.validate();
    } catch (const Error& e) {
        detail::report_fail(rep, std::string("model invalid: ") + e.what());
        return rep;
    }
    detail::check_decomposition(
        rep, m.tree, [&](const NodeId& v) { return cost_solvency_cone(m.S.at(v), m.assets); },
        cert, m.assets + 1);
    if (cert.strategy.initial_capital != Rational(0))
        detail::report_fail(rep, "arbitrage must start from zero capital");
    if (cert.witness.level != m.tree.horizon())
        detail::report_fail(rep, "witness is not a leaf");
    if (!rep.ok) return rep;

    try {
        const NodeMap<Rational> own = replay_cost(m, cert.strategy);
        for (const NodeId& leaf : m.tree.leaves())
            if (own.at(leaf) < Rational(0))
                detail::report_fail(rep, "terminal cash negative under the model costs at node " +
                                             format_node(leaf));
        for (long alpha : {1L, 2L, 10L}) {
            Strategy scaled = cert.strategy;
            for (const NodeId& v : m.tree.all_nodes())
                scaled.h.set(v, scale(cert.strategy.h.at(v), Rational(alpha)));
            const NodeMap<Rational> hat =
                detail::replay_cost_in_cones(m.tree, cert.K_hat, scaled, m.assets);
            for (const NodeId& leaf : m.tree.leaves())
                if (hat.at(leaf) < Rational(0))
                    detail::report_fail(
                        rep, "terminal cash negative under the enlarged cones at node " +
                                 format_node(leaf));
            if (hat.at(cert.witness) <= Rational(0))
                detail::report_fail(rep,
                                    "terminal cash not strictly positive at the witness at scale " +
                                        std::to_string(alpha));
        }
    } catch (const Error& e) {
        detail::report_fail(rep, std::string("replay failed: ") + e.what());
    }
    return rep;
}

}  // namespace martsel
