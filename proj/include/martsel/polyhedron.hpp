#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "martsel/errors.hpp"
#include "martsel/linalg.hpp"
#include "martsel/rational.hpp"

namespace martsel {

/// One H-representation row: <a, x> >= b, or <a, x> = b when it sits in the
/// equality list of a polyhedron.
struct Halfspace {
    Vec a;
    Rational b;
};

inline bool operator==(const Halfspace& l, const Halfspace& r) { return l.a == r.a && l.b == r.b; }

namespace detail {

inline std::vector<Vec> identity_basis(std::size_t d) {
    std::vector<Vec> b(d, zero_vec(d));
    for (std::size_t i = 0; i < d; ++i) b[i][i] = 1;
    return b;
}

inline Vec with_tail(const Vec& v, const Rational& t) {
    Vec r = v;
    r.push_back(t);
    return r;
}

/// Extreme rays of a pointed cone {u : rows u >= 0} with rank(rows) = k.
/// Incremental double description with the algebraic adjacency test
/// (common tight constraints of rank k - 2).
inline std::vector<Vec> dd_pointed(std::size_t k, const Mat& rows) {
    if (k == 0) return {};
    const std::vector<std::size_t> init = independent_rows(rows);
    if (init.size() != k) throw HardError("double description: expected a pointed cone");
    Mat m(k);
    for (std::size_t i = 0; i < k; ++i) m[i] = rows[init[i]];
    const std::optional<Mat> minv = invert(m);
    if (!minv) throw HardError("double description: singular initial basis");
    std::vector<Vec> rays(k, zero_vec(k));
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < k; ++i) rays[j][i] = (*minv)[i][j];
        rays[j] = primitive(rays[j]);
    }
    std::vector<char> processed(rows.size(), 0);
    for (std::size_t i : init) processed[i] = 1;

    for (std::size_t c = 0; c < rows.size(); ++c) {
        if (processed[c]) continue;
        std::vector<Rational> val(rays.size());
        std::vector<std::size_t> pos, zero, neg;
        for (std::size_t r = 0; r < rays.size(); ++r) {
            val[r] = dot(rows[c], rays[r]);
            if (val[r] > 0) pos.push_back(r);
            else if (val[r] < 0) neg.push_back(r);
            else zero.push_back(r);
        }
        processed[c] = 1;
        if (neg.empty()) continue;
        std::vector<Vec> next;
        for (std::size_t r : pos) next.push_back(rays[r]);
        for (std::size_t r : zero) next.push_back(rays[r]);
        for (std::size_t p : pos) {
            for (std::size_t q : neg) {
                // Adjacency in the cone cut out by the rows processed so far.
                Mat common;
                for (std::size_t t = 0; t < rows.size(); ++t) {
                    if (!processed[t] || t == c) continue;
                    if (dot(rows[t], rays[p]) == 0 && dot(rows[t], rays[q]) == 0)
                        common.push_back(rows[t]);
                }
                if (rank(std::move(common)) + 2 != k) continue;
                Vec fresh = sub(scale(rays[q], val[p]), scale(rays[p], val[q]));
                fresh = primitive(fresh);
                if (!is_zero(fresh)) next.push_back(std::move(fresh));
            }
        }
        std::sort(next.begin(), next.end(), lex_less);
        next.erase(std::unique(next.begin(), next.end()), next.end());
        rays = std::move(next);
        if (rays.empty()) break;
    }
    std::sort(rays.begin(), rays.end(), lex_less);
    return rays;
}

struct ConeDD {
    std::vector<Vec> rays;
    std::vector<Vec> lineality;
};

/// Full double description of {x in R^n : <c_i, x> >= 0}: the lineality space
/// is split off first, the pointed remainder is handled in coordinates of the
/// constraint row space.
inline ConeDD dd_cone(std::size_t n, const Mat& normals_in) {
    Mat normals;
    for (const auto& r : normals_in)
        if (!is_zero(r)) normals.push_back(r);
    ConeDD out;
    out.lineality = nullspace(normals, n);
    if (normals.empty()) return out;
    Mat basis = normals;
    rref(basis);
    const std::size_t k = basis.size();
    Mat reduced(normals.size(), zero_vec(k));
    for (std::size_t i = 0; i < normals.size(); ++i)
        for (std::size_t j = 0; j < k; ++j) reduced[i][j] = dot(normals[i], basis[j]);
    for (const Vec& u : dd_pointed(k, reduced)) {
        Vec x = zero_vec(n);
        for (std::size_t j = 0; j < k; ++j) x = add(x, scale(basis[j], u[j]));
        out.rays.push_back(primitive(x));
    }
    std::sort(out.rays.begin(), out.rays.end(), lex_less);
    return out;
}

struct VRepRaw {
    std::vector<Vec> points, rays, lineality;
};

struct HRepRaw {
    std::vector<Halfspace> ineqs, eqs;
};

/// H-rep to V-rep: equalities are solved out, the rest is homogenized with a
/// nonnegative scaling coordinate and passed through the cone engine.
inline VRepRaw dd_hrep_to_vrep(std::size_t d, const std::vector<Halfspace>& ineqs,
                               const std::vector<Halfspace>& eqs) {
    Vec x0;
    std::vector<Vec> nb;
    if (!eqs.empty()) {
        Mat a;
        Vec b;
        for (const auto& e : eqs) {
            a.push_back(e.a);
            b.push_back(e.b);
        }
        const auto sol = solve_linear(a, b, d);
        if (!sol) return {};
        x0 = *sol;
        nb = nullspace(a, d);
    } else {
        x0 = zero_vec(d);
        nb = identity_basis(d);
    }
    const std::size_t k = nb.size();
    Mat rows;
    for (const auto& h : ineqs) {
        Vec row(k + 1);
        for (std::size_t j = 0; j < k; ++j) row[j] = dot(h.a, nb[j]);
        row[k] = dot(h.a, x0) - h.b;
        rows.push_back(std::move(row));
    }
    rows.push_back(with_tail(zero_vec(k), 1));
    const ConeDD cd = dd_cone(k + 1, rows);
    const auto lift = [&](const Vec& y) {
        Vec x = zero_vec(d);
        for (std::size_t j = 0; j < k; ++j) x = add(x, scale(nb[j], y[j]));
        return x;
    };
    VRepRaw out;
    for (const Vec& r : cd.rays) {
        const Rational t = r[k];
        if (t > 0) {
            Vec y(k);
            for (std::size_t j = 0; j < k; ++j) y[j] = r[j] / t;
            out.points.push_back(add(x0, lift(y)));
        } else {
            out.rays.push_back(lift(r));
        }
    }
    for (const Vec& l : cd.lineality) out.lineality.push_back(lift(l));
    if (out.points.empty()) return {};
    return out;
}

/// V-rep to H-rep through the dual cone: generators become constraint normals
/// in one dimension up, extreme rays of that cone are the facets, its
/// lineality gives the affine-hull equalities.
inline HRepRaw dd_vrep_to_hrep(std::size_t d, const std::vector<Vec>& points,
                               const std::vector<Vec>& rays, const std::vector<Vec>& lineality) {
    Mat rows;
    for (const auto& p : points) rows.push_back(with_tail(p, 1));
    for (const auto& r : rays) rows.push_back(with_tail(r, 0));
    for (const auto& l : lineality) {
        rows.push_back(with_tail(l, 0));
        rows.push_back(with_tail(negate(l), 0));
    }
    const ConeDD cd = dd_cone(d + 1, rows);
    HRepRaw out;
    const auto split = [&](const Vec& y) {
        Vec a(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(d));
        return Halfspace{std::move(a), -y[d]};
    };
    for (const Vec& y : cd.rays) {
        Halfspace h = split(y);
        if (!is_zero(h.a)) out.ineqs.push_back(std::move(h));
    }
    for (const Vec& z : cd.lineality) {
        Halfspace h = split(z);
        if (!is_zero(h.a)) out.eqs.push_back(std::move(h));
    }
    return out;
}

}  // namespace detail

class FaceLattice;

/// A closed convex polyhedron with both representations kept canonical:
/// equalities in reduced row echelon form, facet inequalities reduced against
/// them, made primitive and sorted; generators reduced modulo the lineality
/// space and sorted. Two polyhedra describe the same set exactly when their
/// canonical fields compare equal. A polyhedron is empty iff it has no points.
class ClosedPolyhedron {
  public:
    ClosedPolyhedron() = default;

    static ClosedPolyhedron empty_set(std::size_t d) {
        ClosedPolyhedron p;
        p.dim_ = d;
        p.empty_ = true;
        return p;
    }

    static ClosedPolyhedron from_hrep(std::size_t d, std::vector<Halfspace> ineqs,
                                      std::vector<Halfspace> eqs) {
        check_rows(d, ineqs);
        check_rows(d, eqs);
        reduce_rows(ineqs);
        reduce_rows(eqs);
        const detail::VRepRaw v = detail::dd_hrep_to_vrep(d, ineqs, eqs);
        if (v.points.empty()) return empty_set(d);
        ClosedPolyhedron p;
        p.dim_ = d;
        p.build_from_extreme(v);
        return p;
    }

    static ClosedPolyhedron from_vrep(std::size_t d, std::vector<Vec> points,
                                      std::vector<Vec> rays, std::vector<Vec> lineality) {
        for (const auto& g : points)
            if (g.size() != d) throw MismatchError("from_vrep: generator dimension");
        for (const auto& g : rays)
            if (g.size() != d) throw MismatchError("from_vrep: generator dimension");
        for (const auto& g : lineality)
            if (g.size() != d) throw MismatchError("from_vrep: generator dimension");
        reduce_gens(points);
        reduce_gens(rays);
        reduce_gens(lineality);
        if (points.empty()) return empty_set(d);
        const detail::HRepRaw h = detail::dd_vrep_to_hrep(d, points, rays, lineality);
        const detail::VRepRaw v = detail::dd_hrep_to_vrep(d, h.ineqs, h.eqs);
        if (v.points.empty()) throw HardError("from_vrep: regeneration lost the set");
        ClosedPolyhedron p;
        p.dim_ = d;
        p.build_from_extreme(v);
        return p;
    }

    static ClosedPolyhedron full_space(std::size_t d) {
        return from_vrep(d, {zero_vec(d)}, {}, detail::identity_basis(d));
    }

    static ClosedPolyhedron single_point(Vec v) {
        const std::size_t d = v.size();
        return from_vrep(d, {std::move(v)}, {}, {});
    }

    static ClosedPolyhedron cone_from_rays(std::size_t d, std::vector<Vec> rays,
                                           std::vector<Vec> lineality = {}) {
        return from_vrep(d, {zero_vec(d)}, std::move(rays), std::move(lineality));
    }

    static ClosedPolyhedron box(const Vec& lo, const Vec& hi) {
        const std::size_t d = lo.size();
        if (hi.size() != d) throw MismatchError("box: corner dimensions differ");
        std::vector<Halfspace> ineqs;
        for (std::size_t i = 0; i < d; ++i) {
            Vec e = zero_vec(d);
            e[i] = 1;
            ineqs.push_back({e, lo[i]});
            ineqs.push_back({negate(e), -hi[i]});
        }
        return from_hrep(d, std::move(ineqs), {});
    }

    /// conv of the union of closed polyhedra (empty inputs are skipped).
    static ClosedPolyhedron hull(const std::vector<ClosedPolyhedron>& parts) {
        if (parts.empty()) throw EmptySetError("hull: no parts");
        const std::size_t d = parts[0].dim_;
        std::vector<Vec> pts, rays, lin;
        for (const auto& p : parts) {
            if (p.dim_ != d) throw MismatchError("hull: dimension mismatch");
            if (p.empty_) continue;
            pts.insert(pts.end(), p.points_.begin(), p.points_.end());
            rays.insert(rays.end(), p.rays_.begin(), p.rays_.end());
            lin.insert(lin.end(), p.lineality_.begin(), p.lineality_.end());
        }
        if (pts.empty()) return empty_set(d);
        return from_vrep(d, std::move(pts), std::move(rays), std::move(lin));
    }

    std::size_t dim() const { return dim_; }
    bool is_empty() const { return empty_; }
    const std::vector<Halfspace>& inequalities() const { return ineqs_; }
    const std::vector<Halfspace>& equalities() const { return eqs_; }
    const std::vector<Vec>& points() const { return points_; }
    const std::vector<Vec>& rays() const { return rays_; }
    const std::vector<Vec>& lineality() const { return lineality_; }

    bool contains(const Vec& x) const {
        if (x.size() != dim_) throw MismatchError("contains: point dimension");
        return contains_reduced(canonical(x));
    }

    /// Recession-cone membership of a direction.
    bool contains_ray(const Vec& r) const {
        if (empty_) return false;
        const Vec cr = canonical(r);
        for (const auto& h : ineqs_)
            if (dot(h.a, cr) < 0) return false;
        for (const auto& h : eqs_)
            if (dot(h.a, cr) != 0) return false;
        return true;
    }

    /// Indices of the facet inequalities tight at a member point. This is the
    /// canonical face identifier of the smallest face containing x.
    std::vector<std::size_t> tight_set(const Vec& x) const {
        if (x.size() != dim_) throw MismatchError("tight_set: point dimension");
        const Vec cx = canonical(x);
        if (!contains_reduced(cx))
            throw NotMemberError("tight_set: point outside the polyhedron");
        std::vector<std::size_t> t;
        for (std::size_t i = 0; i < ineqs_.size(); ++i)
            if (dot(ineqs_[i].a, cx) == ineqs_[i].b) t.push_back(i);
        return t;
    }

    /// Dimension of the affine hull; -1 for the empty set.
    int affine_dim() const {
        if (empty_) return -1;
        return static_cast<int>(dim_) - static_cast<int>(eqs_.size());
    }

    /// A point of the relative interior: generator average plus all rays.
    Vec relative_interior_point() const {
        if (empty_) throw EmptySetError("relative_interior_point: empty set");
        Vec x = zero_vec(dim_);
        for (const auto& p : points_) x = add(x, p);
        x = scale(x, Rational(1) / Rational(static_cast<long>(points_.size())));
        for (const auto& r : rays_) x = add(x, r);
        return x;
    }

    bool is_cone() const {
        return !empty_ && points_.size() == 1 && is_zero(points_[0]);
    }

    /// Positive polar {y : <y, x> >= 0 for all x in this cone}.
    ClosedPolyhedron polar() const {
        if (!is_cone()) throw NotAConeError("polar: input is not a cone");
        std::vector<Halfspace> rows;
        for (const auto& r : rays_) rows.push_back({r, 0});
        std::vector<Halfspace> eqrows;
        for (const auto& l : lineality_) eqrows.push_back({l, 0});
        return from_hrep(dim_, std::move(rows), std::move(eqrows));
    }

    ClosedPolyhedron negated() const {
        if (empty_) return *this;
        std::vector<Vec> pts, rays, lin;
        for (const auto& p : points_) pts.push_back(negate(p));
        for (const auto& r : rays_) rays.push_back(negate(r));
        for (const auto& l : lineality_) lin.push_back(l);
        return from_vrep(dim_, std::move(pts), std::move(rays), std::move(lin));
    }

    ClosedPolyhedron translated(const Vec& v) const {
        if (empty_) return *this;
        std::vector<Vec> pts;
        for (const auto& p : points_) pts.push_back(add(p, v));
        return from_vrep(dim_, std::move(pts), rays_, lineality_);
    }

    /// Image under x -> c x for c != 0.
    ClosedPolyhedron scaled(const Rational& c) const {
        const Rational cc = canonical(c);
        if (cc == 0) throw Error("scaled: zero factor");
        if (empty_) return *this;
        std::vector<Vec> pts, rays;
        for (const auto& p : points_) pts.push_back(scale(p, cc));
        for (const auto& r : rays_) rays.push_back(cc > 0 ? r : negate(r));
        return from_vrep(dim_, std::move(pts), std::move(rays), lineality_);
    }

    ClosedPolyhedron recession_cone() const {
        if (empty_) throw EmptySetError("recession_cone: empty set");
        std::vector<Halfspace> rows, eqrows;
        for (const auto& h : ineqs_) rows.push_back({h.a, 0});
        for (const auto& h : eqs_) eqrows.push_back({h.a, 0});
        return from_hrep(dim_, std::move(rows), std::move(eqrows));
    }

    /// One point of the set plus a basis of affine-hull directions.
    std::pair<Vec, std::vector<Vec>> affine_hull() const {
        if (empty_) throw EmptySetError("affine_hull: empty set");
        Mat normals;
        for (const auto& h : eqs_) normals.push_back(h.a);
        return {points_[0], nullspace(normals, dim_)};
    }

    ClosedPolyhedron intersect(const ClosedPolyhedron& o) const {
        if (dim_ != o.dim_) throw MismatchError("intersect: dimension mismatch");
        if (empty_ || o.empty_) return empty_set(dim_);
        std::vector<Halfspace> rows = ineqs_, eqrows = eqs_;
        rows.insert(rows.end(), o.ineqs_.begin(), o.ineqs_.end());
        eqrows.insert(eqrows.end(), o.eqs_.begin(), o.eqs_.end());
        return from_hrep(dim_, std::move(rows), std::move(eqrows));
    }

    ClosedPolyhedron minkowski(const ClosedPolyhedron& o) const {
        if (dim_ != o.dim_) throw MismatchError("minkowski: dimension mismatch");
        if (empty_ || o.empty_) return empty_set(dim_);
        std::vector<Vec> pts;
        for (const auto& p : points_)
            for (const auto& q : o.points_) pts.push_back(add(p, q));
        std::vector<Vec> rays = rays_, lin = lineality_;
        rays.insert(rays.end(), o.rays_.begin(), o.rays_.end());
        lin.insert(lin.end(), o.lineality_.begin(), o.lineality_.end());
        return from_vrep(dim_, std::move(pts), std::move(rays), std::move(lin));
    }

    /// Smallest closed cone containing the set (the origin included).
    ClosedPolyhedron conical_hull() const {
        if (empty_) return empty_set(dim_);
        std::vector<Vec> rays = rays_;
        for (const auto& p : points_)
            if (!is_zero(p)) rays.push_back(p);
        return from_vrep(dim_, {zero_vec(dim_)}, std::move(rays), lineality_);
    }

    /// Structural equality of canonical forms; equivalent to set equality.
    bool equals(const ClosedPolyhedron& o) const {
        return dim_ == o.dim_ && empty_ == o.empty_ && ineqs_ == o.ineqs_ && eqs_ == o.eqs_ &&
               points_ == o.points_ && rays_ == o.rays_ && lineality_ == o.lineality_;
    }

    bool subset_of(const ClosedPolyhedron& o) const {
        if (dim_ != o.dim_) throw MismatchError("subset_of: dimension mismatch");
        if (empty_) return true;
        if (o.empty_) return false;
        for (const auto& p : points_)
            if (!o.contains(p)) return false;
        for (const auto& r : rays_)
            if (!o.contains_ray(r)) return false;
        for (const auto& l : lineality_)
            if (!o.contains_ray(l) || !o.contains_ray(negate(l))) return false;
        return true;
    }

    /// Semantic set equality via mutual containment (used by tests to
    /// cross-check the canonical forms).
    bool same_set(const ClosedPolyhedron& o) const { return subset_of(o) && o.subset_of(*this); }

  private:
    static void check_rows(std::size_t d, const std::vector<Halfspace>& rows) {
        for (const auto& h : rows)
            if (h.a.size() != d) throw MismatchError("h-rep row dimension");
    }

    static void reduce_rows(std::vector<Halfspace>& rows) {
        for (auto& h : rows) {
            for (auto& x : h.a) x.canonicalize();
            h.b.canonicalize();
        }
    }

    static void reduce_gens(std::vector<Vec>& gens) {
        for (auto& g : gens)
            for (auto& x : g) x.canonicalize();
    }

    bool contains_reduced(const Vec& x) const {
        if (empty_) return false;
        for (const auto& h : ineqs_)
            if (dot(h.a, x) < h.b) return false;
        for (const auto& h : eqs_)
            if (dot(h.a, x) != h.b) return false;
        return true;
    }

    /// Canonicalizes and stores, assuming `v` holds the extreme generators.
    void build_from_extreme(const detail::VRepRaw& v) {
        empty_ = false;
        detail::HRepRaw h = detail::dd_vrep_to_hrep(dim_, v.points, v.rays, v.lineality);

        Mat erows;
        for (const auto& e : h.eqs) erows.push_back(detail::with_tail(e.a, e.b));
        const std::vector<std::size_t> epiv = rref(erows);
        for (std::size_t p : epiv)
            if (p >= dim_) throw HardError("canonicalize: inconsistent affine hull");
        eqs_.clear();
        for (const auto& row : erows) {
            Vec a(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(dim_));
            eqs_.push_back({std::move(a), row[dim_]});
        }

        std::vector<Vec> rows;
        for (const auto& q : h.ineqs) {
            Vec w = reduce_against(detail::with_tail(q.a, q.b), erows, epiv);
            Vec a(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(dim_));
            if (is_zero(a)) {
                if (w[dim_] > 0) throw HardError("canonicalize: contradictory facet");
                continue;
            }
            rows.push_back(primitive(w));
        }
        std::sort(rows.begin(), rows.end(), lex_less);
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
        ineqs_.clear();
        for (const auto& w : rows) {
            Vec a(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(dim_));
            ineqs_.push_back({std::move(a), w[dim_]});
        }

        Mat lrows;
        for (const auto& l : v.lineality) lrows.push_back(l);
        const std::vector<std::size_t> lpiv = rref(lrows);
        lineality_.assign(lrows.begin(), lrows.end());
        points_.clear();
        for (const auto& p : v.points) points_.push_back(reduce_against(p, lrows, lpiv));
        std::sort(points_.begin(), points_.end(), lex_less);
        points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
        rays_.clear();
        for (const auto& r : v.rays) {
            Vec w = primitive(reduce_against(r, lrows, lpiv));
            if (is_zero(w)) throw HardError("canonicalize: ray inside the lineality space");
            rays_.push_back(std::move(w));
        }
        std::sort(rays_.begin(), rays_.end(), lex_less);
        rays_.erase(std::unique(rays_.begin(), rays_.end()), rays_.end());
    }

    std::size_t dim_ = 0;
    bool empty_ = true;
    std::vector<Halfspace> ineqs_, eqs_;
    std::vector<Vec> points_, rays_, lineality_;
};

/// One face of a polyhedron: the canonical identifier is the sorted set of
/// facet-inequality indices tight on it. Generator index lists refer to the
/// owning polyhedron's canonical V-rep.
struct Face {
    std::vector<std::size_t> tight;
    std::vector<std::size_t> point_gens, ray_gens;
    int dim = 0;
};

/// All nonempty faces of a polyhedron, the top face first (sorted by
/// decreasing dimension, then by identifier).
class FaceLattice {
  public:
    explicit FaceLattice(const ClosedPolyhedron& p) : poly_(&p) {
        if (p.is_empty()) throw EmptySetError("face lattice of the empty set");
        const auto& pts = p.points();
        const auto& rys = p.rays();
        const std::size_t ni = p.inequalities().size();
        std::vector<std::vector<char>> incp(ni, std::vector<char>(pts.size(), 0));
        std::vector<std::vector<char>> incr(ni, std::vector<char>(rys.size(), 0));
        for (std::size_t i = 0; i < ni; ++i) {
            const auto& h = p.inequalities()[i];
            for (std::size_t j = 0; j < pts.size(); ++j) incp[i][j] = dot(h.a, pts[j]) == h.b;
            for (std::size_t j = 0; j < rys.size(); ++j) incr[i][j] = dot(h.a, rys[j]) == 0;
        }
        const auto close = [&](const std::vector<char>& pm, const std::vector<char>& rm) {
            std::vector<std::size_t> tight;
            for (std::size_t i = 0; i < ni; ++i) {
                bool all = true;
                for (std::size_t j = 0; all && j < pts.size(); ++j)
                    if (pm[j] && !incp[i][j]) all = false;
                for (std::size_t j = 0; all && j < rys.size(); ++j)
                    if (rm[j] && !incr[i][j]) all = false;
                if (all) tight.push_back(i);
            }
            return tight;
        };
        std::map<std::vector<std::size_t>, std::pair<std::vector<char>, std::vector<char>>> seen;
        std::vector<std::vector<std::size_t>> queue;
        {
            std::vector<char> pm(pts.size(), 1), rm(rys.size(), 1);
            auto t0 = close(pm, rm);
            queue.push_back(t0);
            seen.emplace(std::move(t0), std::make_pair(std::move(pm), std::move(rm)));
        }
        while (!queue.empty()) {
            const std::vector<std::size_t> cur = queue.back();
            queue.pop_back();
            const auto masks = seen.at(cur);
            for (std::size_t i = 0; i < ni; ++i) {
                if (std::binary_search(cur.begin(), cur.end(), i)) continue;
                std::vector<char> pm(pts.size(), 0), rm(rys.size(), 0);
                bool any_point = false;
                for (std::size_t j = 0; j < pts.size(); ++j) {
                    pm[j] = masks.first[j] && incp[i][j];
                    any_point = any_point || pm[j];
                }
                if (!any_point) continue;
                for (std::size_t j = 0; j < rys.size(); ++j) rm[j] = masks.second[j] && incr[i][j];
                std::vector<std::size_t> tight = close(pm, rm);
                // Regenerate the full member sets of the closed-up face.
                std::vector<char> fpm(pts.size(), 1), frm(rys.size(), 1);
                for (std::size_t t : tight) {
                    for (std::size_t j = 0; j < pts.size(); ++j) fpm[j] = fpm[j] && incp[t][j];
                    for (std::size_t j = 0; j < rys.size(); ++j) frm[j] = frm[j] && incr[t][j];
                }
                if (seen.emplace(tight, std::make_pair(std::move(fpm), std::move(frm))).second)
                    queue.push_back(std::move(tight));
            }
        }
        for (const auto& [tight, masks] : seen) {
            Face f;
            f.tight = tight;
            for (std::size_t j = 0; j < pts.size(); ++j)
                if (masks.first[j]) f.point_gens.push_back(j);
            for (std::size_t j = 0; j < rys.size(); ++j)
                if (masks.second[j]) f.ray_gens.push_back(j);
            f.dim = face_dim(p, f);
            faces_.push_back(std::move(f));
        }
        std::sort(faces_.begin(), faces_.end(), [](const Face& a, const Face& b) {
            if (a.dim != b.dim) return a.dim > b.dim;
            return a.tight < b.tight;
        });
        for (std::size_t i = 0; i < faces_.size(); ++i) index_.emplace(faces_[i].tight, i);
    }

    const std::vector<Face>& faces() const { return faces_; }
    const Face& top() const { return faces_[0]; }

    std::size_t index_of(const std::vector<std::size_t>& tight) const {
        const auto it = index_.find(tight);
        if (it == index_.end()) throw Error("face lattice: unknown face identifier");
        return it->second;
    }

    /// Exact point in the relative interior of a face: average of its points
    /// plus the sum of its rays.
    Vec sample(const Face& f) const {
        Vec x = zero_vec(poly_->dim());
        for (std::size_t j : f.point_gens) x = add(x, poly_->points()[j]);
        x = scale(x, Rational(1) / Rational(static_cast<long>(f.point_gens.size())));
        for (std::size_t j : f.ray_gens) x = add(x, poly_->rays()[j]);
        return x;
    }

    /// The face as a closed polyhedron of its own.
    ClosedPolyhedron face_polyhedron(const Face& f) const {
        std::vector<Vec> pts, rys;
        for (std::size_t j : f.point_gens) pts.push_back(poly_->points()[j]);
        for (std::size_t j : f.ray_gens) rys.push_back(poly_->rays()[j]);
        return ClosedPolyhedron::from_vrep(poly_->dim(), std::move(pts), std::move(rys),
                                           poly_->lineality());
    }

  private:
    static int face_dim(const ClosedPolyhedron& p, const Face& f) {
        Mat m;
        const Vec& base = p.points()[f.point_gens[0]];
        for (std::size_t j : f.point_gens)
            if (j != f.point_gens[0]) m.push_back(sub(p.points()[j], base));
        for (std::size_t j : f.ray_gens) m.push_back(p.rays()[j]);
        for (const auto& l : p.lineality()) m.push_back(l);
        return static_cast<int>(rank(std::move(m)));
    }

    const ClosedPolyhedron* poly_;
    std::vector<Face> faces_;
    std::map<std::vector<std::size_t>, std::size_t> index_;
};

}  // namespace martsel
