#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "martsel/errors.hpp"
#include "martsel/lp.hpp"
#include "martsel/polyhedron.hpp"
#include "martsel/rational.hpp"
#include "martsel/semi_open.hpp"

namespace martsel {

/// Convex decomposition of a point across every part: x = sum w_i u_i with
/// u_i a member of part i and every weight strictly positive.
struct ChildDecomposition {
    std::vector<Vec> points;
    std::vector<Rational> weights;
};

/// Sparse decomposition: at most dim + 1 atoms, each tagged with the index of
/// the part it belongs to.
struct SparseDecomposition {
    std::vector<std::size_t> part_index;
    std::vector<Vec> points;
    std::vector<Rational> weights;
};

/// Splits x into a + b with a in p and b in q, when possible.
inline std::optional<std::pair<Vec, Vec>> split_over_sum(const Vec& x, const ClosedPolyhedron& p,
                                                         const ClosedPolyhedron& q) {
    const std::size_t d = x.size();
    if (p.dim() != d || q.dim() != d) throw MismatchError("split_over_sum: dimension mismatch");
    if (p.is_empty() || q.is_empty()) return std::nullopt;
    std::vector<LpRow> rows;
    detail::append_closed_rows(rows, p, 2 * d, 0);
    detail::append_closed_rows(rows, q, 2 * d, d);
    for (std::size_t j = 0; j < d; ++j) {
        LpRow row;
        row.a = zero_vec(2 * d);
        row.a[j] = 1;
        row.a[d + j] = 1;
        row.b = x[j];
        row.eq = true;
        rows.push_back(std::move(row));
    }
    const auto sol = lp_feasible_point(2 * d, rows);
    if (!sol) return std::nullopt;
    Vec a(sol->begin(), sol->begin() + static_cast<std::ptrdiff_t>(d));
    Vec b(sol->begin() + static_cast<std::ptrdiff_t>(d), sol->end());
    return std::make_pair(std::move(a), std::move(b));
}

namespace detail {

/// Base case of the decomposition: x lies in the relative interior of the
/// hull of the closures. Walk from the barycenter of interior samples through
/// x to the far side of the hull, decompose that far point over the tagged
/// closed generators by LP, and blend each part's share back toward its
/// interior sample. Every part ends up with strictly positive weight and a
/// point inside the relative interior of its closure.
inline ChildDecomposition decompose_interior(const Vec& x,
                                             const std::vector<SemiOpenPolyhedron>& parts,
                                             const ClosedPolyhedron& hull) {
    const std::size_t d = x.size();
    const std::size_t k = parts.size();
    const Rational invk = Rational(1) / Rational(static_cast<long>(k));
    std::vector<Vec> centers;
    for (const auto& s : parts) centers.push_back(s.sample_ri_point());
    Vec cbar = zero_vec(d);
    for (const auto& c : centers) cbar = add(cbar, c);
    cbar = scale(cbar, invk);

    ChildDecomposition out;
    if (x == cbar) {
        out.points = centers;
        out.weights.assign(k, invk);
        return out;
    }

    const Vec dir = sub(x, cbar);
    std::optional<Rational> mu;
    for (const auto& h : hull.inequalities()) {
        const Rational s = dot(h.a, dir);
        if (s < 0) {
            const Rational bound = (dot(h.a, cbar) - h.b) / (-s);
            if (!mu || bound < *mu) mu = bound;
        }
    }
    Rational nu;
    Vec z;
    if (!mu) {
        z = add(cbar, scale(dir, 2));
        nu = Rational(1, 2);
    } else {
        if (*mu <= 1) throw HardError("decompose_interior: point not interior to the hull");
        z = add(cbar, scale(dir, *mu));
        nu = 1 / *mu;
    }

    // Decompose z over the closed generators, one variable block per part:
    // point coefficients (convex), ray coefficients (nonnegative), lineality
    // coefficients (free).
    std::vector<std::size_t> offset(k);
    std::size_t nvars = 0;
    for (std::size_t i = 0; i < k; ++i) {
        offset[i] = nvars;
        const auto& cl = parts[i].closure_poly();
        nvars += cl.points().size() + cl.rays().size() + cl.lineality().size();
    }
    std::vector<LpRow> rows;
    for (std::size_t r = 0; r < d; ++r) {
        LpRow row;
        row.a = zero_vec(nvars);
        for (std::size_t i = 0; i < k; ++i) {
            const auto& cl = parts[i].closure_poly();
            std::size_t v = offset[i];
            for (const auto& p : cl.points()) row.a[v++] = p[r];
            for (const auto& q : cl.rays()) row.a[v++] = q[r];
            for (const auto& l : cl.lineality()) row.a[v++] = l[r];
        }
        row.b = z[r];
        row.eq = true;
        rows.push_back(std::move(row));
    }
    {
        LpRow total;
        total.a = zero_vec(nvars);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t v = offset[i];
            for (std::size_t m = 0; m < parts[i].closure_poly().points().size(); ++m)
                total.a[v++] = 1;
        }
        total.b = 1;
        total.eq = true;
        rows.push_back(std::move(total));
    }
    for (std::size_t i = 0; i < k; ++i) {
        const auto& cl = parts[i].closure_poly();
        const std::size_t nonneg = cl.points().size() + cl.rays().size();
        for (std::size_t m = 0; m < nonneg; ++m) {
            LpRow row;
            row.a = zero_vec(nvars);
            row.a[offset[i] + m] = 1;
            row.b = 0;
            rows.push_back(std::move(row));
        }
    }
    const auto sol = lp_feasible_point(nvars, rows);
    if (!sol) throw HardError("decompose_interior: hull point failed to decompose");

    for (std::size_t i = 0; i < k; ++i) {
        const auto& cl = parts[i].closure_poly();
        std::size_t v = offset[i];
        Rational lambda = 0;
        Vec share = zero_vec(d);
        for (const auto& p : cl.points()) {
            lambda += (*sol)[v];
            share = add(share, scale(p, (*sol)[v]));
            ++v;
        }
        for (const auto& q : cl.rays()) {
            share = add(share, scale(q, (*sol)[v]));
            ++v;
        }
        for (const auto& l : cl.lineality()) {
            share = add(share, scale(l, (*sol)[v]));
            ++v;
        }
        const Rational w = nu * lambda + (1 - nu) * invk;
        if (w <= 0) throw HardError("decompose_interior: nonpositive blended weight");
        Vec u = add(scale(share, nu), scale(centers[i], (1 - nu) * invk));
        u = scale(u, 1 / w);
        out.points.push_back(std::move(u));
        out.weights.push_back(w);
    }
    Vec check = zero_vec(d);
    for (std::size_t i = 0; i < k; ++i) check = add(check, scale(out.points[i], out.weights[i]));
    if (check != x) throw HardError("decompose_interior: reconstruction mismatch");
    return out;
}

}  // namespace detail

/// Writes x as a positive-weight convex combination drawing one point from
/// every part. Throws EmptySetError if a part is empty and NotMemberError if
/// no such combination exists.
inline ChildDecomposition decompose_all_children(const Vec& x,
                                                 const std::vector<SemiOpenPolyhedron>& parts) {
    if (parts.empty()) throw EmptySetError("decompose_all_children: no parts");
    for (const auto& s : parts)
        if (s.is_empty()) throw EmptySetError("decompose_all_children: empty part");
    std::vector<SemiOpenPolyhedron> cur = parts;
    for (;;) {
        std::vector<ClosedPolyhedron> closures;
        for (const auto& s : cur) closures.push_back(s.closure_poly());
        const ClosedPolyhedron hull = ClosedPolyhedron::hull(closures);
        if (!hull.contains(x))
            throw NotMemberError("decompose_all_children: point outside the mixture hull");
        const FaceId tight = hull.tight_set(x);
        if (tight.empty()) return detail::decompose_interior(x, cur, hull);
        const FaceLattice lat(hull);
        const ClosedPolyhedron fp = lat.face_polyhedron(lat.faces()[lat.index_of(tight)]);
        std::vector<SemiOpenPolyhedron> next;
        for (const auto& s : cur) {
            SemiOpenPolyhedron t = intersect(s, fp);
            if (t.is_empty())
                throw NotMemberError("decompose_all_children: a part misses the face");
            next.push_back(std::move(t));
        }
        cur = std::move(next);
    }
}

/// Writes x as a convex combination of members of the parts, using at most
/// dim + 1 atoms. Parts that cannot contribute are skipped; throws
/// NotMemberError when x is not in the convex hull of the union.
inline SparseDecomposition caratheodory_decompose(const Vec& x,
                                                  const std::vector<SemiOpenPolyhedron>& parts) {
    if (parts.empty()) throw EmptySetError("caratheodory_decompose: no parts");
    const std::size_t d = x.size();
    std::vector<SemiOpenPolyhedron> cur;
    std::vector<std::size_t> origin;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i].is_empty()) {
            cur.push_back(parts[i]);
            origin.push_back(i);
        }
    }
    for (;;) {
        if (cur.empty()) throw NotMemberError("caratheodory_decompose: no usable part");
        std::vector<ClosedPolyhedron> closures;
        for (const auto& s : cur) closures.push_back(s.closure_poly());
        const ClosedPolyhedron hull = ClosedPolyhedron::hull(closures);
        if (!hull.contains(x))
            throw NotMemberError("caratheodory_decompose: point outside the hull");
        const FaceId tight = hull.tight_set(x);
        if (tight.empty()) break;
        const FaceLattice lat(hull);
        const ClosedPolyhedron fp = lat.face_polyhedron(lat.faces()[lat.index_of(tight)]);
        std::vector<SemiOpenPolyhedron> next;
        std::vector<std::size_t> nextorigin;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            SemiOpenPolyhedron t = intersect(cur[i], fp);
            if (!t.is_empty()) {
                next.push_back(std::move(t));
                nextorigin.push_back(origin[i]);
            }
        }
        cur = std::move(next);
        origin = std::move(nextorigin);
    }
    std::vector<ClosedPolyhedron> closures;
    for (const auto& s : cur) closures.push_back(s.closure_poly());
    const ChildDecomposition full =
        detail::decompose_interior(x, cur, ClosedPolyhedron::hull(closures));

    SparseDecomposition out;
    out.part_index = origin;
    out.points = full.points;
    out.weights = full.weights;
    // Carathéodory reduction: cancel affine dependencies until at most
    // d + 1 atoms carry weight.
    while (out.points.size() > d + 1) {
        const std::size_t m = out.points.size();
        Mat rows(d + 1, zero_vec(m));
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t r = 0; r < d; ++r) rows[r][j] = out.points[j][r];
            rows[d][j] = 1;
        }
        const auto ns = nullspace(rows, m);
        if (ns.empty()) break;
        Vec gamma = ns[0];
        bool haspos = false;
        for (const auto& g : gamma) haspos = haspos || g > 0;
        if (!haspos) gamma = negate(gamma);
        std::optional<Rational> tau;
        for (std::size_t j = 0; j < m; ++j)
            if (gamma[j] > 0) {
                const Rational t = out.weights[j] / gamma[j];
                if (!tau || t < *tau) tau = t;
            }
        SparseDecomposition reduced;
        for (std::size_t j = 0; j < m; ++j) {
            const Rational w = out.weights[j] - *tau * gamma[j];
            if (w < 0) throw HardError("caratheodory_decompose: negative reduced weight");
            if (w == 0) continue;
            reduced.part_index.push_back(out.part_index[j]);
            reduced.points.push_back(out.points[j]);
            reduced.weights.push_back(w);
        }
        if (reduced.points.size() >= out.points.size())
            throw HardError("caratheodory_decompose: reduction made no progress");
        out = std::move(reduced);
    }
    Vec check = zero_vec(d);
    Rational total = 0;
    for (std::size_t j = 0; j < out.points.size(); ++j) {
        check = add(check, scale(out.points[j], out.weights[j]));
        total += out.weights[j];
    }
    if (check != x || total != 1) throw HardError("caratheodory_decompose: invalid result");
    return out;
}

}  // namespace martsel
