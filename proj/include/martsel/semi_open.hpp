#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "martsel/errors.hpp"
#include "martsel/lp.hpp"
#include "martsel/polyhedron.hpp"
#include "martsel/rational.hpp"

namespace martsel {

/// Canonical face identifier: the sorted facet indices tight on the face.
using FaceId = std::vector<std::size_t>;

namespace detail {

/// Appends membership rows for a closed polyhedron over the variable block
/// [offset, offset + dim) of an LP with `nvars` variables. The polyhedron
/// must be nonempty: an empty one stores no rows at all, so its rows would
/// describe the full space. `flip` tests -y instead of y, `shift` tests
/// shift + sign * y.
inline void append_closed_rows(std::vector<LpRow>& rows, const ClosedPolyhedron& p,
                               std::size_t nvars, std::size_t offset, bool flip = false,
                               const Vec* shift = nullptr) {
    if (p.is_empty()) throw EmptySetError("append_closed_rows: empty polyhedron");
    const Rational sign = flip ? -1 : 1;
    const auto make = [&](const Halfspace& h, bool eq) {
        LpRow row;
        row.a = zero_vec(nvars);
        for (std::size_t j = 0; j < p.dim(); ++j) row.a[offset + j] = sign * h.a[j];
        row.b = h.b - (shift ? dot(h.a, *shift) : Rational(0));
        row.eq = eq;
        rows.push_back(std::move(row));
    };
    for (const auto& h : p.inequalities()) make(h, false);
    for (const auto& h : p.equalities()) make(h, true);
}

}  // namespace detail

/// A convex set that is a union of relative interiors of faces of a closed
/// polyhedron: the closure plus one inclusion flag per face of its lattice.
/// Invariants: a nonempty set always includes the relative interior of its
/// closure (the top face), and the union of flagged faces is convex, which is
/// equivalent to the flags being closed under the face join.
class SemiOpenPolyhedron {
  public:
    SemiOpenPolyhedron() = default;

    static SemiOpenPolyhedron empty_set(std::size_t d) {
        SemiOpenPolyhedron s;
        s.dim_ = d;
        s.cl_ = std::make_shared<const ClosedPolyhedron>(ClosedPolyhedron::empty_set(d));
        return s;
    }

    static SemiOpenPolyhedron from_closed(ClosedPolyhedron p) {
        if (p.is_empty()) return empty_set(p.dim());
        return with_uniform_flags(std::move(p), true);
    }

    static SemiOpenPolyhedron relatively_open(ClosedPolyhedron p) {
        if (p.is_empty()) return empty_set(p.dim());
        SemiOpenPolyhedron s = with_uniform_flags(std::move(p), false);
        s.flags_[0] = 1;
        return s;
    }

    /// Builds from an explicit list of included faces (deserialization entry
    /// point). Rejects flag sets that do not describe a convex set.
    static SemiOpenPolyhedron from_face_flags(ClosedPolyhedron p,
                                              const std::vector<FaceId>& included) {
        if (p.is_empty()) {
            if (!included.empty()) throw InputError("face flags given for an empty set");
            return empty_set(p.dim());
        }
        SemiOpenPolyhedron s = with_uniform_flags(std::move(p), false);
        for (const auto& id : included) {
            FaceId sorted = id;
            std::sort(sorted.begin(), sorted.end());
            std::size_t idx;
            try {
                idx = s.lat_->index_of(sorted);
            } catch (const Error&) {
                throw InputError("included face identifier does not name a face");
            }
            s.flags_[idx] = 1;
        }
        if (!s.flags_[0]) throw InputError("a nonempty semi-open set must include its top face");
        if (!s.flags_valid()) throw InputError("included faces do not form a convex set");
        return s;
    }

    /// Carves the subset of `candidate` where `pred` holds. The predicate
    /// must be face-constant: one relative-interior sample decides each face.
    /// When the top face fails, the candidate shrinks to the hull of the
    /// flagged faces and the pass repeats.
    static SemiOpenPolyhedron from_predicate(ClosedPolyhedron candidate,
                                             const std::function<bool(const Vec&)>& pred) {
        const std::size_t d = candidate.dim();
        for (int pass = 0; pass < 64; ++pass) {
            if (candidate.is_empty()) return empty_set(d);
            auto cl = std::make_shared<const ClosedPolyhedron>(std::move(candidate));
            auto lat = std::make_shared<const FaceLattice>(*cl);
            std::vector<char> flags(lat->faces().size(), 0);
            bool any = false;
            for (std::size_t i = 0; i < lat->faces().size(); ++i) {
                flags[i] = pred(lat->sample(lat->faces()[i])) ? 1 : 0;
                any = any || flags[i];
            }
            if (!any) return empty_set(d);
            if (flags[0]) {
                SemiOpenPolyhedron s;
                s.dim_ = d;
                s.cl_ = std::move(cl);
                s.lat_ = std::move(lat);
                s.flags_ = std::move(flags);
                if (!s.flags_valid())
                    throw HardError("from_predicate: flagged faces are not convex");
                return s;
            }
            std::vector<ClosedPolyhedron> parts;
            for (std::size_t i = 0; i < flags.size(); ++i)
                if (flags[i]) parts.push_back(lat->face_polyhedron(lat->faces()[i]));
            ClosedPolyhedron shrunk = ClosedPolyhedron::hull(parts);
            if (shrunk.equals(*cl))
                throw HardError("from_predicate: candidate stopped shrinking");
            candidate = std::move(shrunk);
        }
        throw HardError("from_predicate: no fixpoint within the pass limit");
    }

    std::size_t dim() const { return dim_; }
    bool is_empty() const { return !lat_; }
    int affine_dim() const { return cl_ ? cl_->affine_dim() : -1; }

    const ClosedPolyhedron& closure_poly() const { return *cl_; }
    const FaceLattice& lattice() const {
        if (!lat_) throw EmptySetError("lattice of an empty semi-open set");
        return *lat_;
    }
    const std::vector<char>& face_flags() const { return flags_; }

    /// Canonical list of included face identifiers in lattice order.
    std::vector<FaceId> included_faces() const {
        std::vector<FaceId> out;
        if (!lat_) return out;
        for (std::size_t i = 0; i < flags_.size(); ++i)
            if (flags_[i]) out.push_back(lat_->faces()[i].tight);
        return out;
    }

    bool member(const Vec& x) const {
        if (x.size() != dim_) throw MismatchError("member: point dimension");
        if (is_empty() || !cl_->contains(x)) return false;
        return flags_[lat_->index_of(cl_->tight_set(x))] != 0;
    }

    bool is_closed_set() const {
        if (is_empty()) return true;
        return std::all_of(flags_.begin(), flags_.end(), [](char f) { return f != 0; });
    }

    bool is_relatively_open_set() const {
        if (is_empty()) return true;
        for (std::size_t i = 1; i < flags_.size(); ++i)
            if (flags_[i]) return false;
        return true;
    }

    SemiOpenPolyhedron closure_semi() const {
        if (is_empty()) return *this;
        SemiOpenPolyhedron s = *this;
        std::fill(s.flags_.begin(), s.flags_.end(), 1);
        return s;
    }

    SemiOpenPolyhedron relative_interior() const {
        if (is_empty()) return *this;
        SemiOpenPolyhedron s = *this;
        std::fill(s.flags_.begin(), s.flags_.end(), 0);
        s.flags_[0] = 1;
        return s;
    }

    /// Exact point in the relative interior of the closure (always a member).
    Vec sample_ri_point() const {
        if (is_empty()) throw EmptySetError("sample_ri_point: empty set");
        return lat_->sample(lat_->top());
    }

    /// Structural equality of canonical data; equivalent to set equality.
    bool equals(const SemiOpenPolyhedron& o) const {
        if (dim_ != o.dim_ || is_empty() != o.is_empty()) return false;
        if (is_empty()) return true;
        return cl_->equals(*o.cl_) && flags_ == o.flags_;
    }

  private:
    static SemiOpenPolyhedron with_uniform_flags(ClosedPolyhedron p, bool on) {
        SemiOpenPolyhedron s;
        s.dim_ = p.dim();
        s.cl_ = std::make_shared<const ClosedPolyhedron>(std::move(p));
        s.lat_ = std::make_shared<const FaceLattice>(*s.cl_);
        s.flags_.assign(s.lat_->faces().size(), on ? 1 : 0);
        return s;
    }

    /// Convexity of the flagged union: the join of two flagged faces (the
    /// smallest face containing both, whose identifier is the intersection of
    /// their tight sets) must be flagged as well.
    bool flags_valid() const {
        for (std::size_t i = 0; i < flags_.size(); ++i) {
            if (!flags_[i]) continue;
            for (std::size_t j = i; j < flags_.size(); ++j) {
                if (!flags_[j]) continue;
                FaceId join;
                std::set_intersection(lat_->faces()[i].tight.begin(),
                                      lat_->faces()[i].tight.end(),
                                      lat_->faces()[j].tight.begin(),
                                      lat_->faces()[j].tight.end(), std::back_inserter(join));
                if (!flags_[lat_->index_of(join)]) return false;
            }
        }
        return true;
    }

    friend SemiOpenPolyhedron mixture_hull(const std::vector<SemiOpenPolyhedron>&);

    std::size_t dim_ = 0;
    std::shared_ptr<const ClosedPolyhedron> cl_;
    std::shared_ptr<const FaceLattice> lat_;
    std::vector<char> flags_;
};

namespace detail {

/// Rows forcing y (block at `offset`) into the relative interior of one face
/// of a semi-open set's closure, with strictness expressed through the shared
/// slack variable at index `slack`.
inline void append_ri_face_rows(std::vector<LpRow>& rows, const ClosedPolyhedron& cl,
                                const Face& f, std::size_t nvars, std::size_t offset,
                                std::size_t slack) {
    for (const auto& h : cl.equalities()) {
        LpRow row;
        row.a = zero_vec(nvars);
        for (std::size_t j = 0; j < cl.dim(); ++j) row.a[offset + j] = h.a[j];
        row.b = h.b;
        row.eq = true;
        rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < cl.inequalities().size(); ++i) {
        const auto& h = cl.inequalities()[i];
        LpRow row;
        row.a = zero_vec(nvars);
        for (std::size_t j = 0; j < cl.dim(); ++j) row.a[offset + j] = h.a[j];
        row.b = h.b;
        if (std::binary_search(f.tight.begin(), f.tight.end(), i)) {
            row.eq = true;
        } else {
            row.a[slack] = -1;
            row.eq = false;
        }
        rows.push_back(std::move(row));
    }
}

inline LpRow slack_cap(std::size_t nvars, std::size_t slack) {
    LpRow row;
    row.a = zero_vec(nvars);
    row.a[slack] = -1;
    row.b = -1;
    return row;
}

inline bool slack_lp_feasible(std::size_t nvars, std::vector<LpRow> rows, std::size_t slack) {
    rows.push_back(slack_cap(nvars, slack));
    Vec obj = zero_vec(nvars);
    obj[slack] = 1;
    return positive_optimum(solve_lp(nvars, rows, obj));
}

}  // namespace detail

/// Does the semi-open set meet the closed polyhedron?
inline bool meets(const SemiOpenPolyhedron& s, const ClosedPolyhedron& p) {
    if (s.dim() != p.dim()) throw MismatchError("meets: dimension mismatch");
    if (s.is_empty() || p.is_empty()) return false;
    const std::size_t d = s.dim(), nvars = d + 1, slack = d;
    const auto& lat = s.lattice();
    for (std::size_t i = 0; i < lat.faces().size(); ++i) {
        if (!s.face_flags()[i]) continue;
        std::vector<LpRow> rows;
        detail::append_ri_face_rows(rows, s.closure_poly(), lat.faces()[i], nvars, 0, slack);
        detail::append_closed_rows(rows, p, nvars, 0);
        if (detail::slack_lp_feasible(nvars, std::move(rows), slack)) return true;
    }
    return false;
}

/// Does the semi-open set meet x - P, without materializing that polyhedron?
inline bool meets_reflected_translate(const SemiOpenPolyhedron& s, const ClosedPolyhedron& p,
                                      const Vec& x) {
    if (s.dim() != p.dim() || x.size() != p.dim())
        throw MismatchError("meets_reflected_translate: dimension mismatch");
    if (s.is_empty() || p.is_empty()) return false;
    const std::size_t d = s.dim(), nvars = d + 1, slack = d;
    const auto& lat = s.lattice();
    for (std::size_t i = 0; i < lat.faces().size(); ++i) {
        if (!s.face_flags()[i]) continue;
        std::vector<LpRow> rows;
        detail::append_ri_face_rows(rows, s.closure_poly(), lat.faces()[i], nvars, 0, slack);
        // y in s and x - y in p: each p-row <a, x - y> >= b becomes
        // <-a, y> >= b - <a, x>.
        detail::append_closed_rows(rows, p, nvars, 0, true, &x);
        if (detail::slack_lp_feasible(nvars, std::move(rows), slack)) return true;
    }
    return false;
}

/// Do two semi-open sets intersect?
inline bool meets(const SemiOpenPolyhedron& s, const SemiOpenPolyhedron& t) {
    if (s.dim() != t.dim()) throw MismatchError("meets: dimension mismatch");
    if (s.is_empty() || t.is_empty()) return false;
    const std::size_t d = s.dim(), nvars = d + 1, slack = d;
    for (std::size_t i = 0; i < s.lattice().faces().size(); ++i) {
        if (!s.face_flags()[i]) continue;
        for (std::size_t j = 0; j < t.lattice().faces().size(); ++j) {
            if (!t.face_flags()[j]) continue;
            std::vector<LpRow> rows;
            detail::append_ri_face_rows(rows, s.closure_poly(), s.lattice().faces()[i], nvars, 0,
                                        slack);
            detail::append_ri_face_rows(rows, t.closure_poly(), t.lattice().faces()[j], nvars, 0,
                                        slack);
            if (detail::slack_lp_feasible(nvars, std::move(rows), slack)) return true;
        }
    }
    return false;
}

inline SemiOpenPolyhedron intersect(const SemiOpenPolyhedron& a, const SemiOpenPolyhedron& b) {
    if (a.dim() != b.dim()) throw MismatchError("intersect: dimension mismatch");
    if (a.is_empty() || b.is_empty()) return SemiOpenPolyhedron::empty_set(a.dim());
    return SemiOpenPolyhedron::from_predicate(
        a.closure_poly().intersect(b.closure_poly()),
        [&](const Vec& x) { return a.member(x) && b.member(x); });
}

inline SemiOpenPolyhedron intersect(const SemiOpenPolyhedron& a, const ClosedPolyhedron& b) {
    if (a.dim() != b.dim()) throw MismatchError("intersect: dimension mismatch");
    if (a.is_empty() || b.is_empty()) return SemiOpenPolyhedron::empty_set(a.dim());
    return SemiOpenPolyhedron::from_predicate(a.closure_poly().intersect(b),
                                              [&](const Vec& x) { return a.member(x); });
}

/// Minkowski sum of a semi-open set and a closed polyhedron.
inline SemiOpenPolyhedron minkowski_sum(const SemiOpenPolyhedron& a, const ClosedPolyhedron& b) {
    if (a.dim() != b.dim()) throw MismatchError("minkowski_sum: dimension mismatch");
    if (a.is_empty() || b.is_empty()) return SemiOpenPolyhedron::empty_set(a.dim());
    return SemiOpenPolyhedron::from_predicate(
        a.closure_poly().minkowski(b),
        [&](const Vec& x) { return meets_reflected_translate(a, b, x); });
}

namespace detail {

/// Membership of x in the convex hull of a union of semi-open sets, decided
/// by descending into the minimal face of the hull of closures: a face is
/// extremal, so any convex combination landing in it draws all its points
/// from it, which restricts every part to the face.
inline bool convex_union_member(const Vec& x, std::vector<SemiOpenPolyhedron> parts) {
    for (;;) {
        std::vector<SemiOpenPolyhedron> live;
        for (auto& s : parts)
            if (!s.is_empty()) live.push_back(std::move(s));
        if (live.empty()) return false;
        std::vector<ClosedPolyhedron> closures;
        for (const auto& s : live) closures.push_back(s.closure_poly());
        const ClosedPolyhedron hull = ClosedPolyhedron::hull(closures);
        if (!hull.contains(x)) return false;
        const FaceId tight = hull.tight_set(x);
        if (tight.empty()) return true;
        const FaceLattice lat(hull);
        const ClosedPolyhedron facepoly =
            lat.face_polyhedron(lat.faces()[lat.index_of(tight)]);
        parts.clear();
        for (const auto& s : live) parts.push_back(intersect(s, facepoly));
    }
}

}  // namespace detail

/// Convex hull of a union of semi-open sets. Empty parts are dropped; the
/// result is empty only when every part is.
inline SemiOpenPolyhedron convex_union(const std::vector<SemiOpenPolyhedron>& parts) {
    if (parts.empty()) throw EmptySetError("convex_union: no parts");
    const std::size_t d = parts[0].dim();
    std::vector<SemiOpenPolyhedron> live;
    for (const auto& s : parts) {
        if (s.dim() != d) throw MismatchError("convex_union: dimension mismatch");
        if (!s.is_empty()) live.push_back(s);
    }
    if (live.empty()) return SemiOpenPolyhedron::empty_set(d);
    std::vector<ClosedPolyhedron> closures;
    for (const auto& s : live) closures.push_back(s.closure_poly());
    return SemiOpenPolyhedron::from_predicate(
        ClosedPolyhedron::hull(closures),
        [&](const Vec& x) { return detail::convex_union_member(x, live); });
}

/// Points expressible as a convex combination with strictly positive weight
/// on every part. Empty when any part is empty. Shares the closure and face
/// lattice with the convex union; a face is included iff it is included in
/// the union and every part meets the closed face.
inline SemiOpenPolyhedron mixture_hull(const std::vector<SemiOpenPolyhedron>& parts) {
    if (parts.empty()) throw EmptySetError("mixture_hull: no parts");
    const std::size_t d = parts[0].dim();
    for (const auto& s : parts) {
        if (s.dim() != d) throw MismatchError("mixture_hull: dimension mismatch");
        if (s.is_empty()) return SemiOpenPolyhedron::empty_set(d);
    }
    SemiOpenPolyhedron s = convex_union(parts);
    if (s.is_empty()) throw HardError("mixture_hull: union of nonempty parts came out empty");
    const auto& lat = s.lattice();
    for (std::size_t i = 0; i < s.flags_.size(); ++i) {
        if (!s.flags_[i]) continue;
        const ClosedPolyhedron fp = lat.face_polyhedron(lat.faces()[i]);
        for (const auto& part : parts) {
            if (!meets(part, fp)) {
                s.flags_[i] = 0;
                break;
            }
        }
    }
    if (!s.flags_[0]) throw HardError("mixture_hull: top face lost");
    if (!s.flags_valid()) throw HardError("mixture_hull: flagged faces are not convex");
    return s;
}

}  // namespace martsel
