#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "martsel/errors.hpp"
#include "martsel/rational.hpp"

namespace martsel {

/// One linear constraint on free variables: <a, x> >= b, or == b when eq.
struct LpRow {
    Vec a;
    Rational b;
    bool eq = false;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    Vec x;           // a maximizer (Optimal) or a feasible point (Unbounded)
    Rational value;  // objective at x (meaningful for Optimal only)
};

/// True when the supremum of the objective is strictly positive. Unbounded
/// counts: the objective exceeds every threshold.
inline bool positive_optimum(const LpResult& r) {
    return r.status == LpStatus::Unbounded || (r.status == LpStatus::Optimal && r.value > 0);
}

namespace detail {

/// Dense exact simplex tableau. Bland's rule everywhere, so termination is
/// guaranteed and no tolerances exist anywhere.
class Simplex {
  public:
    std::vector<Vec> rows;
    Vec rhs;
    std::vector<std::size_t> basis;
    Vec zrow;
    Rational zval;
    std::size_t ncols = 0;

    void pivot(std::size_t i, std::size_t j) {
        const Rational piv = rows[i][j];
        for (auto& v : rows[i]) v /= piv;
        rhs[i] /= piv;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (k == i || rows[k][j] == 0) continue;
            const Rational f = rows[k][j];
            for (std::size_t c = 0; c < ncols; ++c) rows[k][c] -= f * rows[i][c];
            rhs[k] -= f * rhs[i];
        }
        if (zrow[j] != 0) {
            const Rational f = zrow[j];
            for (std::size_t c = 0; c < ncols; ++c) zrow[c] -= f * rows[i][c];
            zval += f * rhs[i];
        }
        basis[i] = j;
    }

    /// Runs to optimality (true) or detects an unbounded objective (false).
    bool iterate(std::size_t col_limit) {
        for (;;) {
            std::size_t enter = col_limit;
            for (std::size_t j = 0; j < col_limit; ++j) {
                if (zrow[j] > 0) { enter = j; break; }
            }
            if (enter == col_limit) return true;
            std::size_t leave = rows.size();
            Rational best;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i][enter] <= 0) continue;
                const Rational ratio = rhs[i] / rows[i][enter];
                if (leave == rows.size() || ratio < best ||
                    (ratio == best && basis[i] < basis[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave == rows.size()) return false;
            pivot(leave, enter);
        }
    }
};

}  // namespace detail

/// Maximizes <objective, x> subject to the rows, x free. Two-phase exact
/// simplex: free variables split into positive parts, surplus variables for
/// inequalities, artificial start.
inline LpResult solve_lp(std::size_t nvars, const std::vector<LpRow>& cons, const Vec& objective) {
    if (objective.size() != nvars) throw MismatchError("solve_lp: objective size");
    const std::size_t m = cons.size();
    std::size_t nge = 0;
    for (const auto& r : cons) {
        if (r.a.size() != nvars) throw MismatchError("solve_lp: row size");
        if (!r.eq) ++nge;
    }
    // Columns: u (nvars), v (nvars), surplus (nge), artificial (m).
    const std::size_t nu = nvars, nv = nvars;
    const std::size_t nstruct = nu + nv + nge;
    const std::size_t ncols = nstruct + m;

    detail::Simplex t;
    t.ncols = ncols;
    t.rows.assign(m, zero_vec(ncols));
    t.rhs = zero_vec(m);
    t.basis.resize(m);
    std::size_t surplus = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const bool flip = cons[i].b < 0;
        const Rational sgn = flip ? -1 : 1;
        for (std::size_t j = 0; j < nvars; ++j) {
            t.rows[i][j] = sgn * cons[i].a[j];
            t.rows[i][nu + j] = -sgn * cons[i].a[j];
        }
        if (!cons[i].eq) {
            t.rows[i][nu + nv + surplus] = -sgn;
            ++surplus;
        }
        t.rows[i][nstruct + i] = 1;
        t.rhs[i] = sgn * cons[i].b;
        t.basis[i] = nstruct + i;
    }
    // The exact pivoting below compares entries for equality, which requires
    // reduced fractions; caller-supplied rows may not be reduced.
    for (std::size_t i = 0; i < m; ++i) {
        for (auto& c : t.rows[i]) c.canonicalize();
        t.rhs[i].canonicalize();
    }

    // Phase 1: maximize minus the sum of artificials.
    t.zrow = zero_vec(ncols);
    t.zval = 0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < nstruct; ++j) t.zrow[j] += t.rows[i][j];
        t.zval -= t.rhs[i];
    }
    if (!t.iterate(nstruct)) throw HardError("simplex: phase 1 unbounded");
    if (t.zval != 0) return LpResult{LpStatus::Infeasible, {}, 0};

    // Drive leftover artificials out of the basis; redundant rows are dropped.
    for (std::size_t i = t.rows.size(); i-- > 0;) {
        if (t.basis[i] < nstruct) continue;
        std::size_t j = nstruct;
        for (std::size_t c = 0; c < nstruct; ++c) {
            if (t.rows[i][c] != 0) { j = c; break; }
        }
        if (j < nstruct) {
            t.pivot(i, j);
        } else {
            t.rows.erase(t.rows.begin() + static_cast<std::ptrdiff_t>(i));
            t.rhs.erase(t.rhs.begin() + static_cast<std::ptrdiff_t>(i));
            t.basis.erase(t.basis.begin() + static_cast<std::ptrdiff_t>(i));
        }
    }

    // Phase 2: true objective (u positive part, v negative part).
    Vec cost = zero_vec(ncols);
    for (std::size_t j = 0; j < nvars; ++j) {
        cost[j] = canonical(objective[j]);
        cost[nu + j] = -cost[j];
    }
    t.zrow = cost;
    t.zval = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const Rational cb = cost[t.basis[i]];
        if (cb == 0) continue;
        for (std::size_t c = 0; c < ncols; ++c) t.zrow[c] -= cb * t.rows[i][c];
        t.zval += cb * t.rhs[i];
    }
    const bool optimal = t.iterate(nstruct);

    Vec x = zero_vec(nvars);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.basis[i] < nu) x[t.basis[i]] += t.rhs[i];
        else if (t.basis[i] < nu + nv) x[t.basis[i] - nu] -= t.rhs[i];
    }
    if (!optimal) return LpResult{LpStatus::Unbounded, std::move(x), 0};
    return LpResult{LpStatus::Optimal, std::move(x), t.zval};
}

/// Feasibility query: a point satisfying all rows, or nullopt.
inline std::optional<Vec> lp_feasible_point(std::size_t nvars, const std::vector<LpRow>& cons) {
    LpResult r = solve_lp(nvars, cons, zero_vec(nvars));
    if (r.status == LpStatus::Infeasible) return std::nullopt;
    return r.x;
}

}  // namespace martsel
