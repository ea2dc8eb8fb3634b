#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "martsel/rational.hpp"

namespace martsel {

/// Reduced row echelon form in place. Returns the pivot column of each
/// surviving row; zero rows are removed. Exact, no pivot scaling concerns.
inline std::vector<std::size_t> rref(Mat& m) {
    std::vector<std::size_t> pivots;
    if (m.empty()) return pivots;
    const std::size_t cols = m[0].size();
    std::size_t row = 0;
    for (std::size_t col = 0; col < cols && row < m.size(); ++col) {
        std::size_t sel = row;
        while (sel < m.size() && m[sel][col] == 0) ++sel;
        if (sel == m.size()) continue;
        std::swap(m[row], m[sel]);
        const Rational inv = 1 / m[row][col];
        for (std::size_t j = col; j < cols; ++j) m[row][j] *= inv;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (i == row || m[i][col] == 0) continue;
            const Rational f = m[i][col];
            for (std::size_t j = col; j < cols; ++j) m[i][j] -= f * m[row][j];
        }
        pivots.push_back(col);
        ++row;
    }
    m.resize(row);
    return pivots;
}

inline std::size_t rank(Mat m) { return rref(m).size(); }

/// Basis of {x : Mx = 0} for an m-by-n matrix, via the standard free-variable
/// construction on the RREF. Deterministic ordering by free column.
inline std::vector<Vec> nullspace(Mat m, std::size_t n) {
    const std::vector<std::size_t> pivots = rref(m);
    std::vector<char> is_pivot(n, 0);
    for (std::size_t p : pivots) is_pivot[p] = 1;
    std::vector<Vec> basis;
    for (std::size_t free = 0; free < n; ++free) {
        if (is_pivot[free]) continue;
        Vec v = zero_vec(n);
        v[free] = 1;
        for (std::size_t r = 0; r < pivots.size(); ++r) v[pivots[r]] = -m[r][free];
        basis.push_back(std::move(v));
    }
    return basis;
}

/// One solution of Ax = b, or nullopt when the system is inconsistent.
inline std::optional<Vec> solve_linear(const Mat& a, const Vec& b, std::size_t n) {
    Mat aug(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aug[i] = a[i];
        aug[i].push_back(b[i]);
    }
    const std::vector<std::size_t> pivots = rref(aug);
    for (std::size_t r = 0; r < pivots.size(); ++r)
        if (pivots[r] == n) return std::nullopt;
    Vec x = zero_vec(n);
    for (std::size_t r = 0; r < pivots.size(); ++r) x[pivots[r]] = aug[r][n];
    return x;
}

/// Indices of a maximal linearly independent subset of the given rows,
/// greedily by row order (deterministic).
inline std::vector<std::size_t> independent_rows(const Mat& rows) {
    std::vector<std::size_t> chosen;
    Mat acc;
    std::size_t r = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        acc.push_back(rows[i]);
        if (rank(acc) > r) {
            ++r;
            chosen.push_back(i);
        } else {
            acc.pop_back();
        }
    }
    return chosen;
}

/// Exact inverse of a square matrix, or nullopt if singular.
inline std::optional<Mat> invert(const Mat& m) {
    const std::size_t n = m.size();
    Mat aug(n);
    for (std::size_t i = 0; i < n; ++i) {
        aug[i] = m[i];
        aug[i].resize(2 * n, Rational(0));
        aug[i][n + i] = 1;
    }
    const std::vector<std::size_t> pivots = rref(aug);
    if (pivots.size() != n) return std::nullopt;
    for (std::size_t i = 0; i < n; ++i)
        if (pivots[i] != i) return std::nullopt;
    Mat inv(n, zero_vec(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) inv[i][j] = aug[i][n + j];
    return inv;
}

/// Eliminates the pivot coordinates of `v` against RREF rows, optionally with
/// an attached right-hand column. Used to get canonical representatives
/// modulo a subspace or modulo equality constraints.
inline Vec reduce_against(Vec v, const Mat& rref_rows, const std::vector<std::size_t>& pivots) {
    for (std::size_t r = 0; r < rref_rows.size(); ++r) {
        const Rational f = v[pivots[r]];
        if (f == 0) continue;
        for (std::size_t j = 0; j < v.size() && j < rref_rows[r].size(); ++j)
            v[j] -= f * rref_rows[r][j];
    }
    return v;
}

}  // namespace martsel
