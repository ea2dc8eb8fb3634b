#pragma once

#include <gmpxx.h>

#include "martsel/errors.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace martsel {

/// Exact rational scalar. GMP keeps values canonical (coprime, positive
/// denominator) through arithmetic, so equality is plain comparison.
using Rational = mpq_class;

/// Dense rational vector and matrix used throughout the kernel.
using Vec = std::vector<Rational>;
using Mat = std::vector<Vec>;

inline Rational rat(long num, long den = 1) {
    if (den == 0) throw InputError("rational with zero denominator");
    Rational q(num, den);
    q.canonicalize();
    return q;
}

/// Reduced copy of a scalar. GMP arithmetic keeps reduced inputs reduced, but
/// the two-argument mpq_class constructor does not reduce, and GMP equality
/// tests misreport on unreduced values (2/4 != 1/2). Kernel entry points pass
/// incoming scalars through here so stored data is always safe to compare.
inline Rational canonical(Rational q) {
    q.canonicalize();
    return q;
}

/// Reduced copy of a vector; see canonical(Rational).
inline Vec canonical(Vec v) {
    for (auto& x : v) x.canonicalize();
    return v;
}

/// Parses "p", "-p" or "p/q" with decimal digits only. Anything else is an
/// error; no whitespace, no floats.
inline Rational parse_rational(const std::string& text) {
    const auto bad = [&] { throw InputError("malformed rational: '" + text + "'"); };
    if (text.empty()) bad();
    std::size_t i = 0;
    if (text[i] == '-') ++i;
    std::size_t digits = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') { ++i; ++digits; }
    if (digits == 0) bad();
    if (i != text.size()) {
        if (text[i] != '/') bad();
        ++i;
        std::size_t den_digits = 0;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') { ++i; ++den_digits; }
        if (den_digits == 0 || i != text.size()) bad();
    }
    Rational q;
    if (q.set_str(text, 10) != 0) bad();
    if (q.get_den() == 0) bad();
    q.canonicalize();
    return q;
}

/// Canonical text form: "p" or "p/q" with q > 1.
inline std::string format_rational(const Rational& q) {
    return q.get_str();
}

inline Vec vec_of(std::initializer_list<long> entries) {
    Vec v;
    v.reserve(entries.size());
    for (long e : entries) v.push_back(rat(e));
    return v;
}

inline Rational dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw MismatchError("dot: size mismatch");
    Rational s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Vec add(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw MismatchError("add: size mismatch");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw MismatchError("sub: size mismatch");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scale(const Vec& a, const Rational& c) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

inline Vec negate(const Vec& a) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = -a[i];
    return r;
}

inline bool is_zero(const Vec& a) {
    for (const auto& x : a) if (x != 0) return false;
    return true;
}

inline Vec zero_vec(std::size_t n) { return Vec(n, Rational(0)); }

/// Lexicographic order, used everywhere canonical sorting is needed.
inline bool lex_less(const Vec& a, const Vec& b) {
    const std::size_t n = a.size() < b.size() ? a.size() : b.size();
    for (std::size_t i = 0; i < n; ++i) {
        int c = cmp(a[i], b[i]);
        if (c != 0) return c < 0;
    }
    return a.size() < b.size();
}

/// Scales a nonzero vector by a positive rational so that entries become
/// coprime integers. Direction is preserved, so this is the canonical
/// representative of a ray.
inline Vec primitive(const Vec& v) {
    mpz_class den_lcm = 1;
    for (const auto& x : v) {
        mpz_class d = x.get_den();
        mpz_class g;
        mpz_gcd(g.get_mpz_t(), den_lcm.get_mpz_t(), d.get_mpz_t());
        den_lcm = den_lcm / g * d;
    }
    mpz_class num_gcd = 0;
    std::vector<mpz_class> ints(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        mpq_class scaled = v[i] * Rational(den_lcm);
        scaled.canonicalize();
        ints[i] = scaled.get_num();
        mpz_gcd(num_gcd.get_mpz_t(), num_gcd.get_mpz_t(), ints[i].get_mpz_t());
    }
    if (num_gcd == 0) return zero_vec(v.size());
    Vec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = Rational(ints[i] / num_gcd);
    return r;
}

/// Primitive form with the first nonzero entry positive. Canonical
/// representative when both signs describe the same object (lines, equalities).
inline Vec primitive_signed(const Vec& v) {
    Vec r = primitive(v);
    for (const auto& x : r) {
        if (x > 0) return r;
        if (x < 0) return negate(r);
    }
    return r;
}

}  // namespace martsel
