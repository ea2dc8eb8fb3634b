#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "martsel/lp.hpp"
#include "martsel/polyhedron.hpp"
#include "martsel/rational.hpp"

using namespace martsel;

namespace {

Vec rv(std::initializer_list<long> xs) {
    Vec v;
    for (long x : xs) v.push_back(Rational(x));
    return v;
}

}  // namespace

TEST_CASE("bounded maximum at a vertex") {
    // max x + y subject to x <= 1, y <= 2, x >= 0, y >= 0.
    std::vector<LpRow> cons = {
        {rv({-1, 0}), Rational(-1), false},
        {rv({0, -1}), Rational(-2), false},
        {rv({1, 0}), Rational(0), false},
        {rv({0, 1}), Rational(0), false},
    };
    const auto r = solve_lp(2, cons, rv({1, 1}));
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == Rational(3));
    CHECK(r.x == rv({1, 2}));
}

TEST_CASE("free variables may go negative") {
    // max -x subject to x >= -5.
    std::vector<LpRow> cons = {{rv({1}), Rational(-5), false}};
    const auto r = solve_lp(1, cons, rv({-1}));
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == Rational(5));
    CHECK(r.x == rv({-5}));
}

TEST_CASE("infeasible system is detected") {
    std::vector<LpRow> cons = {
        {rv({1}), Rational(1), false},
        {rv({-1}), Rational(0), false},
    };
    const auto r = solve_lp(1, cons, rv({0}));
    CHECK(r.status == LpStatus::Infeasible);
    CHECK_FALSE(lp_feasible_point(1, cons).has_value());
}

TEST_CASE("unbounded objective is detected") {
    std::vector<LpRow> cons = {{rv({1}), Rational(0), false}};
    const auto r = solve_lp(1, cons, rv({1}));
    CHECK(r.status == LpStatus::Unbounded);
    CHECK(positive_optimum(r));
}

TEST_CASE("equality rows are honored") {
    // max x subject to x + y = 1, y >= 0, x >= -10.
    std::vector<LpRow> cons = {
        {rv({1, 1}), Rational(1), true},
        {rv({0, 1}), Rational(0), false},
        {rv({1, 0}), Rational(-10), false},
    };
    const auto r = solve_lp(2, cons, rv({1, 0}));
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == Rational(1));
    CHECK(r.x == rv({1, 0}));
}

TEST_CASE("exact rational optimum with awkward coefficients") {
    // max x subject to 3x <= 1 and 7x <= 2: optimum is min(1/3, 2/7) = 2/7.
    std::vector<LpRow> cons = {
        {rv({-3}), Rational(-1), false},
        {rv({-7}), Rational(-2), false},
        {rv({1}), Rational(0), false},
    };
    const auto r = solve_lp(1, cons, rv({1}));
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == Rational(2, 7));
}

TEST_CASE("degenerate constraints do not cycle") {
    // Many redundant constraints tight at the optimum.
    std::vector<LpRow> cons = {
        {rv({-1, -1}), Rational(-1), false}, {rv({-2, -2}), Rational(-2), false},
        {rv({-3, -3}), Rational(-3), false}, {rv({-1, 0}), Rational(-1), false},
        {rv({0, -1}), Rational(-1), false},  {rv({1, 0}), Rational(0), false},
        {rv({0, 1}), Rational(0), false},    {rv({-1, 1}), Rational(-1), false},
        {rv({1, -1}), Rational(-1), false},
    };
    const auto r = solve_lp(2, cons, rv({1, 1}));
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == Rational(1));
}

TEST_CASE("feasible point satisfies every row") {
    std::vector<LpRow> cons = {
        {rv({1, 2}), Rational(3), false},
        {rv({-1, 1}), Rational(-4), false},
        {rv({1, 1}), Rational(2), true},
    };
    const auto x = lp_feasible_point(2, cons);
    REQUIRE(x.has_value());
    CHECK(dot(cons[0].a, *x) >= cons[0].b);
    CHECK(dot(cons[1].a, *x) >= cons[1].b);
    CHECK(dot(cons[2].a, *x) == cons[2].b);
}

TEST_CASE("random bounded LPs agree with vertex enumeration") {
    // Independent cross-check: the simplex optimum over a random polytope must
    // equal the best objective value over the polytope's vertex set computed
    // by the double description method.
    std::mt19937 gen(2024);
    std::uniform_int_distribution<long> coef(-3, 3);
    int solved = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t d = 2 + static_cast<std::size_t>(trial % 2);
        std::vector<Halfspace> hs;
        // A box keeps everything bounded; extra random cuts create variety.
        for (std::size_t i = 0; i < d; ++i) {
            Vec e = zero_vec(d);
            e[i] = 1;
            hs.push_back({e, Rational(-4)});
            hs.push_back({negate(e), Rational(-4)});
        }
        for (int c = 0; c < 4; ++c) {
            Vec a(d);
            for (auto& x : a) x = Rational(coef(gen));
            hs.push_back({a, Rational(coef(gen))});
        }
        Vec obj(d);
        for (auto& x : obj) x = Rational(coef(gen));

        const auto poly = ClosedPolyhedron::from_hrep(d, hs, {});
        std::vector<LpRow> cons;
        for (const auto& h : hs) cons.push_back({h.a, h.b, false});
        const auto r = solve_lp(d, cons, obj);

        if (poly.is_empty()) {
            CHECK(r.status == LpStatus::Infeasible);
            continue;
        }
        REQUIRE(r.status == LpStatus::Optimal);
        ++solved;
        CHECK(poly.contains(r.x));
        Rational best;
        bool first = true;
        for (const auto& v : poly.points()) {
            const Rational val = dot(obj, v);
            if (first || val > best) best = val;
            first = false;
        }
        CHECK(r.value == best);
    }
    CHECK(solved > 20);
}

TEST_CASE("random feasibility agrees with the double description method") {
    std::mt19937 gen(77);
    std::uniform_int_distribution<long> coef(-2, 2);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t d = 2;
        std::vector<Halfspace> hs;
        for (int c = 0; c < 5; ++c) {
            Vec a(d);
            for (auto& x : a) x = Rational(coef(gen));
            hs.push_back({a, Rational(coef(gen))});
        }
        const auto poly = ClosedPolyhedron::from_hrep(d, hs, {});
        std::vector<LpRow> cons;
        for (const auto& h : hs) cons.push_back({h.a, h.b, false});
        const auto x = lp_feasible_point(d, cons);
        CHECK(x.has_value() == !poly.is_empty());
        if (x) CHECK(poly.contains(*x));
    }
}

TEST_CASE("unreduced row coefficients do not disturb the exact pivoting") {
    // maximize x subject to (2/4) x <= 1, stated with unreduced fractions.
    std::vector<LpRow> cons = {{Vec{Rational(-2, 4)}, Rational(-3, 3), false}};
    const auto r = solve_lp(1, cons, Vec{Rational(4, 4)});
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.x == Vec{rat(2)});
    CHECK(r.value == rat(2));
}
