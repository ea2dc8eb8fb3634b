#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "martsel/serialize.hpp"

using namespace martsel;
using corpus::rv;

namespace {

/// Emitting, reloading, and emitting again must reproduce the text exactly.
template <class Emit, class Load>
std::string stable_text(Emit emit, Load load) {
    const Json first = emit();
    const std::string text = dump_json(first);
    const Json second = emit();
    CHECK(dump_json(second) == text);
    const Json reparsed = parse_json_text(text);
    const std::string again = dump_json(load(reparsed));
    CHECK(again == text);
    return text;
}

} // namespace

TEST_CASE("rationals serialize as canonical fraction strings") {
    CHECK(rational_to_json(rat(-7, 2)) == Json("-7/2"));
    CHECK(rational_to_json(rat(5)) == Json("5"));
    CHECK(rational_from_json(Json("22/7")) == rat(22, 7));
    CHECK(rational_from_json(Json("-3")) == rat(-3));
    CHECK_THROWS_AS(rational_from_json(Json(3.5)), InputError);
    CHECK_THROWS_AS(rational_from_json(Json("1/0")), InputError);

    const Vec v = {rat(1, 3), rat(-2), rat(0)};
    CHECK(vec_from_json(vec_to_json(v)) == v);
    CHECK_THROWS_AS(vec_from_json(Json("1/3")), InputError);
}

TEST_CASE("node keys round-trip and malformed keys are rejected") {
    const NodeId n{3, 14};
    CHECK(node_from_key(node_key(n)) == n);
    CHECK(node_key(n) == "3:14");
    CHECK_THROWS_AS(node_from_key("3"), InputError);
    CHECK_THROWS_AS(node_from_key(":2"), InputError);
    CHECK_THROWS_AS(node_from_key("3:"), InputError);
    CHECK_THROWS_AS(node_from_key("a:2"), InputError);
    CHECK_THROWS_AS(node_from_key("3:-2"), InputError);
    CHECK_THROWS_AS(index_from_key("x"), InputError);
    CHECK(index_from_key("17") == 17);
}

TEST_CASE("scenario trees round-trip with and without labels") {
    const ScenarioTree bare = corpus::comb_tree();
    CHECK(tree_from_json(tree_to_json(bare)) == bare);

    const ScenarioTree labeled(
        {{0, 0}}, {{"today"}, {"up", "down"}});
    const ScenarioTree back = tree_from_json(tree_to_json(labeled));
    CHECK(back == labeled);
    CHECK(back.label(NodeId{1, 1}) == "down");

    stable_text([&] { return tree_to_json(labeled); },
                [](const Json& j) { return tree_to_json(tree_from_json(j)); });

    CHECK_THROWS_AS(tree_from_json(Json::object()), InputError);
}

TEST_CASE("closed polyhedra round-trip through both descriptions") {
    const std::vector<ClosedPolyhedron> samples = {
        ClosedPolyhedron::empty_set(2),
        ClosedPolyhedron::single_point(rv({3, -1})),
        ClosedPolyhedron::box({rat(-1), rat(0)}, {rat(1), rat(2)}),
        ClosedPolyhedron::cone_from_rays(2, {rv({1, 0}), rv({1, 1})}),
        ClosedPolyhedron::cone_from_rays(3, {rv({1, 0, 0})}, {rv({0, 1, 1})}),
        ClosedPolyhedron::full_space(2),
    };
    for (const ClosedPolyhedron& p : samples) {
        CAPTURE(dump_json(poly_to_json(p)));
        const ClosedPolyhedron back = poly_from_json(poly_to_json(p));
        CHECK(back.equals(p));
        stable_text([&] { return poly_to_json(p); },
                    [](const Json& j) { return poly_to_json(poly_from_json(j)); });
    }

    SUBCASE("loading from facet rows alone reproduces the set") {
        const ClosedPolyhedron box = ClosedPolyhedron::box({rat(0)}, {rat(1)});
        Json j = poly_to_json(box);
        j.erase("vrep");
        CHECK(poly_from_json(j).equals(box));
    }

    SUBCASE("a facet row that disagrees with the generators is rejected") {
        const ClosedPolyhedron box = ClosedPolyhedron::box({rat(0)}, {rat(1)});
        Json j = poly_to_json(box);
        REQUIRE(j.at("hrep").size() == 2);
        j["hrep"][0]["offset"] = "1/7";
        CHECK_THROWS_WITH_AS(static_cast<void>(poly_from_json(j)),
                             doctest::Contains("does not describe the same set"), InputError);
        Json shorter = poly_to_json(box);
        shorter["hrep"].erase(1);
        CHECK_THROWS_AS(static_cast<void>(poly_from_json(shorter)), InputError);
    }

    SUBCASE("malformed documents are rejected") {
        CHECK_THROWS_AS(poly_from_json(Json::object()), InputError);
        Json nodescr;
        nodescr["dim"] = 2;
        CHECK_THROWS_AS(poly_from_json(nodescr), InputError);
        Json badrel = poly_to_json(ClosedPolyhedron::box({rat(0)}, {rat(1)}));
        badrel["hrep"][0]["relation"] = "<=";
        CHECK_THROWS_AS(poly_from_json(badrel), InputError);
    }
}

TEST_CASE("semi-open polyhedra round-trip in every kind") {
    const ClosedPolyhedron box = ClosedPolyhedron::box({rat(0)}, {rat(1)});
    const std::vector<SemiOpenPolyhedron> samples = {
        SemiOpenPolyhedron::empty_set(2),
        SemiOpenPolyhedron::from_closed(box),
        SemiOpenPolyhedron::relatively_open(box),
        corpus::open_ray(2, rv({1, 3})),
        // Half-open interval [0,1): the left endpoint is in, the right is out.
        SemiOpenPolyhedron::from_predicate(box, [](const Vec& x) { return x[0] < rat(1); }),
    };
    for (const SemiOpenPolyhedron& s : samples) {
        CAPTURE(dump_json(semi_to_json(s)));
        const SemiOpenPolyhedron back = semi_from_json(semi_to_json(s));
        CHECK(back.equals(s));
        stable_text([&] { return semi_to_json(s); },
                    [](const Json& j) { return semi_to_json(semi_from_json(j)); });
    }

    SUBCASE("the half-open interval lists faces explicitly") {
        const Json j = semi_to_json(samples.back());
        CHECK(j.at("kind") == Json("faces"));
        CHECK(j.contains("faces"));
    }

    SUBCASE("face flags that break convexity are rejected") {
        // Claim only the two endpoints of [0,1] without the segment between.
        Json j = semi_to_json(samples.back());
        for (Json& f : j["faces"])
            f["included"] = f.at("tight").size() == 1;
        CHECK_THROWS_AS(semi_from_json(j), InputError);
    }

    SUBCASE("unknown kinds and missing closures are rejected") {
        Json j;
        j["dim"] = 1;
        j["kind"] = "open";
        CHECK_THROWS_AS(semi_from_json(j), InputError);
        j["kind"] = "closed";
        CHECK_THROWS_AS(semi_from_json(j), InputError);
    }
}

TEST_CASE("measures and adapted processes round-trip on their tree") {
    const ScenarioTree tree = ScenarioTree::uniform(2, 2);
    const FiniteMeasure q(tree, {{0, rat(1, 6)}, {2, rat(1, 3)}, {3, rat(1, 2)}});
    CHECK(measure_from_json(measure_to_json(q), tree) == q);
    stable_text([&] { return measure_to_json(q); },
                [&](const Json& j) { return measure_to_json(measure_from_json(j, tree)); });

    AdaptedProcess x(tree);
    x.set({0, 0}, rv({1, 2}));
    x.set({2, 3}, rv({-1, 0}));
    const AdaptedProcess back = process_from_json(process_to_json(x), tree);
    CHECK(back.defined_nodes() == x.defined_nodes());
    CHECK(back.at({2, 3}) == x.at({2, 3}));

    Json off_tree = process_to_json(x);
    off_tree["9:9"] = vec_to_json(rv({0, 0}));
    CHECK_THROWS_AS(process_from_json(off_tree, tree), InputError);

    Json bad_mass = measure_to_json(q);
    bad_mass["leaf_weights"]["0"] = "1/7";
    CHECK_THROWS_AS(measure_from_json(bad_mass, tree), InputError);
}

TEST_CASE("selection problems round-trip and keep their verdicts") {
    for (const MspInstance& inst :
         {corpus::gapped_fan(), corpus::lifted_gapped_fan(), corpus::binomial_msp(),
          corpus::ri_counterexample()}) {
        const std::string text =
            stable_text([&] { return msp_to_json(inst); },
                        [](const Json& j) { return msp_to_json(msp_from_json(j)); });
        const MspInstance back = msp_from_json(parse_json_text(text));
        CHECK(back.dim == inst.dim);
        CHECK(back.conical == inst.conical);
        CHECK(back.tree == inst.tree);
        CHECK(is_solvable(back) == is_solvable(inst));
        const WTable wa = compute_W(inst);
        const WTable wb = compute_W(back);
        for (const NodeId& n : inst.tree.all_nodes()) CHECK(wb.at(n).equals(wa.at(n)));
    }

    SUBCASE("missing node blocks are rejected") {
        Json j = msp_to_json(corpus::gapped_fan());
        j["nodes"].erase("1:2");
        CHECK_THROWS_AS(msp_from_json(j), InputError);
    }

    SUBCASE("the W table serializes one set per node") {
        const MspInstance inst = corpus::binomial_msp();
        const Json j = wtable_to_json(compute_W(inst));
        for (const NodeId& n : inst.tree.all_nodes()) CHECK(j.contains(node_key(n)));
    }
}

TEST_CASE("market models round-trip byte for byte") {
    const FrictionlessModel fm = corpus::binomial_market();
    stable_text([&] { return frictionless_to_json(fm); },
                [](const Json& j) { return frictionless_to_json(frictionless_from_json(j)); });
    const FrictionlessModel fback = frictionless_from_json(frictionless_to_json(fm));
    CHECK(fback.assets == fm.assets);
    CHECK(fback.S.at({1, 1}) == fm.S.at({1, 1}));

    const KabanovModel km = corpus::kabanov_overlap();
    stable_text([&] { return kabanov_to_json(km); },
                [](const Json& j) { return kabanov_to_json(kabanov_from_json(j)); });
    CHECK(kabanov_from_json(kabanov_to_json(km)).K.at({1, 0}).equals(km.K.at({1, 0})));

    const CostModel cm = corpus::cost_spread();
    stable_text([&] { return cost_to_json(cm); },
                [](const Json& j) { return cost_to_json(cost_from_json(j)); });
    const CostModel cback = cost_from_json(cost_to_json(cm));
    CHECK(cback.S.at({1, 0}).size() == cm.S.at({1, 0}).size());
    CHECK(evaluate_max_affine(cback.S.at({1, 0}), rv({2})) ==
          evaluate_max_affine(cm.S.at({1, 0}), rv({2})));

    CHECK(document_type(frictionless_to_json(fm)) == "frictionless");
    CHECK(document_type(kabanov_to_json(km)) == "kabanov");
    CHECK(document_type(cost_to_json(cm)) == "cost");
    CHECK_THROWS_AS(frictionless_from_json(kabanov_to_json(km)), InputError);
}

TEST_CASE("solutions and strategies round-trip against their instance") {
    const MspInstance inst = corpus::binomial_msp();
    const Solution sol = build_local_solution(inst, NodeId{0, 0});
    REQUIRE(verify_solution(inst, sol).ok);
    const std::string text =
        stable_text([&] { return solution_to_json(sol); },
                    [&](const Json& j) {
                        return solution_to_json(solution_from_json(j, inst.tree));
                    });
    const Solution back = solution_from_json(parse_json_text(text), inst.tree);
    CHECK(verify_solution(inst, back).ok);
    CHECK(back.anchor == sol.anchor);
    CHECK(back.Q == sol.Q);

    Strategy s;
    s.model = ModelKind::Frictionless;
    s.initial_capital = rat(0);
    s.h = AdaptedProcess(inst.tree);
    for (const NodeId& n : inst.tree.all_nodes()) s.h.set(n, rv({1}));
    const Strategy sback = strategy_from_json(strategy_to_json(s), inst.tree);
    CHECK(sback.model == s.model);
    CHECK(sback.initial_capital == s.initial_capital);
    CHECK(sback.h.at({1, 1}) == s.h.at({1, 1}));
    CHECK_THROWS_AS(model_kind_from_name("binomial"), InputError);
}

TEST_CASE("frictionless verdict documents re-check bit for bit") {
    SUBCASE("arbitrage document") {
        const FrictionlessModel m = corpus::sure_win_market();
        const FtapResult r = frictionless_ftap(m);
        REQUIRE_FALSE(r.arbitrage_free);
        const Json doc = certificate_document(m, r);
        CHECK(dump_json(certificate_document(m, r)) == dump_json(doc));
        CHECK(check_certificate_document(doc).ok);

        SUBCASE("perturbing one replayed value names the replay section") {
            Json bad = doc;
            const std::string leaf = bad["replay"]["terminal"].begin().key();
            bad["replay"]["terminal"][leaf] = "99";
            const VerificationReport rep = check_certificate_document(bad);
            CHECK_FALSE(rep.ok);
            CHECK(rep.details.find("replay") != std::string::npos);
        }

        SUBCASE("perturbing the strategy is caught by recomputation") {
            Json bad = doc;
            bad["certificate"]["strategy"]["h"]["0:0"][0] = "7/3";
            const VerificationReport rep = check_certificate_document(bad);
            CHECK_FALSE(rep.ok);
            CHECK(rep.details.find("replay") != std::string::npos);
        }

        SUBCASE("flipping the verdict is rejected") {
            Json bad = doc;
            bad["verdict"] = "no-arbitrage";
            CHECK_FALSE(check_certificate_document(bad).ok);
        }

        SUBCASE("extra sections are rejected") {
            Json bad = doc;
            bad["note"] = "tampered";
            const VerificationReport rep = check_certificate_document(bad);
            CHECK_FALSE(rep.ok);
            CHECK(rep.details.find("unexpected section") != std::string::npos);
        }
    }

    SUBCASE("no-arbitrage document") {
        const FrictionlessModel m = corpus::binomial_market();
        const FtapResult r = frictionless_ftap(m);
        REQUIRE(r.arbitrage_free);
        const Json doc = certificate_document(m, r);
        CHECK(check_certificate_document(doc).ok);
        CHECK(doc.at("replay").contains("drifts"));

        SUBCASE("perturbing the selection breaks the drift table") {
            Json bad = doc;
            Json& xi = bad["price_systems"][0]["xi"];
            const std::string node = xi.begin().key();
            xi[node][0] = "355/113";
            const VerificationReport rep = check_certificate_document(bad);
            CHECK_FALSE(rep.ok);
        }

        SUBCASE("perturbing a stored drift is caught") {
            Json bad = doc;
            Json& drifts = bad["replay"]["drifts"][0];
            const std::string node = drifts.begin().key();
            drifts[node][0] = "1/1000000";
            const VerificationReport rep = check_certificate_document(bad);
            CHECK_FALSE(rep.ok);
            CHECK(rep.details.find("replay") != std::string::npos);
        }

        SUBCASE("perturbing a measure weight is caught") {
            Json bad = doc;
            Json& w = bad["price_systems"][0]["Q"]["leaf_weights"];
            w[w.begin().key()] = "1/97";
            CHECK_FALSE(check_certificate_document(bad).ok);
        }
    }
}

TEST_CASE("solvency-cone verdict documents re-check bit for bit") {
    SUBCASE("no-arbitrage with overlapping bands") {
        const KabanovModel m = corpus::kabanov_overlap();
        const FtapResult r = kabanov_ftap(m);
        REQUIRE(r.arbitrage_free);
        const Json doc = certificate_document(m, r);
        CHECK(check_certificate_document(doc).ok);
    }

    SUBCASE("arbitrage with disjoint bands") {
        const KabanovModel m = corpus::kabanov_disjoint();
        const FtapResult r = kabanov_ftap(m);
        REQUIRE_FALSE(r.arbitrage_free);
        const Json doc = certificate_document(m, r);
        CHECK(doc.at("replay").contains("transfers"));
        CHECK(check_certificate_document(doc).ok);

        SUBCASE("perturbing a transfer is caught") {
            Json bad = doc;
            Json& t = bad["replay"]["transfers"];
            t[t.begin().key()][0] = "13/11";
            const VerificationReport rep = check_certificate_document(bad);
            CHECK_FALSE(rep.ok);
            CHECK(rep.details.find("replay") != std::string::npos);
        }

        SUBCASE("perturbing the enlarged cones is caught semantically") {
            Json bad = doc;
            Json& khat = bad["certificate"]["K_hat"];
            // Replace the first enlarged cone by a tiny ray so domination
            // and the replay containment fail.
            khat[khat.begin().key()] =
                poly_to_json(ClosedPolyhedron::cone_from_rays(2, {rv({1, 0})}));
            CHECK_FALSE(check_certificate_document(bad).ok);
        }
    }
}

TEST_CASE("cost verdict documents replay at three scales") {
    SUBCASE("scalable arbitrage") {
        const CostModel m = corpus::cost_sure_win();
        const FtapResult r = cost_ftap(m);
        REQUIRE_FALSE(r.arbitrage_free);
        const Json doc = certificate_document(m, r);
        CHECK(doc.at("replay").contains("terminal"));
        CHECK(doc.at("replay").at("terminal_scaled").contains("2"));
        CHECK(doc.at("replay").at("terminal_scaled").contains("10"));
        CHECK(check_certificate_document(doc).ok);

        SUBCASE("the scaled tables really scale") {
            const Json& rep = doc.at("replay");
            for (const auto& [leaf, val] : rep.at("terminal").items()) {
                const Rational base = parse_rational(val.get<std::string>());
                const Rational twice = parse_rational(
                    rep.at("terminal_scaled").at("2").at(leaf).get<std::string>());
                CHECK(twice == base * 2);
            }
        }

        SUBCASE("perturbing a scaled table is caught") {
            Json bad = doc;
            Json& t = bad["replay"]["terminal_scaled"]["10"];
            t[t.begin().key()] = "0";
            const VerificationReport rep = check_certificate_document(bad);
            CHECK_FALSE(rep.ok);
            CHECK(rep.details.find("replay") != std::string::npos);
        }
    }

    SUBCASE("no arbitrage under overlapping spreads") {
        const CostModel m = corpus::cost_spread();
        const FtapResult r = cost_ftap(m);
        REQUIRE(r.arbitrage_free);
        const Json doc = certificate_document(m, r);
        CHECK(check_certificate_document(doc).ok);
    }
}

TEST_CASE("json files write and read back exactly") {
    const std::string path = "serialize_roundtrip_scratch.json";
    const Json doc = msp_to_json(corpus::gapped_fan());
    write_json_file(path, doc);
    const Json back = read_json_file(path);
    CHECK(dump_json(back) == dump_json(doc));
    CHECK_THROWS_AS(read_json_file("does/not/exist.json"), InputError);
    CHECK_THROWS_AS(parse_json_text("{ not json"), InputError);
    std::remove(path.c_str());
}
