#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "martsel/serialize.hpp"

using namespace martsel;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Runs the installed command-line binary with the given arguments and
/// captures exit code, stdout, and stderr.
RunResult run_cli(const std::string& args) {
    const std::string out_path = "cli_stdout.tmp";
    const std::string err_path = "cli_stderr.tmp";
    const std::string cmd =
        std::string(MARTSEL_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return r;
}

std::string fixture(const std::string& name) {
    return std::string(MARTSEL_FIXTURE_DIR) + "/" + name;
}

Json report_of(const RunResult& r) { return parse_json_text(r.out); }

} // namespace

TEST_CASE("solve reports the failure node of an unsolvable instance") {
    const RunResult r = run_cli("solve --input " + fixture("example45.inst"));
    CHECK(r.exit_code == 2);
    const Json rep = report_of(r);
    CHECK(rep.at("verdict") == Json("unsolvable"));
    CHECK(rep.at("failure") == Json("0:0"));
    CHECK(rep.at("message").get<std::string>().find("0:0") != std::string::npos);
}

TEST_CASE("solve constructs verified solutions at requested anchors") {
    const RunResult r = run_cli("solve --input " + fixture("interior_collapse.inst") +
                                " --node 0:0 --node 2:0");
    CHECK(r.exit_code == 0);
    const Json rep = report_of(r);
    CHECK(rep.at("verdict") == Json("solvable"));
    REQUIRE(rep.at("solutions").size() == 2);
    for (const Json& s : rep.at("solutions")) {
        CHECK(s.at("verified") == Json(true));
        CHECK(s.at("solution").contains("Q"));
    }
    CHECK(rep.at("solutions")[1].at("anchor") == Json("2:0"));
}

TEST_CASE("solve emits both recursion tables on request") {
    const RunResult r =
        run_cli("solve --input " + fixture("interior_collapse.inst") + " --emit-w-tables");
    CHECK(r.exit_code == 0);
    const Json rep = report_of(r);
    const Json& tables = rep.at("w_tables");
    // The instance is solvable, yet the interior variant of the recursion
    // collapses at the root: the standard table must stay nonempty while
    // the interior table goes empty there.
    CHECK(tables.at("W").at("0:0").at("kind") != Json("empty"));
    CHECK(tables.at("w_ri").at("0:0").at("kind") == Json("empty"));
}

TEST_CASE("ftap prices the binomial market with the one-third measure") {
    const RunResult r = run_cli("ftap --input " + fixture("binomial.fl"));
    CHECK(r.exit_code == 0);
    const Json rep = report_of(r);
    CHECK(rep.at("verdict") == Json("no-arbitrage"));
    REQUIRE(rep.at("price_systems").size() == 1);
    const Json& system = rep.at("price_systems")[0];
    const Json& weights = system.at("Q").at("leaf_weights");
    const Json& xi = system.at("xi");

    // The pricing measure is the density-weighted reweighting of Q: each xi
    // vector is (z, z * S), so P(leaf) = Q(leaf) * z(leaf) / z(root).
    const Rational z_root = parse_rational(xi.at("0:0")[0].get<std::string>());
    REQUIRE(z_root > 0);
    const FrictionlessModel market =
        frictionless_from_json(read_json_file(fixture("binomial.fl")));
    Rational total = rat(0);
    for (NodeId leaf : market.tree.children(NodeId{0, 0})) {
        const Rational q =
            parse_rational(weights.at(std::to_string(leaf.index)).get<std::string>());
        const Rational z = parse_rational(xi.at(node_key(leaf))[0].get<std::string>());
        const Rational p = q * z / z_root;
        total += p;
        // The up-move doubles the unit start price; the pricing measure must
        // give it exactly one third no matter how Q and z split the product.
        if (market.S.at(leaf)[0] == rat(2)) {
            CHECK(p == rat(1, 3));
        } else {
            REQUIRE(market.S.at(leaf)[0] == rat(1, 2));
            CHECK(p == rat(2, 3));
        }
    }
    CHECK(total == rat(1));
}

TEST_CASE("ftap certifies arbitrage in the sure-win market") {
    const RunResult r = run_cli("ftap --input " + fixture("sure_win.fl"));
    CHECK(r.exit_code == 2);
    const Json rep = report_of(r);
    CHECK(rep.at("verdict") == Json("arbitrage"));
    CHECK(rep.contains("certificate"));
    CHECK(rep.at("certificate").at("strategy").at("initial_capital") == Json("0"));
}

TEST_CASE("emitted verdict documents verify, tampered ones are rejected by name") {
    const std::string cert_path = "cli_scratch.cert";
    const RunResult emit = run_cli("ftap --input " + fixture("bands_disjoint.kab") +
                                   " --emit-certificate " + cert_path + " --out cli_scratch_report.json");
    REQUIRE(emit.exit_code == 2);

    const RunResult ok = run_cli("verify --input " + cert_path);
    CHECK(ok.exit_code == 0);
    CHECK(report_of(ok).at("ok") == Json(true));

    Json doc = read_json_file(cert_path);
    const std::string leaf = doc.at("replay").at("terminal").begin().key();
    doc["replay"]["terminal"][leaf][0] = "77/6";
    const std::string bad_path = "cli_scratch_bad.cert";
    write_json_file(bad_path, doc);
    const RunResult bad = run_cli("verify --input " + bad_path);
    CHECK(bad.exit_code == 1);
    const Json rep = report_of(bad);
    CHECK(rep.at("ok") == Json(false));
    CHECK(rep.at("violated").get<std::string>().find("replay") != std::string::npos);
    CHECK(bad.err.find("replay") != std::string::npos);

    std::remove(cert_path.c_str());
    std::remove(bad_path.c_str());
    std::remove("cli_scratch_report.json");
}

TEST_CASE("cost documents carry scaled replays and verify") {
    const std::string cert_path = "cli_scratch_cost.cert";
    const RunResult emit = run_cli("ftap --input " + fixture("sure_win.cost") +
                                   " --emit-certificate " + cert_path);
    REQUIRE(emit.exit_code == 2);
    const Json doc = read_json_file(cert_path);
    CHECK(doc.at("replay").at("terminal_scaled").contains("2"));
    CHECK(doc.at("replay").at("terminal_scaled").contains("10"));
    const RunResult ok = run_cli("verify --input " + cert_path);
    CHECK(ok.exit_code == 0);
    std::remove(cert_path.c_str());

    const RunResult clean = run_cli("ftap --input " + fixture("spread.cost"));
    CHECK(clean.exit_code == 0);
}

TEST_CASE("the oracle subcommand diffs the exhaustive search against the solver") {
    SUBCASE("conical selection problem") {
        const RunResult r = run_cli("oracle --input " + fixture("example45_lifted.inst"));
        CHECK(r.exit_code == 2);
        const Json rep = report_of(r);
        CHECK(rep.at("diff").at("agree") == Json(true));
        const Json& root = rep.at("diff").at("nodes").at("0:0");
        CHECK(root.at("admissible_set_nonempty") == Json(false));
        CHECK(root.at("anchored_witness") == Json(true));
    }

    SUBCASE("markets, including the legitimate boundary") {
        const RunResult agree = run_cli("oracle --input " + fixture("bands_disjoint.kab"));
        CHECK(agree.exit_code == 2);
        CHECK(report_of(agree).at("diff").at("agree") == Json(true));

        const RunResult boundary = run_cli("oracle --input " + fixture("bands_touching.kab"));
        CHECK(boundary.exit_code == 2);
        const Json rep = report_of(boundary);
        CHECK(rep.at("diff").at("boundary_case") == Json(true));
        CHECK(rep.at("diff").at("inconsistent") == Json(false));
    }

    SUBCASE("the search refuses instances outside its assumptions") {
        const RunResult r = run_cli("oracle --input " + fixture("example45.inst"));
        CHECK(r.exit_code == 1);
        CHECK(r.err.find("conical") != std::string::npos);
    }
}

TEST_CASE("cross-check embeds the diff without changing the verdict code") {
    const RunResult r = run_cli("ftap --input " + fixture("bands_overlap.kab") + " --cross-check");
    CHECK(r.exit_code == 0);
    const Json rep = report_of(r);
    CHECK(rep.at("cross_check").at("agree") == Json(true));

    // Non-conical instances cannot be cross-checked; the verdict must
    // still be delivered, with the skip recorded.
    const RunResult skip =
        run_cli("solve --input " + fixture("interior_collapse.inst") + " --cross-check");
    CHECK(skip.exit_code == 0);
    CHECK(report_of(skip).at("cross_check").contains("skipped"));
}

TEST_CASE("input errors exit with code one") {
    SUBCASE("missing file") {
        const RunResult r = run_cli("solve --input no_such_file.inst");
        CHECK(r.exit_code == 1);
        CHECK(r.err.find("cannot open") != std::string::npos);
    }

    SUBCASE("type mismatch against --model") {
        const RunResult r =
            run_cli("ftap --input " + fixture("example45.inst") + " --model frictionless");
        CHECK(r.exit_code == 1);
        CHECK(r.err.find("--model") != std::string::npos);
    }

    SUBCASE("wrong command for the input type") {
        const RunResult r = run_cli("solve --input " + fixture("binomial.fl"));
        CHECK(r.exit_code == 1);
        const RunResult r2 = run_cli("ftap --input " + fixture("example45.inst"));
        CHECK(r2.exit_code == 1);
    }

    SUBCASE("malformed flags") {
        CHECK(run_cli("solve").exit_code == 1);
        CHECK(run_cli("frobnicate --input x").exit_code == 1);
        CHECK(run_cli("solve --input " + fixture("example45.inst") + " --model binomial")
                  .exit_code == 1);
    }

    SUBCASE("corrupt json") {
        const std::string path = "cli_scratch_corrupt.inst";
        std::ofstream(path) << "{ not json";
        const RunResult r = run_cli("solve --input " + path);
        CHECK(r.exit_code == 1);
        CHECK(r.err.find("not valid JSON") != std::string::npos);
        std::remove(path.c_str());
    }
}

TEST_CASE("reports can be routed to a file") {
    const std::string path = "cli_scratch_routed.json";
    const RunResult r =
        run_cli("solve --input " + fixture("example45.inst") + " --out " + path);
    CHECK(r.exit_code == 2);
    CHECK(r.out.find("report written") != std::string::npos);
    const Json rep = read_json_file(path);
    CHECK(rep.at("failure") == Json("0:0"));
    std::remove(path.c_str());
}
