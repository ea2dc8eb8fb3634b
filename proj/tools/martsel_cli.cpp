// Command-line front door for the exact selection and market-verdict engine:
// load instances or market models from JSON, decide solvability or arbitrage,
// emit self-contained verdict documents, and re-check stored documents bit
// for bit. Every number that enters or leaves is an exact rational.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "martsel/oracle.hpp"
#include "martsel/serialize.hpp"

using namespace martsel;

namespace {

struct Options {
    std::string input;
    std::string model;
    std::vector<std::string> nodes;
    std::string emit_certificate;
    std::string out;
    bool emit_w_tables = false;
    bool cross_check = false;
};

/// Reports go to --out when given, otherwise to standard output.
void deliver(const Options& o, const Json& report) {
    if (o.out.empty()) {
        std::cout << dump_json(report);
    } else {
        write_json_file(o.out, report);
        std::cout << "report written to " << o.out << "\n";
    }
}

Json load_input(const Options& o) {
    const Json doc = read_json_file(o.input);
    const std::string type = document_type(doc);
    if (!o.model.empty() && o.model != type)
        throw InputError("input file has type \"" + type + "\" but --model asked for \"" +
                         o.model + "\"");
    return doc;
}

std::vector<NodeId> queried_nodes(const Options& o, const ScenarioTree& tree) {
    std::vector<NodeId> out;
    for (const std::string& s : o.nodes) {
        const NodeId n = node_from_key(s);
        tree.require_valid(n);
        out.push_back(n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Independent searches (exhaustive, for cross-checking the solver)
// ---------------------------------------------------------------------------

/// Compares the backward recursion against the exhaustive search node by
/// node. The per-node columns differ on purpose: the recursion tracks
/// whether the admissible-value set is nonempty, the search whether some
/// full solution puts mass below the node; the theorems identify only the
/// two conjunctions over all nodes.
Json msp_diff(const MspInstance& inst, const WTable& table, bool solver_solvable) {
    Json nodes = Json::object();
    bool oracle_all = true;
    for (const NodeId& n : inst.tree.all_nodes()) {
        const bool witness = oracle_solvable(inst, n);
        oracle_all = oracle_all && witness;
        Json e;
        e["admissible_set_nonempty"] = !table.at(n).is_empty();
        e["anchored_witness"] = witness;
        nodes[node_key(n)] = std::move(e);
    }
    Json diff;
    diff["search_verdict"] = oracle_all ? "solvable" : "unsolvable";
    diff["solver_verdict"] = solver_solvable ? "solvable" : "unsolvable";
    diff["agree"] = oracle_all == solver_solvable;
    diff["nodes"] = std::move(nodes);
    return diff;
}

/// Weak-arbitrage search against the solver verdict for a market model. A
/// model can be free of weakly profitable trades and still fail robustly;
/// that boundary is legitimate and gets flagged rather than hidden.
Json market_diff(bool weak_arbitrage, const FtapResult& r) {
    Json diff;
    diff["search_weak_arbitrage"] = weak_arbitrage;
    diff["solver_verdict"] = r.arbitrage_free ? "no-arbitrage" : "arbitrage";
    diff["agree"] = weak_arbitrage != r.arbitrage_free;
    diff["boundary_case"] = !weak_arbitrage && !r.arbitrage_free;
    diff["inconsistent"] = weak_arbitrage && r.arbitrage_free;
    if (!weak_arbitrage && !r.arbitrage_free)
        diff["note"] = "no weakly profitable trade exists, yet every dominating model admits "
                       "one; the verdicts disagree only on this boundary";
    return diff;
}

/// The exhaustive search for a cost market runs on the induced solvency
/// cones, which captures the model exactly only when the costs are
/// positively homogeneous and trading is unconstrained.
bool cost_weak_arbitrage(const CostModel& m) {
    for (const NodeId& n : m.tree.all_nodes()) {
        for (const AffinePiece& p : m.S.at(n))
            if (p.b != Rational(0))
                throw UnsupportedError("search: cost at node " + format_node(n) +
                                       " is not positively homogeneous");
        if (!m.A.at(n).equals(ClosedPolyhedron::full_space(m.assets)))
            throw UnsupportedError("search: trading constraints at node " + format_node(n) +
                                   " have no cone translation");
    }
    KabanovModel km;
    km.tree = m.tree;
    km.assets = m.assets + 1;
    km.K = AdaptedClosed(m.tree);
    km.A = AdaptedClosed(m.tree);
    for (const NodeId& n : m.tree.all_nodes()) {
        km.K.set(n, cost_solvency_cone(m.S.at(n), m.assets));
        km.A.set(n, ClosedPolyhedron::full_space(km.assets));
    }
    return oracle_kabanov_arbitrage(km);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_solve(const Options& o) {
    const Json doc = load_input(o);
    if (document_type(doc) != "msp")
        throw InputError("solve expects a selection problem (\"type\": \"msp\"); "
                         "use ftap for market models");
    const MspInstance inst = msp_from_json(doc);
    const WTable table = compute_W(inst);
    const bool solvable = is_solvable(inst, table);

    Json rep;
    rep["command"] = "solve";
    rep["input"] = o.input;
    rep["verdict"] = solvable ? "solvable" : "unsolvable";
    if (solvable) {
        rep["message"] = "solvable: every node admits an anchored selection";
        std::vector<NodeId> anchors = queried_nodes(o, inst.tree);
        if (anchors.empty()) anchors.push_back(NodeId{0, 0});
        Json sols = Json::array();
        for (const NodeId& a : anchors) {
            const Solution s = build_local_solution(inst, a);
            Json e;
            e["anchor"] = node_key(a);
            e["verified"] = verify_solution(inst, s).ok;
            e["solution"] = solution_to_json(s);
            sols.push_back(std::move(e));
        }
        rep["solutions"] = std::move(sols);
    } else {
        const NodeId f = *find_failure(inst, table);
        rep["failure"] = node_key(f);
        rep["message"] = "unsolvable: the admissible-value set is empty at node " + node_key(f);
    }
    if (o.emit_w_tables) {
        Json tables;
        tables["W"] = wtable_to_json(table);
        tables["w_ri"] = wtable_to_json(compute_w_ri(inst));
        rep["w_tables"] = std::move(tables);
    }
    if (o.cross_check) {
        try {
            rep["cross_check"] = msp_diff(inst, table, solvable);
        } catch (const UnsupportedError& e) {
            Json skipped;
            skipped["skipped"] = e.what();
            rep["cross_check"] = std::move(skipped);
        }
    }
    deliver(o, rep);
    return solvable ? 0 : 2;
}

template <class Model>
int run_ftap_on(const Options& o, const std::string& type, const Model& m,
                FtapResult (*ftap)(const Model&, std::vector<NodeId>)) {
    const FtapResult r = ftap(m, queried_nodes(o, m.tree));
    Json rep;
    rep["command"] = "ftap";
    rep["input"] = o.input;
    rep["market"] = type;
    rep["verdict"] = r.arbitrage_free ? "no-arbitrage" : "arbitrage";
    rep["robust_equivalence"] = r.robust_equivalence;
    if (r.arbitrage_free) {
        rep["message"] = "no-arbitrage: consistent price systems exist at every queried node";
        Json systems = Json::array();
        for (const PriceSystem& ps : r.systems) systems.push_back(price_system_to_json(ps));
        rep["price_systems"] = std::move(systems);
    } else {
        rep["failure"] = node_key(r.certificate->failure);
        rep["message"] = "arbitrage: a replayable strategy wins from zero capital; the "
                         "recursion failed at node " +
                         node_key(r.certificate->failure);
        rep["certificate"] = certificate_to_json(*r.certificate);
    }
    if (!o.emit_certificate.empty()) {
        write_json_file(o.emit_certificate, certificate_document(m, r));
        rep["certificate_file"] = o.emit_certificate;
    }
    if (o.cross_check) {
        try {
            bool weak = false;
            if constexpr (std::is_same_v<Model, FrictionlessModel>)
                weak = oracle_frictionless_arbitrage(m);
            else if constexpr (std::is_same_v<Model, KabanovModel>)
                weak = oracle_kabanov_arbitrage(m);
            else
                weak = cost_weak_arbitrage(m);
            rep["cross_check"] = market_diff(weak, r);
        } catch (const UnsupportedError& e) {
            Json skipped;
            skipped["skipped"] = e.what();
            rep["cross_check"] = std::move(skipped);
        }
    }
    deliver(o, rep);
    return r.arbitrage_free ? 0 : 2;
}

int run_ftap(const Options& o) {
    const Json doc = load_input(o);
    const std::string type = document_type(doc);
    if (type == "frictionless")
        return run_ftap_on<FrictionlessModel>(o, type, frictionless_from_json(doc),
                                              frictionless_ftap);
    if (type == "kabanov")
        return run_ftap_on<KabanovModel>(o, type, kabanov_from_json(doc), kabanov_ftap);
    if (type == "cost") return run_ftap_on<CostModel>(o, type, cost_from_json(doc), cost_ftap);
    if (type == "msp")
        throw InputError("ftap expects a market model; use solve for selection problems");
    throw InputError("unknown input type \"" + type + "\"");
}

int run_oracle(const Options& o) {
    const Json doc = load_input(o);
    const std::string type = document_type(doc);
    Json rep;
    rep["command"] = "oracle";
    rep["input"] = o.input;
    rep["type"] = type;

    if (type == "msp") {
        const MspInstance inst = msp_from_json(doc);
        const WTable table = compute_W(inst);
        const bool solvable = is_solvable(inst, table);
        const Json diff = msp_diff(inst, table, solvable);
        const bool agree = diff.at("agree").get<bool>();
        rep["verdict"] = diff.at("search_verdict");
        rep["diff"] = diff;
        rep["message"] = agree ? "the exhaustive search confirms the solver verdict"
                               : "the exhaustive search CONTRADICTS the solver verdict";
        deliver(o, rep);
        if (!agree) return 1;
        return solvable ? 0 : 2;
    }

    FtapResult r;
    bool weak = false;
    if (type == "frictionless") {
        const FrictionlessModel m = frictionless_from_json(doc);
        weak = oracle_frictionless_arbitrage(m);
        r = frictionless_ftap(m);
    } else if (type == "kabanov") {
        const KabanovModel m = kabanov_from_json(doc);
        weak = oracle_kabanov_arbitrage(m);
        r = kabanov_ftap(m);
    } else if (type == "cost") {
        const CostModel m = cost_from_json(doc);
        weak = cost_weak_arbitrage(m);
        r = cost_ftap(m);
    } else {
        throw InputError("unknown input type \"" + type + "\"");
    }
    const Json diff = market_diff(weak, r);
    rep["verdict"] = weak ? "arbitrage" : "no-weak-arbitrage";
    rep["diff"] = diff;
    if (diff.at("inconsistent").get<bool>()) {
        rep["message"] = "the exhaustive search found a weakly profitable trade in a model "
                         "the solver declared arbitrage-free";
        deliver(o, rep);
        return 1;
    }
    rep["message"] = diff.at("boundary_case").get<bool>()
                         ? "boundary case: weakly arbitrage-free, robustly not"
                         : "the exhaustive search agrees with the solver verdict";
    deliver(o, rep);
    return r.arbitrage_free ? 0 : 2;
}

int run_verify(const Options& o) {
    const Json doc = read_json_file(o.input);
    const VerificationReport check = check_certificate_document(doc);
    Json rep;
    rep["command"] = "verify";
    rep["input"] = o.input;
    rep["ok"] = check.ok;
    if (check.ok) {
        rep["verdict"] = doc.at("verdict");
        rep["message"] = "certificate verified: every stored value matches its exact "
                         "recomputation and the verdict's own checker passes";
    } else {
        rep["message"] = "certificate rejected";
        rep["violated"] = check.details;
    }
    deliver(o, rep);
    if (!check.ok) {
        std::cerr << "verification failed:\n" << check.details;
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact rational engine for selection problems on scenario trees and "
                 "fundamental-theorem verdicts on frictionless, solvency-cone, and "
                 "cost markets."};
    app.require_subcommand(1);
    Options o;

    const auto add_common = [&](CLI::App* sub, bool with_nodes) {
        sub->add_option("--input", o.input, "Input JSON file")->required();
        sub->add_option("--model", o.model,
                        "Expected input type; rejects files whose \"type\" differs")
            ->check(CLI::IsMember({"msp", "frictionless", "kabanov", "cost"}));
        if (with_nodes)
            sub->add_option("--node", o.nodes,
                            "Anchor node LEVEL:INDEX (repeatable; default the root)");
        sub->add_option("--out", o.out, "Write the report here instead of standard output");
    };

    CLI::App* solve = app.add_subcommand(
        "solve", "Decide solvability of a selection problem and construct solutions");
    add_common(solve, true);
    solve->add_flag("--emit-w-tables", o.emit_w_tables,
                    "Include the backward-recursion tables in the report");
    solve->add_flag("--cross-check", o.cross_check,
                    "Also run the exhaustive search and report the diff");

    CLI::App* ftap = app.add_subcommand(
        "ftap", "Decide arbitrage for a market model and produce the verdict's witness");
    add_common(ftap, true);
    ftap->add_option("--emit-certificate", o.emit_certificate,
                     "Write a self-contained verdict document to this path");
    ftap->add_flag("--cross-check", o.cross_check,
                   "Also run the exhaustive trade search and report the diff");

    CLI::App* oracle = app.add_subcommand(
        "oracle", "Run only the exhaustive search and diff it against the solver");
    add_common(oracle, false);

    CLI::App* verify = app.add_subcommand(
        "verify", "Re-check a stored verdict document bit for bit");
    add_common(verify, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (solve->parsed()) return run_solve(o);
        if (ftap->parsed()) return run_ftap(o);
        if (oracle->parsed()) return run_oracle(o);
        return run_verify(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
