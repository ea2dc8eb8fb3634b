#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "martsel/markets.hpp"
#include "martsel/msp.hpp"

namespace martsel {

/// Order-preserving JSON document. Emitters insert keys in a fixed order and
/// never emit floating-point numbers, so serializing the same object twice
/// yields byte-identical text.
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Scalars, vectors, node keys
// ---------------------------------------------------------------------------

/// A rational serializes as the canonical string "p" or "p/q".
inline Json rational_to_json(const Rational& q) { return format_rational(q); }

inline Rational rational_from_json(const Json& j) {
    if (!j.is_string())
        throw InputError("file: expected a rational as a string, got " + j.dump());
    return parse_rational(j.get<std::string>());
}

inline Json vec_to_json(const Vec& v) {
    Json a = Json::array();
    for (const Rational& x : v) a.push_back(rational_to_json(x));
    return a;
}

inline Vec vec_from_json(const Json& j) {
    if (!j.is_array())
        throw InputError("file: expected a vector as an array of rationals");
    Vec v;
    v.reserve(j.size());
    for (const Json& x : j) v.push_back(rational_from_json(x));
    return v;
}

/// Nodes are keyed "level:index", matching format_node.
inline std::string node_key(const NodeId& n) { return format_node(n); }

inline NodeId node_from_key(const std::string& key) {
    const auto colon = key.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == key.size())
        throw InputError("file: malformed node key \"" + key + "\"");
    const auto digits = [](const std::string& s) {
        if (s.empty()) return false;
        for (char c : s)
            if (c < '0' || c > '9') return false;
        return true;
    };
    const std::string lv = key.substr(0, colon);
    const std::string ix = key.substr(colon + 1);
    if (!digits(lv) || !digits(ix))
        throw InputError("file: malformed node key \"" + key + "\"");
    return NodeId{static_cast<std::size_t>(std::stoull(lv)),
                  static_cast<std::size_t>(std::stoull(ix))};
}

inline std::size_t index_from_key(const std::string& key) {
    for (char c : key)
        if (c < '0' || c > '9') throw InputError("file: malformed index key \"" + key + "\"");
    if (key.empty()) throw InputError("file: empty index key");
    return static_cast<std::size_t>(std::stoull(key));
}

// ---------------------------------------------------------------------------
// Scenario trees
// ---------------------------------------------------------------------------

inline Json tree_to_json(const ScenarioTree& t) {
    Json j;
    Json parents = Json::array();
    for (const auto& level : t.parent_table()) {
        Json row = Json::array();
        for (std::size_t p : level) row.push_back(p);
        parents.push_back(std::move(row));
    }
    j["parents"] = std::move(parents);
    if (t.has_labels()) {
        Json labels = Json::array();
        for (std::size_t lv = 0; lv < t.num_levels(); ++lv) {
            Json row = Json::array();
            for (std::size_t i = 0; i < t.level_size(lv); ++i)
                row.push_back(t.label(NodeId{lv, i}));
            labels.push_back(std::move(row));
        }
        j["labels"] = std::move(labels);
    }
    return j;
}

inline ScenarioTree tree_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("parents"))
        throw InputError("file: scenario tree needs a \"parents\" table");
    std::vector<std::vector<std::size_t>> parents;
    for (const Json& level : j.at("parents")) {
        std::vector<std::size_t> row;
        for (const Json& p : level) {
            if (!p.is_number_unsigned())
                throw InputError("file: parent indices must be unsigned integers");
            row.push_back(p.get<std::size_t>());
        }
        parents.push_back(std::move(row));
    }
    std::vector<std::vector<std::string>> labels;
    if (j.contains("labels")) {
        for (const Json& level : j.at("labels")) {
            std::vector<std::string> row;
            for (const Json& s : level) {
                if (!s.is_string()) throw InputError("file: labels must be strings");
                row.push_back(s.get<std::string>());
            }
            labels.push_back(std::move(row));
        }
    }
    return ScenarioTree(std::move(parents), std::move(labels));
}

// ---------------------------------------------------------------------------
// Polyhedra
// ---------------------------------------------------------------------------

/// A closed polyhedron carries both of its canonical descriptions: generators
/// ("vrep") and facet rows ("hrep"). Loading rebuilds the set from the
/// generators and then replays the stored facet rows against the rebuilt
/// ones, so an edited file cannot present two descriptions of different sets.
inline Json poly_to_json(const ClosedPolyhedron& p) {
    Json j;
    j["dim"] = p.dim();
    if (p.is_empty()) {
        j["empty"] = true;
        return j;
    }
    const auto gens = [](const std::vector<Vec>& vs) {
        Json a = Json::array();
        for (const Vec& v : vs) a.push_back(vec_to_json(v));
        return a;
    };
    Json vrep;
    vrep["points"] = gens(p.points());
    vrep["rays"] = gens(p.rays());
    vrep["lineality"] = gens(p.lineality());
    j["vrep"] = std::move(vrep);
    Json hrep = Json::array();
    const auto row = [](const Halfspace& h, const char* rel) {
        Json r;
        r["normal"] = vec_to_json(h.a);
        r["offset"] = rational_to_json(h.b);
        r["relation"] = rel;
        return r;
    };
    for (const Halfspace& h : p.inequalities()) hrep.push_back(row(h, ">="));
    for (const Halfspace& h : p.equalities()) hrep.push_back(row(h, "="));
    j["hrep"] = std::move(hrep);
    return j;
}

namespace detail {

struct ParsedRow {
    Halfspace h;
    bool eq = false;
};

inline ParsedRow hrep_row_from_json(const Json& r) {
    if (!r.is_object() || !r.contains("normal") || !r.contains("offset") ||
        !r.contains("relation"))
        throw InputError("file: hrep rows need \"normal\", \"offset\", \"relation\"");
    ParsedRow out;
    out.h.a = vec_from_json(r.at("normal"));
    out.h.b = rational_from_json(r.at("offset"));
    const std::string rel = r.at("relation").get<std::string>();
    if (rel == ">=")
        out.eq = false;
    else if (rel == "=")
        out.eq = true;
    else
        throw InputError("file: hrep relation must be \">=\" or \"=\", got \"" + rel + "\"");
    return out;
}

} // namespace detail

inline ClosedPolyhedron poly_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("dim"))
        throw InputError("file: polyhedron needs a \"dim\" field");
    if (!j.at("dim").is_number_unsigned())
        throw InputError("file: polyhedron dim must be an unsigned integer");
    const std::size_t d = j.at("dim").get<std::size_t>();
    if (j.value("empty", false)) return ClosedPolyhedron::empty_set(d);
    const bool has_v = j.contains("vrep");
    const bool has_h = j.contains("hrep");
    if (!has_v && !has_h)
        throw InputError("file: polyhedron needs \"vrep\" or \"hrep\" (or \"empty\": true)");

    const auto gens = [](const Json& a) {
        std::vector<Vec> out;
        for (const Json& v : a) out.push_back(vec_from_json(v));
        return out;
    };
    std::vector<detail::ParsedRow> rows;
    if (has_h)
        for (const Json& r : j.at("hrep")) rows.push_back(detail::hrep_row_from_json(r));

    ClosedPolyhedron p = ClosedPolyhedron::empty_set(d);
    if (has_v) {
        const Json& v = j.at("vrep");
        p = ClosedPolyhedron::from_vrep(d, gens(v.value("points", Json::array())),
                                        gens(v.value("rays", Json::array())),
                                        gens(v.value("lineality", Json::array())));
    } else {
        std::vector<Halfspace> ineqs, eqs;
        for (auto& r : rows) (r.eq ? eqs : ineqs).push_back(std::move(r.h));
        return ClosedPolyhedron::from_hrep(d, ineqs, eqs);
    }

    if (has_h) {
        const auto& pi = p.inequalities();
        const auto& pe = p.equalities();
        std::size_t ni = 0, ne = 0;
        bool match = true;
        for (const auto& r : rows) {
            const Halfspace* own = nullptr;
            if (r.eq) {
                if (ne < pe.size()) own = &pe[ne++];
            } else {
                if (ni < pi.size()) own = &pi[ni++];
            }
            if (own == nullptr || own->a != r.h.a || own->b != r.h.b) {
                match = false;
                break;
            }
        }
        if (!match || ni != pi.size() || ne != pe.size())
            throw InputError("file: polyhedron hrep does not describe the same set as its vrep");
    }
    return p;
}

// ---------------------------------------------------------------------------
// Semi-open polyhedra
// ---------------------------------------------------------------------------

/// A semi-open set is its closure plus which faces are included. Fully closed
/// and relatively open sets use the short kinds; anything else lists every
/// face of the closure with an inclusion flag.
inline Json semi_to_json(const SemiOpenPolyhedron& s) {
    Json j;
    j["dim"] = s.dim();
    if (s.is_empty()) {
        j["kind"] = "empty";
        return j;
    }
    if (s.is_closed_set()) {
        j["kind"] = "closed";
        j["closure"] = poly_to_json(s.closure_poly());
        return j;
    }
    if (s.is_relatively_open_set()) {
        j["kind"] = "relatively_open";
        j["closure"] = poly_to_json(s.closure_poly());
        return j;
    }
    j["kind"] = "faces";
    j["closure"] = poly_to_json(s.closure_poly());
    Json faces = Json::array();
    const auto& lat = s.lattice();
    const auto& flags = s.face_flags();
    for (std::size_t i = 0; i < lat.faces().size(); ++i) {
        Json f;
        Json tight = Json::array();
        for (std::size_t t : lat.faces()[i].tight) tight.push_back(t);
        f["tight"] = std::move(tight);
        f["included"] = static_cast<bool>(flags[i]);
        faces.push_back(std::move(f));
    }
    j["faces"] = std::move(faces);
    return j;
}

inline SemiOpenPolyhedron semi_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.contains("dim"))
        throw InputError("file: semi-open set needs \"kind\" and \"dim\"");
    const std::string kind = j.at("kind").get<std::string>();
    const std::size_t d = j.at("dim").get<std::size_t>();
    if (kind == "empty") return SemiOpenPolyhedron::empty_set(d);
    if (!j.contains("closure"))
        throw InputError("file: nonempty semi-open set needs a \"closure\"");
    ClosedPolyhedron cl = poly_from_json(j.at("closure"));
    if (cl.dim() != d) throw InputError("file: semi-open closure has the wrong dimension");
    if (kind == "closed") return SemiOpenPolyhedron::from_closed(std::move(cl));
    if (kind == "relatively_open") return SemiOpenPolyhedron::relatively_open(std::move(cl));
    if (kind != "faces")
        throw InputError("file: unknown semi-open kind \"" + kind + "\"");
    if (!j.contains("faces"))
        throw InputError("file: semi-open kind \"faces\" needs a face list");
    std::vector<FaceId> included;
    for (const Json& f : j.at("faces")) {
        if (!f.is_object() || !f.contains("tight") || !f.contains("included"))
            throw InputError("file: face entries need \"tight\" and \"included\"");
        if (!f.at("included").get<bool>()) continue;
        FaceId id;
        for (const Json& t : f.at("tight")) {
            if (!t.is_number_unsigned())
                throw InputError("file: tight indices must be unsigned integers");
            id.push_back(t.get<std::size_t>());
        }
        included.push_back(std::move(id));
    }
    return SemiOpenPolyhedron::from_face_flags(std::move(cl), included);
}

// ---------------------------------------------------------------------------
// Measures and adapted data
// ---------------------------------------------------------------------------

inline Json measure_to_json(const FiniteMeasure& q) {
    Json w = Json::object();
    for (const auto& [leaf, mass] : q.support()) w[std::to_string(leaf)] = rational_to_json(mass);
    Json j;
    j["leaf_weights"] = std::move(w);
    return j;
}

inline FiniteMeasure measure_from_json(const Json& j, const ScenarioTree& tree) {
    if (!j.is_object() || !j.contains("leaf_weights"))
        throw InputError("file: measure needs a \"leaf_weights\" object");
    std::map<std::size_t, Rational> weights;
    for (const auto& [key, val] : j.at("leaf_weights").items())
        weights[index_from_key(key)] = rational_from_json(val);
    return FiniteMeasure(tree, std::move(weights));
}

/// A partial adapted vector process: one entry per defined node, keyed
/// "level:index", in level-major order.
inline Json process_to_json(const AdaptedProcess& x) {
    Json j = Json::object();
    for (const NodeId& n : x.defined_nodes()) j[node_key(n)] = vec_to_json(x.at(n));
    return j;
}

inline AdaptedProcess process_from_json(const Json& j, const ScenarioTree& tree) {
    if (!j.is_object()) throw InputError("file: adapted process must be an object");
    AdaptedProcess x(tree);
    for (const auto& [key, val] : j.items()) {
        const NodeId n = node_from_key(key);
        tree.require_valid(n);
        x.set(n, vec_from_json(val));
    }
    return x;
}

inline Json node_polys_to_json(const AdaptedClosed& m) {
    Json j = Json::object();
    for (const NodeId& n : m.defined_nodes()) j[node_key(n)] = poly_to_json(m.at(n));
    return j;
}

inline AdaptedClosed node_polys_from_json(const Json& j, const ScenarioTree& tree) {
    if (!j.is_object()) throw InputError("file: node-indexed polyhedra must be an object");
    AdaptedClosed m(tree);
    for (const auto& [key, val] : j.items()) {
        const NodeId n = node_from_key(key);
        tree.require_valid(n);
        m.set(n, poly_from_json(val));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Selection problems
// ---------------------------------------------------------------------------

inline Json msp_to_json(const MspInstance& inst) {
    Json j;
    j["type"] = "msp";
    j["dim"] = inst.dim;
    j["conical"] = inst.conical;
    j["tree"] = tree_to_json(inst.tree);
    Json nodes = Json::object();
    for (const NodeId& n : inst.tree.all_nodes()) {
        Json e;
        e["V"] = semi_to_json(inst.V.at(n));
        if (!inst.tree.is_leaf(n)) e["C"] = poly_to_json(inst.C.at(n));
        nodes[node_key(n)] = std::move(e);
    }
    j["nodes"] = std::move(nodes);
    return j;
}

inline MspInstance msp_from_json(const Json& j) {
    if (!j.is_object() || j.value("type", "") != "msp")
        throw InputError("file: expected a selection problem with \"type\": \"msp\"");
    MspInstance inst;
    inst.tree = tree_from_json(j.at("tree"));
    if (!j.contains("dim") || !j.at("dim").is_number_unsigned())
        throw InputError("file: selection problem needs an unsigned \"dim\"");
    inst.dim = j.at("dim").get<std::size_t>();
    inst.conical = j.value("conical", false);
    inst.V = AdaptedSemiOpen(inst.tree);
    inst.C = AdaptedClosed(inst.tree);
    if (!j.contains("nodes")) throw InputError("file: selection problem needs \"nodes\"");
    const Json& nodes = j.at("nodes");
    for (const NodeId& n : inst.tree.all_nodes()) {
        const std::string key = node_key(n);
        if (!nodes.contains(key))
            throw InputError("file: selection problem is missing node " + key);
        const Json& e = nodes.at(key);
        if (!e.contains("V")) throw InputError("file: node " + key + " needs a \"V\" set");
        inst.V.set(n, semi_from_json(e.at("V")));
        if (!inst.tree.is_leaf(n)) {
            if (!e.contains("C")) throw InputError("file: node " + key + " needs a \"C\" set");
            inst.C.set(n, poly_from_json(e.at("C")));
        }
    }
    inst.validate();
    return inst;
}

/// Table of per-node semi-open sets (the backward recursion's output).
inline Json wtable_to_json(const WTable& table) {
    Json j = Json::object();
    for (const NodeId& n : table.defined_nodes()) j[node_key(n)] = semi_to_json(table.at(n));
    return j;
}

// ---------------------------------------------------------------------------
// Market models
// ---------------------------------------------------------------------------

inline Json frictionless_to_json(const FrictionlessModel& m) {
    Json j;
    j["type"] = "frictionless";
    j["assets"] = m.assets;
    j["tree"] = tree_to_json(m.tree);
    Json nodes = Json::object();
    for (const NodeId& n : m.tree.all_nodes()) {
        Json e;
        e["price"] = vec_to_json(m.S.at(n));
        e["A"] = poly_to_json(m.A.at(n));
        nodes[node_key(n)] = std::move(e);
    }
    j["nodes"] = std::move(nodes);
    return j;
}

inline FrictionlessModel frictionless_from_json(const Json& j) {
    if (!j.is_object() || j.value("type", "") != "frictionless")
        throw InputError("file: expected a model with \"type\": \"frictionless\"");
    FrictionlessModel m;
    m.tree = tree_from_json(j.at("tree"));
    if (!j.contains("assets") || !j.at("assets").is_number_unsigned())
        throw InputError("file: frictionless model needs an unsigned \"assets\" count");
    m.assets = j.at("assets").get<std::size_t>();
    m.S = AdaptedProcess(m.tree);
    m.A = AdaptedClosed(m.tree);
    if (!j.contains("nodes")) throw InputError("file: frictionless model needs \"nodes\"");
    const Json& nodes = j.at("nodes");
    for (const NodeId& n : m.tree.all_nodes()) {
        const std::string key = node_key(n);
        if (!nodes.contains(key)) throw InputError("file: model is missing node " + key);
        const Json& e = nodes.at(key);
        if (!e.contains("price") || !e.contains("A"))
            throw InputError("file: node " + key + " needs \"price\" and \"A\"");
        m.S.set(n, vec_from_json(e.at("price")));
        m.A.set(n, poly_from_json(e.at("A")));
    }
    m.validate();
    return m;
}

inline Json kabanov_to_json(const KabanovModel& m) {
    Json j;
    j["type"] = "kabanov";
    j["assets"] = m.assets;
    j["tree"] = tree_to_json(m.tree);
    Json nodes = Json::object();
    for (const NodeId& n : m.tree.all_nodes()) {
        Json e;
        e["K"] = poly_to_json(m.K.at(n));
        e["A"] = poly_to_json(m.A.at(n));
        nodes[node_key(n)] = std::move(e);
    }
    j["nodes"] = std::move(nodes);
    return j;
}

inline KabanovModel kabanov_from_json(const Json& j) {
    if (!j.is_object() || j.value("type", "") != "kabanov")
        throw InputError("file: expected a model with \"type\": \"kabanov\"");
    KabanovModel m;
    m.tree = tree_from_json(j.at("tree"));
    if (!j.contains("assets") || !j.at("assets").is_number_unsigned())
        throw InputError("file: solvency-cone model needs an unsigned \"assets\" count");
    m.assets = j.at("assets").get<std::size_t>();
    m.K = AdaptedClosed(m.tree);
    m.A = AdaptedClosed(m.tree);
    if (!j.contains("nodes")) throw InputError("file: solvency-cone model needs \"nodes\"");
    const Json& nodes = j.at("nodes");
    for (const NodeId& n : m.tree.all_nodes()) {
        const std::string key = node_key(n);
        if (!nodes.contains(key)) throw InputError("file: model is missing node " + key);
        const Json& e = nodes.at(key);
        if (!e.contains("K") || !e.contains("A"))
            throw InputError("file: node " + key + " needs \"K\" and \"A\"");
        m.K.set(n, poly_from_json(e.at("K")));
        m.A.set(n, poly_from_json(e.at("A")));
    }
    m.validate();
    return m;
}

inline Json max_affine_to_json(const MaxAffine& f) {
    Json a = Json::array();
    for (const AffinePiece& p : f) {
        Json e;
        e["a"] = vec_to_json(p.a);
        e["b"] = rational_to_json(p.b);
        a.push_back(std::move(e));
    }
    return a;
}

inline MaxAffine max_affine_from_json(const Json& j) {
    if (!j.is_array()) throw InputError("file: cost function must be an array of pieces");
    MaxAffine f;
    for (const Json& e : j) {
        if (!e.is_object() || !e.contains("a") || !e.contains("b"))
            throw InputError("file: cost pieces need \"a\" and \"b\"");
        f.push_back(AffinePiece{vec_from_json(e.at("a")), rational_from_json(e.at("b"))});
    }
    return f;
}

inline Json cost_to_json(const CostModel& m) {
    Json j;
    j["type"] = "cost";
    j["assets"] = m.assets;
    j["tree"] = tree_to_json(m.tree);
    Json nodes = Json::object();
    for (const NodeId& n : m.tree.all_nodes()) {
        Json e;
        e["cost"] = max_affine_to_json(m.S.at(n));
        e["A"] = poly_to_json(m.A.at(n));
        nodes[node_key(n)] = std::move(e);
    }
    j["nodes"] = std::move(nodes);
    return j;
}

inline CostModel cost_from_json(const Json& j) {
    if (!j.is_object() || j.value("type", "") != "cost")
        throw InputError("file: expected a model with \"type\": \"cost\"");
    CostModel m;
    m.tree = tree_from_json(j.at("tree"));
    if (!j.contains("assets") || !j.at("assets").is_number_unsigned())
        throw InputError("file: cost model needs an unsigned \"assets\" count");
    m.assets = j.at("assets").get<std::size_t>();
    m.S = NodeMap<MaxAffine>(m.tree);
    m.A = AdaptedClosed(m.tree);
    if (!j.contains("nodes")) throw InputError("file: cost model needs \"nodes\"");
    const Json& nodes = j.at("nodes");
    for (const NodeId& n : m.tree.all_nodes()) {
        const std::string key = node_key(n);
        if (!nodes.contains(key)) throw InputError("file: model is missing node " + key);
        const Json& e = nodes.at(key);
        if (!e.contains("cost") || !e.contains("A"))
            throw InputError("file: node " + key + " needs \"cost\" and \"A\"");
        m.S.set(n, max_affine_from_json(e.at("cost")));
        m.A.set(n, poly_from_json(e.at("A")));
    }
    m.validate();
    return m;
}

/// The "type" tag of a model or instance document.
inline std::string document_type(const Json& j) {
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
        throw InputError("file: document needs a string \"type\" field");
    return j.at("type").get<std::string>();
}

// ---------------------------------------------------------------------------
// Solutions, price systems, strategies, certificates
// ---------------------------------------------------------------------------

inline Json solution_to_json(const Solution& s) {
    Json j;
    j["xi"] = process_to_json(s.xi);
    j["Q"] = measure_to_json(s.Q);
    j["anchor"] = node_key(s.anchor);
    return j;
}

inline Solution solution_from_json(const Json& j, const ScenarioTree& tree) {
    if (!j.is_object() || !j.contains("xi") || !j.contains("Q") || !j.contains("anchor"))
        throw InputError("file: solution needs \"xi\", \"Q\", \"anchor\"");
    return Solution{process_from_json(j.at("xi"), tree), measure_from_json(j.at("Q"), tree),
                    node_from_key(j.at("anchor").get<std::string>())};
}

inline Json price_system_to_json(const PriceSystem& ps) {
    Json j;
    j["xi"] = process_to_json(ps.xi);
    j["Q"] = measure_to_json(ps.Q);
    j["anchor"] = node_key(ps.anchor);
    return j;
}

inline PriceSystem price_system_from_json(const Json& j, const ScenarioTree& tree) {
    if (!j.is_object() || !j.contains("xi") || !j.contains("Q") || !j.contains("anchor"))
        throw InputError("file: price system needs \"xi\", \"Q\", \"anchor\"");
    return PriceSystem{process_from_json(j.at("xi"), tree), measure_from_json(j.at("Q"), tree),
                       node_from_key(j.at("anchor").get<std::string>())};
}

inline ModelKind model_kind_from_name(const std::string& name) {
    if (name == "frictionless") return ModelKind::Frictionless;
    if (name == "kabanov") return ModelKind::Kabanov;
    if (name == "cost") return ModelKind::Cost;
    throw InputError("file: unknown model kind \"" + name + "\"");
}

inline Json strategy_to_json(const Strategy& s) {
    Json j;
    j["model"] = model_kind_name(s.model);
    j["initial_capital"] = rational_to_json(s.initial_capital);
    j["h"] = process_to_json(s.h);
    return j;
}

inline Strategy strategy_from_json(const Json& j, const ScenarioTree& tree) {
    if (!j.is_object() || !j.contains("model") || !j.contains("initial_capital") ||
        !j.contains("h"))
        throw InputError("file: strategy needs \"model\", \"initial_capital\", \"h\"");
    Strategy s;
    s.model = model_kind_from_name(j.at("model").get<std::string>());
    s.initial_capital = rational_from_json(j.at("initial_capital"));
    s.h = process_from_json(j.at("h"), tree);
    return s;
}

inline Json certificate_to_json(const ArbitrageCertificate& c) {
    Json j;
    j["model"] = model_kind_name(c.model);
    j["strategy"] = strategy_to_json(c.strategy);
    j["failure"] = node_key(c.failure);
    j["witness"] = node_key(c.witness);
    j["z"] = vec_to_json(c.z);
    j["has_decomposition"] = c.has_decomposition;
    if (c.has_decomposition) {
        j["k"] = process_to_json(c.k);
        j["remainders"] = process_to_json(c.remainders);
        j["slack_site"] = node_key(c.slack_site);
        j["K_hat"] = node_polys_to_json(c.K_hat);
    }
    return j;
}

inline ArbitrageCertificate certificate_from_json(const Json& j, const ScenarioTree& tree) {
    if (!j.is_object() || !j.contains("model") || !j.contains("strategy") ||
        !j.contains("failure") || !j.contains("witness") || !j.contains("z"))
        throw InputError(
            "file: certificate needs \"model\", \"strategy\", \"failure\", \"witness\", \"z\"");
    ArbitrageCertificate c;
    c.model = model_kind_from_name(j.at("model").get<std::string>());
    c.strategy = strategy_from_json(j.at("strategy"), tree);
    c.failure = node_from_key(j.at("failure").get<std::string>());
    c.witness = node_from_key(j.at("witness").get<std::string>());
    c.z = vec_from_json(j.at("z"));
    c.has_decomposition = j.value("has_decomposition", false);
    if (c.has_decomposition) {
        if (!j.contains("k") || !j.contains("remainders") || !j.contains("slack_site") ||
            !j.contains("K_hat"))
            throw InputError("file: decomposed certificate needs \"k\", \"remainders\", "
                             "\"slack_site\", \"K_hat\"");
        c.k = process_from_json(j.at("k"), tree);
        c.remainders = process_from_json(j.at("remainders"), tree);
        c.slack_site = node_from_key(j.at("slack_site").get<std::string>());
        c.K_hat = node_polys_from_json(j.at("K_hat"), tree);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Certificate documents
// ---------------------------------------------------------------------------

/// Canonical on-disk text: two-space indentation and a trailing newline.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

namespace detail {

/// Terminal cash per leaf, keyed like every other node table.
inline Json terminal_to_json(const ScenarioTree& tree, const NodeMap<Rational>& values) {
    Json j = Json::object();
    for (const NodeId& leaf : tree.leaves()) j[node_key(leaf)] = rational_to_json(values.at(leaf));
    return j;
}

/// Per-node position transfers of a full-position strategy: the root entry is
/// the opening position, every other entry is the rebalancing at that node.
inline Json transfers_to_json(const ScenarioTree& tree, const AdaptedProcess& h) {
    Json j = Json::object();
    for (const NodeId& n : tree.all_nodes()) {
        const Vec t = n.level == 0 ? h.at(n) : sub(h.at(n), h.at(tree.parent(n)));
        j[node_key(n)] = vec_to_json(t);
    }
    return j;
}

/// Terminal positions per leaf of a full-position strategy.
inline Json leaf_positions_to_json(const ScenarioTree& tree, const AdaptedProcess& h) {
    Json j = Json::object();
    for (const NodeId& leaf : tree.leaves()) j[node_key(leaf)] = vec_to_json(h.at(leaf));
    return j;
}

/// One-step drifts of a price system at every positive-mass interior node:
/// the conditional expectation of the selection over the children minus the
/// value at the node itself.
inline Json drifts_to_json(const ScenarioTree& tree, const PriceSystem& ps) {
    Json j = Json::object();
    for (const NodeId& n : tree.all_nodes()) {
        if (tree.is_leaf(n)) continue;
        if (node_mass(tree, ps.Q, n) == 0) continue;
        const Vec drift = sub(conditional_expectation(tree, ps.xi, ps.Q, n), ps.xi.at(n));
        j[node_key(n)] = vec_to_json(drift);
    }
    return j;
}

inline Json drift_tables_to_json(const ScenarioTree& tree,
                                 const std::vector<PriceSystem>& systems) {
    Json a = Json::array();
    for (const PriceSystem& ps : systems) a.push_back(drifts_to_json(tree, ps));
    return a;
}

inline Strategy scaled_strategy(const Strategy& s, const Rational& alpha) {
    Strategy out = s;
    out.initial_capital = s.initial_capital * alpha;
    for (const NodeId& n : s.h.defined_nodes()) out.h.set(n, scale(s.h.at(n), alpha));
    return out;
}

inline void document_header(Json& doc, const FtapResult& r) {
    doc["type"] = "certificate";
    doc["verdict"] = r.arbitrage_free ? "no-arbitrage" : "arbitrage";
    doc["robust_equivalence"] = r.robust_equivalence;
}

inline void require_result_shape(const FtapResult& r) {
    if (!r.arbitrage_free && !r.certificate.has_value())
        throw InputError("certificate document: arbitrage verdict without a certificate");
    if (r.arbitrage_free && r.systems.empty())
        throw InputError("certificate document: no-arbitrage verdict without price systems");
}

inline void append_systems(Json& doc, const ScenarioTree& tree, const FtapResult& r) {
    Json systems = Json::array();
    for (const PriceSystem& ps : r.systems) systems.push_back(price_system_to_json(ps));
    doc["price_systems"] = std::move(systems);
    Json replay;
    replay["drifts"] = drift_tables_to_json(tree, r.systems);
    doc["replay"] = std::move(replay);
}

} // namespace detail

/// Self-contained verdict document: the market itself, the verdict, and
/// either the price systems or the arbitrage certificate, together with a
/// replay section recomputable from the other sections alone. `verify`
/// re-derives every replayed value and rejects any bit that disagrees.
inline Json certificate_document(const FrictionlessModel& m, const FtapResult& r) {
    detail::require_result_shape(r);
    Json doc;
    detail::document_header(doc, r);
    doc["market"] = frictionless_to_json(m);
    if (r.arbitrage_free) {
        detail::append_systems(doc, m.tree, r);
    } else {
        doc["certificate"] = certificate_to_json(*r.certificate);
        Json replay;
        replay["terminal"] =
            detail::terminal_to_json(m.tree, replay_frictionless(m, r.certificate->strategy));
        doc["replay"] = std::move(replay);
    }
    return doc;
}

inline Json certificate_document(const KabanovModel& m, const FtapResult& r) {
    detail::require_result_shape(r);
    Json doc;
    detail::document_header(doc, r);
    doc["market"] = kabanov_to_json(m);
    if (r.arbitrage_free) {
        detail::append_systems(doc, m.tree, r);
    } else {
        doc["certificate"] = certificate_to_json(*r.certificate);
        Json replay;
        replay["transfers"] = detail::transfers_to_json(m.tree, r.certificate->strategy.h);
        replay["terminal"] = detail::leaf_positions_to_json(m.tree, r.certificate->strategy.h);
        doc["replay"] = std::move(replay);
    }
    return doc;
}

inline Json certificate_document(const CostModel& m, const FtapResult& r) {
    detail::require_result_shape(r);
    Json doc;
    detail::document_header(doc, r);
    doc["market"] = cost_to_json(m);
    if (r.arbitrage_free) {
        detail::append_systems(doc, m.tree, r);
    } else {
        doc["certificate"] = certificate_to_json(*r.certificate);
        const Strategy& s = r.certificate->strategy;
        Json replay;
        replay["terminal"] = detail::terminal_to_json(m.tree, replay_cost(m, s));
        Json scaled = Json::object();
        for (long alpha : {2L, 10L}) {
            const NodeMap<Rational> v =
                replay_cost(m, detail::scaled_strategy(s, Rational(alpha)));
            scaled[std::to_string(alpha)] = detail::terminal_to_json(m.tree, v);
        }
        replay["terminal_scaled"] = std::move(scaled);
        doc["replay"] = std::move(replay);
    }
    return doc;
}

namespace detail {

/// Parses the result sections of a document back into an FtapResult.
inline FtapResult result_from_document(const Json& doc, const ScenarioTree& tree) {
    FtapResult r;
    const std::string verdict = doc.at("verdict").get<std::string>();
    if (verdict == "no-arbitrage")
        r.arbitrage_free = true;
    else if (verdict == "arbitrage")
        r.arbitrage_free = false;
    else
        throw InputError("file: unknown verdict \"" + verdict + "\"");
    if (!doc.contains("robust_equivalence") || !doc.at("robust_equivalence").is_boolean())
        throw InputError("file: certificate document needs a boolean \"robust_equivalence\"");
    r.robust_equivalence = doc.at("robust_equivalence").get<bool>();
    if (r.arbitrage_free) {
        if (!doc.contains("price_systems"))
            throw InputError("file: no-arbitrage document needs \"price_systems\"");
        for (const Json& ps : doc.at("price_systems"))
            r.systems.push_back(price_system_from_json(ps, tree));
        if (r.systems.empty())
            throw InputError("file: no-arbitrage document lists no price systems");
    } else {
        if (!doc.contains("certificate"))
            throw InputError("file: arbitrage document needs a \"certificate\"");
        r.certificate = certificate_from_json(doc.at("certificate"), tree);
    }
    return r;
}

/// Compares the stored document against its exact reassembly section by
/// section so a failed check names the edited part.
inline void compare_document(VerificationReport& rep, const Json& stored, const Json& rebuilt) {
    for (const auto& [key, val] : rebuilt.items()) {
        if (!stored.contains(key)) {
            report_fail(rep, "document section \"" + key + "\" is missing");
            continue;
        }
        if (dump_json(stored.at(key)) != dump_json(val))
            report_fail(rep, "document section \"" + key +
                                 "\" does not match its exact recomputation");
    }
    for (const auto& [key, val] : stored.items()) {
        (void)val;
        if (!rebuilt.contains(key))
            report_fail(rep, "document carries an unexpected section \"" + key + "\"");
    }
}

template <class Model>
VerificationReport check_document_as(const Json& doc, const Model& m) {
    VerificationReport rep;
    const FtapResult r = result_from_document(doc, m.tree);
    compare_document(rep, doc, certificate_document(m, r));
    if (r.arbitrage_free) {
        for (std::size_t i = 0; i < r.systems.size(); ++i) {
            const VerificationReport sys = verify_price_system(m, r.systems[i]);
            if (!sys.ok)
                report_fail(rep, "price system " + std::to_string(i) +
                                     " fails verification:\n" + sys.details);
        }
    } else {
        const VerificationReport cert = verify_arbitrage_certificate(m, *r.certificate);
        if (!cert.ok)
            report_fail(rep, "arbitrage certificate fails verification:\n" + cert.details);
    }
    return rep;
}

} // namespace detail

/// Re-checks a serialized verdict document: every replayed value is
/// recomputed from the embedded market and strategy or price systems and
/// compared exactly, then the semantic verifier for the verdict runs. Any
/// discrepancy fails the report and names the violated condition.
inline VerificationReport check_certificate_document(const Json& doc) {
    VerificationReport rep;
    try {
        if (document_type(doc) != "certificate") {
            detail::report_fail(rep, "document type is not \"certificate\"");
            return rep;
        }
        if (!doc.contains("market")) {
            detail::report_fail(rep, "document has no \"market\" section");
            return rep;
        }
        const std::string market = document_type(doc.at("market"));
        if (market == "frictionless")
            return detail::check_document_as(doc, frictionless_from_json(doc.at("market")));
        if (market == "kabanov")
            return detail::check_document_as(doc, kabanov_from_json(doc.at("market")));
        if (market == "cost")
            return detail::check_document_as(doc, cost_from_json(doc.at("market")));
        detail::report_fail(rep, "unknown market type \"" + market + "\"");
        return rep;
    } catch (const Error& e) {
        detail::report_fail(rep, e.what());
        return rep;
    }
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline Json parse_json_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("file: not valid JSON: ") + e.what());
    }
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("file: cannot open \"" + path + "\"");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_json_text(text);
}

inline void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("file: cannot write \"" + path + "\"");
    out << dump_json(j);
    if (!out) throw InputError("file: write failed for \"" + path + "\"");
}

} // namespace martsel
