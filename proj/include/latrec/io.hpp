#pragma once

// File formats and deterministic JSON output.
//
// Inputs (tree files, window files, measurable-set files) are parsed with
// nlohmann::json. Outputs go through dump_canonical, which serializes an
// ordered_json tree with a fixed field order and a fixed float format
// (%.12g), so identical invocations produce byte-identical bytes.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latrec/density_search.hpp"
#include "latrec/exponential_sums.hpp"
#include "latrec/finite_ergodic.hpp"
#include "latrec/tree_model.hpp"

namespace latrec {

using OrderedJson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Canonical output
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    if (!std::isfinite(v)) throw ValidationError("json output: non-finite number");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace detail {

inline void dump_canonical_impl(const OrderedJson& v, std::string& out) {
    switch (v.type()) {
        case nlohmann::detail::value_t::null:
            out += "null";
            break;
        case nlohmann::detail::value_t::boolean:
            out += v.get<bool>() ? "true" : "false";
            break;
        case nlohmann::detail::value_t::number_integer:
            out += std::to_string(v.get<std::int64_t>());
            break;
        case nlohmann::detail::value_t::number_unsigned:
            out += std::to_string(v.get<std::uint64_t>());
            break;
        case nlohmann::detail::value_t::number_float:
            out += format_double(v.get<double>());
            break;
        case nlohmann::detail::value_t::string:
            out += nlohmann::json(v.get<std::string>()).dump();
            break;
        case nlohmann::detail::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& item : v) {
                if (!first) out += ',';
                first = false;
                dump_canonical_impl(item, out);
            }
            out += ']';
            break;
        }
        case nlohmann::detail::value_t::object: {
            out += '{';
            bool first = true;
            for (const auto& [key, value] : v.items()) {
                if (!first) out += ',';
                first = false;
                out += nlohmann::json(key).dump();
                out += ':';
                dump_canonical_impl(value, out);
            }
            out += '}';
            break;
        }
        default:
            throw ValidationError("json output: unsupported value type");
    }
}

}  // namespace detail

inline std::string dump_canonical(const OrderedJson& v) {
    std::string out;
    detail::dump_canonical_impl(v, out);
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Shared converters
// ---------------------------------------------------------------------------

inline OrderedJson point_to_json(const LatticePoint& p) {
    OrderedJson arr = OrderedJson::array();
    for (Coord c : p) arr.push_back(c);
    return arr;
}

inline OrderedJson points_to_json(const std::vector<LatticePoint>& pts) {
    OrderedJson arr = OrderedJson::array();
    for (const auto& p : pts) arr.push_back(point_to_json(p));
    return arr;
}

inline LatticePoint point_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ValidationError("expected a coordinate array");
    LatticePoint p;
    for (const auto& c : j) {
        if (!c.is_number_integer() && !c.is_number_unsigned())
            throw ValidationError("coordinates must be integers");
        p.push_back(c.get<Coord>());
    }
    return p;
}

inline std::vector<LatticePoint> points_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ValidationError("expected an array of points");
    std::vector<LatticePoint> pts;
    for (const auto& p : j) pts.push_back(point_from_json(p));
    return pts;
}

// ---------------------------------------------------------------------------
// Tree files: {"vertices": [...], "root": "...",
//              "edges": [{"u": ..., "v": ..., "label": ...}, ...]}
// ---------------------------------------------------------------------------

inline RootedTree tree_from_json(const nlohmann::json& j) {
    try {
        std::vector<std::string> vertices = j.at("vertices").get<std::vector<std::string>>();
        std::vector<EdgeLabelledTree::Edge> edges;
        for (const auto& e : j.at("edges")) {
            EdgeLabelledTree::Edge edge;
            edge.u = e.at("u").get<std::string>();
            edge.v = e.at("v").get<std::string>();
            edge.label = e.at("label").get<Coord>();
            edges.push_back(std::move(edge));
        }
        return RootedTree(EdgeLabelledTree(std::move(vertices), std::move(edges)),
                          j.at("root").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("tree file: ") + e.what());
    }
}

inline OrderedJson tree_to_json(const RootedTree& rooted) {
    OrderedJson j;
    j["vertices"] = rooted.tree.vertices();
    j["root"] = rooted.root;
    OrderedJson edges = OrderedJson::array();
    for (const auto& e : rooted.tree.edges()) {
        OrderedJson edge;
        edge["u"] = e.u;
        edge["v"] = e.v;
        edge["label"] = e.label;
        edges.push_back(edge);
    }
    j["edges"] = edges;
    return j;
}

// ---------------------------------------------------------------------------
// Window files: {"dimension": d, "side": L, "points": [[...], ...]}
//            or {"dimension": d, "side": L, "generator": {...}}
// ---------------------------------------------------------------------------

inline WindowSet window_from_json(const nlohmann::json& j) {
    // accept both the bare window object and a full CLI `gen` document
    if (j.is_object() && j.contains("window")) return window_from_json(j.at("window"));
    try {
        int d = j.at("dimension").get<int>();
        Coord side = j.at("side").get<Coord>();
        if (j.contains("points")) return WindowSet(d, side, points_from_json(j.at("points")));
        const auto& gen = j.at("generator");
        std::string kind = gen.at("kind").get<std::string>();
        if (kind == "uniform_random")
            return generate_uniform_window(d, side, gen.at("density").get<double>(),
                                           gen.at("seed").get<std::uint64_t>());
        if (kind == "congruence")
            return generate_congruence_window(d, side, gen.at("g").get<Coord>(),
                                              points_from_json(gen.at("residues")));
        if (kind == "planted")
            return generate_planted_window(d, side, points_from_json(gen.at("witness")),
                                           gen.at("noise").get<double>(),
                                           gen.at("seed").get<std::uint64_t>())
                .window;
        throw ValidationError("window file: unknown generator kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("window file: ") + e.what());
    }
}

inline OrderedJson window_to_json(const WindowSet& w) {
    OrderedJson j;
    j["dimension"] = w.dimension();
    j["side"] = w.side();
    j["points"] = points_to_json(w.points());
    return j;
}

// ---------------------------------------------------------------------------
// Measurable sets: {"modulus": M, "dimension": d, "points": [[...], ...]}
//               or {"modulus": M, "dimension": d,
//                   "congruence": {"g": g, "residues": [[...], ...]}}
// ---------------------------------------------------------------------------

inline MeasurableSet measurable_set_from_json(const nlohmann::json& j,
                                              const Limits& limits = default_limits()) {
    try {
        Coord M = j.at("modulus").get<Coord>();
        int d = j.at("dimension").get<int>();
        TorusSystem sys(M, d, limits);
        if (j.contains("points"))
            return MeasurableSet::from_points(sys, points_from_json(j.at("points")));
        if (j.contains("congruence")) {
            const auto& cong = j.at("congruence");
            return MeasurableSet::from_congruence(sys, cong.at("g").get<Coord>(),
                                                  points_from_json(cong.at("residues")));
        }
        throw ValidationError("measurable set file: need 'points' or 'congruence'");
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("measurable set file: ") + e.what());
    }
}

inline OrderedJson measurable_set_to_json(const MeasurableSet& B) {
    OrderedJson j;
    j["modulus"] = B.system.modulus;
    j["dimension"] = B.system.dimension;
    OrderedJson pts = OrderedJson::array();
    for (std::size_t idx = 0; idx < B.system.cells; ++idx)
        if (B.mask[idx]) pts.push_back(point_to_json(B.system.point_of(idx)));
    j["points"] = pts;
    return j;
}

// ---------------------------------------------------------------------------
// Report converters
// ---------------------------------------------------------------------------

inline OrderedJson scan_report_to_json(const ScanReport& r) {
    OrderedJson j;
    j["dimension"] = r.dimension;
    j["eta"] = r.eta;
    j["C"] = r.C;
    j["n"] = r.N;
    j["seed"] = r.seed;
    j["lcm_bound"] = r.lcm_bound;
    j["q"] = r.q.str();
    j["width"] = r.width;
    j["requested_samples"] = r.requested_samples;
    j["rejected_major"] = r.rejected_major;
    j["evaluated_minor"] = r.evaluated_minor;
    j["violations"] = r.violations;
    j["violation_fraction"] = r.violation_fraction;
    if (r.max_modulus) {
        j["max_modulus"] = *r.max_modulus;
        OrderedJson theta = OrderedJson::array();
        for (double c : r.argmax_theta) theta.push_back(c);
        j["argmax_theta"] = theta;
    } else {
        j["max_modulus"] = nullptr;
        j["argmax_theta"] = nullptr;
    }
    j["empty_sphere"] = r.empty_sphere;
    j["warnings"] = r.warnings;
    return j;
}

inline OrderedJson estimate_report_to_json(const EstimateReport& r) {
    OrderedJson j;
    j["dimension"] = r.dimension;
    j["eta"] = r.eta;
    j["n_lo"] = r.n_lo;
    j["n_hi"] = r.n_hi;
    j["n_stride"] = r.n_stride;
    j["sample_count"] = r.sample_count;
    j["seed"] = r.seed;
    OrderedJson cands = OrderedJson::array();
    for (const auto& c : r.candidates) {
        OrderedJson cand;
        cand["C"] = c.C;
        cand["n_threshold"] = c.n_threshold;
        cand["applicable"] = c.applicable;
        cand["scanned_n"] = c.scanned_n;
        cand["minor_samples"] = c.minor_samples;
        cand["violations"] = c.violations;
        cand["first_violation_n"] = c.first_violation_n;
        cand["passed"] = c.passed;
        cands.push_back(cand);
    }
    j["candidates"] = cands;
    j["found"] = r.found;
    if (r.found)
        j["chosen_C"] = r.chosen_C;
    else
        j["chosen_C"] = nullptr;
    return j;
}

inline const char* status_name(SearchStatus s) {
    switch (s) {
        case SearchStatus::Found: return "found";
        case SearchStatus::NotFound: return "not_found";
        case SearchStatus::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

inline OrderedJson chain_report_to_json(const ChainSearchReport& r) {
    OrderedJson j;
    j["q"] = r.query.q;
    OrderedJson gaps = OrderedJson::array();
    for (Coord t : r.query.gaps) gaps.push_back(t);
    j["gaps"] = gaps;
    j["status"] = status_name(r.status);
    j["nodes_explored"] = r.nodes_explored;
    j["budget"] = r.budget;
    if (r.status == SearchStatus::Found)
        j["witness"] = points_to_json(r.witness);
    else
        j["witness"] = nullptr;
    return j;
}

inline OrderedJson tree_report_to_json(const TreeSearchReport& r, const RootedTree& rooted) {
    OrderedJson j;
    j["q"] = r.q;
    j["status"] = status_name(r.status);
    j["nodes_explored"] = r.nodes_explored;
    j["budget"] = r.budget;
    if (r.status == SearchStatus::Found) {
        j["base"] = point_to_json(r.base);
        OrderedJson placement;
        const auto& ids = rooted.tree.vertices();
        for (std::size_t i = 0; i < ids.size(); ++i)
            placement[ids[i]] = point_to_json(r.witness.placement[i]);
        j["embedding"] = placement;
    } else {
        j["base"] = nullptr;
        j["embedding"] = nullptr;
    }
    return j;
}

inline OrderedJson increment_steps_to_json(const std::vector<IncrementStep>& steps) {
    OrderedJson arr = OrderedJson::array();
    for (const auto& s : steps) {
        OrderedJson step;
        step["j"] = s.j;
        step["gap"] = s.gap;
        step["base"] = point_to_json(s.base);
        step["density"] = s.density;
        arr.push_back(step);
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid JSON in " + path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << text;
}

}  // namespace latrec
