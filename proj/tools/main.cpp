// latrec - batch CLI over the lattice/ergodic library. Every subcommand reads
// JSON files and flags, writes one canonical JSON document, and echoes enough
// parameters to reproduce the run. Identical invocations with identical seeds
// produce byte-identical output, regardless of --threads.
//
// Exit codes: 0 success, 1 usage or validation error, 2 not-found or
// unsatisfied bound (still a valid report), 3 resource ceiling hit.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latrec/latrec.hpp"

using namespace latrec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotFound = 2;
constexpr int kExitResource = 3;

struct Global {
    std::string out_path;  // empty: stdout
    std::uint64_t seed = 0;
    unsigned threads = 1;
    Limits limits;
};

std::uint64_t env_u64(const char* name, std::uint64_t fallback) {
    const char* v = std::getenv(name);
    if (!v || !*v) return fallback;
    return std::strtoull(v, nullptr, 10);
}

void emit(const OrderedJson& doc, const Global& g) {
    std::string text = dump_canonical(doc);
    if (g.out_path.empty())
        std::cout << text;
    else
        write_text_file(g.out_path, text);
}

OrderedJson big_to_json(const BigInt& v) {
    if (v >= std::numeric_limits<std::int64_t>::min() &&
        v <= std::numeric_limits<std::int64_t>::max())
        return v.convert_to<std::int64_t>();
    return v.str();
}

std::vector<Coord> parse_coord_list(const std::string& text) {
    std::vector<Coord> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ','))
        if (!token.empty()) out.push_back(static_cast<Coord>(std::stoll(token)));
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ','))
        if (!token.empty()) out.push_back(std::stod(token));
    return out;
}

/// "0,0;1,1" -> two residue vectors; a single scalar means a constant vector.
std::vector<LatticePoint> parse_residues(const std::string& text, int d) {
    std::vector<LatticePoint> out;
    std::string group;
    std::istringstream in(text);
    while (std::getline(in, group, ';')) {
        if (group.empty()) continue;
        auto coords = parse_coord_list(group);
        if (coords.size() == 1 && d > 1) coords.assign(static_cast<std::size_t>(d), coords[0]);
        if (static_cast<int>(coords.size()) != d)
            throw ValidationError("residue vector has wrong dimension: " + group);
        out.push_back(std::move(coords));
    }
    return out;
}

// The echo carries everything needed to reproduce the result. The thread
// count is deliberately absent: results are independent of it by contract,
// and including it would break byte-identity across --threads values.
OrderedJson base_params(const std::string& command, const Global& g) {
    OrderedJson p;
    p["command"] = command;
    p["seed"] = g.seed;
    p["max_points"] = g.limits.max_sphere_points;
    p["max_work"] = g.limits.max_profile_work;
    p["max_immersions"] = g.limits.max_immersions;
    return p;
}

MeasurableSet load_set(const std::string& path, const Global& g) {
    return measurable_set_from_json(read_json_file(path), g.limits);
}

// ---------------------------------------------------------------------------
// sphere
// ---------------------------------------------------------------------------

int cmd_sphere(const Global& g, int d, Coord n, bool enumerate, bool count, Coord profile_mod) {
    OrderedJson doc;
    auto params = base_params("sphere", g);
    params["d"] = d;
    params["n"] = n;
    doc["params"] = params;
    if (!enumerate && profile_mod == 0) count = true;
    if (count || enumerate) doc["count"] = big_to_json(sphere_size(d, n));
    if (enumerate) {
        auto sphere = enumerate_sphere(d, n, g.limits, g.threads);
        OrderedJson pts = OrderedJson::array();
        for (std::size_t i = 0; i < sphere.size(); ++i)
            pts.push_back(point_to_json(sphere.point_vec(i)));
        doc["points"] = pts;
    }
    if (profile_mod > 0) {
        auto profile = residue_profile(d, n, profile_mod, g.limits);
        OrderedJson prof;
        prof["modulus"] = profile.modulus;
        prof["total"] = profile.total;
        OrderedJson entries = OrderedJson::array();
        std::vector<Coord> digits(static_cast<std::size_t>(d));
        for (std::size_t key = 0; key < profile.counts.size(); ++key) {
            if (profile.counts[key] == 0) continue;
            std::size_t rest = key;
            for (int i = 0; i < d; ++i) {
                digits[static_cast<std::size_t>(i)] =
                    static_cast<Coord>(rest % static_cast<std::size_t>(profile_mod));
                rest /= static_cast<std::size_t>(profile_mod);
            }
            OrderedJson entry;
            entry["residue"] = point_to_json(digits);
            entry["count"] = profile.counts[key];
            entries.push_back(entry);
        }
        prof["counts"] = entries;
        doc["profile"] = prof;
    }
    emit(doc, g);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// qeta / expsum
// ---------------------------------------------------------------------------

int cmd_qeta(const Global& g, double eta, double c) {
    // N enters arc parameters only through the width; q needs none.
    auto params = make_arc_parameters(eta, c, 1);
    OrderedJson doc;
    auto p = base_params("qeta", g);
    p["eta"] = eta;
    p["c"] = c;
    doc["params"] = p;
    doc["lcm_bound"] = params.lcm_bound;
    doc["q"] = big_to_json(params.q);
    emit(doc, g);
    return kExitOk;
}

int cmd_expsum_evaluate(const Global& g, int d, Coord n, const std::string& theta_text) {
    auto coords = parse_double_list(theta_text);
    if (static_cast<int>(coords.size()) != d)
        throw ValidationError("expsum evaluate: theta must have d coordinates");
    Frequency theta{coords};
    auto sphere = enumerate_sphere(d, n, g.limits, g.threads);
    auto value = exp_sum(sphere, theta);
    OrderedJson doc;
    auto p = base_params("expsum.evaluate", g);
    p["d"] = d;
    p["n"] = n;
    OrderedJson tc = OrderedJson::array();
    for (double c : theta.coords()) tc.push_back(c);
    p["theta"] = tc;
    doc["params"] = p;
    doc["count"] = big_to_json(BigInt(sphere.size()));
    doc["value_re"] = value.real();
    doc["value_im"] = value.imag();
    doc["modulus"] = std::abs(value);
    emit(doc, g);
    return kExitOk;
}

int cmd_expsum_scan(const Global& g, int d, double eta, double c, Coord n,
                    std::uint64_t samples) {
    auto report = scan_minor_arcs(d, eta, c, n, samples, g.seed);
    OrderedJson doc;
    doc["params"] = base_params("expsum.scan", g);
    doc["report"] = scan_report_to_json(report);
    emit(doc, g);
    return report.violations == 0 ? kExitOk : kExitNotFound;
}

int cmd_expsum_estimate(const Global& g, int d, double eta, Coord n_lo, Coord n_hi, Coord stride,
                        const std::string& grid_text, std::uint64_t samples) {
    auto grid = parse_double_list(grid_text);
    auto report = estimate_constant(d, eta, n_lo, n_hi, stride, grid, samples, g.seed);
    OrderedJson doc;
    doc["params"] = base_params("expsum.estimate", g);
    doc["report"] = estimate_report_to_json(report);
    emit(doc, g);
    return report.found ? kExitOk : kExitNotFound;
}

// ---------------------------------------------------------------------------
// tree
// ---------------------------------------------------------------------------

int cmd_tree(const Global& g, const std::string& mode, const std::string& file, int d,
             std::uint64_t limit, bool has_limit) {
    auto rooted = tree_from_json(read_json_file(file));
    OrderedJson doc;
    auto p = base_params("tree." + mode, g);
    p["file"] = file;
    p["d"] = d;
    doc["params"] = p;
    doc["tree"] = tree_to_json(rooted);
    if (mode == "count" || mode == "bounds") {
        doc["immersions"] = big_to_json(count_immersions(rooted, d));
        doc["embedding_lower_bound"] = big_to_json(embedding_lower_bound(rooted, d));
    } else if (mode == "enumerate") {
        std::optional<std::uint64_t> cap;
        if (has_limit) cap = limit;
        auto imms = enumerate_immersions(rooted, d, cap, g.limits);
        OrderedJson arr = OrderedJson::array();
        const auto& ids = rooted.tree.vertices();
        for (const auto& imm : imms) {
            OrderedJson one;
            for (std::size_t i = 0; i < ids.size(); ++i)
                one[ids[i]] = point_to_json(imm.placement[i]);
            arr.push_back(one);
        }
        doc["count_emitted"] = imms.size();
        std::uint64_t embeddings = 0;
        for (const auto& imm : imms)
            if (is_embedding(imm)) ++embeddings;
        doc["embeddings_emitted"] = embeddings;
        doc["immersions"] = arr;
    }
    emit(doc, g);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// ergodic
// ---------------------------------------------------------------------------

OrderedJson component_to_json(const Component& c) {
    OrderedJson j;
    j["gap"] = c.gap;
    j["base"] = point_to_json(c.base);
    j["measure"] = c.measure();
    return j;
}

int cmd_ergodic_project(const Global& g, const std::string& set_path, Coord q) {
    auto B = load_set(set_path, g);
    auto P = invariant_projection(B, q);
    auto torsion = q_torsion_projection(B, q);
    OrderedJson doc;
    auto p = base_params("ergodic.project", g);
    p["set"] = set_path;
    p["q"] = q;
    doc["params"] = p;
    doc["mu"] = B.measure();
    OrderedJson values = OrderedJson::array();
    for (double v : P) values.push_back(v);
    doc["projection"] = values;
    doc["torsion_norm"] = torsion.norm;
    double max_identity_gap = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i)
        max_identity_gap =
            std::max(max_identity_gap, std::abs(P[i] - B.measure() - torsion.h[i].real()));
    doc["identity_gap"] = max_identity_gap;
    emit(doc, g);
    return kExitOk;
}

int cmd_ergodic_equidist(const Global& g, const std::string& set_path, Coord q, double delta) {
    auto B = load_set(set_path, g);
    auto r = is_equidistributed(B, q, delta);
    OrderedJson doc;
    auto p = base_params("ergodic.equidist", g);
    p["set"] = set_path;
    p["q"] = q;
    p["delta"] = delta;
    doc["params"] = p;
    doc["mu"] = B.measure();
    doc["equidistributed"] = r.equidistributed;
    doc["max_density"] = r.max_density;
    doc["threshold"] = r.threshold;
    doc["witness"] = component_to_json(r.witness);
    emit(doc, g);
    return r.equidistributed ? kExitOk : kExitNotFound;
}

int cmd_ergodic_increment(const Global& g, const std::string& set_path, Coord q, double delta,
                          double epsilon) {
    auto B = load_set(set_path, g);
    OrderedJson doc;
    auto p = base_params("ergodic.increment", g);
    p["set"] = set_path;
    p["q"] = q;
    p["delta"] = delta;
    p["epsilon"] = epsilon;
    doc["params"] = p;
    doc["mu"] = B.measure();
    try {
        auto r = measure_increment(B, q, delta, epsilon);
        doc["status"] = "ok";
        doc["J"] = r.J;
        doc["Q"] = big_to_json(r.Q);
        doc["component"] = component_to_json(r.component);
        doc["certificate"] = increment_steps_to_json(r.certificate);
        doc["exponent_bound"] = r.exponent_bound;
        doc["within_bound"] = r.within_bound;
        emit(doc, g);
        return kExitOk;
    } catch (const IncrementExhaustedError& e) {
        doc["status"] = "modulus_exhausted";
        doc["error"] = e.what();
        doc["certificate"] = increment_steps_to_json(e.partial_certificate);
        emit(doc, g);
        return kExitNotFound;
    }
}

int cmd_ergodic_components(const Global& g, Coord modulus, int d, Coord Q) {
    TorusSystem sys(modulus, d, g.limits);
    auto comps = ergodic_components(sys, Q);
    OrderedJson doc;
    auto p = base_params("ergodic.components", g);
    p["modulus"] = modulus;
    p["d"] = d;
    p["Q"] = Q;
    doc["params"] = p;
    OrderedJson arr = OrderedJson::array();
    for (const auto& c : comps) arr.push_back(component_to_json(c));
    doc["count"] = comps.size();
    doc["components"] = arr;
    emit(doc, g);
    return kExitOk;
}

int cmd_ergodic_deviation(const Global& g, const std::string& set_path, Coord n, Coord q) {
    auto B = load_set(set_path, g);
    OrderedJson doc;
    auto p = base_params("ergodic.mean-deviation", g);
    p["set"] = set_path;
    p["n"] = n;
    p["q"] = q;
    doc["params"] = p;
    doc["mu"] = B.measure();
    doc["deviation"] = spherical_mean_deviation(B, n, q, g.limits);
    auto dec = deviation_decomposition(B, n, q, g.limits);
    doc["torsion_norm"] = dec.torsion_norm;
    doc["offgrid_mass"] = dec.offgrid_mass;
    doc["max_offgrid_modulus"] = dec.max_offgrid_modulus;
    doc["bound"] = dec.bound;
    emit(doc, g);
    return kExitOk;
}

int cmd_ergodic_correlation(const Global& g, const std::string& set_path, Coord n, Coord q) {
    auto B = load_set(set_path, g);
    OrderedJson doc;
    auto p = base_params("ergodic.correlation", g);
    p["set"] = set_path;
    p["n"] = n;
    p["q"] = q;
    doc["params"] = p;
    doc["mu"] = B.measure();
    doc["correlation"] = spherical_correlation(B, n, q, g.limits);
    emit(doc, g);
    return kExitOk;
}

int cmd_ergodic_tree_expectation(const Global& g, const std::string& set_path,
                                 const std::string& tree_path, Coord q) {
    auto B = load_set(set_path, g);
    auto rooted = tree_from_json(read_json_file(tree_path));
    OrderedJson doc;
    auto p = base_params("ergodic.tree-expectation", g);
    p["set"] = set_path;
    p["tree"] = tree_path;
    p["q"] = q;
    doc["params"] = p;
    doc["mu"] = B.measure();
    doc["expectation"] = tree_correlation_expectation(B, rooted, q, g.limits);
    doc["mu_power"] = std::pow(B.measure(), rooted.tree.vertices().size());
    emit(doc, g);
    return kExitOk;
}

int cmd_ergodic_recurrent(const Global& g, const std::string& set_path,
                          const std::string& tree_path, Coord q, double threshold,
                          std::uint64_t cap) {
    auto B = load_set(set_path, g);
    auto rooted = tree_from_json(read_json_file(tree_path));
    auto r = find_recurrent_embedding(B, rooted, q, threshold, cap, g.limits);
    OrderedJson doc;
    auto p = base_params("ergodic.recurrent", g);
    p["set"] = set_path;
    p["tree"] = tree_path;
    p["q"] = q;
    p["threshold"] = threshold;
    p["cap"] = cap;
    doc["params"] = p;
    doc["found"] = r.found;
    doc["capped"] = r.capped;
    doc["best_measure"] = r.best_measure;
    doc["immersions_seen"] = r.immersions_seen;
    doc["embeddings_seen"] = r.embeddings_seen;
    if (r.best_measure >= 0.0) {
        OrderedJson placement;
        const auto& ids = rooted.tree.vertices();
        for (std::size_t i = 0; i < ids.size(); ++i)
            placement[ids[i]] = point_to_json(r.best.placement[i]);
        doc["best_embedding"] = placement;
    } else {
        doc["best_embedding"] = nullptr;
    }
    emit(doc, g);
    return r.found ? kExitOk : kExitNotFound;
}

int cmd_ergodic_pointwise(const Global& g, const std::string& set_path,
                          const std::string& n_list_text, double epsilon) {
    auto B = load_set(set_path, g);
    auto radii = parse_coord_list(n_list_text);
    OrderedJson doc;
    auto p = base_params("ergodic.pointwise", g);
    p["set"] = set_path;
    OrderedJson nl = OrderedJson::array();
    for (Coord n : radii) nl.push_back(n);
    p["n_list"] = nl;
    p["epsilon"] = epsilon;
    doc["params"] = p;
    doc["mu"] = B.measure();
    auto multi = multi_pointwise_check(B, radii, epsilon, g.limits);
    OrderedJson per = OrderedJson::array();
    for (const auto& e : multi.per_radius) {
        OrderedJson one;
        one["n"] = e.radius_sq;
        one["exception_measure"] = e.exception_measure;
        one["deviation"] = e.deviation;
        one["markov_bound"] = e.deviation / epsilon;
        per.push_back(one);
    }
    doc["per_n"] = per;
    doc["witness_mass"] = multi.witness_mass;
    emit(doc, g);
    return multi.witness_mass > 0.0 ? kExitOk : kExitNotFound;
}

// ---------------------------------------------------------------------------
// search / gen
// ---------------------------------------------------------------------------

int cmd_search_chain(const Global& g, const std::string& window_path, Coord q,
                     const std::string& gaps_text, std::uint64_t budget) {
    auto window = window_from_json(read_json_file(window_path));
    ChainQuery query{q, parse_coord_list(gaps_text)};
    auto report = find_chain(window, query, budget, g.limits);
    OrderedJson doc;
    auto p = base_params("search.chain", g);
    p["window"] = window_path;
    p["budget"] = budget;
    doc["params"] = p;
    doc["report"] = chain_report_to_json(report);
    emit(doc, g);
    return report.status == SearchStatus::Found ? kExitOk : kExitNotFound;
}

int cmd_search_embed(const Global& g, const std::string& window_path,
                     const std::string& tree_path, Coord q, std::uint64_t budget) {
    auto window = window_from_json(read_json_file(window_path));
    auto rooted = tree_from_json(read_json_file(tree_path));
    auto report = find_tree_embedding(window, rooted, q, budget, g.limits);
    OrderedJson doc;
    auto p = base_params("search.embed", g);
    p["window"] = window_path;
    p["tree"] = tree_path;
    p["budget"] = budget;
    doc["params"] = p;
    doc["report"] = tree_report_to_json(report, rooted);
    emit(doc, g);
    return report.status == SearchStatus::Found ? kExitOk : kExitNotFound;
}

int cmd_search_distset(const Global& g, const std::string& window_path) {
    auto window = window_from_json(read_json_file(window_path));
    auto ds = squared_distance_set(window);
    OrderedJson doc;
    auto p = base_params("search.distset", g);
    p["window"] = window_path;
    doc["params"] = p;
    doc["size"] = window.points().size();
    doc["includes_zero"] = ds.includes_zero;
    OrderedJson values = OrderedJson::array();
    for (Coord v : ds.values) values.push_back(v);
    doc["distances"] = values;
    emit(doc, g);
    return kExitOk;
}

int cmd_search_coverage(const Global& g, const std::string& window_path, Coord q, Coord lo,
                        Coord hi) {
    auto window = window_from_json(read_json_file(window_path));
    auto report = ap_coverage(window, q, lo, hi);
    OrderedJson doc;
    auto p = base_params("search.coverage", g);
    p["window"] = window_path;
    p["q"] = q;
    p["lo"] = lo;
    p["hi"] = hi;
    doc["params"] = p;
    OrderedJson attained = OrderedJson::array();
    for (Coord t = lo; t <= hi; ++t)
        if (report.attained[static_cast<std::size_t>(t - lo)]) attained.push_back(t);
    doc["attained"] = attained;
    doc["attained_count"] = report.attained_count;
    if (report.full_suffix_from)
        doc["full_suffix_from"] = *report.full_suffix_from;
    else
        doc["full_suffix_from"] = nullptr;
    emit(doc, g);
    return report.attained_count > 0 ? kExitOk : kExitNotFound;
}

int cmd_gen(const Global& g, const std::string& kind, int d, Coord side, double density,
            Coord gap, const std::string& residues_text, const std::string& witness_path,
            double noise) {
    OrderedJson doc;
    auto p = base_params("gen." + kind, g);
    p["d"] = d;
    p["side"] = side;
    doc["params"] = p;
    if (kind == "uniform") {
        doc["params"]["density"] = density;
        auto w = generate_uniform_window(d, side, density, g.seed);
        doc["window"] = window_to_json(w);
    } else if (kind == "congruence") {
        doc["params"]["g"] = gap;
        doc["params"]["residues"] = residues_text;
        auto w = generate_congruence_window(d, side, gap, parse_residues(residues_text, d));
        doc["window"] = window_to_json(w);
    } else if (kind == "planted") {
        doc["params"]["witness_file"] = witness_path;
        doc["params"]["noise"] = noise;
        auto witness = points_from_json(read_json_file(witness_path));
        auto planted = generate_planted_window(d, side, witness, noise, g.seed);
        doc["witness"] = points_to_json(planted.witness);
        doc["window"] = window_to_json(planted.window);
    } else {
        throw ValidationError("gen: unknown kind '" + kind + "'");
    }
    emit(doc, g);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lattice spheres, exponential sums, tree immersions, and exact"
                 " ergodic verification on finite torus systems"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    Global g;
    g.threads = static_cast<unsigned>(env_u64("LATREC_THREADS", 1));
    g.limits.max_sphere_points = env_u64("LATREC_MAX_POINTS", g.limits.max_sphere_points);
    g.limits.max_profile_work = env_u64("LATREC_MAX_WORK", g.limits.max_profile_work);
    g.limits.max_immersions = env_u64("LATREC_MAX_IMMERSIONS", g.limits.max_immersions);
    g.limits.max_torus_cells = env_u64("LATREC_MAX_CELLS", g.limits.max_torus_cells);

    app.add_option("--out", g.out_path, "write the JSON document here instead of stdout");
    app.add_option("--seed", g.seed, "seed for every pseudo-random draw");
    app.add_option("--threads", g.threads, "worker thread cap (never affects output bytes)")
        ->check(CLI::Range(1u, 256u));
    app.add_option("--max-points", g.limits.max_sphere_points, "sphere enumeration ceiling");
    app.add_option("--max-work", g.limits.max_profile_work, "residue profile DP work ceiling");
    app.add_option("--max-immersions", g.limits.max_immersions, "immersion stream ceiling");

    int ret = kExitOk;
    auto run = [&](auto&& fn) {
        return [&, fn]() { ret = fn(); };
    };

    // sphere
    {
        auto* sphere = app.add_subcommand("sphere", "enumerate, count, or profile S_N");
        auto d = std::make_shared<int>(5);
        auto n = std::make_shared<Coord>(0);
        auto enumerate = std::make_shared<bool>(false);
        auto count = std::make_shared<bool>(false);
        auto mod = std::make_shared<Coord>(0);
        sphere->add_option("--d", *d, "ambient dimension")->required()->check(CLI::PositiveNumber);
        sphere->add_option("--n", *n, "squared radius")->required()->check(CLI::NonNegativeNumber);
        sphere->add_flag("--enumerate", *enumerate, "emit the full point list");
        sphere->add_flag("--count", *count, "emit |S_N| (default mode)");
        sphere->add_option("--profile", *mod, "emit the residue profile mod M");
        sphere->callback(run([=, &g]() { return cmd_sphere(g, *d, *n, *enumerate, *count, *mod); }));
    }

    // qeta
    {
        auto* qeta = app.add_subcommand("qeta", "compute q_{eta,C} = lcm(1..floor(C/eta^2))");
        auto eta = std::make_shared<double>(0.5);
        auto c = std::make_shared<double>(1.0);
        qeta->add_option("--eta", *eta, "eta > 0")->required();
        qeta->add_option("--c", *c, "C > 0")->required();
        qeta->callback(run([=, &g]() { return cmd_qeta(g, *eta, *c); }));
    }

    // expsum
    {
        auto* expsum = app.add_subcommand("expsum", "normalized exponential sums over S_N");
        expsum->require_subcommand(1);
        {
            auto* ev = expsum->add_subcommand("evaluate", "one frequency, one sphere");
            auto d = std::make_shared<int>(5);
            auto n = std::make_shared<Coord>(1);
            auto theta = std::make_shared<std::string>();
            ev->add_option("--d", *d)->required()->check(CLI::PositiveNumber);
            ev->add_option("--n", *n)->required()->check(CLI::NonNegativeNumber);
            ev->add_option("--theta", *theta, "comma separated torus coordinates")->required();
            ev->callback(run([=, &g]() { return cmd_expsum_evaluate(g, *d, *n, *theta); }));
        }
        {
            auto* scan = expsum->add_subcommand("scan", "seeded minor-arc scan at one N");
            auto d = std::make_shared<int>(5);
            auto eta = std::make_shared<double>(0.5);
            auto c = std::make_shared<double>(1.0);
            auto n = std::make_shared<Coord>(64);
            auto samples = std::make_shared<std::uint64_t>(100);
            scan->add_option("--d", *d)->required()->check(CLI::PositiveNumber);
            scan->add_option("--eta", *eta)->required();
            scan->add_option("--c", *c)->required();
            scan->add_option("--n", *n)->required();
            scan->add_option("--samples", *samples)->required();
            scan->callback(run([=, &g]() { return cmd_expsum_scan(g, *d, *eta, *c, *n, *samples); }));
        }
        {
            auto* est = expsum->add_subcommand("estimate", "smallest passing C from a grid");
            auto d = std::make_shared<int>(5);
            auto eta = std::make_shared<double>(0.5);
            auto lo = std::make_shared<Coord>(0);
            auto hi = std::make_shared<Coord>(0);
            auto stride = std::make_shared<Coord>(1);
            auto grid = std::make_shared<std::string>();
            auto samples = std::make_shared<std::uint64_t>(100);
            est->add_option("--d", *d)->required()->check(CLI::PositiveNumber);
            est->add_option("--eta", *eta)->required();
            est->add_option("--n-lo", *lo)->required();
            est->add_option("--n-hi", *hi)->required();
            est->add_option("--n-stride", *stride);
            est->add_option("--grid", *grid, "ascending comma separated C grid")->required();
            est->add_option("--samples", *samples)->required();
            est->callback(run(
                [=, &g]() { return cmd_expsum_estimate(g, *d, *eta, *lo, *hi, *stride, *grid, *samples); }));
        }
    }

    // tree
    {
        auto* tree = app.add_subcommand("tree", "counting and enumeration from a tree file");
        tree->require_subcommand(1);
        for (const std::string mode : {"count", "bounds", "enumerate"}) {
            auto* sub = tree->add_subcommand(mode);
            auto file = std::make_shared<std::string>();
            auto d = std::make_shared<int>(5);
            auto limit = std::make_shared<std::uint64_t>(0);
            sub->add_option("--file", *file, "tree JSON file")->required();
            sub->add_option("--d", *d)->required()->check(CLI::PositiveNumber);
            CLI::Option* lim = nullptr;
            if (mode == "enumerate") lim = sub->add_option("--limit", *limit, "emit at most this many");
            sub->callback(run([=, &g]() {
                bool has_limit = lim != nullptr && lim->count() > 0;
                return cmd_tree(g, mode, *file, *d, *limit, has_limit);
            }));
        }
    }

    // ergodic
    {
        auto* ergodic = app.add_subcommand("ergodic", "exact verification on (Z_M)^d");
        ergodic->require_subcommand(1);
        {
            auto* sub = ergodic->add_subcommand("project", "P_{T^q} 1_B and its torsion part");
            auto set = std::make_shared<std::string>();
            auto q = std::make_shared<Coord>(1);
            sub->add_option("--set", *set)->required();
            sub->add_option("--q", *q)->required();
            sub->callback(run([=, &g]() { return cmd_ergodic_project(g, *set, *q); }));
        }
        {
            auto* sub = ergodic->add_subcommand("equidist", "(q,delta)-equidistribution check");
            auto set = std::make_shared<std::string>();
            auto q = std::make_shared<Coord>(1);
            auto delta = std::make_shared<double>(0.0);
            sub->add_option("--set", *set)->required();
            sub->add_option("--q", *q)->required();
            sub->add_option("--delta", *delta)->required();
            sub->callback(run([=, &g]() { return cmd_ergodic_equidist(g, *set, *q, *delta); }));
        }
        {
            auto* sub = ergodic->add_subcommand("increment", "measure increment loop");
            auto set = std::make_shared<std::string>();
            auto q = std::make_shared<Coord>(2);
            auto delta = std::make_shared<double>(0.5);
            auto eps = std::make_shared<double>(0.05);
            sub->add_option("--set", *set)->required();
            sub->add_option("--q", *q)->required();
            sub->add_option("--delta", *delta)->required();
            sub->add_option("--epsilon", *eps)->required();
            sub->callback(run([=, &g]() { return cmd_ergodic_increment(g, *set, *q, *delta, *eps); }));
        }
        {
            auto* sub = ergodic->add_subcommand("components", "T^Q-ergodic components");
            auto m = std::make_shared<Coord>(4);
            auto d = std::make_shared<int>(1);
            auto Q = std::make_shared<Coord>(1);
            sub->add_option("--modulus", *m)->required();
            sub->add_option("--d", *d)->required()->check(CLI::PositiveNumber);
            sub->add_option("--Q", *Q)->required();
            sub->callback(run([=, &g]() { return cmd_ergodic_components(g, *m, *d, *Q); }));
        }
        {
            auto* sub = ergodic->add_subcommand("mean-deviation",
                                                "||mu(B) - A_N 1_B||_2 with its decomposition");
            auto set = std::make_shared<std::string>();
            auto n = std::make_shared<Coord>(1);
            auto q = std::make_shared<Coord>(1);
            sub->add_option("--set", *set)->required();
            sub->add_option("--n", *n)->required();
            sub->add_option("--q", *q);
            sub->callback(run([=, &g]() { return cmd_ergodic_deviation(g, *set, *n, *q); }));
        }
        {
            auto* sub = ergodic->add_subcommand("correlation", "spherical correlation");
            auto set = std::make_shared<std::string>();
            auto n = std::make_shared<Coord>(1);
            auto q = std::make_shared<Coord>(1);
            sub->add_option("--set", *set)->required();
            sub->add_option("--n", *n)->required();
            sub->add_option("--q", *q);
            sub->callback(run([=, &g]() { return cmd_ergodic_correlation(g, *set, *n, *q); }));
        }
        {
            auto* sub = ergodic->add_subcommand("tree-expectation",
                                                "immersion-averaged intersection measure");
            auto set = std::make_shared<std::string>();
            auto tree = std::make_shared<std::string>();
            auto q = std::make_shared<Coord>(1);
            sub->add_option("--set", *set)->required();
            sub->add_option("--tree", *tree)->required();
            sub->add_option("--q", *q);
            sub->callback(run([=, &g]() { return cmd_ergodic_tree_expectation(g, *set, *tree, *q); }));
        }
        {
            auto* sub = ergodic->add_subcommand("recurrent", "search embeddings by measure");
            auto set = std::make_shared<std::string>();
            auto tree = std::make_shared<std::string>();
            auto q = std::make_shared<Coord>(1);
            auto threshold = std::make_shared<double>(0.0);
            auto cap = std::make_shared<std::uint64_t>(1'000'000);
            sub->add_option("--set", *set)->required();
            sub->add_option("--tree", *tree)->required();
            sub->add_option("--q", *q);
            sub->add_option("--threshold", *threshold)->required();
            sub->add_option("--cap", *cap);
            sub->callback(run(
                [=, &g]() { return cmd_ergodic_recurrent(g, *set, *tree, *q, *threshold, *cap); }));
        }
        {
            auto* sub = ergodic->add_subcommand("pointwise", "exception sets U_N and witness mass");
            auto set = std::make_shared<std::string>();
            auto ns = std::make_shared<std::string>();
            auto eps = std::make_shared<double>(0.1);
            sub->add_option("--set", *set)->required();
            sub->add_option("--n-list", *ns, "comma separated radii")->required();
            sub->add_option("--epsilon", *eps)->required();
            sub->callback(run([=, &g]() { return cmd_ergodic_pointwise(g, *set, *ns, *eps); }));
        }
    }

    // search
    {
        auto* search = app.add_subcommand("search", "combinatorial searches in window sets");
        search->require_subcommand(1);
        {
            auto* sub = search->add_subcommand("chain", "chain with prescribed gaps");
            auto window = std::make_shared<std::string>();
            auto q = std::make_shared<Coord>(1);
            auto gaps = std::make_shared<std::string>();
            auto budget = std::make_shared<std::uint64_t>(10'000'000);
            sub->add_option("--window", *window)->required();
            sub->add_option("--q", *q)->required();
            sub->add_option("--gaps", *gaps, "comma separated t_i")->required();
            sub->add_option("--budget", *budget);
            sub->callback(run([=, &g]() { return cmd_search_chain(g, *window, *q, *gaps, *budget); }));
        }
        {
            auto* sub = search->add_subcommand("embed", "locally isometric tree embedding");
            auto window = std::make_shared<std::string>();
            auto tree = std::make_shared<std::string>();
            auto q = std::make_shared<Coord>(1);
            auto budget = std::make_shared<std::uint64_t>(10'000'000);
            sub->add_option("--window", *window)->required();
            sub->add_option("--tree", *tree)->required();
            sub->add_option("--q", *q)->required();
            sub->add_option("--budget", *budget);
            sub->callback(run([=, &g]() { return cmd_search_embed(g, *window, *tree, *q, *budget); }));
        }
        {
            auto* sub = search->add_subcommand("distset", "exact squared-distance set");
            auto window = std::make_shared<std::string>();
            sub->add_option("--window", *window)->required();
            sub->callback(run([=, &g]() { return cmd_search_distset(g, *window); }));
        }
        {
            auto* sub = search->add_subcommand("coverage", "attained multiples of q");
            auto window = std::make_shared<std::string>();
            auto q = std::make_shared<Coord>(1);
            auto lo = std::make_shared<Coord>(1);
            auto hi = std::make_shared<Coord>(10);
            sub->add_option("--window", *window)->required();
            sub->add_option("--q", *q)->required();
            sub->add_option("--lo", *lo)->required();
            sub->add_option("--hi", *hi)->required();
            sub->callback(run([=, &g]() { return cmd_search_coverage(g, *window, *q, *lo, *hi); }));
        }
    }

    // gen
    {
        auto* gen = app.add_subcommand("gen", "window generation");
        auto kind = std::make_shared<std::string>();
        auto d = std::make_shared<int>(5);
        auto side = std::make_shared<Coord>(8);
        auto density = std::make_shared<double>(0.5);
        auto gap = std::make_shared<Coord>(2);
        auto residues = std::make_shared<std::string>("0");
        auto witness = std::make_shared<std::string>();
        auto noise = std::make_shared<double>(0.0);
        gen->add_option("--kind", *kind, "uniform | congruence | planted")->required();
        gen->add_option("--d", *d)->required()->check(CLI::PositiveNumber);
        gen->add_option("--l", *side, "window side")->required()->check(CLI::PositiveNumber);
        gen->add_option("--density", *density);
        gen->add_option("--g", *gap);
        gen->add_option("--residues", *residues, "semicolon separated residue vectors");
        gen->add_option("--witness-file", *witness, "JSON array of planted points");
        gen->add_option("--noise", *noise);
        gen->callback(run([=, &g]() {
            return cmd_gen(g, *kind, *d, *side, *density, *gap, *residues, *witness, *noise);
        }));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        OrderedJson diag;
        diag["error"] = {{"kind", "usage"}, {"message", e.what()}};
        emit(diag, g);
        return kExitUsage;
    } catch (const ResourceLimitError& e) {
        OrderedJson diag;
        diag["error"] = {{"kind", "resource_limit"}, {"message", e.what()}};
        emit(diag, g);
        return kExitResource;
    } catch (const ValidationError& e) {
        OrderedJson diag;
        diag["error"] = {{"kind", "validation"}, {"message", e.what()}};
        emit(diag, g);
        return kExitUsage;
    } catch (const Error& e) {
        OrderedJson diag;
        diag["error"] = {{"kind", "internal"}, {"message", e.what()}};
        emit(diag, g);
        return kExitUsage;
    } catch (const std::exception& e) {
        OrderedJson diag;
        diag["error"] = {{"kind", "unexpected"}, {"message", e.what()}};
        emit(diag, g);
        return kExitUsage;
    }
    return ret;
}
