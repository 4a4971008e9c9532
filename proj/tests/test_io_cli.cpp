#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "latrec/io.hpp"

using namespace latrec;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

std::string cli_path() {
    const char* p = std::getenv("LATREC_CLI");
    REQUIRE(p != nullptr);
    return p;
}

CliResult run_cli(const std::string& args) {
    std::string cmd = cli_path() + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string temp_file(const std::string& name, const std::string& content) {
    std::string path = "/tmp/latrec_test_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("dump_canonical") {
    OrderedJson doc;
    doc["b_first"] = 1;
    doc["a_second"] = 0.5;
    doc["list"] = OrderedJson::array({1, 2.25, "x"});
    doc["nul"] = nullptr;
    doc["flag"] = true;
    SECTION("preserves insertion order and formats floats with %.12g") {
        REQUIRE(dump_canonical(doc) ==
                "{\"b_first\":1,\"a_second\":0.5,\"list\":[1,2.25,\"x\"],\"nul\":null,"
                "\"flag\":true}\n");
    }
    SECTION("12 significant digits") {
        OrderedJson v;
        v["pi"] = 3.14159265358979323846;
        v["third"] = 1.0 / 3.0;
        REQUIRE(dump_canonical(v) == "{\"pi\":3.14159265359,\"third\":0.333333333333}\n");
    }
    SECTION("non-finite floats are rejected") {
        OrderedJson v;
        v["bad"] = std::numeric_limits<double>::infinity();
        REQUIRE_THROWS_AS(dump_canonical(v), ValidationError);
    }
}

TEST_CASE("tree file round trip and rejection") {
    auto good = nlohmann::json::parse(R"({
        "vertices": ["a", "b", "c"],
        "root": "a",
        "edges": [{"u": "a", "v": "b", "label": 4}, {"u": "b", "v": "c", "label": 9}]
    })");
    auto rooted = tree_from_json(good);
    REQUIRE(rooted.tree.vertices().size() == 3);
    REQUIRE(rooted.root == "a");
    auto echoed = tree_to_json(rooted);
    REQUIRE(tree_from_json(echoed).tree.edges().size() == 2);

    SECTION("missing fields") {
        auto bad = good;
        bad.erase("root");
        REQUIRE_THROWS_AS(tree_from_json(bad), ValidationError);
    }
    SECTION("invariant violations carry a descriptive message") {
        auto bad = good;
        bad["edges"][1]["label"] = 0;
        REQUIRE_THROWS_WITH(tree_from_json(bad),
                            Catch::Matchers::ContainsSubstring("non-positive label"));
        auto cycle = nlohmann::json::parse(R"({
            "vertices": ["a", "b"], "root": "a",
            "edges": [{"u":"a","v":"b","label":1},{"u":"b","v":"a","label":2}]
        })");
        REQUIRE_THROWS_AS(tree_from_json(cycle), ValidationError);
    }
}

TEST_CASE("window and measurable-set files") {
    SECTION("window points") {
        auto w = window_from_json(
            nlohmann::json::parse(R"({"dimension":2,"side":4,"points":[[0,0],[1,2]]})"));
        REQUIRE(w.points().size() == 2);
        auto echoed = window_to_json(w);
        REQUIRE(window_from_json(echoed).points() == w.points());
    }
    SECTION("window generator descriptor") {
        auto w = window_from_json(nlohmann::json::parse(
            R"({"dimension":2,"side":4,"generator":{"kind":"congruence","g":2,"residues":[[0,0]]}})"));
        REQUIRE(w.points().size() == 4);
    }
    SECTION("a full `gen` output document is accepted as a window file") {
        auto w = window_from_json(nlohmann::json::parse(
            R"({"params":{"command":"gen.uniform"},
                "window":{"dimension":2,"side":4,"points":[[0,0],[1,2]]}})"));
        REQUIRE(w.points().size() == 2);
    }
    SECTION("measurable set: explicit points and congruence") {
        auto a = measurable_set_from_json(
            nlohmann::json::parse(R"({"modulus":4,"dimension":1,"points":[[0],[1]]})"));
        REQUIRE(a.popcount() == 2);
        auto b = measurable_set_from_json(nlohmann::json::parse(
            R"({"modulus":4,"dimension":2,"congruence":{"g":2,"residues":[[0,0]]}})"));
        REQUIRE(b.measure() == Catch::Approx(0.25));
        auto echoed = measurable_set_to_json(a);
        REQUIRE(measurable_set_from_json(echoed).popcount() == 2);
    }
    SECTION("out-of-window point is rejected") {
        REQUIRE_THROWS_AS(window_from_json(nlohmann::json::parse(
                              R"({"dimension":2,"side":4,"points":[[0,7]]})")),
                          ValidationError);
    }
}

TEST_CASE("cli: documented examples") {
    auto count = run_cli("sphere --d 5 --n 1 --count");
    REQUIRE(count.exit_code == 0);
    REQUIRE(count.output.find("\"count\":10") != std::string::npos);

    auto qeta = run_cli("qeta --eta 0.5 --c 1");
    REQUIRE(qeta.exit_code == 0);
    REQUIRE(qeta.output.find("\"q\":12") != std::string::npos);
}

TEST_CASE("cli: parameter echo") {
    auto r = run_cli("sphere --d 5 --n 2 --count --seed 9");
    REQUIRE(r.output.find("\"command\":\"sphere\"") != std::string::npos);
    REQUIRE(r.output.find("\"seed\":9") != std::string::npos);
    REQUIRE(r.output.find("\"d\":5") != std::string::npos);
    REQUIRE(r.output.find("\"n\":2") != std::string::npos);
}

TEST_CASE("cli: exit codes") {
    SECTION("usage error: unknown flag") {
        REQUIRE(run_cli("sphere --d 5 --n 1 --nonsense").exit_code == 1);
    }
    SECTION("validation error") {
        REQUIRE(run_cli("sphere --d 0 --n 1").exit_code == 1);
    }
    SECTION("resource ceiling") {
        REQUIRE(run_cli("sphere --d 5 --n 4 --enumerate --max-points 5").exit_code == 3);
    }
    SECTION("ceilings default from the environment") {
        auto r = run_cli("sphere --d 5 --n 4 --enumerate");
        REQUIRE(r.exit_code == 0);
        setenv("LATREC_MAX_POINTS", "5", 1);
        auto capped = run_cli("sphere --d 5 --n 4 --enumerate");
        unsetenv("LATREC_MAX_POINTS");
        REQUIRE(capped.exit_code == 3);
        REQUIRE(capped.output.find("resource_limit") != std::string::npos);
    }
    SECTION("not-found is 2 with a valid report") {
        auto w = temp_file("notfound_window.json",
                           R"({"dimension":3,"side":4,"points":[[0,0,0]]})");
        auto r = run_cli("search chain --window " + w + " --q 1 --gaps 1 --budget 1000");
        REQUIRE(r.exit_code == 2);
        REQUIRE(r.output.find("\"status\":\"not_found\"") != std::string::npos);
    }
}

TEST_CASE("cli: planted search through files") {
    auto w = temp_file("planted_window.json",
                       R"({"dimension":3,"side":10,
                           "points":[[0,0,0],[3,4,0],[3,4,5]]})");
    auto r = run_cli("search chain --window " + w + " --q 5 --gaps 5,5 --budget 100000");
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.output.find("\"status\":\"found\"") != std::string::npos);
    REQUIRE(r.output.find("\"witness\":[[0,0,0],[3,4,0],[3,4,5]]") != std::string::npos);
}

TEST_CASE("cli: byte-identical reruns across thread counts") {
    std::vector<std::string> invocations = {
        "sphere --d 5 --n 9 --enumerate",
        "expsum scan --d 5 --eta 0.4 --c 0.5 --n 80 --samples 40 --seed 11",
        "qeta --eta 0.3 --c 2",
    };
    for (const auto& inv : invocations) {
        auto a = run_cli(inv + " --threads 1");
        auto b = run_cli(inv + " --threads 4");
        REQUIRE(a.exit_code == b.exit_code);
        REQUIRE(a.output == b.output);
        REQUIRE_FALSE(a.output.empty());
    }
}
