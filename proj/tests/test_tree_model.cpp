#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "latrec/tree_model.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace latrec;

TEST_CASE("tree validation") {
    using Edge = EdgeLabelledTree::Edge;
    REQUIRE_THROWS_AS(EdgeLabelledTree({}, {}), ValidationError);
    REQUIRE_THROWS_AS(EdgeLabelledTree({"a", "b"}, {}), ValidationError);  // disconnected count
    REQUIRE_THROWS_AS(EdgeLabelledTree({"a", "a"}, {Edge{"a", "a", 1}}), ValidationError);
    REQUIRE_THROWS_AS(EdgeLabelledTree({"a", "b"}, {Edge{"a", "b", 0}}), ValidationError);
    REQUIRE_THROWS_AS(EdgeLabelledTree({"a", "b", "c", "d"},
                                       {Edge{"a", "b", 1}, Edge{"c", "d", 1}, Edge{"b", "a", 2}}),
                      ValidationError);  // cycle + disconnected component
    REQUIRE_THROWS_AS(RootedTree(EdgeLabelledTree({"a", "b"}, {Edge{"a", "b", 1}}), "zz"),
                      ValidationError);
    REQUIRE_NOTHROW(RootedTree(EdgeLabelledTree({"a"}, {}), "a"));
}

TEST_CASE("leaf_order") {
    SECTION("single edge") {
        auto t = make_path({25});
        auto order = leaf_order(t);
        REQUIRE(order.size() == 1);
        REQUIRE(order[0].parent == t.root_index);
        REQUIRE(order[0].label == 25);
    }
    SECTION("path rooted at an endpoint is forced") {
        auto t = make_path({3, 5});
        auto order = leaf_order(t);
        REQUIRE(order.size() == 2);
        REQUIRE(t.tree.vertices()[order[0].parent] == "v0");
        REQUIRE(t.tree.vertices()[order[0].child] == "v1");
        REQUIRE(t.tree.vertices()[order[1].parent] == "v1");
        REQUIRE(t.tree.vertices()[order[1].child] == "v2");
    }
    SECTION("star spokes come in identifier order") {
        auto t = make_star({4, 9, 16});
        auto order = leaf_order(t);
        REQUIRE(order.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            REQUIRE(t.tree.vertices()[order[i].parent] == "v0");
            REQUIRE(t.tree.vertices()[order[i].child] == "v" + std::to_string(i + 1));
        }
    }
    SECTION("prefixes are connected for random trees") {
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            auto t = support::random_tree(rng, 2 + static_cast<int>(rng.next_below(6)), 1, 9);
            auto order = leaf_order(t);
            std::set<std::size_t> seen{t.root_index};
            for (const auto& e : order) {
                REQUIRE(seen.count(e.parent) == 1);
                REQUIRE(seen.count(e.child) == 0);
                seen.insert(e.child);
            }
            REQUIRE(seen.size() == t.tree.vertices().size());
        }
    }
}

TEST_CASE("make_path / make_star") {
    auto path = make_path({25});
    REQUIRE(path.tree.vertices().size() == 2);
    REQUIRE(path.tree.edges().size() == 1);
    REQUIRE(path.tree.edges()[0].label == 25);
    REQUIRE(path.root == "v0");

    auto star = make_star({4, 9, 16});
    REQUIRE(star.tree.vertices().size() == 4);
    REQUIRE(star.tree.adjacency()[star.root_index].size() == 3);

    REQUIRE_THROWS_AS(make_path({}), ValidationError);
    REQUIRE_THROWS_AS(make_star({}), ValidationError);
}

TEST_CASE("count_immersions and embedding_lower_bound") {
    SECTION("single edge labelled 1 in d=5") {
        auto t = make_path({1});
        REQUIRE(count_immersions(t, 5) == 10);
        REQUIRE(embedding_lower_bound(t, 5) == 10);
    }
    SECTION("path (1,1) in d=5") {
        auto t = make_path({1, 1});
        REQUIRE(count_immersions(t, 5) == 100);
        REQUIRE(embedding_lower_bound(t, 5) == 90);  // 10 * (10 - 1)
    }
    SECTION("unrepresentable label kills the product") {
        auto t = make_path({1, 7, 2});
        REQUIRE(count_immersions(t, 3) == 0);
        REQUIRE(embedding_lower_bound(t, 3) == 0);
    }
    SECTION("clamped factor gives 0") {
        // d=1: |S_1| = 2, so a path (1,1,1) has factors 2,1,0.
        auto t = make_path({1, 1, 1});
        REQUIRE(embedding_lower_bound(t, 1) == 0);
        REQUIRE(count_immersions(t, 1) == 8);
    }
}

TEST_CASE("enumerate_immersions") {
    SECTION("single edge labelled 1, d=5: the ten unit placements") {
        auto t = make_path({1});
        auto imms = enumerate_immersions(t, 5);
        REQUIRE(imms.size() == 10);
        auto unit = oracle::box_sphere(5, 1);
        for (std::size_t i = 0; i < imms.size(); ++i) {
            REQUIRE(imms[i].placement[0] == LatticePoint{0, 0, 0, 0, 0});
            REQUIRE(imms[i].placement[1] == unit[i]);
            REQUIRE(validate_immersion(t, 5, imms[i]));
            REQUIRE(is_embedding(imms[i]));
        }
    }
    SECTION("path (1,1), d=5: 100 immersions, 90 embeddings") {
        auto t = make_path({1, 1});
        auto imms = enumerate_immersions(t, 5);
        REQUIRE(imms.size() == 100);
        std::size_t embeddings = 0;
        for (const auto& imm : imms) {
            REQUIRE(validate_immersion(t, 5, imm));
            if (is_embedding(imm)) ++embeddings;
        }
        REQUIRE(embeddings == 90);
    }
    SECTION("unrepresentable label: empty stream") {
        auto t = make_path({7});
        REQUIRE(enumerate_immersions(t, 3).empty());
    }
    SECTION("limit caps the stream") {
        auto t = make_path({1, 1});
        REQUIRE(enumerate_immersions(t, 5, 17).size() == 17);
        REQUIRE(enumerate_immersions(t, 5, 0).empty());
    }
    SECTION("ceiling without a limit raises") {
        Limits tight;
        tight.max_immersions = 50;
        auto t = make_path({1, 1});
        REQUIRE_THROWS_AS(enumerate_immersions(t, 5, std::nullopt, tight), ResourceLimitError);
    }
}

TEST_CASE("is_embedding") {
    Immersion two{{LatticePoint{0, 0}, LatticePoint{1, 0}}};
    REQUIRE(is_embedding(two));
    Immersion repeat{{LatticePoint{0, 0}, LatticePoint{1, 0}, LatticePoint{0, 0}}};
    REQUIRE_FALSE(is_embedding(repeat));
}

TEST_CASE("enumerated count equals the product formula on random trees") {
    Rng rng(99);
    int done = 0;
    while (done < 12) {
        auto t = support::random_tree(rng, 2 + static_cast<int>(rng.next_below(3)), 1, 6);
        BigInt expected = count_immersions(t, 3);
        if (expected > 20000) continue;
        ++done;
        std::uint64_t streamed = for_each_immersion(t, 3, [&](const auto&) { return true; });
        REQUIRE(BigInt(streamed) == expected);

        std::uint64_t embeddings = 0;
        for_each_immersion(t, 3, [&](const std::vector<LatticePoint>& placement) {
            if (placement_injective(placement)) ++embeddings;
            return true;
        });
        REQUIRE(BigInt(embeddings) >= embedding_lower_bound(t, 3));
    }
}
