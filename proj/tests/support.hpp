#pragma once

// Shared test-corpus generators (random trees, random masks).

#include <string>
#include <vector>

#include "latrec/common.hpp"
#include "latrec/tree_model.hpp"

namespace support {

using latrec::Coord;

/// Random tree on m vertices: vertex i attaches to a random earlier vertex.
/// Labels are drawn uniformly from [label_lo, label_hi].
inline latrec::RootedTree random_tree(latrec::Rng& rng, int m, Coord label_lo, Coord label_hi) {
    std::vector<std::string> vertices;
    std::vector<latrec::EdgeLabelledTree::Edge> edges;
    for (int i = 0; i < m; ++i) vertices.push_back("v" + std::to_string(i));
    for (int i = 1; i < m; ++i) {
        auto parent = static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(i)));
        Coord label = label_lo + static_cast<Coord>(rng.next_below(
                                     static_cast<std::uint64_t>(label_hi - label_lo + 1)));
        edges.push_back({vertices[parent], vertices[static_cast<std::size_t>(i)], label});
    }
    return {latrec::EdgeLabelledTree(std::move(vertices), std::move(edges)), "v0"};
}

}  // namespace support
