#pragma once

#include <cstdint>
#include <vector>

#include "cityvol/common.hpp"
#include "cityvol/scenario.hpp"
#include "cityvol/trajectory.hpp"

namespace cityvol {

// Layered graph over time-enhanced segments: node (i, t) is segment row i
// during interval t, edges only cross from layer t to t + 1.
struct STGraph {
    struct Edge {
        int to = 0;       // node index
        double weight = 0.0;
    };

    int segments = 0;
    int intervals = 0;
    std::vector<std::vector<Edge>> out;  // indexed by node
    std::size_t dropped_span = 0;        // traversals spanning > 2 intervals
    std::size_t dropped_adjacency = 0;   // traversals violating adjacent()
    std::size_t dropped_boundary = 0;    // edges that would leave the last layer

    int node_index(int row, int t) const { return t * segments + row; }
    int node_row(int idx) const { return idx % segments; }
    int node_interval(int idx) const { return idx / segments; }
    std::size_t node_count() const {
        return static_cast<std::size_t>(segments) * intervals;
    }
    std::size_t edge_count() const;
    double total_weight() const;
};

// Counts consecutive traversals (entered i during t, entered j during t')
// as weight on edge (i,t) -> (j,t+1) when t' is t or t + 1.
STGraph build_st_graph(const TrajectorySet& set, const RoadNetwork& net,
                       double interval_s, int intervals);

// One weighted forward walk; stops early at sinks.
std::vector<int> walk_from(const STGraph& g, int start, int walk_len,
                           Rng& rng);

// walks_per_node weighted forward walks from every node with out-edges,
// deterministic per seed (per-start-node RNG streams).
std::vector<std::vector<int>> random_walks(const STGraph& g, int walk_len,
                                           int walks_per_node,
                                           std::uint64_t seed);

void save_st_graph_csv(const STGraph& g, const RoadNetwork& net,
                       const std::string& path);
STGraph load_st_graph_csv(const std::string& path, const RoadNetwork& net,
                          int intervals);

}  // namespace cityvol
