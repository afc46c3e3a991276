#pragma once

#include <string>
#include <vector>

#include "cityvol/common.hpp"
#include "cityvol/embedding.hpp"
#include "cityvol/scenario.hpp"
#include "cityvol/trajectory.hpp"

namespace cityvol {

// Sparse list of unordered node pairs with non-negative similarity weights;
// each pair is stored once with a < b.
struct MaskedSimilarityGraph {
    struct Pair {
        int a = 0;
        int b = 0;
        double weight = 0.0;
    };

    int segments = 0;
    int intervals = 0;
    std::vector<Pair> pairs;

    int node_index(int row, int t) const { return t * segments + row; }
};

// Eq-style mask: keep embedding similarity for (i,t),(j,t') only when the
// segments are road-adjacent in either direction (self included) and the
// intervals are at most one apart; negative similarities clamp to zero by
// default.
MaskedSimilarityGraph build_masked_graph(const EmbeddingTable& table,
                                         const RoadNetwork& net, int intervals,
                                         bool clamp_negative = true);

// Ablation: drop the road-adjacency mask, keep the one-interval window and
// the clamp (an unwindowed variant is quadratic in m*n and intractable).
MaskedSimilarityGraph build_unmasked_graph(const EmbeddingTable& table,
                                           int intervals);

// Ablation: skip embeddings entirely; weights are the summed edge weights of
// the two spatiotemporal graphs, treated as undirected pairs.
MaskedSimilarityGraph graph_from_st_edges(const STGraph& gD,
                                          const STGraph& gI);

enum class SolveMode { GaussSeidel, Jacobi };

struct InferenceProblem {
    VolumeTensor volumes;  // observed cells are fixed boundary values
    MaskedSimilarityGraph graph;
    double tol = 1e-8;  // relative to the largest observed magnitude
    int max_iter = 10000;
    SolveMode mode = SolveMode::GaussSeidel;
};

struct SolveResult {
    VolumeTensor volumes;
    bool converged = false;
    int iterations = 0;
    double final_residual = 0.0;
    std::vector<int> isolated_cells;       // filled with the observed mean
    std::vector<double> objective_trace;   // only when tracking is on
};

// Minimizes sum of w * (x_a - x_b)^2 over unobserved cells with observed
// cells clamped, by harmonic (weighted-average) sweeps.
SolveResult solve(const InferenceProblem& problem, bool track_objective = false);

// Exact objective over stored pairs, each unordered pair counted once.
double objective(const InferenceProblem& problem, const VolumeTensor& x);

void save_volumes_csv(const VolumeTensor& v, const RoadNetwork& net,
                      const std::string& path);
VolumeTensor load_volumes_csv(const std::string& path, const RoadNetwork& net,
                              int intervals);

}  // namespace cityvol
