#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cityvol/common.hpp"
#include "cityvol/st_graph.hpp"

namespace cityvol {

// Center vectors u and context vectors u' for every time-enhanced segment,
// shared across both spatiotemporal graphs.
struct EmbeddingTable {
    int segments = 0;
    int intervals = 0;
    int dim = 0;
    std::vector<double> center;
    std::vector<double> context;

    int node_index(int row, int t) const { return t * segments + row; }
    std::size_t node_count() const {
        return static_cast<std::size_t>(segments) * intervals;
    }
    std::span<double> u(int node) {
        return {center.data() + static_cast<std::size_t>(node) * dim,
                static_cast<std::size_t>(dim)};
    }
    std::span<const double> u(int node) const {
        return {center.data() + static_cast<std::size_t>(node) * dim,
                static_cast<std::size_t>(dim)};
    }
    std::span<double> uc(int node) {
        return {context.data() + static_cast<std::size_t>(node) * dim,
                static_cast<std::size_t>(dim)};
    }
    std::span<const double> uc(int node) const {
        return {context.data() + static_cast<std::size_t>(node) * dim,
                static_cast<std::size_t>(dim)};
    }
};

struct EmbedConfig {
    int dim = 50;
    int window = 10;
    int negatives = 5;
    double lr = 0.025;
    double lr_min = 0.0001;
    int epochs = 3;
    double alpha = 0.5;
    double noise_exponent = 0.75;
    int walk_len = 20;
    int walks_per_node = 10;
    std::uint64_t seed = 0;
};

// All ordered (center, context) pairs within `window` positions of each
// other inside one walk.
std::vector<std::pair<int, int>> context_pairs(const std::vector<int>& walk,
                                               int window);

// Unigram^exponent noise distribution over node ids, built from a walk
// corpus; sampling rejects one excluded node.
class NoiseDistribution {
public:
    NoiseDistribution() = default;
    NoiseDistribution(const std::vector<std::vector<int>>& walks,
                      std::size_t node_count, double exponent);

    bool empty() const { return cumulative_.empty(); }
    int sample(Rng& rng) const;

private:
    std::vector<double> cumulative_;
    std::vector<int> ids_;
};

std::vector<int> negative_sample(const NoiseDistribution& noise, int k,
                                 int exclude, Rng& rng);

// One stochastic ascent step on the skip-gram-negative-sampling objective
// for a (center, context) pair, scaled by lr * weight. Returns the
// pre-update objective value (unscaled).
double sgns_step(EmbeddingTable& table, int center, int context,
                 std::span<const int> negatives, double lr, double weight);

struct JointTrainResult {
    EmbeddingTable table;
    std::vector<double> epoch_mean_objective;
};

// Trains shared embeddings over both graphs' walk corpora; pairs from the
// dense graph carry weight alpha, pairs from the recovered graph 1 - alpha.
// Zero-weight walks are skipped outright, so either endpoint of alpha
// reduces bit-exactly to single-graph training.
JointTrainResult joint_train(const STGraph& gD, const STGraph& gI,
                             const EmbedConfig& cfg);

// Inner product of the two center vectors.
double similarity(const EmbeddingTable& table, int row_i, int t_i, int row_j,
                  int t_j);

void save_embedding_csv(const EmbeddingTable& table, const RoadNetwork& net,
                        const std::string& path);
EmbeddingTable load_embedding_csv(const std::string& path,
                                  const RoadNetwork& net, int intervals);

}  // namespace cityvol
