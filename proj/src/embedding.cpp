#include "cityvol/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "cityvol/csv.hpp"

namespace cityvol {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow on either tail.
double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Number of pairs context_pairs() yields for a walk of length n.
std::size_t pair_count(std::size_t n, int window) {
    std::size_t total = 0;
    for (std::size_t p = 0; p < n; ++p) {
        std::size_t lo = p >= static_cast<std::size_t>(window)
                             ? p - window
                             : 0;
        std::size_t hi = std::min(n - 1, p + window);
        total += hi - lo;
    }
    return total;
}

}  // namespace

std::vector<std::pair<int, int>> context_pairs(const std::vector<int>& walk,
                                               int window) {
    if (window < 1) throw ConfigError("context_pairs: window must be >= 1");
    std::vector<std::pair<int, int>> pairs;
    const std::size_t n = walk.size();
    for (std::size_t p = 0; p < n; ++p) {
        std::size_t lo = p >= static_cast<std::size_t>(window) ? p - window : 0;
        std::size_t hi = std::min(n == 0 ? 0 : n - 1,
                                  p + static_cast<std::size_t>(window));
        for (std::size_t q = lo; q <= hi && n > 0; ++q) {
            if (q == p) continue;
            pairs.emplace_back(walk[p], walk[q]);
        }
    }
    return pairs;
}

NoiseDistribution::NoiseDistribution(
    const std::vector<std::vector<int>>& walks, std::size_t node_count,
    double exponent) {
    std::vector<std::size_t> counts(node_count, 0);
    for (const auto& walk : walks)
        for (int node : walk) {
            if (node < 0 || static_cast<std::size_t>(node) >= node_count)
                throw ConfigError("NoiseDistribution: node out of range");
            ++counts[node];
        }
    double acc = 0.0;
    for (std::size_t i = 0; i < node_count; ++i) {
        if (counts[i] == 0) continue;
        acc += std::pow(static_cast<double>(counts[i]), exponent);
        cumulative_.push_back(acc);
        ids_.push_back(static_cast<int>(i));
    }
}

int NoiseDistribution::sample(Rng& rng) const {
    if (empty()) throw ConfigError("NoiseDistribution: empty distribution");
    double x = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;
    return ids_[it - cumulative_.begin()];
}

std::vector<int> negative_sample(const NoiseDistribution& noise, int k,
                                 int exclude, Rng& rng) {
    if (k < 0) throw ConfigError("negative_sample: k must be >= 0");
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
        int node = noise.sample(rng);
        for (int attempt = 0; node == exclude && attempt < 64; ++attempt)
            node = noise.sample(rng);
        // A distribution whose support is only the excluded node keeps it.
        out.push_back(node);
    }
    return out;
}

double sgns_step(EmbeddingTable& table, int center, int context,
                 std::span<const int> negatives, double lr, double weight) {
    std::span<double> c = table.u(center);
    std::span<double> o = table.uc(context);

    double dot_o = dot(c, o);
    double objective = log_sigmoid(dot_o);
    std::vector<double> c_grad(c.size(), 0.0);

    double g = 1.0 - sigmoid(dot_o);
    for (std::size_t d = 0; d < c.size(); ++d) {
        c_grad[d] += g * o[d];
        o[d] += lr * weight * g * c[d];
    }
    for (int n : negatives) {
        std::span<double> un = table.uc(n);
        double dot_n = dot(c, un);
        objective += log_sigmoid(-dot_n);
        double gn = -sigmoid(dot_n);
        for (std::size_t d = 0; d < c.size(); ++d) {
            c_grad[d] += gn * un[d];
            un[d] += lr * weight * gn * c[d];
        }
    }
    for (std::size_t d = 0; d < c.size(); ++d)
        c[d] += lr * weight * c_grad[d];
    return objective;
}

JointTrainResult joint_train(const STGraph& gD, const STGraph& gI,
                             const EmbedConfig& cfg) {
    if (gD.segments != gI.segments || gD.intervals != gI.intervals)
        throw ConfigError("joint_train: graphs have different shapes");
    if (cfg.dim < 1) throw ConfigError("joint_train: dim must be >= 1");
    if (cfg.window < 1) throw ConfigError("joint_train: window must be >= 1");
    if (cfg.negatives < 0)
        throw ConfigError("joint_train: negatives must be >= 0");
    if (cfg.lr <= 0.0 || cfg.lr_min <= 0.0 || cfg.lr_min > cfg.lr)
        throw ConfigError("joint_train: need 0 < lr_min <= lr");
    if (cfg.epochs < 1) throw ConfigError("joint_train: epochs must be >= 1");
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
        throw ConfigError("joint_train: alpha must be in [0, 1]");
    if (cfg.walk_len < 1 || cfg.walks_per_node < 1)
        throw ConfigError("joint_train: walk parameters must be >= 1");

    JointTrainResult result;
    EmbeddingTable& table = result.table;
    table.segments = gD.segments;
    table.intervals = gD.intervals;
    table.dim = cfg.dim;
    table.center.assign(table.node_count() * cfg.dim, 0.0);
    table.context.assign(table.node_count() * cfg.dim, 0.0);
    Rng init_rng = make_rng(mix_seed(cfg.seed, 31));
    double span = 0.5 / cfg.dim;
    for (double& v : table.center) v = uniform_range(init_rng, -span, span);

    struct Entry {
        const std::vector<int>* walk;
        const NoiseDistribution* noise;
        double weight;
    };

    std::vector<std::vector<int>> walks_d, walks_i;
    NoiseDistribution noise_d, noise_i;
    std::vector<Entry> corpus;
    std::size_t pairs_per_epoch = 0;
    if (cfg.alpha > 0.0) {
        walks_d = random_walks(gD, cfg.walk_len, cfg.walks_per_node,
                               mix_seed(cfg.seed, 32));
        noise_d = NoiseDistribution(walks_d, gD.node_count(),
                                    cfg.noise_exponent);
        for (const auto& w : walks_d) {
            corpus.push_back({&w, &noise_d, cfg.alpha});
            pairs_per_epoch += pair_count(w.size(), cfg.window);
        }
    }
    if (cfg.alpha < 1.0) {
        walks_i = random_walks(gI, cfg.walk_len, cfg.walks_per_node,
                               mix_seed(cfg.seed, 33));
        noise_i = NoiseDistribution(walks_i, gI.node_count(),
                                    cfg.noise_exponent);
        for (const auto& w : walks_i) {
            corpus.push_back({&w, &noise_i, 1.0 - cfg.alpha});
            pairs_per_epoch += pair_count(w.size(), cfg.window);
        }
    }
    if (corpus.empty() || pairs_per_epoch == 0)
        throw ConfigError("joint_train: empty training corpus");

    Rng rng = make_rng(mix_seed(cfg.seed, 34));
    const double total_pairs =
        static_cast<double>(pairs_per_epoch) * cfg.epochs;
    std::size_t processed = 0;
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        double objective_sum = 0.0;
        std::size_t objective_count = 0;
        for (std::size_t oi : order) {
            const Entry& entry = corpus[oi];
            for (const auto& [center, context] :
                 context_pairs(*entry.walk, cfg.window)) {
                double lr_t =
                    std::max(cfg.lr_min,
                             cfg.lr * (1.0 - static_cast<double>(processed) /
                                                 total_pairs));
                std::vector<int> negatives = negative_sample(
                    *entry.noise, cfg.negatives, context, rng);
                objective_sum += sgns_step(table, center, context, negatives,
                                           lr_t, entry.weight);
                ++objective_count;
                ++processed;
            }
        }
        result.epoch_mean_objective.push_back(
            objective_count ? objective_sum / objective_count : 0.0);
    }
    return result;
}

double similarity(const EmbeddingTable& table, int row_i, int t_i, int row_j,
                  int t_j) {
    return dot(table.u(table.node_index(row_i, t_i)),
               table.u(table.node_index(row_j, t_j)));
}

void save_embedding_csv(const EmbeddingTable& table, const RoadNetwork& net,
                        const std::string& path) {
    CsvWriter out(path);
    std::vector<std::string> header{"segment_id", "interval"};
    for (int d = 0; d < table.dim; ++d)
        header.push_back("u" + std::to_string(d));
    out.row(header);
    for (int t = 0; t < table.intervals; ++t) {
        for (int row = 0; row < table.segments; ++row) {
            std::vector<std::string> fields{
                std::to_string(net.segments[row].id), std::to_string(t)};
            for (double v : table.u(table.node_index(row, t)))
                fields.push_back(format_double(v));
            out.row(fields);
        }
    }
    out.close();
}

EmbeddingTable load_embedding_csv(const std::string& path,
                                  const RoadNetwork& net, int intervals) {
    std::vector<std::vector<std::string>> rows = read_csv(path);
    if (rows.size() < 2) throw ParseError(path + ": empty embedding file");
    if (rows[0].size() < 3)
        throw ParseError(path + ": expected segment_id, interval, u columns");
    EmbeddingTable table;
    table.segments = static_cast<int>(net.segments.size());
    table.intervals = intervals;
    table.dim = static_cast<int>(rows[0].size()) - 2;
    table.center.assign(table.node_count() * table.dim, 0.0);
    table.context.assign(table.node_count() * table.dim, 0.0);
    std::vector<bool> seen(table.node_count(), false);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (static_cast<int>(row.size()) != table.dim + 2)
            throw ParseError(path + ": row " + std::to_string(r) +
                             " has wrong field count");
        int seg_row = net.segment_row(static_cast<int>(parse_long(row[0])));
        int t = static_cast<int>(parse_long(row[1]));
        if (t < 0 || t >= intervals)
            throw ParseError(path + ": row " + std::to_string(r) +
                             " has interval outside [0, " +
                             std::to_string(intervals) + ")");
        int node = table.node_index(seg_row, t);
        std::span<double> u = table.u(node);
        for (int d = 0; d < table.dim; ++d) u[d] = parse_double(row[d + 2]);
        seen[node] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw ParseError(path + ": missing embedding rows");
    return table;
}

}  // namespace cityvol
