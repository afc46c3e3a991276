#include "cityvol/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cityvol/csv.hpp"

namespace cityvol {

namespace {

// Symmetric closure of the directed adjacency relation, self included.
std::vector<char> symmetric_adjacency(const RoadNetwork& net) {
    const std::size_t m = net.segments.size();
    std::vector<char> adj(m * m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (adjacent(net, net.segments[i].id, net.segments[j].id)) {
                adj[i * m + j] = 1;
                adj[j * m + i] = 1;
            }
        }
    }
    return adj;
}

void push_pair(std::vector<MaskedSimilarityGraph::Pair>& pairs, int a, int b,
               double w, bool clamp_negative) {
    if (clamp_negative && w < 0.0) w = 0.0;
    if (w == 0.0) return;
    pairs.push_back({a, b, w});
}

}  // namespace

MaskedSimilarityGraph build_masked_graph(const EmbeddingTable& table,
                                         const RoadNetwork& net, int intervals,
                                         bool clamp_negative) {
    if (static_cast<int>(net.segments.size()) != table.segments)
        throw ConfigError("build_masked_graph: network/table size mismatch");
    if (intervals != table.intervals)
        throw ConfigError("build_masked_graph: interval count mismatch");
    const int m = table.segments;
    std::vector<char> adj = symmetric_adjacency(net);

    MaskedSimilarityGraph g;
    g.segments = m;
    g.intervals = intervals;
    for (int t = 0; t < intervals; ++t) {
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                if (!adj[static_cast<std::size_t>(i) * m + j]) continue;
                push_pair(g.pairs, g.node_index(i, t), g.node_index(j, t),
                          similarity(table, i, t, j, t), clamp_negative);
            }
        }
        if (t + 1 >= intervals) continue;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (!adj[static_cast<std::size_t>(i) * m + j]) continue;
                push_pair(g.pairs, g.node_index(i, t), g.node_index(j, t + 1),
                          similarity(table, i, t, j, t + 1), clamp_negative);
            }
        }
    }
    return g;
}

MaskedSimilarityGraph build_unmasked_graph(const EmbeddingTable& table,
                                           int intervals) {
    if (intervals != table.intervals)
        throw ConfigError("build_unmasked_graph: interval count mismatch");
    const int m = table.segments;
    MaskedSimilarityGraph g;
    g.segments = m;
    g.intervals = intervals;
    for (int t = 0; t < intervals; ++t) {
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j)
                push_pair(g.pairs, g.node_index(i, t), g.node_index(j, t),
                          similarity(table, i, t, j, t), true);
        }
        if (t + 1 >= intervals) continue;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j)
                push_pair(g.pairs, g.node_index(i, t), g.node_index(j, t + 1),
                          similarity(table, i, t, j, t + 1), true);
        }
    }
    return g;
}

MaskedSimilarityGraph graph_from_st_edges(const STGraph& gD,
                                          const STGraph& gI) {
    if (gD.segments != gI.segments || gD.intervals != gI.intervals)
        throw ConfigError("graph_from_st_edges: graphs have different shapes");
    std::map<std::pair<int, int>, double> weight;
    auto absorb = [&weight](const STGraph& g) {
        for (std::size_t from = 0; from < g.out.size(); ++from) {
            for (const STGraph::Edge& e : g.out[from]) {
                int a = static_cast<int>(from);
                int b = e.to;
                if (a > b) std::swap(a, b);
                if (a == b) continue;
                weight[{a, b}] += e.weight;
            }
        }
    };
    absorb(gD);
    absorb(gI);

    MaskedSimilarityGraph g;
    g.segments = gD.segments;
    g.intervals = gD.intervals;
    for (const auto& [key, w] : weight)
        if (w != 0.0) g.pairs.push_back({key.first, key.second, w});
    return g;
}

SolveResult solve(const InferenceProblem& problem, bool track_objective) {
    const VolumeTensor& v = problem.volumes;
    const std::size_t cells = v.values().size();
    if (problem.graph.segments != v.segment_count() ||
        problem.graph.intervals != v.interval_count())
        throw ConfigError("solve: graph/tensor shape mismatch");
    if (problem.tol <= 0.0) throw ConfigError("solve: tol must be positive");
    if (problem.max_iter < 1)
        throw ConfigError("solve: max_iter must be >= 1");

    struct Neighbor {
        int to;
        double w;
    };
    std::vector<std::vector<Neighbor>> adj(cells);
    for (const auto& p : problem.graph.pairs) {
        if (p.a < 0 || p.b < 0 || static_cast<std::size_t>(p.a) >= cells ||
            static_cast<std::size_t>(p.b) >= cells)
            throw ConfigError("solve: pair node out of range");
        if (p.weight < 0.0)
            throw ConfigError("solve: negative pair weight");
        if (p.a == p.b) continue;
        adj[p.a].push_back({p.b, p.weight});
        adj[p.b].push_back({p.a, p.weight});
    }

    double obs_min = 0.0, obs_max = 0.0, obs_sum = 0.0, obs_abs_max = 0.0;
    std::size_t obs_count = 0;
    for (std::size_t c = 0; c < cells; ++c) {
        if (!v.mask()[c]) continue;
        double val = v.values()[c];
        if (obs_count == 0) {
            obs_min = obs_max = val;
        } else {
            obs_min = std::min(obs_min, val);
            obs_max = std::max(obs_max, val);
        }
        obs_sum += val;
        obs_abs_max = std::max(obs_abs_max, std::abs(val));
        ++obs_count;
    }
    if (obs_count == 0) throw ConfigError("solve: no observed cells");
    const double obs_mean = obs_sum / obs_count;
    const double thresh = problem.tol * obs_abs_max;

    SolveResult result;
    result.volumes = v;
    std::vector<double>& x = result.volumes.values();

    std::vector<int> unknowns;
    for (std::size_t c = 0; c < cells; ++c) {
        if (v.mask()[c]) continue;
        double total_w = 0.0;
        for (const Neighbor& nb : adj[c]) total_w += nb.w;
        if (adj[c].empty() || total_w == 0.0) {
            x[c] = obs_mean;
            result.isolated_cells.push_back(static_cast<int>(c));
        } else {
            x[c] = obs_mean;
            unknowns.push_back(static_cast<int>(c));
        }
    }

    if (unknowns.empty()) {
        result.converged = true;
        if (track_objective)
            result.objective_trace.push_back(objective(problem, result.volumes));
        return result;
    }

    std::vector<double> prev;
    for (int it = 0; it < problem.max_iter; ++it) {
        double residual = 0.0;
        if (problem.mode == SolveMode::Jacobi) prev = x;
        const std::vector<double>& src =
            problem.mode == SolveMode::Jacobi ? prev : x;
        for (int c : unknowns) {
            double num = 0.0, den = 0.0;
            for (const Neighbor& nb : adj[c]) {
                num += nb.w * src[nb.to];
                den += nb.w;
            }
            double next = num / den;
            next = std::clamp(next, obs_min, obs_max);
            residual = std::max(residual, std::abs(next - x[c]));
            x[c] = next;
        }
        result.iterations = it + 1;
        result.final_residual = residual;
        if (track_objective)
            result.objective_trace.push_back(objective(problem, result.volumes));
        if (residual <= thresh) {
            result.converged = true;
            break;
        }
    }
    return result;
}

double objective(const InferenceProblem& problem, const VolumeTensor& x) {
    double total = 0.0;
    for (const auto& p : problem.graph.pairs) {
        double diff = x.values()[p.a] - x.values()[p.b];
        total += p.weight * diff * diff;
    }
    return total;
}

void save_volumes_csv(const VolumeTensor& v, const RoadNetwork& net,
                      const std::string& path) {
    if (static_cast<int>(net.segments.size()) != v.segment_count())
        throw ConfigError("save_volumes_csv: network/tensor size mismatch");
    CsvWriter out(path);
    out.row({"segment_id", "interval", "volume", "was_observed"});
    for (int t = 0; t < v.interval_count(); ++t) {
        for (int row = 0; row < v.segment_count(); ++row) {
            out.row({std::to_string(net.segments[row].id), std::to_string(t),
                     format_double(v.at(row, t)),
                     v.observed(row, t) ? "1" : "0"});
        }
    }
    out.close();
}

VolumeTensor load_volumes_csv(const std::string& path, const RoadNetwork& net,
                              int intervals) {
    std::vector<std::vector<std::string>> rows = read_csv(path);
    if (rows.size() < 2) throw ParseError(path + ": empty volume file");
    VolumeTensor v(static_cast<int>(net.segments.size()), intervals);
    std::vector<bool> seen(v.values().size(), false);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 4)
            throw ParseError(path + ": row " + std::to_string(r) +
                             " has wrong field count");
        int seg_row = net.segment_row(static_cast<int>(parse_long(row[0])));
        int t = static_cast<int>(parse_long(row[1]));
        if (t < 0 || t >= intervals)
            throw ParseError(path + ": row " + std::to_string(r) +
                             " has interval outside [0, " +
                             std::to_string(intervals) + ")");
        v.at(seg_row, t) = parse_double(row[2]);
        long flag = parse_long(row[3]);
        if (flag != 0 && flag != 1)
            throw ParseError(path + ": row " + std::to_string(r) +
                             " has non-boolean observation flag");
        v.set_observed(seg_row, t, flag == 1);
        seen[static_cast<std::size_t>(t) * net.segments.size() + seg_row] =
            true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw ParseError(path + ": missing volume rows");
    return v;
}

}  // namespace cityvol
