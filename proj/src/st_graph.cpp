#include "cityvol/st_graph.hpp"

#include <cmath>
#include <map>

#include "cityvol/csv.hpp"

namespace cityvol {

std::size_t STGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& adj : out) n += adj.size();
    return n;
}

double STGraph::total_weight() const {
    double w = 0.0;
    for (const auto& adj : out)
        for (const Edge& e : adj) w += e.weight;
    return w;
}

STGraph build_st_graph(const TrajectorySet& set, const RoadNetwork& net,
                       double interval_s, int intervals) {
    if (interval_s <= 0.0)
        throw ConfigError("build_st_graph: interval must be positive");
    if (intervals < 1)
        throw ConfigError("build_st_graph: need at least one interval");

    STGraph g;
    g.segments = static_cast<int>(net.segments.size());
    g.intervals = intervals;

    std::map<std::pair<int, int>, double> weight;
    for (const Trajectory& traj : set) {
        for (std::size_t k = 0; k + 1 < traj.points.size(); ++k) {
            const TrajectoryPoint& a = traj.points[k];
            const TrajectoryPoint& b = traj.points[k + 1];
            int ta = static_cast<int>(std::floor(a.timestamp_s / interval_s));
            int tb = static_cast<int>(std::floor(b.timestamp_s / interval_s));
            if (ta < 0 || ta >= intervals || tb < 0 || tb >= intervals) {
                ++g.dropped_boundary;
                continue;
            }
            if (tb < ta || tb - ta > 1) {
                ++g.dropped_span;
                continue;
            }
            if (!adjacent(net, a.segment_id, b.segment_id)) {
                ++g.dropped_adjacency;
                continue;
            }
            if (ta + 1 >= intervals) {
                ++g.dropped_boundary;
                continue;
            }
            int from = g.node_index(net.segment_row(a.segment_id), ta);
            int to = g.node_index(net.segment_row(b.segment_id), ta + 1);
            weight[{from, to}] += 1.0;
        }
    }

    g.out.assign(g.node_count(), {});
    for (const auto& [key, w] : weight)
        g.out[key.first].push_back({key.second, w});
    return g;
}

std::vector<int> walk_from(const STGraph& g, int start, int walk_len,
                           Rng& rng) {
    if (walk_len < 1) throw ConfigError("walk_from: walk_len must be >= 1");
    if (start < 0 || static_cast<std::size_t>(start) >= g.node_count())
        throw ConfigError("walk_from: start node out of range");
    std::vector<int> walk{start};
    while (static_cast<int>(walk.size()) < walk_len) {
        const auto& adj = g.out[walk.back()];
        if (adj.empty()) break;
        double total = 0.0;
        for (const STGraph::Edge& e : adj) total += e.weight;
        double x = uniform01(rng) * total;
        double acc = 0.0;
        int chosen = adj.back().to;
        for (const STGraph::Edge& e : adj) {
            acc += e.weight;
            if (x < acc) {
                chosen = e.to;
                break;
            }
        }
        walk.push_back(chosen);
    }
    return walk;
}

std::vector<std::vector<int>> random_walks(const STGraph& g, int walk_len,
                                           int walks_per_node,
                                           std::uint64_t seed) {
    if (walks_per_node < 0)
        throw ConfigError("random_walks: walks_per_node must be >= 0");
    std::vector<std::vector<int>> walks;
    for (std::size_t idx = 0; idx < g.node_count(); ++idx) {
        if (g.out[idx].empty()) continue;
        for (int w = 0; w < walks_per_node; ++w) {
            Rng rng = make_rng(mix_seed(
                seed, idx * static_cast<std::uint64_t>(walks_per_node) + w));
            walks.push_back(walk_from(g, static_cast<int>(idx), walk_len, rng));
        }
    }
    return walks;
}

void save_st_graph_csv(const STGraph& g, const RoadNetwork& net,
                       const std::string& path) {
    CsvWriter out(path);
    out.row({"from_segment_id", "from_interval", "to_segment_id",
             "to_interval", "weight"});
    for (std::size_t idx = 0; idx < g.out.size(); ++idx) {
        int from_row = g.node_row(static_cast<int>(idx));
        int from_t = g.node_interval(static_cast<int>(idx));
        for (const STGraph::Edge& e : g.out[idx]) {
            out.row({std::to_string(net.segments[from_row].id),
                     std::to_string(from_t),
                     std::to_string(net.segments[g.node_row(e.to)].id),
                     std::to_string(g.node_interval(e.to)),
                     format_double(e.weight)});
        }
    }
    out.close();
}

STGraph load_st_graph_csv(const std::string& path, const RoadNetwork& net,
                          int intervals) {
    if (intervals < 1)
        throw ConfigError("load_st_graph_csv: need at least one interval");
    std::vector<std::vector<std::string>> rows = read_csv(path);
    if (rows.empty()) throw ParseError(path + ": empty graph file");
    STGraph g;
    g.segments = static_cast<int>(net.segments.size());
    g.intervals = intervals;
    g.out.assign(g.node_count(), {});
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 5)
            throw ParseError(path + ": row " + std::to_string(r) +
                             " has " + std::to_string(row.size()) +
                             " fields, expected 5");
        int from_row = net.segment_row(static_cast<int>(parse_long(row[0])));
        int from_t = static_cast<int>(parse_long(row[1]));
        int to_row = net.segment_row(static_cast<int>(parse_long(row[2])));
        int to_t = static_cast<int>(parse_long(row[3]));
        double w = parse_double(row[4]);
        if (from_t < 0 || from_t >= intervals || to_t < 0 || to_t >= intervals)
            throw ParseError(path + ": row " + std::to_string(r) +
                             " has interval outside [0, " +
                             std::to_string(intervals) + ")");
        if (to_t != from_t + 1)
            throw ParseError(path + ": row " + std::to_string(r) +
                             " is not a forward edge");
        g.out[g.node_index(from_row, from_t)].push_back(
            {g.node_index(to_row, to_t), w});
    }
    return g;
}

}  // namespace cityvol
