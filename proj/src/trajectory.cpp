#include "cityvol/trajectory.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "cityvol/csv.hpp"
#include "cityvol/scenario.hpp"

namespace cityvol {

std::string to_string(TrajectoryKind kind) {
    switch (kind) {
        case TrajectoryKind::Dense: return "dense";
        case TrajectoryKind::Incomplete: return "incomplete";
        case TrajectoryKind::Recovered: return "recovered";
    }
    throw ConfigError("unknown trajectory kind");
}

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
    if (s == "dense") return TrajectoryKind::Dense;
    if (s == "incomplete") return TrajectoryKind::Incomplete;
    if (s == "recovered") return TrajectoryKind::Recovered;
    throw ParseError("unknown trajectory kind: " + s);
}

TrajectorySet cut_on_gaps(const TrajectorySet& set, double gap_threshold_s) {
    if (gap_threshold_s <= 0.0)
        throw ConfigError("cut_on_gaps: threshold must be positive");
    TrajectorySet out;
    for (const Trajectory& traj : set) {
        if (traj.points.empty()) continue;
        Trajectory piece;
        piece.vehicle_id = traj.vehicle_id;
        piece.kind = traj.kind;
        piece.points.push_back(traj.points.front());
        for (std::size_t k = 1; k < traj.points.size(); ++k) {
            double gap = traj.points[k].timestamp_s -
                         traj.points[k - 1].timestamp_s;
            if (gap > gap_threshold_s) {
                out.push_back(std::move(piece));
                piece = Trajectory{traj.vehicle_id, traj.kind, {}};
            }
            piece.points.push_back(traj.points[k]);
        }
        out.push_back(std::move(piece));
    }
    return out;
}

Trajectory downsample_to_monitors(const Trajectory& dense,
                                  const RoadNetwork& net) {
    Trajectory out;
    out.vehicle_id = dense.vehicle_id;
    out.kind = TrajectoryKind::Incomplete;
    for (const TrajectoryPoint& p : dense.points) {
        if (net.segment(p.segment_id).monitored) out.points.push_back(p);
    }
    return out;
}

VolumeCountResult count_volumes(const TrajectorySet& set,
                                const RoadNetwork& net, double interval_s,
                                int intervals) {
    if (interval_s <= 0.0)
        throw ConfigError("count_volumes: interval length must be positive");
    if (intervals < 1)
        throw ConfigError("count_volumes: need at least one interval");
    VolumeCountResult result;
    result.volumes = VolumeTensor(static_cast<int>(net.segments.size()),
                                  intervals, true);
    for (const Trajectory& traj : set) {
        for (const TrajectoryPoint& p : traj.points) {
            int row = net.segment_row(p.segment_id);
            double t = p.timestamp_s / interval_s;
            int bin = static_cast<int>(std::floor(t));
            if (bin < 0 || bin >= intervals) {
                ++result.dropped_events;
                continue;
            }
            result.volumes.at(row, bin) += 1.0;
        }
    }
    return result;
}

void save_trajectories(const TrajectorySet& set, const std::string& path) {
    nlohmann::json list = nlohmann::json::array();
    for (const Trajectory& t : set) {
        nlohmann::json points = nlohmann::json::array();
        for (const TrajectoryPoint& p : t.points)
            points.push_back({p.segment_id, p.offset_m, p.timestamp_s});
        list.push_back({{"vehicle_id", t.vehicle_id},
                        {"kind", to_string(t.kind)},
                        {"points", points}});
    }
    nlohmann::json doc{{"version", 1}, {"trajectories", list}};
    write_text_file(path, doc.dump(1) + "\n");
}

TrajectorySet load_trajectories(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    try {
        TrajectorySet set;
        for (const nlohmann::json& jt : doc.at("trajectories")) {
            Trajectory t;
            t.vehicle_id = jt.at("vehicle_id").get<int>();
            t.kind =
                trajectory_kind_from_string(jt.at("kind").get<std::string>());
            for (const nlohmann::json& jp : jt.at("points"))
                t.points.push_back({jp.at(0).get<int>(),
                                    jp.at(1).get<double>(),
                                    jp.at(2).get<double>()});
            set.push_back(std::move(t));
        }
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace cityvol
