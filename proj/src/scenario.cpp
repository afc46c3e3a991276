#include "cityvol/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>

#include <nlohmann/json.hpp>

namespace cityvol {

using nlohmann::json;

namespace {
constexpr int kScenarioVersion = 1;
}

std::string to_string(RoadClass c) {
    return c == RoadClass::Major ? "major" : "secondary";
}

RoadClass road_class_from_string(const std::string& s) {
    if (s == "major") return RoadClass::Major;
    if (s == "secondary") return RoadClass::Secondary;
    throw ParseError("unknown road class: " + s);
}

void RoadNetwork::rebuild_index() {
    seg_index_.clear();
    node_index_.clear();
    for (std::size_t i = 0; i < segments.size(); ++i)
        seg_index_.emplace(segments[i].id, static_cast<int>(i));
    for (std::size_t i = 0; i < nodes.size(); ++i)
        node_index_.emplace(nodes[i].id, static_cast<int>(i));

    std::unordered_map<int, std::vector<int>> by_from;
    for (const RoadSegment& s : segments) by_from[s.from_node].push_back(s.id);
    successors_.assign(segments.size(), {});
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const RoadSegment& s = segments[i];
        auto it = by_from.find(s.to_node);
        if (it == by_from.end()) continue;
        for (int j : it->second) {
            if (!turn_restrictions.count({s.id, j}))
                successors_[i].push_back(j);
        }
        std::sort(successors_[i].begin(), successors_[i].end());
    }
}

const RoadSegment& RoadNetwork::segment(int id) const {
    auto it = seg_index_.find(id);
    if (it == seg_index_.end())
        throw UnknownSegmentError("unknown segment id " + std::to_string(id));
    return segments[it->second];
}

int RoadNetwork::segment_row(int id) const {
    auto it = seg_index_.find(id);
    if (it == seg_index_.end())
        throw UnknownSegmentError("unknown segment id " + std::to_string(id));
    return it->second;
}

const Node& RoadNetwork::node(int id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end())
        throw UnknownSegmentError("unknown node id " + std::to_string(id));
    return nodes[it->second];
}

const std::vector<int>& RoadNetwork::successors(int segment_id) const {
    return successors_[segment_row(segment_id)];
}

std::vector<int> RoadNetwork::monitored_segments() const {
    std::vector<int> out;
    for (const RoadSegment& s : segments)
        if (s.monitored) out.push_back(s.id);
    return out;
}

bool adjacent(const RoadNetwork& net, int segment_i, int segment_j) {
    const RoadSegment& a = net.segment(segment_i);
    const RoadSegment& b = net.segment(segment_j);
    if (segment_i == segment_j) return true;
    if (a.to_node != b.from_node) return false;
    return !net.turn_restrictions.count({segment_i, segment_j});
}

ValidationReport validate_network(const RoadNetwork& net) {
    ValidationReport report;
    auto add = [&](std::string code, std::string msg) {
        report.violations.push_back({std::move(code), std::move(msg)});
    };

    std::set<int> node_ids;
    for (const Node& n : net.nodes) {
        if (!node_ids.insert(n.id).second)
            add("duplicate-node", "node id " + std::to_string(n.id) +
                                      " appears more than once");
        if (!std::isfinite(n.x_m) || !std::isfinite(n.y_m))
            add("bad-coordinates",
                "node " + std::to_string(n.id) + " has non-finite coordinates");
    }

    std::set<int> seg_ids;
    for (const RoadSegment& s : net.segments) {
        std::string sid = std::to_string(s.id);
        if (!seg_ids.insert(s.id).second)
            add("duplicate-segment", "segment id " + sid + " appears more than once");
        if (s.from_node == s.to_node)
            add("self-loop", "segment " + sid + " connects a node to itself");
        if (!node_ids.count(s.from_node) || !node_ids.count(s.to_node))
            add("dangling-adjacency",
                "segment " + sid + " references a missing node");
        if (s.length_m <= 0.0)
            add("bad-length", "segment " + sid + " has non-positive length");
        if (s.lanes < 1)
            add("bad-lanes", "segment " + sid + " has fewer than 1 lane");
        if (s.speed_limit_mps < 1.0 || s.speed_limit_mps > 40.0)
            add("bad-speed-limit",
                "segment " + sid + " speed limit outside [1, 40] m/s");
        if (node_ids.count(s.from_node) && node_ids.count(s.to_node)) {
            const Node* from = nullptr;
            const Node* to = nullptr;
            for (const Node& n : net.nodes) {
                if (n.id == s.from_node) from = &n;
                if (n.id == s.to_node) to = &n;
            }
            double dx = to->x_m - from->x_m;
            double dy = to->y_m - from->y_m;
            double euclid = std::sqrt(dx * dx + dy * dy);
            if (euclid > 0.0 && s.length_m > 0.0 &&
                std::abs(s.length_m - euclid) > 0.10 * euclid)
                add("length-geometry-mismatch",
                    "segment " + sid +
                        " length differs from node distance by more than 10%");
        }
    }

    for (const auto& [i, j] : net.turn_restrictions) {
        if (!seg_ids.count(i) || !seg_ids.count(j))
            add("bad-restriction",
                "turn restriction (" + std::to_string(i) + ", " +
                    std::to_string(j) + ") references a missing segment");
    }

    int monitored = 0;
    for (const RoadSegment& s : net.segments)
        if (s.monitored) ++monitored;
    if (!net.segments.empty() &&
        monitored == static_cast<int>(net.segments.size()))
        add("all-monitored", "every segment is monitored; need unmonitored ones");

    return report;
}

bool Scenario::is_taxi(int vehicle_id) const {
    return std::binary_search(sensor_config.taxi_vehicles.begin(),
                              sensor_config.taxi_vehicles.end(), vehicle_id);
}

TrajectorySet taxi_trajectories(const Scenario& s) {
    TrajectorySet out;
    for (const Trajectory& t : s.ground_truth)
        if (s.is_taxi(t.vehicle_id)) out.push_back(t);
    return out;
}

TrajectorySet incomplete_trajectories(const Scenario& s,
                                      double gap_threshold_s) {
    TrajectorySet sampled;
    for (const Trajectory& t : s.ground_truth) {
        if (s.is_taxi(t.vehicle_id)) continue;
        Trajectory down = downsample_to_monitors(t, s.network);
        if (!down.points.empty()) sampled.push_back(std::move(down));
    }
    return cut_on_gaps(sampled, gap_threshold_s);
}

namespace {

json network_to_json(const RoadNetwork& net) {
    json nodes = json::array();
    for (const Node& n : net.nodes) nodes.push_back({n.id, n.x_m, n.y_m});
    json segments = json::array();
    for (const RoadSegment& s : net.segments)
        segments.push_back({s.id, s.from_node, s.to_node, s.length_m, s.lanes,
                            to_string(s.road_class), s.speed_limit_mps});
    json restrictions = json::array();
    for (const auto& [i, j] : net.turn_restrictions)
        restrictions.push_back({i, j});
    json monitors = json::array();
    for (const RoadSegment& s : net.segments)
        if (s.monitored) monitors.push_back(s.id);
    return json{{"nodes", nodes},
                {"segments", segments},
                {"turn_restrictions", restrictions},
                {"monitor_points", monitors}};
}

RoadNetwork network_from_json(const json& j) {
    RoadNetwork net;
    for (const json& n : j.at("nodes"))
        net.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(),
                             n.at(2).get<double>()});
    for (const json& s : j.at("segments")) {
        RoadSegment seg;
        seg.id = s.at(0).get<int>();
        seg.from_node = s.at(1).get<int>();
        seg.to_node = s.at(2).get<int>();
        seg.length_m = s.at(3).get<double>();
        seg.lanes = s.at(4).get<int>();
        seg.road_class = road_class_from_string(s.at(5).get<std::string>());
        seg.speed_limit_mps = s.at(6).get<double>();
        net.segments.push_back(seg);
    }
    for (const json& r : j.at("turn_restrictions"))
        net.turn_restrictions.insert({r.at(0).get<int>(), r.at(1).get<int>()});
    std::set<int> monitors;
    for (const json& m : j.at("monitor_points")) monitors.insert(m.get<int>());
    for (RoadSegment& s : net.segments) s.monitored = monitors.count(s.id) != 0;
    net.rebuild_index();
    return net;
}

json trajectories_to_json(const TrajectorySet& set) {
    json out = json::array();
    for (const Trajectory& t : set) {
        json points = json::array();
        for (const TrajectoryPoint& p : t.points)
            points.push_back({p.segment_id, p.offset_m, p.timestamp_s});
        out.push_back({{"vehicle_id", t.vehicle_id},
                       {"kind", to_string(t.kind)},
                       {"points", points}});
    }
    return out;
}

TrajectorySet trajectories_from_json(const json& j) {
    TrajectorySet set;
    for (const json& t : j) {
        Trajectory traj;
        traj.vehicle_id = t.at("vehicle_id").get<int>();
        traj.kind = trajectory_kind_from_string(t.at("kind").get<std::string>());
        for (const json& p : t.at("points"))
            traj.points.push_back({p.at(0).get<int>(), p.at(1).get<double>(),
                                   p.at(2).get<double>()});
        set.push_back(std::move(traj));
    }
    return set;
}

json volumes_to_json(const VolumeTensor& v, double interval_s) {
    json mask = json::array();
    for (std::uint8_t b : v.mask()) mask.push_back(static_cast<int>(b));
    return json{{"m", v.segment_count()},
                {"n", v.interval_count()},
                {"interval_seconds", interval_s},
                {"data", v.values()},
                {"mask", mask}};
}

VolumeTensor volumes_from_json(const json& j) {
    VolumeTensor v(j.at("m").get<int>(), j.at("n").get<int>());
    const json& data = j.at("data");
    const json& mask = j.at("mask");
    if (data.size() != v.cell_count() || mask.size() != v.cell_count())
        throw ParseError("volumes: data/mask size does not match m*n");
    for (std::size_t i = 0; i < v.cell_count(); ++i) {
        v.values()[i] = data.at(i).get<double>();
        v.mask()[i] = mask.at(i).get<int>() ? 1 : 0;
    }
    return v;
}

}  // namespace

void save_scenario(const Scenario& s, const std::string& path) {
    json doc{
        {"version", kScenarioVersion},
        {"interval_seconds", s.interval_seconds},
        {"horizon_intervals", s.horizon_intervals},
        {"network", network_to_json(s.network)},
        {"trajectories", trajectories_to_json(s.ground_truth)},
        {"volumes", volumes_to_json(s.ground_truth_volumes, s.interval_seconds)},
        {"sensor_config",
         {{"taxi_fraction", s.sensor_config.taxi_fraction},
          {"monitored_fraction", s.sensor_config.monitored_fraction},
          {"taxi_vehicles", s.sensor_config.taxi_vehicles}}},
        {"gen_truth", {{"group_limits_mps", s.gen_truth.group_limits_mps}}}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << doc.dump(1) << '\n';
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("scenario file " + path + ": " + e.what());
    }
    try {
        int version = doc.at("version").get<int>();
        if (version != kScenarioVersion)
            throw VersionError("scenario file " + path + " has version " +
                               std::to_string(version) + ", expected " +
                               std::to_string(kScenarioVersion));
        Scenario s;
        s.interval_seconds = doc.at("interval_seconds").get<double>();
        s.horizon_intervals = doc.at("horizon_intervals").get<int>();
        s.network = network_from_json(doc.at("network"));
        s.ground_truth = trajectories_from_json(doc.at("trajectories"));
        s.ground_truth_volumes = volumes_from_json(doc.at("volumes"));
        const json& sc = doc.at("sensor_config");
        s.sensor_config.taxi_fraction = sc.at("taxi_fraction").get<double>();
        s.sensor_config.monitored_fraction =
            sc.at("monitored_fraction").get<double>();
        s.sensor_config.taxi_vehicles =
            sc.at("taxi_vehicles").get<std::vector<int>>();
        const json& gt = doc.at("gen_truth");
        auto limits = gt.at("group_limits_mps").get<std::vector<double>>();
        if (limits.size() != 3)
            throw ParseError("gen_truth.group_limits_mps must have 3 entries");
        std::copy(limits.begin(), limits.end(),
                  s.gen_truth.group_limits_mps.begin());
        return s;
    } catch (const VersionError&) {
        throw;
    } catch (const ParseError&) {
        throw;
    } catch (const json::exception& e) {
        throw ParseError("scenario file " + path + ": " + e.what());
    }
}

}  // namespace cityvol
