#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cityvol/common.hpp"
#include "cityvol/trajectory.hpp"

namespace cityvol {

struct Node {
    int id = 0;
    double x_m = 0.0;
    double y_m = 0.0;

    bool operator==(const Node&) const = default;
};

enum class RoadClass { Major, Secondary };

std::string to_string(RoadClass c);
RoadClass road_class_from_string(const std::string& s);

struct RoadSegment {
    int id = 0;
    int from_node = 0;
    int to_node = 0;
    double length_m = 0.0;
    int lanes = 1;
    RoadClass road_class = RoadClass::Secondary;
    double speed_limit_mps = 0.0;
    bool monitored = false;

    bool operator==(const RoadSegment&) const = default;
};

struct RoadNetwork {
    std::vector<Node> nodes;
    std::vector<RoadSegment> segments;
    // Forbidden (from_segment, to_segment) turns.
    std::set<std::pair<int, int>> turn_restrictions;

    void rebuild_index();

    bool has_segment(int id) const { return seg_index_.count(id) != 0; }
    const RoadSegment& segment(int id) const;
    // Dense row position of a segment, used by VolumeTensor and the
    // spatiotemporal graphs.
    int segment_row(int id) const;
    const Node& node(int id) const;

    // Segments j with segment(i).to_node == j.from_node, restriction-free.
    const std::vector<int>& successors(int segment_id) const;

    std::vector<int> monitored_segments() const;

private:
    std::unordered_map<int, int> seg_index_;
    std::unordered_map<int, int> node_index_;
    std::vector<std::vector<int>> successors_;
};

// Reflexive road adjacency: a segment is adjacent to itself, and i -> j is
// adjacent when j departs from i's end node and the turn is not restricted.
bool adjacent(const RoadNetwork& net, int segment_i, int segment_j);

struct Violation {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Structural checks: duplicate ids, dangling node references, non-positive
// lengths or limits, restrictions over unknown segments, unreachable pairs.
ValidationReport validate_network(const RoadNetwork& net);

struct SensorConfig {
    double taxi_fraction = 0.3;
    double monitored_fraction = 0.25;
    std::vector<int> taxi_vehicles;

    bool operator==(const SensorConfig&) const = default;
};

// Per-vehicle-group speed limits (sedan, suv, truck) used when generating the
// ground truth. Kept in the scenario for evaluation bookkeeping only; the
// recovery path never reads it.
struct GenTruth {
    std::array<double, 3> group_limits_mps{13.0, 11.0, 9.0};

    bool operator==(const GenTruth&) const = default;
};

struct Scenario {
    RoadNetwork network;
    TrajectorySet ground_truth;
    VolumeTensor ground_truth_volumes;
    SensorConfig sensor_config;
    double interval_seconds = 300.0;
    int horizon_intervals = 288;
    GenTruth gen_truth;

    double horizon_seconds() const { return interval_seconds * horizon_intervals; }
    bool is_taxi(int vehicle_id) const;
};

// Dense (taxi) subset of the ground truth, unchanged.
TrajectorySet taxi_trajectories(const Scenario& s);

// Camera-like view of the non-taxi fleet: monitored points only, cut on
// 30-minute gaps.
TrajectorySet incomplete_trajectories(const Scenario& s,
                                      double gap_threshold_s = 1800.0);

struct GenConfig {
    int grid_rows = 5;
    int grid_cols = 5;
    double spacing_m = 220.0;
    int vehicles = 30000;
    std::string demand = "uniform";  // uniform | bimodal
    double taxi_fraction = 0.3;
    double monitored_fraction = 0.25;
    double interval_seconds = 300.0;
    int horizon_intervals = 288;
    std::array<double, 3> true_group_limits_mps{13.0, 11.0, 9.0};
    double major_speed_mps = 25.0;
    double secondary_speed_mps = 12.0;
    int major_lanes = 2;
    int secondary_lanes = 1;
    std::uint64_t seed = 1;
};

struct GenResult {
    Scenario scenario;
    std::vector<int> infeasible_vehicles;  // skipped: no route origin -> dest
};

// Builds a grid network, samples trips, runs the car-following model under
// the true group limits and records the resulting trajectories as ground
// truth. Deterministic for a fixed config.
GenResult generate_scenario(const GenConfig& cfg);

void save_scenario(const Scenario& s, const std::string& path);
Scenario load_scenario(const std::string& path);

}  // namespace cityvol
