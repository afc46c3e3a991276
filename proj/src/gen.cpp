#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cityvol/scenario.hpp"
#include "cityvol/sim.hpp"

namespace cityvol {

namespace {

RoadNetwork build_grid(const GenConfig& cfg) {
    RoadNetwork net;
    int R = cfg.grid_rows;
    int C = cfg.grid_cols;
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c)
            net.nodes.push_back({r * C + c, c * cfg.spacing_m,
                                 r * cfg.spacing_m});

    int next_id = 0;
    auto add_pair = [&](int a, int b, bool major) {
        RoadSegment s;
        s.length_m = cfg.spacing_m;
        s.lanes = major ? cfg.major_lanes : cfg.secondary_lanes;
        s.road_class = major ? RoadClass::Major : RoadClass::Secondary;
        s.speed_limit_mps = major ? cfg.major_speed_mps : cfg.secondary_speed_mps;
        s.id = next_id++;
        s.from_node = a;
        s.to_node = b;
        net.segments.push_back(s);
        s.id = next_id++;
        s.from_node = b;
        s.to_node = a;
        net.segments.push_back(s);
    };

    for (int r = 0; r < R; ++r)
        for (int c = 0; c + 1 < C; ++c)
            add_pair(r * C + c, r * C + c + 1, r % 2 == 0);
    for (int r = 0; r + 1 < R; ++r)
        for (int c = 0; c < C; ++c)
            add_pair(r * C + c, (r + 1) * C + c, c % 2 == 0);

    net.rebuild_index();
    return net;
}

std::vector<std::vector<char>> reachability(const RoadNetwork& net) {
    int m = static_cast<int>(net.segments.size());
    std::vector<std::vector<char>> reach(m, std::vector<char>(m, 0));
    for (int s = 0; s < m; ++s) {
        std::vector<int> stack{s};
        reach[s][s] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int sid : net.successors(net.segments[u].id)) {
                int v = net.segment_row(sid);
                if (!reach[s][v]) {
                    reach[s][v] = 1;
                    stack.push_back(v);
                }
            }
        }
    }
    return reach;
}

double sample_depart(const GenConfig& cfg, Rng& rng, double horizon_s) {
    double window = 0.85 * horizon_s;
    if (cfg.demand == "bimodal") {
        // Two equal peaks at 1/3 and 2/3 of the day.
        double center = (uniform01(rng) < 0.5 ? 1.0 : 2.0) / 3.0 * window;
        double spread = window / 12.0;
        // Irwin-Hall(4) as a cheap bell curve.
        double z = uniform01(rng) + uniform01(rng) + uniform01(rng) +
                   uniform01(rng) - 2.0;
        double t = center + z * spread;
        return std::clamp(t, 0.0, window);
    }
    if (cfg.demand != "uniform")
        throw ConfigError("unknown demand profile: " + cfg.demand);
    return uniform_range(rng, 0.0, window);
}

}  // namespace

GenResult generate_scenario(const GenConfig& cfg) {
    if (cfg.grid_rows < 2 || cfg.grid_cols < 2)
        throw ConfigError("generate_scenario: grid must be at least 2x2");
    if (cfg.vehicles < 1)
        throw ConfigError("generate_scenario: need at least one vehicle");
    if (cfg.taxi_fraction <= 0.0 || cfg.taxi_fraction >= 1.0 ||
        cfg.monitored_fraction <= 0.0 || cfg.monitored_fraction >= 1.0)
        throw ConfigError("generate_scenario: fractions must lie in (0, 1)");
    if (cfg.horizon_intervals < 1)
        throw ConfigError("generate_scenario: horizon must be at least 1");

    GenResult result;
    Scenario& s = result.scenario;
    s.network = build_grid(cfg);
    s.interval_seconds = cfg.interval_seconds;
    s.horizon_intervals = cfg.horizon_intervals;
    s.gen_truth.group_limits_mps = cfg.true_group_limits_mps;
    s.sensor_config.taxi_fraction = cfg.taxi_fraction;
    s.sensor_config.monitored_fraction = cfg.monitored_fraction;

    int m = static_cast<int>(s.network.segments.size());

    Rng monitor_rng = make_rng(mix_seed(cfg.seed, 11));
    std::vector<int> ids(m);
    for (int i = 0; i < m; ++i) ids[i] = s.network.segments[i].id;
    shuffle_in_place(ids, monitor_rng);
    int monitored = static_cast<int>(std::floor(cfg.monitored_fraction * m));
    monitored = std::clamp(monitored, 1, m - 1);
    std::set<int> monitor_set(ids.begin(), ids.begin() + monitored);
    for (RoadSegment& seg : s.network.segments)
        seg.monitored = monitor_set.count(seg.id) != 0;

    auto reach = reachability(s.network);
    double horizon_s = s.horizon_seconds();

    Rng trip_rng = make_rng(mix_seed(cfg.seed, 12));
    std::vector<Trip> trips;
    trips.reserve(cfg.vehicles);
    for (int v = 0; v < cfg.vehicles; ++v) {
        int origin = static_cast<int>(uniform_below(trip_rng, m));
        int dest = static_cast<int>(uniform_below(trip_rng, m));
        double depart = sample_depart(cfg, trip_rng, horizon_s);
        bool ok = false;
        for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
            if (dest != origin && reach[origin][dest]) {
                ok = true;
                break;
            }
            dest = static_cast<int>(uniform_below(trip_rng, m));
        }
        if (!ok) {
            result.infeasible_vehicles.push_back(v);
            continue;
        }
        Trip t;
        t.vehicle_id = v;
        t.group = static_cast<VehicleGroup>(v % 3);
        t.origin_segment = s.network.segments[origin].id;
        t.destination_segment = s.network.segments[dest].id;
        t.depart_s = depart;
        trips.push_back(t);
    }

    Rng taxi_rng = make_rng(mix_seed(cfg.seed, 13));
    std::vector<int> vehicle_ids;
    vehicle_ids.reserve(trips.size());
    for (const Trip& t : trips) vehicle_ids.push_back(t.vehicle_id);
    shuffle_in_place(vehicle_ids, taxi_rng);
    int taxis = static_cast<int>(
        std::floor(cfg.taxi_fraction * static_cast<double>(trips.size())));
    taxis = std::clamp(taxis, 1, std::max(1, (int)trips.size() - 1));
    s.sensor_config.taxi_vehicles.assign(vehicle_ids.begin(),
                                         vehicle_ids.begin() + taxis);
    std::sort(s.sensor_config.taxi_vehicles.begin(),
              s.sensor_config.taxi_vehicles.end());

    SimConfig sim_cfg;
    sim_cfg.horizon_s = horizon_s;
    sim_cfg.limits.mps = cfg.true_group_limits_mps;
    Simulator sim(s.network, trips, sim_cfg);
    RunResult run = sim.run_to_completion();
    s.ground_truth = std::move(run.recovered);
    std::sort(s.ground_truth.begin(), s.ground_truth.end(),
              [](const Trajectory& a, const Trajectory& b) {
                  return a.vehicle_id < b.vehicle_id;
              });

    VolumeCountResult counted = count_volumes(
        s.ground_truth, s.network, s.interval_seconds, s.horizon_intervals);
    s.ground_truth_volumes = std::move(counted.volumes);

    return result;
}

}  // namespace cityvol
