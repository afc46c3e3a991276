#include <doctest.h>

#include <cmath>
#include <limits>

#include "cityvol/scenario.hpp"
#include "cityvol/sim.hpp"
#include "oracles.hpp"

using namespace cityvol;
using testutil::line_network;
using testutil::make_traj;

namespace {

ArrivalRecord rec(double t_real, double t_sim) {
    ArrivalRecord r;
    r.t_real_s = t_real;
    r.t_sim_s = t_sim;
    return r;
}

Scenario small_scenario(int vehicles = 120) {
    GenConfig cfg;
    cfg.grid_rows = 3;
    cfg.grid_cols = 3;
    cfg.vehicles = vehicles;
    cfg.horizon_intervals = 12;
    cfg.seed = 5;
    return generate_scenario(cfg).scenario;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("an empty simulator is finished and steps to zero features") {
    RoadNetwork net = line_network(3, 300.0, 10.0, true);
    Simulator sim(net, TrajectorySet{}, SimConfig{});
    CHECK(sim.pending_count() == 0);
    CHECK(sim.active_count() == 0);
    CHECK(sim.finished());
    MacroResult r = sim.macro_step();
    CHECK(r.features == sim.zero_features());
    CHECK(r.features.size() == 4u * 3u);
    CHECK(r.arrivals.empty());
    CHECK(r.counters == StepCounters{});
}

TEST_CASE("single-point itineraries spawn, drive off, and despawn") {
    RoadNetwork net = line_network(3, 300.0, 10.0, true);
    TrajectorySet set{
        make_traj(0, TrajectoryKind::Incomplete, {{0, 0.0}}),
        make_traj(1, TrajectoryKind::Incomplete, {{1, 5.0}}),
        make_traj(2, TrajectoryKind::Incomplete, {{2, 10.0}}),
    };
    Simulator sim(net, set, SimConfig{});
    CHECK(sim.pending_count() == 3);
    MacroResult r = sim.macro_step();
    CHECK(r.counters.spawned == 3);
    CHECK(r.counters.despawned == 3);
    CHECK(sim.active_count() == 0);
    RunResult run = sim.run_to_completion();
    CHECK(run.records.size() == 3);
    for (const ArrivalRecord& a : run.records) {
        CHECK(a.point_index == 0);
        CHECK(a.t_real_s == 0.0);
        CHECK(a.t_sim_s == 0.0);
    }
    CHECK(run.timed_out_vehicles == 0);
}

TEST_CASE("off-monitor observations reject the whole trajectory") {
    RoadNetwork net = line_network(2);
    net.segments[0].monitored = true;
    net.rebuild_index();
    TrajectorySet set{
        make_traj(4, TrajectoryKind::Incomplete, {{0, 0.0}, {1, 30.0}}),
        make_traj(5, TrajectoryKind::Incomplete, {{0, 3.0}}),
    };
    Simulator sim(net, set, SimConfig{});
    CHECK(sim.rejected_vehicles() == std::vector<int>{4});
    CHECK(sim.pending_count() == 1);
}

TEST_CASE("a lone vehicle traverses at the speed limit") {
    RoadNetwork net = line_network(2, 600.0, 10.0);
    std::vector<Trip> trips{{7, VehicleGroup::Sedan, 0, 1, 0.0}};
    SimConfig cfg;
    cfg.horizon_s = 3600.0;
    Simulator sim(net, trips, cfg);
    RunResult run = sim.run_to_completion();
    REQUIRE(run.recovered.size() == 1);
    const Trajectory& t = run.recovered[0];
    CHECK(t.vehicle_id == 7);
    CHECK(t.kind == TrajectoryKind::Dense);
    REQUIRE(t.points.size() == 2);
    CHECK(t.points[0].segment_id == 0);
    CHECK(t.points[0].timestamp_s == 0.0);
    CHECK(t.points[1].segment_id == 1);
    CHECK(t.points[1].timestamp_s == 60.0);
    CHECK(run.timed_out_vehicles == 0);
    CHECK(sim.spawned_count() == 1);
    CHECK(sim.despawned_count() == 1);
}

TEST_CASE("free-flow routing matches exhaustive search") {
    RoadNetwork net = testutil::two_route_network();
    Simulator sim(net, TrajectorySet{}, SimConfig{});
    std::vector<int> got = sim.route(0, 4);
    CHECK(got == std::vector<int>{0, 1, 4});

    auto free_flow = [&](int row) {
        const RoadSegment& s = net.segments[row];
        return s.length_m / s.speed_limit_mps;
    };
    CHECK(testutil::brute_force_route(net, 0, 4, free_flow) == got);

    CHECK(sim.route(2, 2) == std::vector<int>{2});
    CHECK_THROWS_AS(sim.route(0, 99), UnknownSegmentError);

    RoadNetwork pair = testutil::disconnected_pair_network();
    Simulator split(pair, TrajectorySet{}, SimConfig{});
    CHECK_THROWS_AS(split.route(0, 1), RoutingError);
}

TEST_CASE("congestion diverts routes per the documented discount") {
    RoadNetwork net = testutil::two_route_network();
    SimConfig cfg;
    cfg.jam_spacing_m = 300.0;  // capacity 2 on the 600 m direct segment
    cfg.macro_step_s = 1.0;
    cfg.horizon_s = 600.0;
    std::vector<Trip> trips{{0, VehicleGroup::Sedan, 1, 4, 0.0}};
    Simulator sim(net, trips, cfg);
    sim.macro_step();
    REQUIRE(sim.active_count() == 1);

    std::vector<int> got = sim.route(0, 4);
    CHECK(got == std::vector<int>{0, 2, 3, 4});

    auto congested = [&](int row) {
        const RoadSegment& s = net.segments[row];
        int capacity = std::max(
            1, static_cast<int>(std::floor(s.lanes * s.length_m / 300.0)));
        double occupancy = (row == 1) ? 1.0 : 0.0;
        double discount = std::max(0.05, 1.0 - occupancy / capacity);
        return s.length_m / (s.speed_limit_mps * discount);
    };
    CHECK(testutil::brute_force_route(net, 0, 4, congested) == got);
}

TEST_CASE("blocked vehicles accumulate waiting time and keep spacing") {
    RoadNetwork net = line_network(2, 300.0, 10.0);
    net.segments[0].length_m = 600.0;
    net.segments[1].speed_limit_mps = 1.0;
    net.rebuild_index();

    SimConfig cfg;
    cfg.jam_spacing_m = 150.0;  // downstream capacity 2
    cfg.horizon_s = 3600.0;
    std::vector<Trip> trips{
        {0, VehicleGroup::Sedan, 1, 1, 0.0},
        {1, VehicleGroup::Sedan, 1, 1, 4.0},
        {2, VehicleGroup::Sedan, 0, 1, 0.0},
        {3, VehicleGroup::Sedan, 0, 1, 8.0},
    };
    Simulator sim(net, trips, cfg);
    StateFeatures feats;
    for (int step = 0; step < 2; ++step) {
        feats = sim.macro_step().features;
        CHECK(sim.min_lane_gap() >= cfg.min_gap_m - 1e-9);
    }
    int m = sim.segment_count();
    CHECK(feats[0] == 2.0);                  // two stuck on the feeder
    CHECK(feats[1] == 2.0);                  // two crawling downstream
    CHECK(feats[2 * m + 1] == doctest::Approx(1.0).epsilon(0.01));
    CHECK(feats[3 * m + 0] > 0.0);           // waiting time accrued

    RunResult run = sim.run_to_completion();
    CHECK(run.timed_out_vehicles == 0);
    CHECK(sim.spawned_count() == 4);
    CHECK(sim.despawned_count() == 4);
}

TEST_CASE("apply_action clamps group limits to [1, 40]") {
    RoadNetwork net = line_network(2, 300.0, 35.0);
    Simulator sim(net, TrajectorySet{}, SimConfig{});
    CHECK(sim.limits().get(VehicleGroup::Sedan) == 23.0);

    for (int i = 0; i < 50; ++i) sim.apply_action(VehicleGroup::Sedan, +1);
    CHECK(sim.limits().get(VehicleGroup::Sedan) == kGroupLimitMax);
    for (int i = 0; i < 80; ++i) sim.apply_action(VehicleGroup::Sedan, -1);
    CHECK(sim.limits().get(VehicleGroup::Sedan) == kGroupLimitMin);

    double suv = sim.limits().get(VehicleGroup::Suv);
    sim.apply_action(VehicleGroup::Suv, 0);
    CHECK(sim.limits().get(VehicleGroup::Suv) == suv);
    CHECK(sim.limits().get(VehicleGroup::Truck) == 19.0);
}

TEST_CASE("recovery fills in unobserved middle segments") {
    RoadNetwork net = line_network(3);
    net.segments[0].monitored = true;
    net.segments[2].monitored = true;
    net.rebuild_index();

    TrajectorySet set{
        make_traj(0, TrajectoryKind::Incomplete, {{0, 0.0}, {2, 60.0}})};
    SimConfig cfg;
    cfg.horizon_s = 600.0;
    Simulator sim(net, set, cfg);
    RunResult run = sim.run_to_completion();

    REQUIRE(run.recovered.size() == 1);
    std::vector<int> segs;
    for (const TrajectoryPoint& p : run.recovered[0].points)
        segs.push_back(p.segment_id);
    CHECK(segs == std::vector<int>{0, 1, 2});
    for (std::size_t k = 1; k < segs.size(); ++k)
        CHECK(adjacent(net, segs[k - 1], segs[k]));

    REQUIRE(run.records.size() == 2);
    CHECK(run.records[1].point_index == 1);
    CHECK(run.records[1].t_real_s == 60.0);
    CHECK(run.records[1].t_sim_s == doctest::Approx(60.0).epsilon(1e-12));
    CHECK_FALSE(run.records[1].resynced);
    CHECK(recovery_error(run.records) == doctest::Approx(0.0));
}

TEST_CASE("full observation reproduces the observed path") {
    RoadNetwork net = line_network(3, 300.0, 10.0, true);
    TrajectorySet set{make_traj(0, TrajectoryKind::Incomplete,
                                {{0, 0.0}, {1, 30.0}, {2, 61.0}})};
    SimConfig cfg;
    cfg.horizon_s = 600.0;
    Simulator sim(net, set, cfg);
    RunResult run = sim.run_to_completion();
    REQUIRE(run.recovered.size() == 1);
    std::vector<int> segs;
    for (const TrajectoryPoint& p : run.recovered[0].points)
        segs.push_back(p.segment_id);
    CHECK(segs == std::vector<int>{0, 1, 2});
    CHECK(run.records.size() == 3);
}

TEST_CASE("vehicles that outlive the horizon are flushed with sentinels") {
    RoadNetwork net = line_network(2, 600.0, 10.0, true);
    TrajectorySet set{
        make_traj(0, TrajectoryKind::Incomplete, {{0, 0.0}, {1, 100.0}})};
    SimConfig cfg;
    cfg.horizon_s = 30.0;
    cfg.resync = false;
    Simulator sim(net, set, cfg);
    RunResult run = sim.run_to_completion();
    CHECK(run.timed_out_vehicles == 1);
    REQUIRE(run.records.size() == 2);
    CHECK(run.records[1].timed_out);
    CHECK(run.records[1].t_sim_s == 30.0);
    CHECK(run.records[1].t_real_s == 100.0);
    CHECK(sim.finished());
}

TEST_CASE("overdue waypoints resync by teleport when enabled") {
    RoadNetwork net = line_network(3);
    net.segments[0].monitored = true;
    net.segments[2].monitored = true;
    net.rebuild_index();
    TrajectorySet set{
        make_traj(0, TrajectoryKind::Incomplete, {{0, 0.0}, {2, 20.0}})};

    SimConfig cfg;
    cfg.macro_step_s = 5.0;
    cfg.resync_grace_s = 8.0;
    cfg.horizon_s = 600.0;

    Simulator with(net, set, cfg);
    RunResult run = with.run_to_completion();
    REQUIRE(run.records.size() == 2);
    CHECK(run.records[1].resynced);
    CHECK(run.records[1].t_sim_s == 30.0);
    CHECK(with.teleport_count() == 1);

    cfg.resync = false;
    Simulator without(net, set, cfg);
    RunResult slow = without.run_to_completion();
    REQUIRE(slow.records.size() == 2);
    CHECK_FALSE(slow.records[1].resynced);
    CHECK(slow.records[1].t_sim_s == doctest::Approx(60.0).epsilon(1e-12));
    CHECK(without.teleport_count() == 0);
}

TEST_CASE("recovery error averages absolute time gaps") {
    CHECK(recovery_error({rec(10.0, 12.0), rec(5.0, 5.0)}) == 1.0);
    CHECK(recovery_error({rec(3.0, 3.0), rec(8.0, 8.0)}) == 0.0);
    CHECK(recovery_error({rec(0.0, 7.0)}) == 7.0);
    CHECK(recovery_error({rec(5.0, 2.0), rec(10.0, 12.0)}) ==
          recovery_error({rec(10.0, 12.0), rec(5.0, 2.0)}));
    CHECK_THROWS_AS(recovery_error({}), Error);
}

TEST_CASE("identical seeds give bit-identical runs") {
    Scenario s = small_scenario();
    TrajectorySet inc = incomplete_trajectories(s);
    SimConfig cfg;
    cfg.horizon_s = s.horizon_seconds();
    cfg.seed = 9;

    Simulator a(s.network, inc, cfg);
    Simulator b(s.network, inc, cfg);
    for (int step = 0; step < 10; ++step) {
        MacroResult ra = a.macro_step();
        MacroResult rb = b.macro_step();
        CHECK(ra.features == rb.features);
        CHECK(ra.arrivals == rb.arrivals);
        CHECK(ra.counters == rb.counters);
    }
    RunResult fa = a.run_to_completion();
    RunResult fb = b.run_to_completion();
    CHECK(fa.records == fb.records);
    CHECK(fa.recovered == fb.recovered);
    CHECK(fa.timed_out_vehicles == fb.timed_out_vehicles);
}

TEST_CASE("book-keeping balances spawns, despawns, and occupancy") {
    Scenario s = small_scenario();
    TrajectorySet inc = incomplete_trajectories(s);
    SimConfig cfg;
    cfg.horizon_s = s.horizon_seconds();

    Simulator sim(s.network, inc, cfg);
    int m = sim.segment_count();
    for (int step = 0; step < 20; ++step) {
        MacroResult r = sim.macro_step();
        CHECK(sim.spawned_count() - sim.despawned_count() ==
              sim.active_count());
        double on_road = 0.0;
        for (int i = 0; i < m; ++i) on_road += r.features[i];
        CHECK(on_road == static_cast<double>(sim.active_count()));
        CHECK(r.counters.spawned >= 0);
        CHECK(r.features.size() == 4u * static_cast<std::size_t>(m));
    }
    RunResult run = sim.run_to_completion();
    CHECK(sim.spawned_count() == sim.despawned_count());
    std::size_t expected_vehicles = inc.size();
    CHECK(run.recovered.size() + static_cast<std::size_t>(
                                     sim.rejected_vehicles().size()) <=
          expected_vehicles + 0u);
}

TEST_CASE("run_to_completion is idempotent") {
    RoadNetwork net = line_network(2, 600.0, 10.0);
    std::vector<Trip> trips{{7, VehicleGroup::Sedan, 0, 1, 0.0}};
    SimConfig cfg;
    cfg.horizon_s = 3600.0;
    Simulator sim(net, trips, cfg);
    RunResult first = sim.run_to_completion();
    RunResult second = sim.run_to_completion();
    CHECK(first.records == second.records);
    CHECK(first.recovered == second.recovered);
}

TEST_CASE("simulator rejects invalid step configuration") {
    RoadNetwork net = line_network(2);
    SimConfig cfg;
    cfg.micro_step_s = 0.0;
    CHECK_THROWS_AS(Simulator(net, TrajectorySet{}, cfg), ConfigError);
    SimConfig cfg2;
    cfg2.macro_step_s = -5.0;
    CHECK_THROWS_AS(Simulator(net, TrajectorySet{}, cfg2), ConfigError);
}

}  // TEST_SUITE
