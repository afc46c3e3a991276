#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cityvol/common.hpp"
#include "cityvol/scenario.hpp"
#include "cityvol/trajectory.hpp"

namespace cityvol {

enum class VehicleGroup : int { Sedan = 0, Suv = 1, Truck = 2 };

constexpr int kGroupCount = 3;
constexpr double kGroupLimitMin = 1.0;
constexpr double kGroupLimitMax = 40.0;

// Vehicle-group speed limits in m/s, always inside [1, 40].
struct GroupLimits {
    std::array<double, 3> mps{23.0, 21.0, 19.0};

    double get(VehicleGroup g) const { return mps[static_cast<int>(g)]; }
    bool operator==(const GroupLimits&) const = default;
};

struct SimConfig {
    double micro_step_s = 1.0;
    double macro_step_s = 60.0;
    double headway_s = 1.5;
    double max_accel_mps2 = 2.5;
    double max_decel_mps2 = 4.5;
    double min_gap_m = 2.0;
    double jam_spacing_m = 7.0;
    bool resync = true;
    double resync_grace_s = 300.0;
    double horizon_s = 86400.0;
    GroupLimits limits;
    std::uint64_t seed = 0;
};

// Relative arrival times at one itinerary point: both columns are measured
// from the vehicle's first point, so j = 0 records (0, 0).
struct ArrivalRecord {
    int vehicle_id = 0;
    int point_index = 0;
    double t_real_s = 0.0;
    double t_sim_s = 0.0;
    bool resynced = false;
    bool timed_out = false;

    bool operator==(const ArrivalRecord&) const = default;
};

// Per-segment (vehicle_count, avg_traverse_time, avg_speed, avg_waiting_time)
// concatenated block-wise into a 4m vector.
using StateFeatures = std::vector<double>;

struct StepCounters {
    int spawned = 0;
    int despawned = 0;
    int teleported = 0;

    bool operator==(const StepCounters&) const = default;
};

struct MacroResult {
    StateFeatures features;
    std::vector<ArrivalRecord> arrivals;  // itinerary points j >= 1 only
    StepCounters counters;
};

struct RunResult {
    TrajectorySet recovered;
    std::vector<ArrivalRecord> records;  // every itinerary point, j = 0 included
    int timed_out_vehicles = 0;
};

// Origin/destination demand used when generating ground truth; the same
// vehicle kinematics serve both generation and recovery.
struct Trip {
    int vehicle_id = 0;
    VehicleGroup group = VehicleGroup::Sedan;
    int origin_segment = 0;
    int destination_segment = 0;
    double depart_s = 0.0;
};

class Simulator {
public:
    // Recovery mode: one vehicle per incomplete trajectory, itinerary points
    // on monitored segments, observed timestamps. Any off-monitor point
    // rejects the whole trajectory (listed, not thrown). Group is
    // vehicle_id % 3, the same rule the generator uses.
    Simulator(const RoadNetwork& net, const TrajectorySet& incomplete,
              const SimConfig& cfg);

    // Generation mode: free-running trips with no observations beyond the
    // departure time.
    Simulator(const RoadNetwork& net, const std::vector<Trip>& trips,
              const SimConfig& cfg);

    // The simulator keeps a pointer to the network; it must outlive it.
    Simulator(RoadNetwork&&, const TrajectorySet&, const SimConfig&) = delete;
    Simulator(RoadNetwork&&, const std::vector<Trip>&, const SimConfig&) =
        delete;

    const std::vector<int>& rejected_vehicles() const { return rejected_; }

    int segment_count() const { return m_; }
    double time_s() const { return now_; }
    bool finished() const;
    int pending_count() const;
    int active_count() const { return static_cast<int>(active_.size()); }
    int spawned_count() const { return total_spawned_; }
    int despawned_count() const { return total_despawned_; }
    int teleport_count() const { return total_teleports_; }

    const GroupLimits& limits() const { return cfg_.limits; }
    void apply_action(VehicleGroup group, int delta);

    // Smallest leader-to-follower spacing over all lanes; +inf when no lane
    // holds two vehicles. Teleported vehicles may be inserted closer.
    double min_lane_gap() const;

    MacroResult macro_step();

    // Minimum expected-travel-time path between segments, both endpoints
    // included. Per-segment expected time is
    //   length / (limit * max(0.05, 1 - occupancy/capacity))
    // where limit is the segment limit (vehicle routing additionally caps it
    // by the group limit). Ties prefer fewer segments, then lower ids.
    std::vector<int> route(int from_segment, int to_segment) const;

    RunResult run_to_completion();

    StateFeatures zero_features() const {
        return StateFeatures(static_cast<std::size_t>(4) * m_, 0.0);
    }

private:
    struct Waypoint {
        int segment_row = 0;
        std::optional<double> observed_s;
    };

    struct Veh {
        int id = 0;
        VehicleGroup group = VehicleGroup::Sedan;
        std::vector<Waypoint> waypoints;
        std::size_t next_waypoint = 0;
        std::vector<int> path;  // segment rows; path[path_pos] = current
        std::size_t path_pos = 0;
        double offset_m = 0.0;
        double speed_mps = 0.0;
        int lane = 0;
        double depart_s = 0.0;
        double spawn_abs_s = 0.0;
        double entered_abs_s = 0.0;
        bool active = false;
        bool done = false;
        bool resynced_any = false;
        int seen_seg = -1;  // distinct-vehicle bookkeeping per macro step
        long seen_epoch = -1;
    };

    struct SegmentState {
        double length_m = 0.0;
        int lanes = 1;
        double limit_mps = 0.0;
        int capacity = 1;
        int occupancy = 0;
        std::vector<std::vector<int>> lane_order;  // offset-descending
        double speed_sum = 0.0;
        long speed_samples = 0;
        double traverse_sum_s = 0.0;
        long traverse_samples = 0;
        double stopped_time_s = 0.0;
        int wait_vehicles = 0;
    };

    void init(const RoadNetwork& net, const SimConfig& cfg);
    void micro_step();
    void spawn_due();
    bool try_spawn(int vi);
    void resync_overdue();
    void update_vehicle(int vi);
    void note_presence(int vi, int row);
    void record_entry(int vi, int row, double abs_s);
    void process_waypoint_arrivals(int vi, double abs_s, bool via_teleport,
                                   bool timed_out_sentinel);
    void remove_from_lane(int vi);
    void despawn(int vi);
    void flush_horizon();
    double effective_limit(const Veh& v, int row) const;
    int pick_lane(int row) const;
    std::vector<int> route_rows(int from_row, int to_row,
                                std::optional<VehicleGroup> group,
                                bool force_cycle) const;
    StateFeatures collect_features();

    const RoadNetwork* net_ = nullptr;
    SimConfig cfg_;
    double now_ = 0.0;
    int m_ = 0;
    long epoch_ = 0;
    bool generation_mode_ = false;

    std::vector<Veh> vehicles_;
    std::vector<int> spawn_queue_;  // vehicle indices by (depart, id)
    std::size_t next_spawn_ = 0;
    std::vector<int> blocked_spawns_;
    std::vector<int> active_;
    std::vector<SegmentState> segs_;
    std::vector<int> rejected_;
    std::vector<int> update_order_;

    std::vector<std::vector<TrajectoryPoint>> recorded_;
    std::vector<ArrivalRecord> all_records_;
    std::vector<ArrivalRecord> macro_arrivals_;
    StepCounters macro_counters_;
    int total_spawned_ = 0;
    int total_despawned_ = 0;
    int total_teleports_ = 0;
    int timed_out_vehicles_ = 0;
};

// Mean absolute arrival-time error over records, in seconds.
double recovery_error(const std::vector<ArrivalRecord>& records);

}  // namespace cityvol
