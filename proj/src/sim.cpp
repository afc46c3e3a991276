#include "cityvol/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace cityvol {

namespace {
constexpr double kStopSpeed = 0.05;       // below this a vehicle counts as stopped
constexpr double kMinCongestion = 0.05;   // floor on the occupancy discount
constexpr double kTimeEps = 1e-9;
}  // namespace

Simulator::Simulator(const RoadNetwork& net, const TrajectorySet& incomplete,
                     const SimConfig& cfg) {
    init(net, cfg);
    generation_mode_ = false;
    for (const Trajectory& traj : incomplete) {
        if (traj.points.empty()) continue;
        bool ok = true;
        for (const TrajectoryPoint& p : traj.points) {
            if (!net.segment(p.segment_id).monitored) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            rejected_.push_back(traj.vehicle_id);
            continue;
        }
        Veh v;
        v.id = traj.vehicle_id;
        v.group = static_cast<VehicleGroup>(((traj.vehicle_id % 3) + 3) % 3);
        for (const TrajectoryPoint& p : traj.points)
            v.waypoints.push_back(
                {net.segment_row(p.segment_id), p.timestamp_s});
        v.depart_s = traj.points.front().timestamp_s;
        vehicles_.push_back(std::move(v));
    }
    spawn_queue_.resize(vehicles_.size());
    for (std::size_t i = 0; i < vehicles_.size(); ++i)
        spawn_queue_[i] = static_cast<int>(i);
    std::stable_sort(spawn_queue_.begin(), spawn_queue_.end(),
                     [&](int a, int b) {
                         return vehicles_[a].depart_s < vehicles_[b].depart_s;
                     });
    recorded_.resize(vehicles_.size());
}

Simulator::Simulator(const RoadNetwork& net, const std::vector<Trip>& trips,
                     const SimConfig& cfg) {
    init(net, cfg);
    generation_mode_ = true;
    for (const Trip& t : trips) {
        Veh v;
        v.id = t.vehicle_id;
        v.group = t.group;
        v.waypoints.push_back({net.segment_row(t.origin_segment), t.depart_s});
        v.waypoints.push_back(
            {net.segment_row(t.destination_segment), std::nullopt});
        v.depart_s = t.depart_s;
        vehicles_.push_back(std::move(v));
    }
    spawn_queue_.resize(vehicles_.size());
    for (std::size_t i = 0; i < vehicles_.size(); ++i)
        spawn_queue_[i] = static_cast<int>(i);
    std::stable_sort(spawn_queue_.begin(), spawn_queue_.end(),
                     [&](int a, int b) {
                         return vehicles_[a].depart_s < vehicles_[b].depart_s;
                     });
    recorded_.resize(vehicles_.size());
}

void Simulator::init(const RoadNetwork& net, const SimConfig& cfg) {
    if (cfg.micro_step_s <= 0.0 || cfg.macro_step_s <= 0.0)
        throw ConfigError("simulator: step sizes must be positive");
    double ratio = cfg.macro_step_s / cfg.micro_step_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw ConfigError("simulator: macro_step must be a multiple of micro_step");
    for (double l : cfg.limits.mps)
        if (l < kGroupLimitMin || l > kGroupLimitMax)
            throw ConfigError("simulator: group limits must lie in [1, 40] m/s");
    net_ = &net;
    cfg_ = cfg;
    m_ = static_cast<int>(net.segments.size());
    segs_.resize(m_);
    for (int i = 0; i < m_; ++i) {
        const RoadSegment& s = net.segments[i];
        SegmentState& st = segs_[i];
        st.length_m = s.length_m;
        st.lanes = std::max(1, s.lanes);
        st.limit_mps = s.speed_limit_mps;
        st.capacity = std::max(
            1, static_cast<int>(std::floor(st.lanes * st.length_m /
                                           cfg.jam_spacing_m)));
        st.lane_order.resize(st.lanes);
    }
}

bool Simulator::finished() const {
    if (now_ >= cfg_.horizon_s - kTimeEps) return true;
    return next_spawn_ >= spawn_queue_.size() && blocked_spawns_.empty() &&
           active_.empty();
}

int Simulator::pending_count() const {
    return static_cast<int>(spawn_queue_.size() - next_spawn_) +
           static_cast<int>(blocked_spawns_.size());
}

void Simulator::apply_action(VehicleGroup group, int delta) {
    if (delta < -1 || delta > 1)
        throw ConfigError("apply_action: delta must be -1, 0, or +1");
    double& limit = cfg_.limits.mps[static_cast<int>(group)];
    limit = std::clamp(limit + static_cast<double>(delta), kGroupLimitMin,
                       kGroupLimitMax);
}

double Simulator::effective_limit(const Veh& v, int row) const {
    return std::min(segs_[row].limit_mps, cfg_.limits.get(v.group));
}

int Simulator::pick_lane(int row) const {
    const SegmentState& seg = segs_[row];
    int best = 0;
    std::size_t best_n = seg.lane_order[0].size();
    for (int l = 1; l < seg.lanes; ++l) {
        if (seg.lane_order[l].size() < best_n) {
            best = l;
            best_n = seg.lane_order[l].size();
        }
    }
    return best;
}

void Simulator::note_presence(int vi, int row) {
    Veh& v = vehicles_[vi];
    if (v.seen_seg != row || v.seen_epoch != epoch_) {
        ++segs_[row].wait_vehicles;
        v.seen_seg = row;
        v.seen_epoch = epoch_;
    }
}

void Simulator::record_entry(int vi, int row, double abs_s) {
    auto& points = recorded_[vi];
    double t = abs_s;
    if (!points.empty() && t <= points.back().timestamp_s)
        t = points.back().timestamp_s + 1e-6;
    points.push_back({net_->segments[row].id, 0.0, t});
}

void Simulator::remove_from_lane(int vi) {
    Veh& v = vehicles_[vi];
    int row = v.path[v.path_pos];
    auto& lane = segs_[row].lane_order[v.lane];
    lane.erase(std::find(lane.begin(), lane.end(), vi));
    --segs_[row].occupancy;
}

bool Simulator::try_spawn(int vi) {
    Veh& v = vehicles_[vi];
    int row = v.waypoints.front().segment_row;
    SegmentState& seg = segs_[row];
    if (seg.occupancy >= seg.capacity) return false;
    int lane = pick_lane(row);
    if (!seg.lane_order[lane].empty()) {
        int tail = seg.lane_order[lane].back();
        if (vehicles_[tail].offset_m < cfg_.min_gap_m) return false;
    }
    v.path = {row};
    v.path_pos = 0;
    v.lane = lane;
    v.offset_m = 0.0;
    v.speed_mps = effective_limit(v, row);
    v.spawn_abs_s = now_;
    v.entered_abs_s = now_;
    v.active = true;
    seg.lane_order[lane].push_back(vi);
    ++seg.occupancy;
    active_.push_back(vi);
    ++total_spawned_;
    ++macro_counters_.spawned;
    record_entry(vi, row, now_);
    note_presence(vi, row);
    process_waypoint_arrivals(vi, now_, false, false);
    return true;
}

void Simulator::spawn_due() {
    if (!blocked_spawns_.empty()) {
        std::vector<int> still;
        for (int vi : blocked_spawns_)
            if (!try_spawn(vi)) still.push_back(vi);
        blocked_spawns_ = std::move(still);
    }
    while (next_spawn_ < spawn_queue_.size()) {
        int vi = spawn_queue_[next_spawn_];
        if (vehicles_[vi].depart_s > now_ + kTimeEps) break;
        ++next_spawn_;
        if (!try_spawn(vi)) blocked_spawns_.push_back(vi);
    }
}

void Simulator::process_waypoint_arrivals(int vi, double abs_s,
                                          bool via_teleport,
                                          bool timed_out_sentinel) {
    Veh& v = vehicles_[vi];
    while (v.next_waypoint < v.waypoints.size() &&
           v.waypoints[v.next_waypoint].segment_row == v.path[v.path_pos]) {
        const Waypoint& wp = v.waypoints[v.next_waypoint];
        if (wp.observed_s.has_value()) {
            ArrivalRecord rec;
            rec.vehicle_id = v.id;
            rec.point_index = static_cast<int>(v.next_waypoint);
            if (v.next_waypoint == 0) {
                rec.t_real_s = 0.0;
                rec.t_sim_s = 0.0;
            } else {
                rec.t_real_s = *wp.observed_s - *v.waypoints[0].observed_s;
                rec.t_sim_s = timed_out_sentinel ? cfg_.horizon_s
                                                 : abs_s - v.spawn_abs_s;
            }
            rec.resynced = via_teleport;
            rec.timed_out = timed_out_sentinel;
            all_records_.push_back(rec);
            if (v.next_waypoint > 0) macro_arrivals_.push_back(rec);
        }
        ++v.next_waypoint;
        if (v.next_waypoint >= v.waypoints.size()) {
            // Final point reached: keep driving to the end of this segment.
            v.path = {v.path[v.path_pos]};
            v.path_pos = 0;
            break;
        }
        int target = v.waypoints[v.next_waypoint].segment_row;
        int cur = v.path[v.path_pos];
        std::vector<int> path =
            route_rows(cur, target, v.group, target == cur);
        if (!path.empty()) {
            v.path = std::move(path);
            v.path_pos = 0;
            break;
        }
        if (target == cur) continue;  // no cycle back: count it immediately
        // Unreachable waypoint: jump there and keep simulating.
        remove_from_lane(vi);
        int lane = pick_lane(target);
        SegmentState& seg = segs_[target];
        v.path = {target};
        v.path_pos = 0;
        v.lane = lane;
        v.offset_m = 0.0;
        v.speed_mps = effective_limit(v, target);
        v.entered_abs_s = abs_s;
        v.resynced_any = true;
        auto& order = seg.lane_order[lane];
        order.insert(std::upper_bound(order.begin(), order.end(), vi,
                                      [&](int a, int b) {
                                          return vehicles_[a].offset_m >
                                                 vehicles_[b].offset_m;
                                      }),
                     vi);
        ++seg.occupancy;
        ++total_teleports_;
        ++macro_counters_.teleported;
        record_entry(vi, target, abs_s);
        note_presence(vi, target);
        via_teleport = true;
    }
}

void Simulator::despawn(int vi) {
    Veh& v = vehicles_[vi];
    remove_from_lane(vi);
    v.active = false;
    v.done = true;
    ++total_despawned_;
    ++macro_counters_.despawned;
}

void Simulator::update_vehicle(int vi) {
    Veh& v = vehicles_[vi];
    if (!v.active) return;
    int row = v.path[v.path_pos];
    SegmentState* seg = &segs_[row];
    double dt = cfg_.micro_step_s;
    double eff = effective_limit(v, row);
    double tau = cfg_.headway_s;
    double b = cfg_.max_decel_mps2;

    auto& lane = seg->lane_order[v.lane];
    std::size_t pos = std::find(lane.begin(), lane.end(), vi) - lane.begin();

    double v_safe = std::numeric_limits<double>::infinity();
    auto constrain = [&](double gap, double v_l) {
        double g_eff = gap - cfg_.min_gap_m;
        double cand = v_l + (g_eff - v_l * tau) /
                                (tau + (v.speed_mps + v_l) / (2.0 * b));
        v_safe = std::min(v_safe, cand);
    };

    if (pos > 0) {
        const Veh& leader = vehicles_[lane[pos - 1]];
        constrain(leader.offset_m - v.offset_m, leader.speed_mps);
    } else {
        double remaining = seg->length_m - v.offset_m;
        if (v.path_pos + 1 < v.path.size()) {
            int nrow = v.path[v.path_pos + 1];
            const SegmentState& nseg = segs_[nrow];
            if (nseg.occupancy >= nseg.capacity) {
                constrain(remaining + cfg_.min_gap_m, 0.0);
            } else {
                int nlane = pick_lane(nrow);
                if (!nseg.lane_order[nlane].empty()) {
                    const Veh& tail =
                        vehicles_[nseg.lane_order[nlane].back()];
                    constrain(remaining + tail.offset_m, tail.speed_mps);
                }
            }
        }
        // Final segments end in open road; nothing to constrain.
    }

    double v_new = std::min(v.speed_mps + cfg_.max_accel_mps2 * dt, eff);
    v_new = std::max(0.0, std::min(v_new, v_safe));
    double dist = v_new * dt;
    double traveled = 0.0;
    bool blocked = false;

    while (dist > 1e-12) {
        row = v.path[v.path_pos];
        seg = &segs_[row];
        double to_end = seg->length_m - v.offset_m;
        if (dist < to_end - 1e-12) {
            v.offset_m += dist;
            traveled += dist;
            dist = 0.0;
            break;
        }
        double cross_t = now_ + (traveled + to_end) / v_new;
        if (v.path_pos + 1 >= v.path.size()) {
            seg->traverse_sum_s += cross_t - v.entered_abs_s;
            ++seg->traverse_samples;
            seg->speed_sum += v_new;
            ++seg->speed_samples;
            despawn(vi);
            return;
        }
        int nrow = v.path[v.path_pos + 1];
        SegmentState& nseg = segs_[nrow];
        double entry_bound = nseg.length_m;
        bool enterable = nseg.occupancy < nseg.capacity;
        int nlane = enterable ? pick_lane(nrow) : 0;
        if (enterable && !nseg.lane_order[nlane].empty()) {
            double tail_off = vehicles_[nseg.lane_order[nlane].back()].offset_m;
            entry_bound = tail_off - cfg_.min_gap_m;
            if (entry_bound < 0.0) enterable = false;
        }
        if (!enterable) {
            v.offset_m = seg->length_m;
            traveled += to_end;
            dist = 0.0;
            blocked = true;
            break;
        }
        seg->traverse_sum_s += cross_t - v.entered_abs_s;
        ++seg->traverse_samples;
        remove_from_lane(vi);
        ++v.path_pos;
        v.lane = nlane;
        v.offset_m = 0.0;
        v.entered_abs_s = cross_t;
        nseg.lane_order[nlane].push_back(vi);
        ++nseg.occupancy;
        record_entry(vi, nrow, cross_t);
        note_presence(vi, nrow);
        process_waypoint_arrivals(vi, cross_t, false, false);
        traveled += to_end;
        dist -= to_end;
        dist = std::min(dist, entry_bound);
    }

    v.speed_mps = blocked ? 0.0 : v_new;
    row = v.path[v.path_pos];
    seg = &segs_[row];
    seg->speed_sum += v.speed_mps;
    ++seg->speed_samples;
    if (v.speed_mps < kStopSpeed) seg->stopped_time_s += dt;
    note_presence(vi, row);
}

double Simulator::min_lane_gap() const {
    double best = std::numeric_limits<double>::infinity();
    for (const SegmentState& seg : segs_) {
        for (const auto& lane : seg.lane_order) {
            for (std::size_t k = 1; k < lane.size(); ++k) {
                double gap = vehicles_[lane[k - 1]].offset_m -
                             vehicles_[lane[k]].offset_m;
                best = std::min(best, gap);
            }
        }
    }
    return best;
}

void Simulator::micro_step() {
    spawn_due();
    update_order_.clear();
    for (int i = 0; i < m_; ++i)
        for (const auto& lane : segs_[i].lane_order)
            update_order_.insert(update_order_.end(), lane.begin(), lane.end());
    for (int vi : update_order_) update_vehicle(vi);
    now_ += cfg_.micro_step_s;
}

void Simulator::resync_overdue() {
    if (!cfg_.resync) return;
    for (int vi : active_) {
        Veh& v = vehicles_[vi];
        if (!v.active) continue;
        if (v.next_waypoint >= v.waypoints.size()) continue;
        const Waypoint& wp = v.waypoints[v.next_waypoint];
        if (!wp.observed_s.has_value()) continue;
        if (now_ <= *wp.observed_s + cfg_.resync_grace_s) continue;
        remove_from_lane(vi);
        int target = wp.segment_row;
        SegmentState& seg = segs_[target];
        int lane = pick_lane(target);
        v.path = {target};
        v.path_pos = 0;
        v.lane = lane;
        v.offset_m = 0.0;
        v.speed_mps = effective_limit(v, target);
        v.entered_abs_s = now_;
        v.resynced_any = true;
        auto& order = seg.lane_order[lane];
        order.insert(std::upper_bound(order.begin(), order.end(), vi,
                                      [&](int a, int b) {
                                          return vehicles_[a].offset_m >
                                                 vehicles_[b].offset_m;
                                      }),
                     vi);
        ++seg.occupancy;
        ++total_teleports_;
        ++macro_counters_.teleported;
        record_entry(vi, target, now_);
        note_presence(vi, target);
        process_waypoint_arrivals(vi, now_, true, false);
    }
}

void Simulator::flush_horizon() {
    for (int vi : active_) {
        Veh& v = vehicles_[vi];
        if (!v.active) continue;
        bool had_pending = false;
        while (v.next_waypoint < v.waypoints.size()) {
            const Waypoint& wp = v.waypoints[v.next_waypoint];
            if (wp.observed_s.has_value() && v.next_waypoint > 0) {
                ArrivalRecord rec;
                rec.vehicle_id = v.id;
                rec.point_index = static_cast<int>(v.next_waypoint);
                rec.t_real_s = *wp.observed_s - *v.waypoints[0].observed_s;
                rec.t_sim_s = cfg_.horizon_s;
                rec.timed_out = true;
                all_records_.push_back(rec);
                macro_arrivals_.push_back(rec);
            }
            ++v.next_waypoint;
            had_pending = true;
        }
        if (had_pending) ++timed_out_vehicles_;
        despawn(vi);
    }
    active_.clear();
    timed_out_vehicles_ += static_cast<int>(blocked_spawns_.size());
    timed_out_vehicles_ +=
        static_cast<int>(spawn_queue_.size() - next_spawn_);
    for (int vi : blocked_spawns_) vehicles_[vi].done = true;
    while (next_spawn_ < spawn_queue_.size())
        vehicles_[spawn_queue_[next_spawn_++]].done = true;
    blocked_spawns_.clear();
}

StateFeatures Simulator::collect_features() {
    StateFeatures f(static_cast<std::size_t>(4) * m_, 0.0);
    for (int i = 0; i < m_; ++i) {
        SegmentState& seg = segs_[i];
        f[i] = seg.occupancy;
        if (seg.traverse_samples > 0)
            f[m_ + i] = seg.traverse_sum_s / seg.traverse_samples;
        if (seg.speed_samples > 0)
            f[2 * m_ + i] = seg.speed_sum / seg.speed_samples;
        if (seg.wait_vehicles > 0)
            f[3 * m_ + i] = seg.stopped_time_s / seg.wait_vehicles;
        seg.speed_sum = 0.0;
        seg.speed_samples = 0;
        seg.traverse_sum_s = 0.0;
        seg.traverse_samples = 0;
        seg.stopped_time_s = 0.0;
        seg.wait_vehicles = 0;
    }
    ++epoch_;
    return f;
}

MacroResult Simulator::macro_step() {
    macro_arrivals_.clear();
    macro_counters_ = StepCounters{};
    int steps = static_cast<int>(std::round(cfg_.macro_step_s /
                                            cfg_.micro_step_s));
    for (int k = 0; k < steps; ++k) {
        if (now_ >= cfg_.horizon_s - kTimeEps) break;
        micro_step();
    }
    if (now_ >= cfg_.horizon_s - kTimeEps &&
        (!active_.empty() || pending_count() > 0))
        flush_horizon();
    resync_overdue();
    active_.erase(std::remove_if(active_.begin(), active_.end(),
                                 [&](int vi) { return !vehicles_[vi].active; }),
                  active_.end());
    MacroResult result;
    result.features = collect_features();
    result.arrivals = macro_arrivals_;
    result.counters = macro_counters_;
    return result;
}

std::vector<int> Simulator::route_rows(int from_row, int to_row,
                                       std::optional<VehicleGroup> group,
                                       bool force_cycle) const {
    auto traverse_s = [&](int row) {
        const SegmentState& seg = segs_[row];
        double speed = seg.limit_mps;
        if (group) speed = std::min(speed, cfg_.limits.get(*group));
        double discount =
            std::max(kMinCongestion,
                     1.0 - static_cast<double>(seg.occupancy) / seg.capacity);
        return seg.length_m / (speed * discount);
    };

    if (from_row == to_row && !force_cycle) return {from_row};

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(m_, inf);
    std::vector<int> hops(m_, std::numeric_limits<int>::max());
    std::vector<int> pred(m_, -1);
    std::vector<char> settled(m_, 0);
    using Entry = std::tuple<double, int, int>;  // cost, hops, row
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;

    auto relax = [&](int u, int vrow, double cost, int h) {
        bool better = cost < dist[vrow] ||
                      (cost == dist[vrow] && h < hops[vrow]) ||
                      (cost == dist[vrow] && h == hops[vrow] && u >= 0 &&
                       pred[vrow] >= 0 &&
                       net_->segments[u].id < net_->segments[pred[vrow]].id);
        if (!better) return;
        dist[vrow] = cost;
        hops[vrow] = h;
        pred[vrow] = u;
        pq.push({cost, h, vrow});
    };

    if (force_cycle) {
        // Start from the successors so the search can close a loop back.
        for (int sid : net_->successors(net_->segments[from_row].id)) {
            int srow = net_->segment_row(sid);
            relax(from_row, srow, traverse_s(from_row) + traverse_s(srow), 2);
        }
    } else {
        relax(-1, from_row, traverse_s(from_row), 1);
    }

    while (!pq.empty()) {
        auto [cost, h, u] = pq.top();
        pq.pop();
        if (settled[u]) continue;
        settled[u] = 1;
        if (u == to_row && !force_cycle) break;
        for (int sid : net_->successors(net_->segments[u].id)) {
            int vrow = net_->segment_row(sid);
            if (settled[vrow]) continue;
            if (force_cycle && vrow == from_row) continue;
            relax(u, vrow, cost + traverse_s(vrow), h + 1);
        }
    }

    if (force_cycle) {
        // Best predecessor that can close the cycle into from_row.
        int best = -1;
        double best_cost = inf;
        int best_hops = std::numeric_limits<int>::max();
        for (int u = 0; u < m_; ++u) {
            if (dist[u] == inf) continue;
            bool closes = false;
            for (int sid : net_->successors(net_->segments[u].id))
                if (net_->segment_row(sid) == from_row) closes = true;
            if (!closes) continue;
            double total = dist[u] + traverse_s(from_row);
            if (total < best_cost ||
                (total == best_cost && hops[u] + 1 < best_hops)) {
                best = u;
                best_cost = total;
                best_hops = hops[u] + 1;
            }
        }
        if (best < 0) return {};
        std::vector<int> path{from_row};
        int cur = best;
        std::vector<int> tail;
        while (cur != from_row && cur >= 0) {
            tail.push_back(cur);
            cur = pred[cur];
        }
        std::reverse(tail.begin(), tail.end());
        path.insert(path.end(), tail.begin(), tail.end());
        path.push_back(from_row);
        return path;
    }

    if (dist[to_row] == inf) return {};
    std::vector<int> path;
    for (int cur = to_row; cur >= 0; cur = pred[cur]) path.push_back(cur);
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<int> Simulator::route(int from_segment, int to_segment) const {
    int from_row = net_->segment_row(from_segment);
    int to_row = net_->segment_row(to_segment);
    std::vector<int> rows = route_rows(from_row, to_row, std::nullopt, false);
    if (rows.empty())
        throw RoutingError("no route from segment " +
                           std::to_string(from_segment) + " to " +
                           std::to_string(to_segment));
    std::vector<int> ids;
    ids.reserve(rows.size());
    for (int r : rows) ids.push_back(net_->segments[r].id);
    return ids;
}

RunResult Simulator::run_to_completion() {
    while (!finished()) macro_step();
    if (!active_.empty() || pending_count() > 0) flush_horizon();
    RunResult out;
    for (std::size_t vi = 0; vi < vehicles_.size(); ++vi) {
        if (recorded_[vi].empty()) continue;
        Trajectory t;
        t.vehicle_id = vehicles_[vi].id;
        t.kind = generation_mode_ ? TrajectoryKind::Dense
                                  : TrajectoryKind::Recovered;
        t.points = recorded_[vi];
        out.recovered.push_back(std::move(t));
    }
    out.records = all_records_;
    out.timed_out_vehicles = timed_out_vehicles_;
    return out;
}

double recovery_error(const std::vector<ArrivalRecord>& records) {
    if (records.empty())
        throw Error("recovery_error: no arrival records");
    double sum = 0.0;
    for (const ArrivalRecord& r : records)
        sum += std::abs(r.t_sim_s - r.t_real_s);
    return sum / static_cast<double>(records.size());
}

}  // namespace cityvol
