#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cityvol/common.hpp"

namespace cityvol {

struct RoadNetwork;

enum class TrajectoryKind { Dense, Incomplete, Recovered };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& s);

// One segment-entry event: the vehicle enters segment_id at timestamp_s.
// offset_m is the position along the segment at record time (0 for entry
// events, which is what both the generator and the simulator emit).
struct TrajectoryPoint {
    int segment_id = 0;
    double offset_m = 0.0;
    double timestamp_s = 0.0;

    bool operator==(const TrajectoryPoint&) const = default;
};

struct Trajectory {
    int vehicle_id = 0;
    TrajectoryKind kind = TrajectoryKind::Dense;
    std::vector<TrajectoryPoint> points;

    bool operator==(const Trajectory&) const = default;
};

using TrajectorySet = std::vector<Trajectory>;

// Dense m x n grid of per-segment, per-interval values plus an observation
// mask. Rows are network segment rows, columns are time intervals.
class VolumeTensor {
public:
    VolumeTensor() = default;
    VolumeTensor(int segments, int intervals, bool observed = false)
        : m_(segments),
          n_(intervals),
          values_(static_cast<std::size_t>(segments) * intervals, 0.0),
          mask_(static_cast<std::size_t>(segments) * intervals,
                observed ? 1 : 0) {
        if (segments < 0 || intervals < 0)
            throw ConfigError("VolumeTensor: negative shape");
    }

    int segment_count() const { return m_; }
    int interval_count() const { return n_; }
    std::size_t cell_count() const { return values_.size(); }

    double at(int i, int t) const { return values_[index(i, t)]; }
    double& at(int i, int t) { return values_[index(i, t)]; }

    bool observed(int i, int t) const { return mask_[index(i, t)] != 0; }
    void set_observed(int i, int t, bool v) { mask_[index(i, t)] = v ? 1 : 0; }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }
    std::vector<std::uint8_t>& mask() { return mask_; }

    double total() const {
        double s = 0.0;
        for (double v : values_) s += v;
        return s;
    }

    bool operator==(const VolumeTensor&) const = default;

    std::size_t index(int i, int t) const {
        if (i < 0 || i >= m_ || t < 0 || t >= n_)
            throw ConfigError("VolumeTensor: index (" + std::to_string(i) +
                              ", " + std::to_string(t) + ") out of range");
        return static_cast<std::size_t>(t) * m_ + i;
    }

private:
    int m_ = 0;
    int n_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

// Splits every trajectory at time gaps strictly greater than the threshold.
// Pieces keep the vehicle id and kind; single-point pieces are kept.
TrajectorySet cut_on_gaps(const TrajectorySet& set,
                          double gap_threshold_s = 1800.0);

// Keeps only the points that lie on monitored segments, preserving order and
// timestamps. The result is marked Incomplete.
Trajectory downsample_to_monitors(const Trajectory& dense,
                                  const RoadNetwork& net);

struct VolumeCountResult {
    VolumeTensor volumes;
    std::size_t dropped_events = 0;  // entries at or past the horizon
};

// Bins segment-entry events into per-interval counts. Interval t covers
// [t * interval_s, (t + 1) * interval_s); events beyond the horizon are
// dropped and tallied.
VolumeCountResult count_volumes(const TrajectorySet& set,
                                const RoadNetwork& net, double interval_s,
                                int intervals);

// Standalone trajectory-set files (same JSON shape the scenario embeds).
void save_trajectories(const TrajectorySet& set, const std::string& path);
TrajectorySet load_trajectories(const std::string& path);

}  // namespace cityvol
