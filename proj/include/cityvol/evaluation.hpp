#pragma once

#include <span>
#include <string>
#include <vector>

#include "cityvol/common.hpp"
#include "cityvol/inference.hpp"
#include "cityvol/scenario.hpp"
#include "cityvol/trajectory.hpp"

namespace cityvol {

// Disjoint partitions of the monitored segment rows: 80/20 train/test, then
// 20% of train held out as validation.
struct EvalSplit {
    std::vector<int> train;       // rows usable as observations
    std::vector<int> validation;  // subset of monitored, held out of train
    std::vector<int> test;
    std::uint64_t seed = 0;
};

EvalSplit make_split(const RoadNetwork& net, std::uint64_t seed);

double rmse(std::span<const double> pred, std::span<const double> truth);

// Samples with truth < 5 are excluded; throws when nothing survives.
double mape(std::span<const double> pred, std::span<const double> truth);

struct ClassMetrics {
    RoadClass road_class = RoadClass::Major;
    double rmse = 0.0;
    double mape = 0.0;
    std::size_t samples = 0;
    std::size_t mape_samples = 0;
};

struct HourMetrics {
    int hour = 0;
    double rmse = 0.0;
    double mape = 0.0;
    std::size_t samples = 0;
    std::size_t mape_samples = 0;
};

struct MetricReport {
    double rmse = 0.0;
    double mape = 0.0;
    std::size_t samples = 0;
    std::size_t mape_samples = 0;
    std::vector<ClassMetrics> per_class;
    std::vector<HourMetrics> per_hour;
};

// Baselines predict full VolumeTensors from the train rows of the scenario's
// ground-truth volumes.
VolumeTensor baseline_spatial_knn(int k, const EvalSplit& split,
                                  const Scenario& scenario);
VolumeTensor baseline_contextual_average(const EvalSplit& split,
                                         const Scenario& scenario);
VolumeTensor baseline_linear_regression(const EvalSplit& split,
                                        const Scenario& scenario);
// Label propagation over a same-interval similarity graph: segment features
// (length, lanes, major flag, speed limit) are z-scored, every pair i<j gets
// weight exp(-d2/sigma2) with d2 the squared feature distance and sigma2 the
// median pairwise d2 (1 when the median is zero).
VolumeTensor baseline_graph_ssl(const EvalSplit& split,
                                const Scenario& scenario);

// Scores predictions on the test cells of the split.
MetricReport evaluate_run(const VolumeTensor& predictions,
                          const Scenario& scenario, const EvalSplit& split);

// Field-wise arithmetic mean across seeds.
MetricReport aggregate(std::span<const MetricReport> reports);

void save_report_json(const MetricReport& report, const std::string& path);
void save_breakdown_csv(const MetricReport& report, const std::string& path);

}  // namespace cityvol
