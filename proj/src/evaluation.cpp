#include "cityvol/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cityvol/csv.hpp"

namespace cityvol {

using nlohmann::json;

namespace {

struct Accumulator {
    double sq_sum = 0.0;
    double ape_sum = 0.0;
    std::size_t samples = 0;
    std::size_t mape_samples = 0;

    void add(double pred, double truth) {
        double d = pred - truth;
        sq_sum += d * d;
        ++samples;
        if (truth >= 5.0) {
            ape_sum += std::abs(d) / truth;
            ++mape_samples;
        }
    }
    double rmse() const {
        return samples ? std::sqrt(sq_sum / samples) : 0.0;
    }
    double mape() const { return mape_samples ? ape_sum / mape_samples : 0.0; }
};

// Midpoint of the segment's end nodes.
std::pair<double, double> centroid(const RoadNetwork& net,
                                   const RoadSegment& s) {
    const Node& a = net.node(s.from_node);
    const Node& b = net.node(s.to_node);
    return {(a.x_m + b.x_m) / 2.0, (a.y_m + b.y_m) / 2.0};
}

// Geospatial feature vector: length, lanes, major flag, speed limit.
std::array<double, 4> features(const RoadSegment& s) {
    return {s.length_m, static_cast<double>(s.lanes),
            s.road_class == RoadClass::Major ? 1.0 : 0.0, s.speed_limit_mps};
}

}  // namespace

EvalSplit make_split(const RoadNetwork& net, std::uint64_t seed) {
    std::vector<int> rows;
    for (int id : net.monitored_segments()) rows.push_back(net.segment_row(id));
    std::sort(rows.begin(), rows.end());
    if (rows.size() < 2)
        throw ConfigError("make_split: need at least 2 monitored segments");

    Rng rng = make_rng(mix_seed(seed, 41));
    shuffle_in_place(rows, rng);

    std::size_t n = rows.size();
    std::size_t train_all = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(0.8 * n)));
    if (train_all == n) train_all = n - 1;
    std::size_t validation =
        static_cast<std::size_t>(std::floor(0.2 * train_all));
    if (validation >= train_all) validation = train_all - 1;

    EvalSplit split;
    split.seed = seed;
    split.train.assign(rows.begin(),
                       rows.begin() + (train_all - validation));
    split.validation.assign(rows.begin() + (train_all - validation),
                            rows.begin() + train_all);
    split.test.assign(rows.begin() + train_all, rows.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size())
        throw ConfigError("rmse: length mismatch");
    if (pred.empty()) throw ConfigError("rmse: empty input");
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - truth[i];
        sq += d * d;
    }
    return std::sqrt(sq / pred.size());
}

double mape(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size())
        throw ConfigError("mape: length mismatch");
    if (pred.empty()) throw ConfigError("mape: empty input");
    double sum = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i] < 5.0) continue;
        sum += std::abs(pred[i] - truth[i]) / truth[i];
        ++kept;
    }
    if (kept == 0)
        throw NumericError("mape: every sample has truth below 5");
    return sum / kept;
}

VolumeTensor baseline_spatial_knn(int k, const EvalSplit& split,
                                  const Scenario& scenario) {
    const RoadNetwork& net = scenario.network;
    const VolumeTensor& truth = scenario.ground_truth_volumes;
    if (k < 1) throw ConfigError("baseline_spatial_knn: k must be >= 1");
    if (static_cast<std::size_t>(k) > split.train.size())
        throw ConfigError("baseline_spatial_knn: k exceeds training size");

    const int m = truth.segment_count();
    const int n = truth.interval_count();
    VolumeTensor pred(m, n);
    for (int row = 0; row < m; ++row) {
        auto [x, y] = centroid(net, net.segments[row]);
        std::vector<std::pair<double, int>> order;
        order.reserve(split.train.size());
        for (int tr : split.train) {
            auto [tx, ty] = centroid(net, net.segments[tr]);
            double dx = tx - x, dy = ty - y;
            order.emplace_back(dx * dx + dy * dy, net.segments[tr].id);
        }
        std::sort(order.begin(), order.end());
        for (int t = 0; t < n; ++t) {
            double sum = 0.0;
            for (int j = 0; j < k; ++j)
                sum += truth.at(net.segment_row(order[j].second), t);
            pred.at(row, t) = sum / k;
        }
    }
    return pred;
}

VolumeTensor baseline_contextual_average(const EvalSplit& split,
                                         const Scenario& scenario) {
    const RoadNetwork& net = scenario.network;
    const VolumeTensor& truth = scenario.ground_truth_volumes;
    if (split.train.empty())
        throw ConfigError("baseline_contextual_average: empty training set");
    const int m = truth.segment_count();
    const int n = truth.interval_count();

    std::array<std::vector<int>, 2> class_rows;
    for (int tr : split.train)
        class_rows[static_cast<int>(net.segments[tr].road_class)].push_back(tr);

    VolumeTensor pred(m, n);
    std::array<bool, 2> warned{false, false};
    for (int t = 0; t < n; ++t) {
        double global = 0.0;
        for (int tr : split.train) global += truth.at(tr, t);
        global /= split.train.size();
        std::array<double, 2> class_mean{global, global};
        for (int c = 0; c < 2; ++c) {
            if (class_rows[c].empty()) continue;
            double sum = 0.0;
            for (int tr : class_rows[c]) sum += truth.at(tr, t);
            class_mean[c] = sum / class_rows[c].size();
        }
        for (int row = 0; row < m; ++row) {
            int c = static_cast<int>(net.segments[row].road_class);
            if (class_rows[c].empty() && !warned[c]) {
                std::cerr << "contextual average: no training segments of "
                             "class "
                          << to_string(static_cast<RoadClass>(c))
                          << ", falling back to the global mean\n";
                warned[c] = true;
            }
            pred.at(row, t) = class_mean[c];
        }
    }
    return pred;
}

VolumeTensor baseline_linear_regression(const EvalSplit& split,
                                        const Scenario& scenario) {
    const RoadNetwork& net = scenario.network;
    const VolumeTensor& truth = scenario.ground_truth_volumes;
    if (split.train.empty())
        throw ConfigError("baseline_linear_regression: empty training set");
    const int m = truth.segment_count();
    const int n = truth.interval_count();
    constexpr int kParams = 5;  // intercept + 4 features

    Eigen::MatrixXd X(split.train.size(), kParams);
    for (std::size_t r = 0; r < split.train.size(); ++r) {
        std::array<double, 4> f = features(net.segments[split.train[r]]);
        X(r, 0) = 1.0;
        for (int c = 0; c < 4; ++c) X(r, c + 1) = f[c];
    }
    Eigen::MatrixXd full(m, kParams);
    for (int row = 0; row < m; ++row) {
        std::array<double, 4> f = features(net.segments[row]);
        full(row, 0) = 1.0;
        for (int c = 0; c < 4; ++c) full(row, c + 1) = f[c];
    }

    Eigen::MatrixXd gram = X.transpose() * X;
    VolumeTensor pred(m, n);
    for (int t = 0; t < n; ++t) {
        Eigen::VectorXd y(split.train.size());
        for (std::size_t r = 0; r < split.train.size(); ++r)
            y(r) = truth.at(split.train[r], t);
        Eigen::VectorXd rhs = X.transpose() * y;
        Eigen::VectorXd beta = gram.ldlt().solve(rhs);
        // Plain least squares first; damp only a singular design.
        if (!beta.allFinite() ||
            (gram * beta - rhs).norm() > 1e-6 * (rhs.norm() + 1.0)) {
            Eigen::MatrixXd damped =
                gram + 1e-6 * Eigen::MatrixXd::Identity(kParams, kParams);
            beta = damped.ldlt().solve(rhs);
        }
        Eigen::VectorXd fit = full * beta;
        for (int row = 0; row < m; ++row) pred.at(row, t) = fit(row);
    }
    return pred;
}

VolumeTensor baseline_graph_ssl(const EvalSplit& split,
                                const Scenario& scenario) {
    const RoadNetwork& net = scenario.network;
    const VolumeTensor& truth = scenario.ground_truth_volumes;
    if (split.train.empty())
        throw ConfigError("baseline_graph_ssl: empty training set");
    const int m = truth.segment_count();
    const int n = truth.interval_count();

    std::vector<std::array<double, 4>> f(m);
    for (int row = 0; row < m; ++row) f[row] = features(net.segments[row]);
    for (int c = 0; c < 4; ++c) {
        double mean = 0.0;
        for (int row = 0; row < m; ++row) mean += f[row][c];
        mean /= m;
        double var = 0.0;
        for (int row = 0; row < m; ++row) {
            double d = f[row][c] - mean;
            var += d * d;
        }
        double sd = std::sqrt(var / m);
        if (sd == 0.0) sd = 1.0;
        for (int row = 0; row < m; ++row) f[row][c] = (f[row][c] - mean) / sd;
    }

    std::vector<double> dist2;
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < 4; ++c) {
                double d = f[i][c] - f[j][c];
                d2 += d * d;
            }
            dist2.push_back(d2);
        }
    }
    double sigma2 = 1.0;
    if (!dist2.empty()) {
        std::vector<double> sorted = dist2;
        std::sort(sorted.begin(), sorted.end());
        double median2 = sorted[sorted.size() / 2];
        if (median2 > 0.0) sigma2 = median2;
    }

    InferenceProblem problem;
    problem.volumes = VolumeTensor(m, n);
    for (int tr : split.train) {
        for (int t = 0; t < n; ++t) {
            problem.volumes.at(tr, t) = truth.at(tr, t);
            problem.volumes.set_observed(tr, t, true);
        }
    }
    problem.graph.segments = m;
    problem.graph.intervals = n;
    std::size_t pair_idx = 0;
    std::vector<double> weight(dist2.size());
    for (double d2 : dist2) weight[pair_idx++] = std::exp(-d2 / sigma2);
    for (int t = 0; t < n; ++t) {
        pair_idx = 0;
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                problem.graph.pairs.push_back(
                    {problem.graph.node_index(i, t),
                     problem.graph.node_index(j, t), weight[pair_idx++]});
            }
        }
    }
    return solve(problem).volumes;
}

MetricReport evaluate_run(const VolumeTensor& predictions,
                          const Scenario& scenario, const EvalSplit& split) {
    const VolumeTensor& truth = scenario.ground_truth_volumes;
    const RoadNetwork& net = scenario.network;
    if (predictions.segment_count() != truth.segment_count() ||
        predictions.interval_count() != truth.interval_count())
        throw ConfigError(
            "evaluate_run: predictions are " +
            std::to_string(predictions.segment_count()) + "x" +
            std::to_string(predictions.interval_count()) + ", expected " +
            std::to_string(truth.segment_count()) + "x" +
            std::to_string(truth.interval_count()));
    if (split.test.empty()) throw ConfigError("evaluate_run: empty test set");

    const int n = truth.interval_count();
    const int hours = static_cast<int>(
        std::ceil(n * scenario.interval_seconds / 3600.0));

    Accumulator overall;
    std::array<Accumulator, 2> per_class;
    std::vector<Accumulator> per_hour(std::max(hours, 1));
    for (int row : split.test) {
        int c = static_cast<int>(net.segments[row].road_class);
        for (int t = 0; t < n; ++t) {
            double p = predictions.at(row, t);
            if (!std::isfinite(p))
                throw NumericError("evaluate_run: non-finite prediction at "
                                   "segment " +
                                   std::to_string(net.segments[row].id) +
                                   ", interval " + std::to_string(t));
            double g = truth.at(row, t);
            overall.add(p, g);
            per_class[c].add(p, g);
            int hour = static_cast<int>(t * scenario.interval_seconds / 3600.0);
            per_hour[std::min(hour, hours - 1)].add(p, g);
        }
    }
    if (overall.mape_samples == 0)
        throw NumericError("evaluate_run: every test sample has truth below 5");

    MetricReport report;
    report.rmse = overall.rmse();
    report.mape = overall.mape();
    report.samples = overall.samples;
    report.mape_samples = overall.mape_samples;
    for (int c = 0; c < 2; ++c) {
        ClassMetrics cm;
        cm.road_class = static_cast<RoadClass>(c);
        cm.rmse = per_class[c].rmse();
        cm.mape = per_class[c].mape();
        cm.samples = per_class[c].samples;
        cm.mape_samples = per_class[c].mape_samples;
        report.per_class.push_back(cm);
    }
    for (int h = 0; h < hours; ++h) {
        HourMetrics hm;
        hm.hour = h;
        hm.rmse = per_hour[h].rmse();
        hm.mape = per_hour[h].mape();
        hm.samples = per_hour[h].samples;
        hm.mape_samples = per_hour[h].mape_samples;
        report.per_hour.push_back(hm);
    }
    return report;
}

MetricReport aggregate(std::span<const MetricReport> reports) {
    if (reports.empty()) throw ConfigError("aggregate: no reports");
    const std::size_t n = reports.size();
    for (const MetricReport& r : reports) {
        if (r.per_class.size() != reports[0].per_class.size() ||
            r.per_hour.size() != reports[0].per_hour.size())
            throw ConfigError("aggregate: reports have different breakdowns");
    }
    auto mean_count = [n](auto get) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += get(i);
        return s / n;
    };

    MetricReport out;
    out.rmse = mean_count([&](std::size_t i) { return reports[i].rmse; });
    out.mape = mean_count([&](std::size_t i) { return reports[i].mape; });
    out.samples = static_cast<std::size_t>(std::llround(mean_count(
        [&](std::size_t i) { return static_cast<double>(reports[i].samples); })));
    out.mape_samples = static_cast<std::size_t>(std::llround(
        mean_count([&](std::size_t i) {
            return static_cast<double>(reports[i].mape_samples);
        })));
    for (std::size_t c = 0; c < reports[0].per_class.size(); ++c) {
        ClassMetrics cm;
        cm.road_class = reports[0].per_class[c].road_class;
        cm.rmse = mean_count(
            [&](std::size_t i) { return reports[i].per_class[c].rmse; });
        cm.mape = mean_count(
            [&](std::size_t i) { return reports[i].per_class[c].mape; });
        cm.samples = static_cast<std::size_t>(std::llround(
            mean_count([&](std::size_t i) {
                return static_cast<double>(reports[i].per_class[c].samples);
            })));
        cm.mape_samples = static_cast<std::size_t>(std::llround(
            mean_count([&](std::size_t i) {
                return static_cast<double>(
                    reports[i].per_class[c].mape_samples);
            })));
        out.per_class.push_back(cm);
    }
    for (std::size_t h = 0; h < reports[0].per_hour.size(); ++h) {
        HourMetrics hm;
        hm.hour = reports[0].per_hour[h].hour;
        hm.rmse = mean_count(
            [&](std::size_t i) { return reports[i].per_hour[h].rmse; });
        hm.mape = mean_count(
            [&](std::size_t i) { return reports[i].per_hour[h].mape; });
        hm.samples = static_cast<std::size_t>(std::llround(
            mean_count([&](std::size_t i) {
                return static_cast<double>(reports[i].per_hour[h].samples);
            })));
        hm.mape_samples = static_cast<std::size_t>(std::llround(
            mean_count([&](std::size_t i) {
                return static_cast<double>(reports[i].per_hour[h].mape_samples);
            })));
        out.per_hour.push_back(hm);
    }
    return out;
}

void save_report_json(const MetricReport& report, const std::string& path) {
    json per_class = json::array();
    for (const ClassMetrics& c : report.per_class)
        per_class.push_back({{"road_class", to_string(c.road_class)},
                             {"rmse", c.rmse},
                             {"mape", c.mape},
                             {"samples", c.samples},
                             {"mape_samples", c.mape_samples}});
    json per_hour = json::array();
    for (const HourMetrics& h : report.per_hour)
        per_hour.push_back({{"hour", h.hour},
                            {"rmse", h.rmse},
                            {"mape", h.mape},
                            {"samples", h.samples},
                            {"mape_samples", h.mape_samples}});
    json doc{{"rmse", report.rmse},
             {"mape", report.mape},
             {"samples", report.samples},
             {"mape_samples", report.mape_samples},
             {"per_class", per_class},
             {"per_hour", per_hour}};
    write_text_file(path, doc.dump(1) + "\n");
}

void save_breakdown_csv(const MetricReport& report, const std::string& path) {
    CsvWriter out(path);
    out.row({"group_kind", "group", "rmse", "mape", "samples",
             "mape_samples"});
    for (const ClassMetrics& c : report.per_class)
        out.row({"road_class", to_string(c.road_class), format_double(c.rmse),
                 format_double(c.mape), std::to_string(c.samples),
                 std::to_string(c.mape_samples)});
    for (const HourMetrics& h : report.per_hour)
        out.row({"hour", std::to_string(h.hour), format_double(h.rmse),
                 format_double(h.mape), std::to_string(h.samples),
                 std::to_string(h.mape_samples)});
    out.close();
}

}  // namespace cityvol
