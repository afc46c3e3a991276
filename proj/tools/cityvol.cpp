#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cityvol/csv.hpp"
#include "cityvol/embedding.hpp"
#include "cityvol/evaluation.hpp"
#include "cityvol/inference.hpp"
#include "cityvol/pipeline.hpp"
#include "cityvol/rl.hpp"
#include "cityvol/scenario.hpp"
#include "cityvol/sim.hpp"
#include "cityvol/st_graph.hpp"
#include "cityvol/trajectory.hpp"

namespace {

using namespace cityvol;

void export_trajectories_csv(const TrajectorySet& set,
                             const std::string& path) {
    CsvWriter out(path);
    out.row({"vehicle_id", "kind", "segment_id", "offset_m", "timestamp_s"});
    for (const Trajectory& t : set) {
        for (const TrajectoryPoint& p : t.points)
            out.row({std::to_string(t.vehicle_id), to_string(t.kind),
                     std::to_string(p.segment_id), format_double(p.offset_m),
                     format_double(p.timestamp_s)});
    }
    out.close();
}

void write_arrivals_csv(const std::vector<ArrivalRecord>& records,
                        const std::string& path) {
    CsvWriter out(path);
    out.row({"vehicle_id", "point_index", "t_real_s", "t_sim_s", "resynced",
             "timed_out"});
    for (const ArrivalRecord& r : records)
        out.row({std::to_string(r.vehicle_id), std::to_string(r.point_index),
                 format_double(r.t_real_s), format_double(r.t_sim_s),
                 r.resynced ? "1" : "0", r.timed_out ? "1" : "0"});
    out.close();
}

std::pair<int, int> parse_grid(const std::string& spec) {
    auto x = spec.find('x');
    if (x == std::string::npos) x = spec.find('X');
    if (x == std::string::npos || x == 0 || x + 1 >= spec.size())
        throw ConfigError("--grid expects RxC, e.g. 5x5, got '" + spec + "'");
    return {static_cast<int>(parse_long(spec.substr(0, x), "--grid rows")),
            static_cast<int>(parse_long(spec.substr(x + 1), "--grid cols"))};
}

std::vector<double> parse_double_list(const std::string& csv,
                                      const std::string& flag) {
    std::vector<double> out;
    std::string cell;
    for (char c : csv + ",") {
        if (c == ',') {
            if (!cell.empty()) out.push_back(parse_double(cell, flag));
            cell.clear();
        } else {
            cell += c;
        }
    }
    if (out.empty()) throw ConfigError(flag + " expects a comma-separated list");
    return out;
}

int greedy_action(const QNetwork& net, const StateFeatures& state) {
    std::vector<double> q = q_forward(net, state);
    return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

void print_metrics(const std::string& label, const MetricReport& m) {
    std::printf("%-8s rmse %10.6f  mape %9.6f  (%zu samples, %zu for mape)\n",
                label.c_str(), m.rmse, m.mape, m.samples, m.mape_samples);
}

// Applies --seed, --out-dir, --scenario and --set overrides on top of an
// optional config file, in that order.
struct ConfigFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string scenario;
    std::vector<std::string> sets;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Pipeline config JSON")
            ->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "Master seed (overrides config)");
        cmd->add_option("--out-dir", out_dir, "Run directory");
        cmd->add_option("--scenario", scenario,
                        "Use an existing scenario file instead of generating");
        cmd->add_option("--set", sets,
                        "Override a config field by dotted path, e.g. "
                        "rl.episodes=50");
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg = config_path.empty()
                                 ? default_pipeline_config()
                                 : load_pipeline_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!scenario.empty()) cfg.scenario_path = scenario;
        for (const std::string& kv : sets) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects path=value, got '" + kv +
                                  "'");
            set_config_field(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        return cfg;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"citywide traffic volume estimation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cityvol 1.0.0");

    // ---- gen-scenario ----
    auto* gen_cmd = app.add_subcommand(
        "gen-scenario", "Generate a synthetic grid scenario with ground truth");
    std::string gen_grid = "5x5";
    GenConfig gen_cfg;
    std::string gen_out = "scenario.json";
    std::string gen_export;
    gen_cmd->add_option("--grid", gen_grid, "Grid shape RxC")
        ->capture_default_str();
    gen_cmd->add_option("--vehicles", gen_cfg.vehicles, "Total vehicles")
        ->capture_default_str();
    gen_cmd->add_option("--taxi-frac", gen_cfg.taxi_fraction,
                        "Fraction of vehicles reporting dense traces")
        ->capture_default_str();
    gen_cmd->add_option("--monitored-frac", gen_cfg.monitored_fraction,
                        "Fraction of segments with monitors")
        ->capture_default_str();
    gen_cmd->add_option("--spacing", gen_cfg.spacing_m, "Node spacing in m")
        ->capture_default_str();
    gen_cmd->add_option("--interval", gen_cfg.interval_seconds,
                        "Volume interval in s")
        ->capture_default_str();
    gen_cmd->add_option("--horizon", gen_cfg.horizon_intervals,
                        "Number of intervals")
        ->capture_default_str();
    gen_cmd->add_option("--demand", gen_cfg.demand,
                        "Departure profile: uniform | bimodal")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen_cfg.seed, "Generation seed")
        ->capture_default_str();
    gen_cmd->add_option("--out", gen_out, "Scenario output path")
        ->capture_default_str();
    gen_cmd->add_option("--export-csv", gen_export,
                        "Also export ground-truth trajectories as CSV");
    gen_cmd->callback([&]() {
        auto [rows, cols] = parse_grid(gen_grid);
        gen_cfg.grid_rows = rows;
        gen_cfg.grid_cols = cols;
        GenResult result = generate_scenario(gen_cfg);
        save_scenario(result.scenario, gen_out);
        if (!gen_export.empty())
            export_trajectories_csv(result.scenario.ground_truth, gen_export);
        std::printf("scenario: %zu segments, %zu vehicles (%zu infeasible "
                    "skipped), %d intervals -> %s\n",
                    result.scenario.network.segments.size(),
                    result.scenario.ground_truth.size(),
                    result.infeasible_vehicles.size(),
                    result.scenario.horizon_intervals, gen_out.c_str());
    });

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand(
        "simulate", "Replay the incomplete trajectories through the simulator");
    std::string sim_scenario, sim_config, sim_model;
    std::string sim_out = "recovered.json";
    std::string sim_arrivals, sim_features, sim_export;
    bool sim_no_resync = false;
    sim_cmd->add_option("--scenario", sim_scenario, "Scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--config", sim_config,
                        "Pipeline config JSON (sim section is used)")
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--model", sim_model, "Optional policy model to apply")
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--out", sim_out, "Recovered trajectory output")
        ->capture_default_str();
    sim_cmd->add_option("--arrivals", sim_arrivals, "Arrival records CSV");
    sim_cmd->add_option("--features", sim_features,
                        "Per-macro-step state feature dump CSV");
    sim_cmd->add_option("--export-csv", sim_export,
                        "Recovered trajectories as flat CSV");
    sim_cmd->add_flag("--no-resync", sim_no_resync,
                      "Disable overdue-arrival teleporting");
    sim_cmd->callback([&]() {
        Scenario s = load_scenario(sim_scenario);
        PipelineConfig cfg = sim_config.empty()
                                 ? default_pipeline_config()
                                 : load_pipeline_config(sim_config);
        SimConfig sc = cfg.sim;
        sc.horizon_s = s.horizon_seconds();
        if (sim_no_resync) sc.resync = false;
        std::optional<QNetwork> net;
        if (!sim_model.empty()) net = QNetwork::load(sim_model);

        TrajectorySet incomplete = incomplete_trajectories(s);
        Simulator sim(s.network, incomplete, sc);
        std::optional<CsvWriter> features;
        if (!sim_features.empty()) {
            features.emplace(sim_features);
            std::vector<std::string> header{"time_s"};
            for (std::size_t i = 0; i < sim.zero_features().size(); ++i)
                header.push_back("f" + std::to_string(i));
            features->row(header);
        }
        StateFeatures state = condition_state(sim.zero_features());
        while (!sim.finished()) {
            if (net) {
                int action = greedy_action(*net, state);
                sim.apply_action(ActionCatalog::group(action),
                                 ActionCatalog::delta(action));
            }
            MacroResult res = sim.macro_step();
            if (net) state = condition_state(res.features);
            if (features) {
                std::vector<std::string> row{format_double(sim.time_s())};
                for (double f : res.features) row.push_back(format_double(f));
                features->row(row);
            }
        }
        if (features) features->close();
        RunResult result = sim.run_to_completion();
        save_trajectories(result.recovered, sim_out);
        if (!sim_export.empty())
            export_trajectories_csv(result.recovered, sim_export);
        if (!sim_arrivals.empty()) write_arrivals_csv(result.records, sim_arrivals);
        std::printf("simulated %d vehicles (%zu rejected): %zu arrival "
                    "records, %d timed out, recovery error %.3f s -> %s\n",
                    sim.spawned_count(), sim.rejected_vehicles().size(),
                    result.records.size(), result.timed_out_vehicles,
                    result.records.empty() ? 0.0
                                           : recovery_error(result.records),
                    sim_out.c_str());
    });

    // ---- recover ----
    auto* rec_cmd = app.add_subcommand(
        "recover", "Train the tuning policy and recover full trajectories");
    std::string rec_scenario, rec_config;
    std::string rec_out = "model.json";
    std::string rec_recovered = "recovered.json";
    std::string rec_log = "training_log.csv";
    std::string rec_arrivals;
    std::optional<int> rec_episodes;
    std::optional<std::uint64_t> rec_seed;
    rec_cmd->add_option("--scenario", rec_scenario, "Scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    rec_cmd->add_option("--rl-config", rec_config,
                        "Pipeline config JSON (sim + rl sections are used)")
        ->check(CLI::ExistingFile);
    rec_cmd->add_option("--episodes", rec_episodes, "Training episodes");
    rec_cmd->add_option("--seed", rec_seed, "Training seed");
    rec_cmd->add_option("--out", rec_out, "Model output path")
        ->capture_default_str();
    rec_cmd->add_option("--recovered", rec_recovered,
                        "Recovered trajectory output")
        ->capture_default_str();
    rec_cmd->add_option("--log", rec_log, "Training log CSV")
        ->capture_default_str();
    rec_cmd->add_option("--arrivals", rec_arrivals, "Arrival records CSV");
    rec_cmd->callback([&]() {
        Scenario s = load_scenario(rec_scenario);
        PipelineConfig cfg = rec_config.empty()
                                 ? default_pipeline_config()
                                 : load_pipeline_config(rec_config);
        SimConfig sc = cfg.sim;
        sc.horizon_s = s.horizon_seconds();
        TrainConfig rl = cfg.rl;
        if (rec_episodes) rl.episodes = *rec_episodes;
        if (rec_seed) rl.seed = *rec_seed;

        if (rl.episodes > 0) {
            TrainResult trained = train(s, sc, rl);
            trained.net.save(rec_out);
            save_training_log(trained.log, rec_log);
            sc.limits = trained.tuned_limits;
            std::printf("trained %d episodes -> %s (log %s), tuned limits "
                        "%.1f/%.1f/%.1f m/s\n",
                        rl.episodes, rec_out.c_str(), rec_log.c_str(),
                        sc.limits.mps[0], sc.limits.mps[1], sc.limits.mps[2]);
        } else {
            std::printf("episodes = 0: recovering with the default limits\n");
        }
        RunResult result = run_recovery(s, sc, nullptr);
        save_trajectories(result.recovered, rec_recovered);
        if (!rec_arrivals.empty())
            write_arrivals_csv(result.records, rec_arrivals);
        std::printf("recovered %zu trajectories, %d timed out, recovery "
                    "error %.3f s -> %s\n",
                    result.recovered.size(), result.timed_out_vehicles,
                    result.records.empty() ? 0.0
                                           : recovery_error(result.records),
                    rec_recovered.c_str());
    });

    // ---- build-graphs ----
    auto* bg_cmd = app.add_subcommand(
        "build-graphs", "Build the two spatiotemporal graphs as edge lists");
    std::string bg_scenario, bg_dense, bg_recovered;
    std::vector<std::string> bg_out{"gd.csv", "gi.csv"};
    bg_cmd->add_option("--scenario", bg_scenario, "Scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    bg_cmd->add_option("--dense", bg_dense,
                       "Dense trajectory set (defaults to the scenario's "
                       "taxi subset)")
        ->check(CLI::ExistingFile);
    bg_cmd->add_option("--recovered", bg_recovered,
                       "Recovered trajectory set JSON")
        ->required()
        ->check(CLI::ExistingFile);
    bg_cmd->add_option("--out", bg_out, "Two outputs: dense graph, recovered graph")
        ->expected(2)
        ->capture_default_str();
    bg_cmd->callback([&]() {
        Scenario s = load_scenario(bg_scenario);
        TrajectorySet dense = bg_dense.empty() ? taxi_trajectories(s)
                                               : load_trajectories(bg_dense);
        TrajectorySet recovered = load_trajectories(bg_recovered);
        STGraph gd = build_st_graph(dense, s.network, s.interval_seconds,
                                    s.horizon_intervals);
        STGraph gi = build_st_graph(recovered, s.network, s.interval_seconds,
                                    s.horizon_intervals);
        save_st_graph_csv(gd, s.network, bg_out[0]);
        save_st_graph_csv(gi, s.network, bg_out[1]);
        std::printf("dense graph: %zu edges (weight %.0f) -> %s\n",
                    gd.edge_count(), gd.total_weight(), bg_out[0].c_str());
        std::printf("recovered graph: %zu edges (weight %.0f) -> %s\n",
                    gi.edge_count(), gi.total_weight(), bg_out[1].c_str());
    });

    // ---- embed ----
    auto* emb_cmd = app.add_subcommand(
        "embed", "Train joint embeddings over both graphs' walk corpora");
    std::string emb_scenario, emb_gd, emb_gi;
    std::string emb_out = "embeddings.csv";
    EmbedConfig emb_cfg;
    emb_cmd->add_option("--scenario", emb_scenario, "Scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    emb_cmd->add_option("--gd", emb_gd, "Dense graph CSV")
        ->required()
        ->check(CLI::ExistingFile);
    emb_cmd->add_option("--gi", emb_gi, "Recovered graph CSV")
        ->required()
        ->check(CLI::ExistingFile);
    emb_cmd->add_option("--alpha", emb_cfg.alpha, "Dense-graph weight in [0,1]")
        ->capture_default_str();
    emb_cmd->add_option("--dim", emb_cfg.dim, "Embedding dimension")
        ->capture_default_str();
    emb_cmd->add_option("--window", emb_cfg.window, "Context window")
        ->capture_default_str();
    emb_cmd->add_option("--epochs", emb_cfg.epochs, "Training epochs")
        ->capture_default_str();
    emb_cmd->add_option("--negatives", emb_cfg.negatives,
                        "Negative samples per pair")
        ->capture_default_str();
    emb_cmd->add_option("--walk-len", emb_cfg.walk_len, "Walk length")
        ->capture_default_str();
    emb_cmd->add_option("--walks-per-node", emb_cfg.walks_per_node,
                        "Walks per start node")
        ->capture_default_str();
    emb_cmd->add_option("--lr", emb_cfg.lr, "Initial learning rate")
        ->capture_default_str();
    emb_cmd->add_option("--seed", emb_cfg.seed, "Embedding seed")
        ->capture_default_str();
    emb_cmd->add_option("--out", emb_out, "Embedding CSV output")
        ->capture_default_str();
    emb_cmd->callback([&]() {
        Scenario s = load_scenario(emb_scenario);
        STGraph gd = load_st_graph_csv(emb_gd, s.network, s.horizon_intervals);
        STGraph gi = load_st_graph_csv(emb_gi, s.network, s.horizon_intervals);
        JointTrainResult result = joint_train(gd, gi, emb_cfg);
        save_embedding_csv(result.table, s.network, emb_out);
        std::printf("embedded %zu nodes at d=%d", result.table.node_count(),
                    result.table.dim);
        if (!result.epoch_mean_objective.empty())
            std::printf(", final epoch objective %.6f",
                        result.epoch_mean_objective.back());
        std::printf(" -> %s\n", emb_out.c_str());
    });

    // ---- infer ----
    auto* inf_cmd = app.add_subcommand(
        "infer", "Propagate observed volumes over the masked similarity graph");
    std::string inf_scenario, inf_embeddings;
    std::string inf_out = "volumes.csv";
    double inf_tol = 1e-8;
    int inf_max_iter = 10000;
    bool inf_jacobi = false;
    std::optional<std::uint64_t> inf_split_seed;
    inf_cmd->add_option("--scenario", inf_scenario, "Scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    inf_cmd->add_option("--embeddings", inf_embeddings, "Embedding CSV")
        ->required()
        ->check(CLI::ExistingFile);
    inf_cmd->add_option("--tol", inf_tol,
                        "Relative convergence tolerance")
        ->capture_default_str();
    inf_cmd->add_option("--max-iter", inf_max_iter, "Sweep limit")
        ->capture_default_str();
    inf_cmd->add_flag("--jacobi", inf_jacobi,
                      "Use Jacobi sweeps instead of Gauss-Seidel");
    inf_cmd->add_option("--split-seed", inf_split_seed,
                        "Observe only the train rows of this split (default: "
                        "all monitored rows)");
    inf_cmd->add_option("--out", inf_out, "Volume CSV output")
        ->capture_default_str();
    inf_cmd->callback([&]() {
        Scenario s = load_scenario(inf_scenario);
        const int m = static_cast<int>(s.network.segments.size());
        const int n = s.horizon_intervals;
        EmbeddingTable table = load_embedding_csv(inf_embeddings, s.network, n);

        std::vector<int> observed_rows;
        if (inf_split_seed) {
            observed_rows = make_split(s.network, *inf_split_seed).train;
        } else {
            for (int id : s.network.monitored_segments())
                observed_rows.push_back(s.network.segment_row(id));
        }
        InferenceProblem problem;
        problem.volumes = VolumeTensor(m, n);
        for (int row : observed_rows) {
            for (int t = 0; t < n; ++t) {
                problem.volumes.at(row, t) = s.ground_truth_volumes.at(row, t);
                problem.volumes.set_observed(row, t, true);
            }
        }
        problem.graph = build_masked_graph(table, s.network, n);
        problem.tol = inf_tol;
        problem.max_iter = inf_max_iter;
        problem.mode = inf_jacobi ? SolveMode::Jacobi : SolveMode::GaussSeidel;
        SolveResult result = solve(problem);
        save_volumes_csv(result.volumes, s.network, inf_out);
        std::printf("%s after %d sweeps (residual %.3e, %zu isolated cells) "
                    "-> %s\n",
                    result.converged ? "converged" : "NOT converged",
                    result.iterations, result.final_residual,
                    result.isolated_cells.size(), inf_out.c_str());
        if (!result.converged)
            throw NumericError("inference did not converge within " +
                               std::to_string(inf_max_iter) + " sweeps");
    });

    // ---- evaluate ----
    auto* ev_cmd = app.add_subcommand(
        "evaluate", "Score predicted volumes on a held-out test split");
    std::string ev_pred, ev_scenario;
    std::string ev_out = "report.json";
    std::string ev_breakdown;
    std::uint64_t ev_split_seed = 1;
    ev_cmd->add_option("--predictions", ev_pred, "Predicted volume CSV")
        ->required()
        ->check(CLI::ExistingFile);
    ev_cmd->add_option("--scenario", ev_scenario, "Scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    ev_cmd->add_option("--split-seed", ev_split_seed, "Split seed")
        ->capture_default_str();
    ev_cmd->add_option("--out", ev_out, "Report JSON output")
        ->capture_default_str();
    ev_cmd->add_option("--breakdown", ev_breakdown,
                       "Per-class/per-hour breakdown CSV");
    ev_cmd->callback([&]() {
        Scenario s = load_scenario(ev_scenario);
        VolumeTensor pred =
            load_volumes_csv(ev_pred, s.network, s.horizon_intervals);
        EvalSplit split = make_split(s.network, ev_split_seed);
        MetricReport report = evaluate_run(pred, s, split);
        save_report_json(report, ev_out);
        if (!ev_breakdown.empty()) save_breakdown_csv(report, ev_breakdown);
        print_metrics("test", report);
        std::printf("report -> %s\n", ev_out.c_str());
    });

    // ---- run-all ----
    auto* ra_cmd = app.add_subcommand(
        "run-all", "Run the full pipeline: scenario -> recover -> graphs -> "
                   "embed -> infer -> evaluate");
    ConfigFlags ra_flags;
    ra_flags.attach(ra_cmd);
    std::string ra_from;
    bool ra_force = false;
    std::string ra_alpha_sweep;
    std::string ra_write_config;
    ra_cmd->add_option("--from", ra_from,
                       "Resume from this stage (earlier stages must have "
                       "outputs)");
    ra_cmd->add_flag("--force", ra_force, "Recompute every stage");
    ra_cmd->add_option("--alpha-sweep", ra_alpha_sweep,
                       "Comma-separated alpha values; runs one pipeline per "
                       "value plus a sweep summary");
    ra_cmd->add_option("--write-config", ra_write_config,
                       "Write the effective config to this path and exit");
    ra_cmd->callback([&]() {
        PipelineConfig cfg = ra_flags.resolve();
        if (!ra_write_config.empty()) {
            save_pipeline_config(cfg, ra_write_config);
            std::printf("config -> %s\n", ra_write_config.c_str());
            return;
        }
        if (!ra_alpha_sweep.empty()) {
            std::vector<double> alphas =
                parse_double_list(ra_alpha_sweep, "--alpha-sweep");
            std::vector<AlphaSweepPoint> points = run_alpha_sweep(cfg, alphas);
            std::string summary = cfg.out_dir + "/alpha_sweep.csv";
            save_alpha_sweep(points, summary);
            for (const AlphaSweepPoint& p : points) {
                char label[32];
                std::snprintf(label, sizeof(label), "alpha %g", p.alpha);
                print_metrics(label, p.metrics);
            }
            std::printf("sweep summary -> %s\n", summary.c_str());
            return;
        }
        RunOptions opts;
        opts.from_stage = ra_from;
        opts.force = ra_force;
        RunArtifacts art = run_all(cfg, opts);
        for (const StageInfo& s : art.stages)
            std::printf("stage %-12s %s (%.2f s)\n", s.name.c_str(),
                        s.skipped ? "skipped" : "ran", s.wall_s);
        print_metrics("test", art.metrics);
        std::printf("artifacts -> %s (manifest %s)\n", art.dir.c_str(),
                    art.manifest.c_str());
    });

    // ---- ablations ----
    auto* ab_cmd = app.add_subcommand(
        "ablations",
        "Run the full pipeline plus the df/um/semi variants, paired");
    ConfigFlags ab_flags;
    ab_flags.attach(ab_cmd);
    ab_cmd->callback([&]() {
        PipelineConfig cfg = ab_flags.resolve();
        std::vector<VariantResult> rows = run_ablations(cfg);
        std::string path = cfg.out_dir + "/ablations.csv";
        save_ablation_report(rows, path);
        for (const VariantResult& r : rows) print_metrics(r.id, r.metrics);
        std::printf("comparison -> %s\n", path.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const VersionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
