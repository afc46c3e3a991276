#include "cityvol/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>

#include <nlohmann/json.hpp>

#include "cityvol/csv.hpp"
#include "cityvol/st_graph.hpp"

namespace cityvol {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kConfigVersion = 1;
constexpr int kManifestVersion = 1;

void reject_unknown_keys(const json& obj, const std::string& scope,
                         std::initializer_list<const char*> known) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find_if(known.begin(), known.end(), [&](const char* k) {
                return key == k;
            }) == known.end())
            throw ParseError("config: unknown field '" +
                             (scope.empty() ? key : scope + "." + key) + "'");
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

json gen_to_json(const GenConfig& g) {
    return {{"grid_rows", g.grid_rows},
            {"grid_cols", g.grid_cols},
            {"spacing_m", g.spacing_m},
            {"vehicles", g.vehicles},
            {"demand", g.demand},
            {"taxi_fraction", g.taxi_fraction},
            {"monitored_fraction", g.monitored_fraction},
            {"interval_seconds", g.interval_seconds},
            {"horizon_intervals", g.horizon_intervals},
            {"true_group_limits_mps", g.true_group_limits_mps},
            {"major_speed_mps", g.major_speed_mps},
            {"secondary_speed_mps", g.secondary_speed_mps},
            {"major_lanes", g.major_lanes},
            {"secondary_lanes", g.secondary_lanes},
            {"seed", g.seed}};
}

GenConfig gen_from_json(const json& obj) {
    reject_unknown_keys(obj, "gen",
                        {"grid_rows", "grid_cols", "spacing_m", "vehicles",
                         "demand", "taxi_fraction", "monitored_fraction",
                         "interval_seconds", "horizon_intervals",
                         "true_group_limits_mps", "major_speed_mps",
                         "secondary_speed_mps", "major_lanes",
                         "secondary_lanes", "seed"});
    GenConfig g;
    read_field(obj, "grid_rows", g.grid_rows);
    read_field(obj, "grid_cols", g.grid_cols);
    read_field(obj, "spacing_m", g.spacing_m);
    read_field(obj, "vehicles", g.vehicles);
    read_field(obj, "demand", g.demand);
    read_field(obj, "taxi_fraction", g.taxi_fraction);
    read_field(obj, "monitored_fraction", g.monitored_fraction);
    read_field(obj, "interval_seconds", g.interval_seconds);
    read_field(obj, "horizon_intervals", g.horizon_intervals);
    read_field(obj, "true_group_limits_mps", g.true_group_limits_mps);
    read_field(obj, "major_speed_mps", g.major_speed_mps);
    read_field(obj, "secondary_speed_mps", g.secondary_speed_mps);
    read_field(obj, "major_lanes", g.major_lanes);
    read_field(obj, "secondary_lanes", g.secondary_lanes);
    read_field(obj, "seed", g.seed);
    return g;
}

json sim_to_json(const SimConfig& s) {
    return {{"micro_step_s", s.micro_step_s},
            {"macro_step_s", s.macro_step_s},
            {"headway_s", s.headway_s},
            {"max_accel_mps2", s.max_accel_mps2},
            {"max_decel_mps2", s.max_decel_mps2},
            {"min_gap_m", s.min_gap_m},
            {"jam_spacing_m", s.jam_spacing_m},
            {"resync", s.resync},
            {"resync_grace_s", s.resync_grace_s},
            {"horizon_s", s.horizon_s},
            {"limits", s.limits.mps},
            {"seed", s.seed}};
}

SimConfig sim_from_json(const json& obj) {
    reject_unknown_keys(obj, "sim",
                        {"micro_step_s", "macro_step_s", "headway_s",
                         "max_accel_mps2", "max_decel_mps2", "min_gap_m",
                         "jam_spacing_m", "resync", "resync_grace_s",
                         "horizon_s", "limits", "seed"});
    SimConfig s;
    read_field(obj, "micro_step_s", s.micro_step_s);
    read_field(obj, "macro_step_s", s.macro_step_s);
    read_field(obj, "headway_s", s.headway_s);
    read_field(obj, "max_accel_mps2", s.max_accel_mps2);
    read_field(obj, "max_decel_mps2", s.max_decel_mps2);
    read_field(obj, "min_gap_m", s.min_gap_m);
    read_field(obj, "jam_spacing_m", s.jam_spacing_m);
    read_field(obj, "resync", s.resync);
    read_field(obj, "resync_grace_s", s.resync_grace_s);
    read_field(obj, "horizon_s", s.horizon_s);
    read_field(obj, "limits", s.limits.mps);
    read_field(obj, "seed", s.seed);
    return s;
}

json rl_to_json(const TrainConfig& r) {
    return {{"gamma", r.gamma},
            {"lr", r.lr},
            {"batch", r.batch},
            {"eps_start", r.eps_start},
            {"eps_end", r.eps_end},
            {"eps_decay_episodes", r.eps_decay_episodes},
            {"episodes", r.episodes},
            {"adam_beta1", r.adam_beta1},
            {"adam_beta2", r.adam_beta2},
            {"adam_eps", r.adam_eps},
            {"memory_capacity", r.memory_capacity},
            {"max_steps_per_episode", r.max_steps_per_episode},
            {"reward_time_scale_s", r.reward_time_scale_s},
            {"start_jitter_mps", r.start_jitter_mps},
            {"seed", r.seed}};
}

TrainConfig rl_from_json(const json& obj) {
    reject_unknown_keys(obj, "rl",
                        {"gamma", "lr", "batch", "eps_start", "eps_end",
                         "eps_decay_episodes", "episodes", "adam_beta1",
                         "adam_beta2", "adam_eps", "memory_capacity",
                         "max_steps_per_episode", "reward_time_scale_s",
                         "start_jitter_mps", "seed"});
    TrainConfig r;
    read_field(obj, "gamma", r.gamma);
    read_field(obj, "lr", r.lr);
    read_field(obj, "batch", r.batch);
    read_field(obj, "eps_start", r.eps_start);
    read_field(obj, "eps_end", r.eps_end);
    read_field(obj, "eps_decay_episodes", r.eps_decay_episodes);
    read_field(obj, "episodes", r.episodes);
    read_field(obj, "adam_beta1", r.adam_beta1);
    read_field(obj, "adam_beta2", r.adam_beta2);
    read_field(obj, "adam_eps", r.adam_eps);
    read_field(obj, "memory_capacity", r.memory_capacity);
    read_field(obj, "max_steps_per_episode", r.max_steps_per_episode);
    read_field(obj, "reward_time_scale_s", r.reward_time_scale_s);
    read_field(obj, "start_jitter_mps", r.start_jitter_mps);
    read_field(obj, "seed", r.seed);
    return r;
}

json embed_to_json(const EmbedConfig& e) {
    return {{"dim", e.dim},
            {"window", e.window},
            {"negatives", e.negatives},
            {"lr", e.lr},
            {"lr_min", e.lr_min},
            {"epochs", e.epochs},
            {"alpha", e.alpha},
            {"noise_exponent", e.noise_exponent},
            {"walk_len", e.walk_len},
            {"walks_per_node", e.walks_per_node},
            {"seed", e.seed}};
}

EmbedConfig embed_from_json(const json& obj) {
    reject_unknown_keys(obj, "embed",
                        {"dim", "window", "negatives", "lr", "lr_min",
                         "epochs", "alpha", "noise_exponent", "walk_len",
                         "walks_per_node", "seed"});
    EmbedConfig e;
    read_field(obj, "dim", e.dim);
    read_field(obj, "window", e.window);
    read_field(obj, "negatives", e.negatives);
    read_field(obj, "lr", e.lr);
    read_field(obj, "lr_min", e.lr_min);
    read_field(obj, "epochs", e.epochs);
    read_field(obj, "alpha", e.alpha);
    read_field(obj, "noise_exponent", e.noise_exponent);
    read_field(obj, "walk_len", e.walk_len);
    read_field(obj, "walks_per_node", e.walks_per_node);
    read_field(obj, "seed", e.seed);
    return e;
}

json config_to_json(const PipelineConfig& cfg) {
    return {{"version", kConfigVersion},
            {"seed", cfg.seed},
            {"out_dir", cfg.out_dir},
            {"scenario_path", cfg.scenario_path},
            {"gen", gen_to_json(cfg.gen)},
            {"sim", sim_to_json(cfg.sim)},
            {"rl", rl_to_json(cfg.rl)},
            {"embed", embed_to_json(cfg.embed)},
            {"infer", {{"tol", cfg.infer_tol}, {"max_iter", cfg.infer_max_iter}}},
            {"eval", {{"knn_k", cfg.eval.knn_k}, {"seeds", cfg.eval.seeds}}}};
}

PipelineConfig config_from_json(const json& doc) {
    reject_unknown_keys(doc, "",
                        {"version", "seed", "out_dir", "scenario_path", "gen",
                         "sim", "rl", "embed", "infer", "eval"});
    if (doc.contains("version")) {
        int v = doc.at("version").get<int>();
        if (v != kConfigVersion)
            throw VersionError("config version " + std::to_string(v) +
                               ", expected " + std::to_string(kConfigVersion));
    }
    PipelineConfig cfg;
    read_field(doc, "seed", cfg.seed);
    read_field(doc, "out_dir", cfg.out_dir);
    read_field(doc, "scenario_path", cfg.scenario_path);
    if (doc.contains("gen")) cfg.gen = gen_from_json(doc.at("gen"));
    if (doc.contains("sim")) cfg.sim = sim_from_json(doc.at("sim"));
    if (doc.contains("rl")) cfg.rl = rl_from_json(doc.at("rl"));
    if (doc.contains("embed")) cfg.embed = embed_from_json(doc.at("embed"));
    if (doc.contains("infer")) {
        reject_unknown_keys(doc.at("infer"), "infer", {"tol", "max_iter"});
        read_field(doc.at("infer"), "tol", cfg.infer_tol);
        read_field(doc.at("infer"), "max_iter", cfg.infer_max_iter);
    }
    if (doc.contains("eval")) {
        reject_unknown_keys(doc.at("eval"), "eval", {"knn_k", "seeds"});
        read_field(doc.at("eval"), "knn_k", cfg.eval.knn_k);
        read_field(doc.at("eval"), "seeds", cfg.eval.seeds);
    }
    return cfg;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const std::string& path) {
    return hex64(fnv1a(read_text_file(path)));
}

std::string json_hash(const json& j) { return hex64(fnv1a(j.dump())); }

void save_arrivals_csv(const std::vector<ArrivalRecord>& records,
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

json metrics_to_json(const MetricReport& r) {
    json per_class = json::array();
    for (const ClassMetrics& c : r.per_class)
        per_class.push_back({{"road_class", to_string(c.road_class)},
                             {"rmse", c.rmse},
                             {"mape", c.mape},
                             {"samples", c.samples},
                             {"mape_samples", c.mape_samples}});
    json per_hour = json::array();
    for (const HourMetrics& h : r.per_hour)
        per_hour.push_back({{"hour", h.hour},
                            {"rmse", h.rmse},
                            {"mape", h.mape},
                            {"samples", h.samples},
                            {"mape_samples", h.mape_samples}});
    return {{"rmse", r.rmse},
            {"mape", r.mape},
            {"samples", r.samples},
            {"mape_samples", r.mape_samples},
            {"per_class", per_class},
            {"per_hour", per_hour}};
}

MetricReport metrics_from_json(const json& j) {
    MetricReport r;
    r.rmse = j.at("rmse").get<double>();
    r.mape = j.at("mape").get<double>();
    r.samples = j.at("samples").get<std::size_t>();
    r.mape_samples = j.at("mape_samples").get<std::size_t>();
    for (const json& jc : j.at("per_class")) {
        ClassMetrics c;
        c.road_class =
            road_class_from_string(jc.at("road_class").get<std::string>());
        c.rmse = jc.at("rmse").get<double>();
        c.mape = jc.at("mape").get<double>();
        c.samples = jc.at("samples").get<std::size_t>();
        c.mape_samples = jc.at("mape_samples").get<std::size_t>();
        r.per_class.push_back(c);
    }
    for (const json& jh : j.at("per_hour")) {
        HourMetrics h;
        h.hour = jh.at("hour").get<int>();
        h.rmse = jh.at("rmse").get<double>();
        h.mape = jh.at("mape").get<double>();
        h.samples = jh.at("samples").get<std::size_t>();
        h.mape_samples = jh.at("mape_samples").get<std::size_t>();
        r.per_hour.push_back(h);
    }
    return r;
}

enum class Variant { Full, Df, Um, Semi };

std::string variant_id(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::Df: return "df";
        case Variant::Um: return "um";
        case Variant::Semi: return "semi";
    }
    throw ConfigError("unknown variant");
}

const std::vector<std::string>& stage_names(Variant v) {
    static const std::vector<std::string> with_embed{
        "scenario", "recover", "build-graphs", "embed", "infer", "evaluate"};
    static const std::vector<std::string> without_embed{
        "scenario", "recover", "build-graphs", "infer", "evaluate"};
    return v == Variant::Semi ? without_embed : with_embed;
}

std::string volumes_path(const std::string& dir, std::size_t seed_index) {
    if (seed_index == 0) return dir + "/volumes.csv";
    return dir + "/volumes." + std::to_string(seed_index) + ".csv";
}

// Lazily materialized inter-stage state; skipped stages leave entries empty
// and downstream stages reload them from the recorded artifacts.
struct PipelineState {
    std::optional<Scenario> scenario;
    std::optional<TrajectorySet> dense;
    std::optional<TrajectorySet> recovered;
    std::optional<STGraph> gd;
    std::optional<STGraph> gi;
    std::optional<EmbeddingTable> table;
    std::vector<std::optional<VolumeTensor>> predictions;
};

RunArtifacts run_pipeline(const PipelineConfig& user_cfg,
                          const RunOptions& opts, Variant variant) {
    PipelineConfig cfg = user_cfg;
    if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
    if (cfg.eval.seeds.empty())
        throw ConfigError("eval.seeds must not be empty");
    StageSeeds seeds = stage_seeds(cfg.seed);
    cfg.gen.seed = seeds.scenario;
    cfg.rl.seed = seeds.rl;
    cfg.embed.seed = seeds.embed;
    if (variant == Variant::Df) cfg.rl.episodes = 0;

    const std::vector<std::string>& stages = stage_names(variant);
    if (!opts.from_stage.empty() &&
        std::find(stages.begin(), stages.end(), opts.from_stage) ==
            stages.end()) {
        std::string valid;
        for (const std::string& s : stages)
            valid += (valid.empty() ? "" : ", ") + s;
        throw ConfigError("unknown stage '" + opts.from_stage +
                          "'; valid stages: " + valid);
    }
    auto stage_index = [&stages](const std::string& name) {
        return std::find(stages.begin(), stages.end(), name) - stages.begin();
    };
    const long resume_index =
        opts.from_stage.empty() ? 0 : stage_index(opts.from_stage);

    fs::create_directories(cfg.out_dir);

    RunArtifacts art;
    art.dir = cfg.out_dir;
    art.scenario = cfg.out_dir + "/scenario.json";
    art.model = cfg.out_dir + "/model.json";
    art.training_log = cfg.out_dir + "/training_log.csv";
    art.recovered = cfg.out_dir + "/recovered.json";
    art.dense = cfg.out_dir + "/dense.json";
    art.arrivals = cfg.out_dir + "/arrivals.csv";
    art.gd_csv = cfg.out_dir + "/gd.csv";
    art.gi_csv = cfg.out_dir + "/gi.csv";
    art.embeddings =
        variant == Variant::Semi ? "" : cfg.out_dir + "/embeddings.csv";
    art.volumes = volumes_path(cfg.out_dir, 0);
    art.report = cfg.out_dir + "/report.json";
    art.manifest = cfg.out_dir + "/manifest.json";

    json old_manifest;
    if (fs::exists(art.manifest)) {
        try {
            old_manifest = json::parse(read_text_file(art.manifest));
        } catch (const std::exception&) {
            old_manifest = json();  // unreadable manifest: recompute
        }
    }
    auto old_stage = [&old_manifest](const std::string& name) -> json {
        if (!old_manifest.contains("stages")) return json();
        for (const json& s : old_manifest.at("stages"))
            if (s.at("name").get<std::string>() == name) return s;
        return json();
    };

    auto write_manifest = [&]() {
        json stage_list = json::array();
        for (const StageInfo& s : art.stages) {
            json hashes = json::object();
            for (const auto& [k, v] : s.input_hashes) hashes[k] = v;
            stage_list.push_back({{"name", s.name},
                                  {"wall_s", s.wall_s},
                                  {"skipped", s.skipped},
                                  {"input_hashes", hashes},
                                  {"outputs", s.outputs}});
        }
        json doc{{"version", kManifestVersion},
                 {"variant", variant_id(variant)},
                 {"seed", cfg.seed},
                 {"stage_seeds",
                  {{"scenario", seeds.scenario},
                   {"rl", seeds.rl},
                   {"embed", seeds.embed},
                   {"split", seeds.split}}},
                 {"config_hash", json_hash(config_to_json(cfg))},
                 {"stages", stage_list}};
        write_text_file(art.manifest, doc.dump(1) + "\n");
    };

    // Runs or skips one stage, appends its record, persists the manifest.
    auto run_stage = [&](const std::string& name,
                         const std::map<std::string, std::string>& inputs,
                         const std::vector<std::string>& outputs,
                         const std::function<void()>& work) {
        StageInfo info;
        info.name = name;
        info.input_hashes = inputs;
        for (const std::string& o : outputs)
            info.outputs.push_back(fs::path(o).filename().string());

        bool outputs_exist = true;
        for (const std::string& o : outputs)
            if (!fs::exists(o)) outputs_exist = false;

        const long idx = stage_index(name);
        bool skip = false;
        if (idx < resume_index) {
            if (!outputs_exist) {
                std::string missing;
                for (const std::string& o : outputs)
                    if (!fs::exists(o))
                        missing += (missing.empty() ? "" : ", ") + o;
                throw Error("cannot start from stage '" + opts.from_stage +
                            "': stage '" + name +
                            "' is missing outputs: " + missing);
            }
            skip = true;
        } else if (!opts.force && opts.from_stage.empty() && outputs_exist) {
            json prev = old_stage(name);
            if (!prev.is_null() && prev.contains("input_hashes")) {
                json prev_hashes = prev.at("input_hashes");
                json cur = json::object();
                for (const auto& [k, v] : inputs) cur[k] = v;
                if (prev_hashes == cur) skip = true;
            }
        }

        info.skipped = skip;
        if (!skip) {
            auto t0 = std::chrono::steady_clock::now();
            try {
                work();
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw Error("stage " + name + ": " + e.what());
            } catch (const std::exception& e) {
                throw Error("stage " + name + ": " + e.what());
            }
            info.wall_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
        }
        art.stages.push_back(info);
        write_manifest();
    };

    PipelineState state;
    auto scenario = [&]() -> const Scenario& {
        if (!state.scenario) state.scenario = load_scenario(art.scenario);
        return *state.scenario;
    };
    auto dense_set = [&]() -> const TrajectorySet& {
        if (!state.dense) state.dense = load_trajectories(art.dense);
        return *state.dense;
    };
    auto recovered_set = [&]() -> const TrajectorySet& {
        if (!state.recovered) state.recovered = load_trajectories(art.recovered);
        return *state.recovered;
    };
    auto graph_d = [&]() -> const STGraph& {
        if (!state.gd)
            state.gd = load_st_graph_csv(art.gd_csv, scenario().network,
                                         scenario().horizon_intervals);
        return *state.gd;
    };
    auto graph_i = [&]() -> const STGraph& {
        if (!state.gi)
            state.gi = load_st_graph_csv(art.gi_csv, scenario().network,
                                         scenario().horizon_intervals);
        return *state.gi;
    };
    auto embedding = [&]() -> const EmbeddingTable& {
        if (!state.table)
            state.table = load_embedding_csv(art.embeddings, scenario().network,
                                             scenario().horizon_intervals);
        return *state.table;
    };
    state.predictions.resize(cfg.eval.seeds.size());
    auto prediction = [&](std::size_t k) -> const VolumeTensor& {
        if (!state.predictions[k])
            state.predictions[k] =
                load_volumes_csv(volumes_path(cfg.out_dir, k),
                                 scenario().network,
                                 scenario().horizon_intervals);
        return *state.predictions[k];
    };
    auto split_for = [&](std::size_t k) {
        return make_split(scenario().network,
                          mix_seed(seeds.split, cfg.eval.seeds[k]));
    };

    // scenario
    {
        std::map<std::string, std::string> inputs;
        if (!cfg.scenario_path.empty()) {
            if (!fs::exists(cfg.scenario_path))
                throw ConfigError("scenario file does not exist: " +
                                  cfg.scenario_path);
            inputs["source"] = file_hash(cfg.scenario_path);
        } else {
            inputs["config.gen"] = json_hash(gen_to_json(cfg.gen));
        }
        run_stage("scenario", inputs, {art.scenario}, [&]() {
            if (!cfg.scenario_path.empty()) {
                state.scenario = load_scenario(cfg.scenario_path);
                if (fs::absolute(cfg.scenario_path) !=
                    fs::absolute(art.scenario))
                    save_scenario(*state.scenario, art.scenario);
            } else {
                GenResult gen = generate_scenario(cfg.gen);
                state.scenario = std::move(gen.scenario);
                save_scenario(*state.scenario, art.scenario);
            }
        });
    }

    // recover
    {
        SimConfig sim_cfg = cfg.sim;
        std::map<std::string, std::string> inputs{
            {"scenario.json", file_hash(art.scenario)},
            {"config.recover",
             json_hash({{"sim", sim_to_json(sim_cfg)},
                        {"rl", rl_to_json(cfg.rl)}})}};
        std::vector<std::string> outputs{art.recovered, art.dense,
                                         art.arrivals};
        if (cfg.rl.episodes > 0) {
            outputs.push_back(art.model);
            outputs.push_back(art.training_log);
        }
        run_stage("recover", inputs, outputs, [&]() {
            const Scenario& s = scenario();
            SimConfig run_cfg = cfg.sim;
            run_cfg.horizon_s = s.horizon_seconds();
            if (cfg.rl.episodes > 0) {
                TrainResult trained = train(s, run_cfg, cfg.rl);
                trained.net.save(art.model);
                save_training_log(trained.log, art.training_log);
                run_cfg.limits = trained.tuned_limits;
            }
            RunResult run = run_recovery(s, run_cfg, nullptr);
            state.recovered = std::move(run.recovered);
            state.dense = taxi_trajectories(s);
            save_trajectories(*state.recovered, art.recovered);
            save_trajectories(*state.dense, art.dense);
            save_arrivals_csv(run.records, art.arrivals);
        });
    }

    // build-graphs
    {
        std::map<std::string, std::string> inputs{
            {"scenario.json", file_hash(art.scenario)},
            {"dense.json", file_hash(art.dense)},
            {"recovered.json", file_hash(art.recovered)}};
        run_stage("build-graphs", inputs, {art.gd_csv, art.gi_csv}, [&]() {
            const Scenario& s = scenario();
            state.gd = build_st_graph(dense_set(), s.network,
                                      s.interval_seconds, s.horizon_intervals);
            state.gi = build_st_graph(recovered_set(), s.network,
                                      s.interval_seconds, s.horizon_intervals);
            save_st_graph_csv(*state.gd, s.network, art.gd_csv);
            save_st_graph_csv(*state.gi, s.network, art.gi_csv);
        });
    }

    // embed
    if (variant != Variant::Semi) {
        std::map<std::string, std::string> inputs{
            {"gd.csv", file_hash(art.gd_csv)},
            {"gi.csv", file_hash(art.gi_csv)},
            {"config.embed", json_hash(embed_to_json(cfg.embed))}};
        run_stage("embed", inputs, {art.embeddings}, [&]() {
            JointTrainResult trained =
                joint_train(graph_d(), graph_i(), cfg.embed);
            state.table = std::move(trained.table);
            save_embedding_csv(*state.table, scenario().network,
                               art.embeddings);
        });
    }

    // infer
    {
        json infer_cfg{{"tol", cfg.infer_tol},
                       {"max_iter", cfg.infer_max_iter},
                       {"variant", variant_id(variant)},
                       {"split_seed", seeds.split},
                       {"eval_seeds", cfg.eval.seeds}};
        std::map<std::string, std::string> inputs{
            {"scenario.json", file_hash(art.scenario)},
            {"config.infer", json_hash(infer_cfg)}};
        if (variant == Variant::Semi) {
            inputs["gd.csv"] = file_hash(art.gd_csv);
            inputs["gi.csv"] = file_hash(art.gi_csv);
        } else {
            inputs["embeddings.csv"] = file_hash(art.embeddings);
        }
        std::vector<std::string> outputs;
        for (std::size_t k = 0; k < cfg.eval.seeds.size(); ++k)
            outputs.push_back(volumes_path(cfg.out_dir, k));
        run_stage("infer", inputs, outputs, [&]() {
            const Scenario& s = scenario();
            const int m = static_cast<int>(s.network.segments.size());
            const int n = s.horizon_intervals;
            MaskedSimilarityGraph graph;
            if (variant == Variant::Semi)
                graph = graph_from_st_edges(graph_d(), graph_i());
            else if (variant == Variant::Um)
                graph = build_unmasked_graph(embedding(), n);
            else
                graph = build_masked_graph(embedding(), s.network, n);
            for (std::size_t k = 0; k < cfg.eval.seeds.size(); ++k) {
                EvalSplit split = split_for(k);
                InferenceProblem problem;
                problem.volumes = VolumeTensor(m, n);
                for (int row : split.train) {
                    for (int t = 0; t < n; ++t) {
                        problem.volumes.at(row, t) =
                            s.ground_truth_volumes.at(row, t);
                        problem.volumes.set_observed(row, t, true);
                    }
                }
                problem.graph = graph;
                problem.tol = cfg.infer_tol;
                problem.max_iter = cfg.infer_max_iter;
                SolveResult solved = solve(problem);
                state.predictions[k] = std::move(solved.volumes);
                save_volumes_csv(*state.predictions[k], s.network,
                                 volumes_path(cfg.out_dir, k));
            }
        });
    }

    // evaluate
    {
        std::map<std::string, std::string> inputs{
            {"scenario.json", file_hash(art.scenario)},
            {"config.evaluate",
             json_hash({{"split_seed", seeds.split},
                        {"eval_seeds", cfg.eval.seeds}})}};
        for (std::size_t k = 0; k < cfg.eval.seeds.size(); ++k)
            inputs["volumes." + std::to_string(k)] =
                file_hash(volumes_path(cfg.out_dir, k));
        run_stage("evaluate", inputs,
                  {art.report, cfg.out_dir + "/breakdown.csv"}, [&]() {
                      std::vector<MetricReport> reports;
                      for (std::size_t k = 0; k < cfg.eval.seeds.size(); ++k)
                          reports.push_back(evaluate_run(
                              prediction(k), scenario(), split_for(k)));
                      art.metrics = aggregate(reports);
                      json per_seed = json::array();
                      for (std::size_t k = 0; k < reports.size(); ++k)
                          per_seed.push_back(
                              {{"seed", cfg.eval.seeds[k]},
                               {"metrics", metrics_to_json(reports[k])}});
                      json doc{{"aggregate", metrics_to_json(art.metrics)},
                               {"per_seed", per_seed}};
                      write_text_file(art.report, doc.dump(1) + "\n");
                      save_breakdown_csv(art.metrics,
                                         cfg.out_dir + "/breakdown.csv");
                  });
        if (art.metrics.samples == 0) {
            json doc = json::parse(read_text_file(art.report));
            art.metrics = metrics_from_json(doc.at("aggregate"));
        }
    }

    return art;
}

void copy_if_exists(const std::string& from, const std::string& to) {
    if (fs::exists(from))
        fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

// Seeds a variant/spoke directory with the artifacts of a finished run so the
// hash-matching resume logic can skip the shared stages.
void seed_directory(const RunArtifacts& base, const std::string& dir) {
    fs::create_directories(dir);
    copy_if_exists(base.scenario, dir + "/scenario.json");
    copy_if_exists(base.model, dir + "/model.json");
    copy_if_exists(base.training_log, dir + "/training_log.csv");
    copy_if_exists(base.recovered, dir + "/recovered.json");
    copy_if_exists(base.dense, dir + "/dense.json");
    copy_if_exists(base.arrivals, dir + "/arrivals.csv");
    copy_if_exists(base.gd_csv, dir + "/gd.csv");
    copy_if_exists(base.gi_csv, dir + "/gi.csv");
    if (!base.embeddings.empty())
        copy_if_exists(base.embeddings, dir + "/embeddings.csv");
    copy_if_exists(base.manifest, dir + "/manifest.json");
}

}  // namespace

PipelineConfig default_pipeline_config() { return PipelineConfig{}; }

PipelineConfig load_pipeline_config(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("config file " + path + ": " + e.what());
    }
    try {
        return config_from_json(doc);
    } catch (const json::exception& e) {
        throw ParseError("config file " + path + ": " + e.what());
    }
}

void save_pipeline_config(const PipelineConfig& cfg, const std::string& path) {
    write_text_file(path, config_to_json(cfg).dump(1) + "\n");
}

void set_config_field(PipelineConfig& cfg, const std::string& dotted,
                      const std::string& value) {
    json doc = config_to_json(cfg);
    std::vector<std::string> parts;
    std::string part;
    for (char c : dotted) {
        if (c == '.') {
            parts.push_back(part);
            part.clear();
        } else {
            part += c;
        }
    }
    parts.push_back(part);

    json* node = &doc;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        const std::string& key = parts[i];
        if (node->is_array()) {
            std::size_t idx = static_cast<std::size_t>(parse_long(key, dotted));
            if (idx >= node->size())
                throw ConfigError("config field '" + dotted +
                                  "': index out of range");
            node = &(*node)[idx];
        } else if (node->is_object() && node->contains(key)) {
            node = &(*node)[key];
        } else {
            throw ConfigError("unknown config field '" + dotted + "'");
        }
    }

    const std::string& leaf = parts.back();
    json* slot = nullptr;
    if (node->is_array()) {
        std::size_t idx = static_cast<std::size_t>(parse_long(leaf, dotted));
        if (idx >= node->size())
            throw ConfigError("config field '" + dotted +
                              "': index out of range");
        slot = &(*node)[idx];
    } else if (node->is_object() && node->contains(leaf)) {
        slot = &(*node)[leaf];
    } else {
        throw ConfigError("unknown config field '" + dotted + "'");
    }

    auto parse_scalar = [&dotted, &value](const json& like) -> json {
        if (like.is_boolean()) {
            if (value == "true" || value == "1") return true;
            if (value == "false" || value == "0") return false;
            throw ConfigError("config field '" + dotted +
                              "' expects a boolean, got '" + value + "'");
        }
        if (like.is_string()) return value;
        if (like.is_number_unsigned())
            return static_cast<std::uint64_t>(
                std::stoull(value));
        if (like.is_number_integer()) return parse_long(value, dotted);
        if (like.is_number_float()) return parse_double(value, dotted);
        throw ConfigError("config field '" + dotted +
                          "' cannot be set from the command line");
    };

    try {
        if (slot->is_array()) {
            json like = slot->empty() ? json(0.0) : (*slot)[0];
            json arr = json::array();
            std::string cell;
            for (char c : value + ",") {
                if (c == ',') {
                    if (!cell.empty()) {
                        if (like.is_number_unsigned())
                            arr.push_back(static_cast<std::uint64_t>(
                                std::stoull(cell)));
                        else if (like.is_number_integer())
                            arr.push_back(parse_long(cell, dotted));
                        else
                            arr.push_back(parse_double(cell, dotted));
                    }
                    cell.clear();
                } else {
                    cell += c;
                }
            }
            if (arr.empty())
                throw ConfigError("config field '" + dotted +
                                  "' expects a comma-separated list");
            *slot = arr;
        } else {
            *slot = parse_scalar(*slot);
        }
    } catch (const ParseError& e) {
        throw ConfigError(std::string("config field: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ConfigError("config field '" + dotted + "': cannot parse '" +
                          value + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("config field '" + dotted + "': value '" + value +
                          "' out of range");
    }

    cfg = config_from_json(doc);
}

StageSeeds stage_seeds(std::uint64_t master) {
    StageSeeds s;
    s.scenario = mix_seed(master, 1);
    s.rl = mix_seed(master, 2);
    s.embed = mix_seed(master, 3);
    s.split = mix_seed(master, 4);
    return s;
}

RunArtifacts run_all(const PipelineConfig& cfg, const RunOptions& opts) {
    return run_pipeline(cfg, opts, Variant::Full);
}

std::vector<VariantResult> run_ablations(const PipelineConfig& cfg) {
    PipelineConfig shared = cfg;
    fs::create_directories(cfg.out_dir);
    std::string scenario_file = cfg.out_dir + "/scenario.json";
    if (shared.scenario_path.empty()) {
        GenConfig gen = shared.gen;
        gen.seed = stage_seeds(shared.seed).scenario;
        if (!fs::exists(scenario_file))
            save_scenario(generate_scenario(gen).scenario, scenario_file);
        shared.scenario_path = scenario_file;
    }

    std::vector<VariantResult> rows;
    RunArtifacts full;
    for (Variant v :
         {Variant::Full, Variant::Df, Variant::Um, Variant::Semi}) {
        PipelineConfig vc = shared;
        vc.out_dir = cfg.out_dir + "/" + variant_id(v);
        if (v != Variant::Full) seed_directory(full, vc.out_dir);
        RunArtifacts art = run_pipeline(vc, RunOptions{}, v);
        if (v == Variant::Full) full = art;
        rows.push_back({variant_id(v), art.metrics});
    }
    return rows;
}

void save_ablation_report(const std::vector<VariantResult>& rows,
                          const std::string& path) {
    CsvWriter out(path);
    out.row({"variant", "rmse", "mape"});
    for (const VariantResult& r : rows)
        out.row({r.id, format_double(r.metrics.rmse),
                 format_double(r.metrics.mape)});
    out.close();
}

std::vector<AlphaSweepPoint> run_alpha_sweep(
    const PipelineConfig& cfg, const std::vector<double>& alphas) {
    if (alphas.empty()) throw ConfigError("alpha sweep: no alpha values");
    for (double a : alphas)
        if (a < 0.0 || a > 1.0)
            throw ConfigError("alpha sweep: alpha " + format_double(a) +
                              " outside [0, 1]");
    PipelineConfig shared = cfg;
    fs::create_directories(cfg.out_dir);
    std::string scenario_file = cfg.out_dir + "/scenario.json";
    if (shared.scenario_path.empty()) {
        GenConfig gen = shared.gen;
        gen.seed = stage_seeds(shared.seed).scenario;
        if (!fs::exists(scenario_file))
            save_scenario(generate_scenario(gen).scenario, scenario_file);
        shared.scenario_path = scenario_file;
    }

    std::vector<AlphaSweepPoint> points;
    RunArtifacts first;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        PipelineConfig vc = shared;
        vc.embed.alpha = alphas[i];
        char name[32];
        std::snprintf(name, sizeof(name), "alpha_%g", alphas[i]);
        vc.out_dir = cfg.out_dir + "/" + name;
        if (i > 0) seed_directory(first, vc.out_dir);
        RunArtifacts art = run_pipeline(vc, RunOptions{}, Variant::Full);
        if (i == 0) first = art;
        points.push_back({alphas[i], art.metrics});
    }
    return points;
}

void save_alpha_sweep(const std::vector<AlphaSweepPoint>& points,
                      const std::string& path) {
    CsvWriter out(path);
    out.row({"alpha", "rmse", "mape"});
    for (const AlphaSweepPoint& p : points)
        out.row({format_double(p.alpha), format_double(p.metrics.rmse),
                 format_double(p.metrics.mape)});
    out.close();
}

}  // namespace cityvol
