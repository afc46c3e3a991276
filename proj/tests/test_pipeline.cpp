#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cityvol/csv.hpp"
#include "cityvol/pipeline.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cityvol;
namespace fs = std::filesystem;

namespace {

// Small enough to run the full pipeline in seconds, large enough that the
// ground-truth volumes clear the mape filter.
PipelineConfig small_config(const std::string& out_dir) {
    PipelineConfig cfg;
    cfg.gen.grid_rows = 3;
    cfg.gen.grid_cols = 3;
    cfg.gen.vehicles = 1200;
    cfg.gen.horizon_intervals = 12;
    cfg.gen.interval_seconds = 300.0;
    cfg.gen.taxi_fraction = 0.5;
    cfg.gen.monitored_fraction = 0.35;
    cfg.rl.episodes = 2;
    cfg.rl.max_steps_per_episode = 20;
    cfg.rl.batch = 16;
    cfg.embed.dim = 8;
    cfg.embed.window = 3;
    cfg.embed.epochs = 1;
    cfg.embed.negatives = 2;
    cfg.embed.walk_len = 8;
    cfg.embed.walks_per_node = 1;
    cfg.infer_tol = 1e-7;
    cfg.infer_max_iter = 5000;
    cfg.eval.knn_k = 2;
    cfg.eval.seeds = {1};
    cfg.out_dir = out_dir;
    cfg.seed = 9;
    return cfg;
}

std::vector<std::string> stage_names(const RunArtifacts& art) {
    std::vector<std::string> names;
    for (const StageInfo& s : art.stages) names.push_back(s.name);
    return names;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config round-trips through json and dotted overrides") {
    PipelineConfig def = default_pipeline_config();
    CHECK(def.rl.gamma == 0.8);
    CHECK(def.rl.lr == 0.0001);
    CHECK(def.rl.batch == 128);
    CHECK(def.rl.memory_capacity == 10000);
    CHECK(def.rl.eps_start == 0.5);
    CHECK(def.rl.eps_end == 0.01);
    CHECK(def.rl.eps_decay_episodes == 2000);
    CHECK(def.embed.dim == 50);
    CHECK(def.embed.window == 10);
    CHECK(def.sim.limits.mps[0] == 23.0);
    CHECK(def.sim.limits.mps[1] == 21.0);
    CHECK(def.sim.limits.mps[2] == 19.0);
    CHECK(def.gen.grid_rows == 5);
    CHECK(def.gen.horizon_intervals == 288);
    CHECK(def.infer_tol == 1e-8);
    CHECK(def.infer_max_iter == 10000);
    CHECK(def.eval.knn_k == 5);
    CHECK(def.eval.seeds == std::vector<std::uint64_t>{1});

    testutil::TempDir dir("pipe_cfg");
    PipelineConfig cfg = small_config(dir.str("out"));
    cfg.scenario_path = "somewhere/scenario.json";
    std::string path = dir.str("config.json");
    save_pipeline_config(cfg, path);
    PipelineConfig back = load_pipeline_config(path);
    CHECK(back.gen.vehicles == cfg.gen.vehicles);
    CHECK(back.rl.episodes == cfg.rl.episodes);
    CHECK(back.embed.dim == cfg.embed.dim);
    CHECK(back.eval.seeds == cfg.eval.seeds);
    CHECK(back.scenario_path == cfg.scenario_path);
    CHECK(back.out_dir == cfg.out_dir);
    CHECK(back.seed == cfg.seed);

    set_config_field(cfg, "rl.episodes", "50");
    CHECK(cfg.rl.episodes == 50);
    set_config_field(cfg, "embed.alpha", "0.25");
    CHECK(cfg.embed.alpha == 0.25);
    set_config_field(cfg, "eval.seeds", "1,2,3");
    CHECK(cfg.eval.seeds == std::vector<std::uint64_t>{1, 2, 3});
    set_config_field(cfg, "gen.demand", "bimodal");
    CHECK(cfg.gen.demand == "bimodal");
    set_config_field(cfg, "sim.resync", "false");
    CHECK_FALSE(cfg.sim.resync);
    set_config_field(cfg, "seed", "17");
    CHECK(cfg.seed == 17);

    CHECK_THROWS_AS(set_config_field(cfg, "bogus.x", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_field(cfg, "rl.bogus", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_field(cfg, "rl.episodes", "abc"), ConfigError);

    CHECK_THROWS_AS(load_pipeline_config(dir.str("missing.json")), IoError);
    write_text_file(dir.str("broken.json"), "{not json");
    CHECK_THROWS_AS(load_pipeline_config(dir.str("broken.json")), ParseError);
}

TEST_CASE("stage_seeds derive distinct per-stage streams") {
    StageSeeds s = stage_seeds(1);
    std::vector<std::uint64_t> all{s.scenario, s.rl, s.embed, s.split};
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());

    StageSeeds again = stage_seeds(1);
    CHECK(again.scenario == s.scenario);
    CHECK(again.split == s.split);

    StageSeeds other = stage_seeds(2);
    CHECK(other.scenario != s.scenario);
}

TEST_CASE("run_all produces artifacts and identical reruns") {
    testutil::TempDir dir("pipe_all");
    PipelineConfig cfg = small_config(dir.str("a"));

    RunArtifacts art = run_all(cfg);
    std::vector<std::string> want{"scenario", "recover", "build-graphs",
                                  "embed",    "infer",   "evaluate"};
    CHECK(stage_names(art) == want);
    for (const StageInfo& s : art.stages) CHECK_FALSE(s.skipped);
    for (const std::string& p :
         {art.scenario, art.model, art.training_log, art.recovered, art.dense,
          art.arrivals, art.gd_csv, art.gi_csv, art.embeddings, art.volumes,
          art.report, art.manifest})
        CHECK(fs::exists(p));
    CHECK(art.metrics.samples > 0);
    CHECK(art.metrics.rmse >= 0.0);

    // Same config, fresh directory: byte-identical outputs.
    PipelineConfig cfg_b = cfg;
    cfg_b.out_dir = dir.str("b");
    RunArtifacts art_b = run_all(cfg_b);
    CHECK(read_text_file(art_b.report) == read_text_file(art.report));
    CHECK(read_text_file(art_b.volumes) == read_text_file(art.volumes));
    CHECK(read_text_file(art_b.embeddings) == read_text_file(art.embeddings));

    // Rerun in place: everything skips, the report does not change.
    std::string before = read_text_file(art.report);
    RunArtifacts rerun = run_all(cfg);
    for (const StageInfo& s : rerun.stages) CHECK(s.skipped);
    CHECK(read_text_file(art.report) == before);
    CHECK(rerun.metrics.samples == art.metrics.samples);
    CHECK(rerun.metrics.rmse == doctest::Approx(art.metrics.rmse));
}

TEST_CASE("resume and force control recomputation") {
    testutil::TempDir dir("pipe_resume");
    PipelineConfig cfg = small_config(dir.str("out"));
    RunArtifacts art = run_all(cfg);

    RunOptions from_infer;
    from_infer.from_stage = "infer";
    fs::remove(art.report);
    RunArtifacts resumed = run_all(cfg, from_infer);
    CHECK(resumed.stages[0].skipped);  // scenario
    CHECK(resumed.stages[1].skipped);  // recover
    CHECK(resumed.stages[2].skipped);  // build-graphs
    CHECK(resumed.stages[3].skipped);  // embed
    CHECK_FALSE(resumed.stages[4].skipped);  // infer
    CHECK_FALSE(resumed.stages[5].skipped);  // evaluate
    CHECK(fs::exists(art.report));

    // Starting from infer without the embed output is a hard error.
    fs::remove(art.embeddings);
    bool threw = false;
    try {
        run_all(cfg, from_infer);
    } catch (const Error& e) {
        threw = true;
        std::string msg = e.what();
        CHECK(msg.find("cannot start from stage") != std::string::npos);
        CHECK(msg.find("embed") != std::string::npos);
    }
    CHECK(threw);

    RunOptions bad;
    bad.from_stage = "compile";
    CHECK_THROWS_AS(run_all(cfg, bad), ConfigError);

    // A config change invalidates only the stages it feeds.
    RunArtifacts repaired = run_all(cfg);  // restore embeddings
    CHECK(fs::exists(art.embeddings));
    PipelineConfig tweaked = cfg;
    tweaked.embed.alpha = 0.75;
    RunArtifacts after = run_all(tweaked);
    CHECK(after.stages[0].skipped);
    CHECK(after.stages[1].skipped);
    CHECK(after.stages[2].skipped);
    CHECK_FALSE(after.stages[3].skipped);  // embed sees the new alpha
    CHECK_FALSE(after.stages[4].skipped);
    CHECK_FALSE(after.stages[5].skipped);
    CHECK(repaired.metrics.samples == after.metrics.samples);

    RunOptions force;
    force.force = true;
    RunArtifacts forced = run_all(tweaked, force);
    for (const StageInfo& s : forced.stages) CHECK_FALSE(s.skipped);
}

TEST_CASE("run_all validates configuration") {
    PipelineConfig cfg = small_config("");
    CHECK_THROWS_AS(run_all(cfg), ConfigError);

    testutil::TempDir dir("pipe_bad");
    cfg.out_dir = dir.str("out");
    cfg.eval.seeds.clear();
    CHECK_THROWS_AS(run_all(cfg), ConfigError);

    cfg = small_config(dir.str("out2"));
    cfg.scenario_path = dir.str("nope.json");
    CHECK_THROWS_AS(run_all(cfg), ConfigError);
}

TEST_CASE("manifest records stages and input hashes") {
    testutil::TempDir dir("pipe_manifest");
    PipelineConfig cfg = small_config(dir.str("out"));
    RunArtifacts art = run_all(cfg);

    nlohmann::json doc = nlohmann::json::parse(read_text_file(art.manifest));
    CHECK(doc.contains("version"));
    CHECK(doc.at("variant").get<std::string>() == "full");
    CHECK(doc.at("seed").get<std::uint64_t>() == cfg.seed);
    CHECK(doc.at("stage_seeds").size() == 4);
    CHECK(!doc.at("config_hash").get<std::string>().empty());

    const nlohmann::json& stages = doc.at("stages");
    REQUIRE(stages.size() == 6);
    std::vector<std::string> want{"scenario", "recover", "build-graphs",
                                  "embed",    "infer",   "evaluate"};
    for (std::size_t i = 0; i < stages.size(); ++i) {
        CHECK(stages[i].at("name").get<std::string>() == want[i]);
        CHECK(stages[i].at("wall_s").get<double>() >= 0.0);
        CHECK(!stages[i].at("input_hashes").empty());
        CHECK(!stages[i].at("outputs").empty());
    }

    nlohmann::json report = nlohmann::json::parse(read_text_file(art.report));
    CHECK(report.contains("aggregate"));
    CHECK(report.at("per_seed").size() == cfg.eval.seeds.size());
}

TEST_CASE("ablations share one scenario and cover all variants") {
    testutil::TempDir dir("pipe_ablate");
    PipelineConfig cfg = small_config(dir.str("out"));

    std::vector<VariantResult> rows = run_ablations(cfg);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].id == "full");
    CHECK(rows[1].id == "df");
    CHECK(rows[2].id == "um");
    CHECK(rows[3].id == "semi");
    for (const VariantResult& r : rows) CHECK(r.metrics.samples > 0);

    std::string shared = read_text_file(dir.str("out/scenario.json"));
    for (const char* v : {"full", "df", "um", "semi"})
        CHECK(read_text_file(dir.str("out/") + v + "/scenario.json") ==
              shared);

    // Seeded artifacts let the non-full variants skip the shared stages.
    nlohmann::json semi = nlohmann::json::parse(
        read_text_file(dir.str("out/semi/manifest.json")));
    CHECK(semi.at("variant").get<std::string>() == "semi");
    REQUIRE(semi.at("stages").size() == 5);
    for (const nlohmann::json& s : semi.at("stages"))
        CHECK(s.at("name").get<std::string>() != "embed");

    nlohmann::json um = nlohmann::json::parse(
        read_text_file(dir.str("out/um/manifest.json")));
    bool um_infer_ran = false;
    for (const nlohmann::json& s : um.at("stages"))
        if (s.at("name") == "infer") um_infer_ran = !s.at("skipped").get<bool>();
    CHECK(um_infer_ran);

    std::string report = dir.str("out/ablations.csv");
    save_ablation_report(rows, report);
    std::string text = read_text_file(report);
    CHECK(text.find("variant,rmse,mape") == 0);
    int lines = 0;
    for (char ch : text)
        if (ch == '\n') ++lines;
    CHECK(lines == 5);
}

TEST_CASE("alpha sweep writes one point per alpha") {
    testutil::TempDir dir("pipe_sweep");
    PipelineConfig cfg = small_config(dir.str("out"));

    std::vector<double> alphas{0.0, 0.5, 1.0};
    std::vector<AlphaSweepPoint> points = run_alpha_sweep(cfg, alphas);
    REQUIRE(points.size() == 3);
    for (std::size_t i = 0; i < points.size(); ++i) {
        CHECK(points[i].alpha == alphas[i]);
        CHECK(points[i].metrics.samples > 0);
    }
    CHECK(fs::exists(dir.str("out/alpha_0/report.json")));
    CHECK(fs::exists(dir.str("out/alpha_0.5/report.json")));
    CHECK(fs::exists(dir.str("out/alpha_1/report.json")));

    std::string path = dir.str("out/alpha_sweep.csv");
    save_alpha_sweep(points, path);
    std::string text = read_text_file(path);
    CHECK(text.find("alpha,rmse,mape") == 0);
    int lines = 0;
    for (char ch : text)
        if (ch == '\n') ++lines;
    CHECK(lines == 4);

    CHECK_THROWS_AS(run_alpha_sweep(cfg, {}), ConfigError);
    CHECK_THROWS_AS(run_alpha_sweep(cfg, {1.5}), ConfigError);
}

}  // TEST_SUITE
