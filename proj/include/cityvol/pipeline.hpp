#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cityvol/common.hpp"
#include "cityvol/embedding.hpp"
#include "cityvol/evaluation.hpp"
#include "cityvol/inference.hpp"
#include "cityvol/rl.hpp"
#include "cityvol/scenario.hpp"
#include "cityvol/sim.hpp"

namespace cityvol {

struct EvalConfig {
    int knn_k = 5;
    std::vector<std::uint64_t> seeds{1};
};

// One declarative document driving the whole pipeline.
struct PipelineConfig {
    std::string scenario_path;  // empty: generate from gen
    GenConfig gen;
    SimConfig sim;
    TrainConfig rl;
    EmbedConfig embed;
    double infer_tol = 1e-8;
    int infer_max_iter = 10000;
    EvalConfig eval;
    std::string out_dir = "runs/out";
    std::uint64_t seed = 1;
};

PipelineConfig default_pipeline_config();
PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const PipelineConfig& cfg, const std::string& path);
// Dotted-path override, e.g. set_config_field(cfg, "rl.episodes", "50").
void set_config_field(PipelineConfig& cfg, const std::string& dotted,
                      const std::string& value);

// Derived per-stage seeds, all mixed from the one master seed.
struct StageSeeds {
    std::uint64_t scenario = 0;
    std::uint64_t rl = 0;
    std::uint64_t embed = 0;
    std::uint64_t split = 0;
};
StageSeeds stage_seeds(std::uint64_t master);

struct StageInfo {
    std::string name;
    double wall_s = 0.0;
    bool skipped = false;
    std::map<std::string, std::string> input_hashes;
    std::vector<std::string> outputs;
};

struct RunArtifacts {
    std::string dir;
    std::string scenario;
    std::string model;
    std::string training_log;
    std::string recovered;
    std::string dense;
    std::string arrivals;
    std::string gd_csv;
    std::string gi_csv;
    std::string embeddings;
    std::string volumes;
    std::string report;
    std::string manifest;
    MetricReport metrics;
    std::vector<StageInfo> stages;
};

struct RunOptions {
    std::string from_stage;  // resume point; earlier stages must have outputs
    bool force = false;      // ignore resumability, recompute everything
};

// gen-scenario -> recover -> build-graphs -> embed -> infer -> evaluate.
RunArtifacts run_all(const PipelineConfig& cfg, const RunOptions& opts = {});

struct VariantResult {
    std::string id;  // full | df | um | semi
    MetricReport metrics;
};

// Paired ablations on one scenario + seed set.
std::vector<VariantResult> run_ablations(const PipelineConfig& cfg);
void save_ablation_report(const std::vector<VariantResult>& rows,
                          const std::string& path);

struct AlphaSweepPoint {
    double alpha = 0.0;
    MetricReport metrics;
};

std::vector<AlphaSweepPoint> run_alpha_sweep(const PipelineConfig& cfg,
                                             const std::vector<double>& alphas);
void save_alpha_sweep(const std::vector<AlphaSweepPoint>& points,
                      const std::string& path);

}  // namespace cityvol
