#pragma once

#include <span>
#include <string>
#include <vector>

#include "cityvol/common.hpp"
#include "cityvol/sim.hpp"

namespace cityvol {

// Fully-connected net: input -> hidden layers (rectifier) -> linear output.
// Default shape 4m -> 256 -> 256 -> 9.
class QNetwork {
public:
    QNetwork() = default;
    QNetwork(int input_dim, std::vector<int> hidden_dims, int output_dim);

    static QNetwork for_segments(int segment_count, std::uint64_t seed);

    void init_weights(std::uint64_t seed);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    int layer_count() const { return static_cast<int>(weights_.size()); }

    std::vector<double> forward(std::span<const double> s) const;

    std::size_t parameter_count() const;
    double parameter(std::size_t idx) const;
    void set_parameter(std::size_t idx, double v);

    void save(const std::string& path) const;
    static QNetwork load(const std::string& path);

    bool operator==(const QNetwork&) const = default;

private:
    friend class DqnLearner;

    int input_dim_ = 0;
    int output_dim_ = 0;
    std::vector<int> dims_;  // input, hidden..., output
    // weights_[l] is row-major (dims_[l+1] x dims_[l]); biases_[l] matches.
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

std::vector<double> q_forward(const QNetwork& net, std::span<const double> s);

struct Transition {
    StateFeatures s;
    int action = 0;
    StateFeatures next;
    double reward = 0.0;
    bool terminal = false;
};

class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity = 10000);

    void push(Transition t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    // i = 0 is the oldest retained transition.
    const Transition& at(std::size_t i) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
    std::vector<Transition> buf_;
};

// The 9 (group, delta) actions in group-major order, deltas -1, 0, +1.
struct ActionCatalog {
    static constexpr int size() { return 9; }
    static VehicleGroup group(int action);
    static int delta(int action);
    static int index(VehicleGroup g, int delta);
};

struct TrainConfig {
    double gamma = 0.8;
    double lr = 0.0001;
    int batch = 128;
    double eps_start = 0.5;
    double eps_end = 0.01;
    int eps_decay_episodes = 2000;
    int episodes = 200;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t memory_capacity = 10000;
    // 0 = run each episode to the scenario horizon.
    int max_steps_per_episode = 0;
    // Divisor applied to |t_sim - t_real| inside the reward exponent during
    // training; the bare reward() uses seconds directly. At 1 the reward only
    // pays for near-exact arrivals, which keeps it from being dominated by
    // arrival counts.
    double reward_time_scale_s = 1.0;
    // Exploring starts: each episode draws its initial group limits uniformly
    // within this radius of the configured ones (clamped to the legal range).
    // Short episodes otherwise never visit limits far below the defaults, so
    // the learned policy has no experience telling it when to stop lowering
    // them. 0 keeps every start at the configured limits.
    double start_jitter_mps = 0.0;
    std::uint64_t seed = 0;
};

double epsilon_at(const TrainConfig& cfg, int episode);

int select_action(const QNetwork& net, std::span<const double> s, double eps,
                  Rng& rng);

// Sum of exp(-|t_sim - t_real| / time_scale) over this step's arrivals.
double reward(const std::vector<ArrivalRecord>& arrived,
              double time_scale_s = 1.0);

double td_target(double r, std::span<const double> next, const QNetwork& net,
                 bool terminal, double gamma);

// Owns the Adam state for one network's training run.
class DqnLearner {
public:
    DqnLearner(QNetwork& net, const TrainConfig& cfg);

    // One mini-batch update; returns the pre-update mean squared TD error.
    double train_step(std::span<const Transition> batch);

    // Detached td_target per transition, evaluated with the given parameters.
    static std::vector<double> td_targets(const QNetwork& net,
                                          std::span<const Transition> batch,
                                          double gamma);

    // Mean squared TD error against fixed targets; when grad is non-null it
    // receives d(loss)/d(parameter) in QNetwork parameter order.
    static double loss_and_gradient(const QNetwork& net,
                                    std::span<const Transition> batch,
                                    std::span<const double> targets,
                                    std::vector<double>* grad);

private:
    QNetwork& net_;
    TrainConfig cfg_;
    std::vector<double> m_, v_;
    long step_ = 0;
};

struct EpisodeLog {
    int episode = 0;
    double total_reward = 0.0;
    double recovery_error_s = 0.0;
    double epsilon = 0.0;
    // Fixed-limits probe of this episode's best candidate (see TrainResult).
    double probe_error_s = 0.0;
};

struct TrainResult {
    QNetwork net;
    std::vector<EpisodeLog> log;
    // Best group limits seen across training, selected by re-simulating
    // candidate limits (episode snapshots plus the configured defaults) with
    // actions disabled and scoring mean |t_sim - t_real| over the episode
    // window. Never worse than the defaults on that score.
    GroupLimits tuned_limits;
    double tuned_window_error_s = 0.0;
};

// Per-segment-block scaling that conditions raw StateFeatures for the net.
StateFeatures condition_state(const StateFeatures& raw);

TrainResult train(const Scenario& scenario, const SimConfig& sim_cfg,
                  const TrainConfig& cfg);

// Replays the incomplete trajectories once, greedily applying the policy
// each macro step (or no actions when net == nullptr).
RunResult run_recovery(const Scenario& scenario, const SimConfig& sim_cfg,
                       const QNetwork* net);

void save_training_log(const std::vector<EpisodeLog>& log,
                       const std::string& path);

}  // namespace cityvol
