#include "cityvol/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cityvol/csv.hpp"

namespace cityvol {

using nlohmann::json;
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {
constexpr int kModelVersion = 1;

Eigen::Map<const RowMat> weight_map(const std::vector<double>& w, int rows,
                                    int cols) {
    return Eigen::Map<const RowMat>(w.data(), rows, cols);
}
}  // namespace

QNetwork::QNetwork(int input_dim, std::vector<int> hidden_dims, int output_dim)
    : input_dim_(input_dim), output_dim_(output_dim) {
    if (input_dim < 1 || output_dim < 1)
        throw ConfigError("QNetwork: dimensions must be positive");
    dims_.push_back(input_dim);
    for (int h : hidden_dims) {
        if (h < 1) throw ConfigError("QNetwork: hidden dims must be positive");
        dims_.push_back(h);
    }
    dims_.push_back(output_dim);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        weights_.emplace_back(
            static_cast<std::size_t>(dims_[l + 1]) * dims_[l], 0.0);
        biases_.emplace_back(dims_[l + 1], 0.0);
    }
}

QNetwork QNetwork::for_segments(int segment_count, std::uint64_t seed) {
    QNetwork net(4 * segment_count, {256, 256}, 9);
    net.init_weights(seed);
    return net;
}

void QNetwork::init_weights(std::uint64_t seed) {
    Rng rng = make_rng(seed);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        double limit = std::sqrt(6.0 / dims_[l]);
        for (double& w : weights_[l]) w = uniform_range(rng, -limit, limit);
        std::fill(biases_[l].begin(), biases_[l].end(), 0.0);
    }
}

std::vector<double> QNetwork::forward(std::span<const double> s) const {
    if (static_cast<int>(s.size()) != input_dim_)
        throw ConfigError("q_forward: expected state of length " +
                          std::to_string(input_dim_) + ", got " +
                          std::to_string(s.size()));
    Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(s.data(), s.size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Eigen::VectorXd z =
            weight_map(weights_[l], dims_[l + 1], dims_[l]) * h +
            Eigen::Map<const Eigen::VectorXd>(biases_[l].data(),
                                              biases_[l].size());
        if (l + 1 < weights_.size()) z = z.cwiseMax(0.0);
        h = std::move(z);
    }
    return {h.data(), h.data() + h.size()};
}

std::size_t QNetwork::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
        n += weights_[l].size() + biases_[l].size();
    return n;
}

double QNetwork::parameter(std::size_t idx) const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (idx < weights_[l].size()) return weights_[l][idx];
        idx -= weights_[l].size();
        if (idx < biases_[l].size()) return biases_[l][idx];
        idx -= biases_[l].size();
    }
    throw ConfigError("parameter index out of range");
}

void QNetwork::set_parameter(std::size_t idx, double v) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (idx < weights_[l].size()) {
            weights_[l][idx] = v;
            return;
        }
        idx -= weights_[l].size();
        if (idx < biases_[l].size()) {
            biases_[l][idx] = v;
            return;
        }
        idx -= biases_[l].size();
    }
    throw ConfigError("parameter index out of range");
}

void QNetwork::save(const std::string& path) const {
    json doc{{"version", kModelVersion},
             {"dims", dims_},
             {"weights", weights_},
             {"biases", biases_}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << doc.dump(1) << '\n';
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

QNetwork QNetwork::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("model file " + path + ": " + e.what());
    }
    try {
        int version = doc.at("version").get<int>();
        if (version != kModelVersion)
            throw VersionError("model file " + path + " has version " +
                               std::to_string(version) + ", expected " +
                               std::to_string(kModelVersion));
        auto dims = doc.at("dims").get<std::vector<int>>();
        if (dims.size() < 2) throw ParseError("model: need at least 2 dims");
        QNetwork net(dims.front(),
                     std::vector<int>(dims.begin() + 1, dims.end() - 1),
                     dims.back());
        auto weights = doc.at("weights").get<std::vector<std::vector<double>>>();
        auto biases = doc.at("biases").get<std::vector<std::vector<double>>>();
        if (weights.size() != net.weights_.size() ||
            biases.size() != net.biases_.size())
            throw ParseError("model: layer count mismatch");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (weights[l].size() != net.weights_[l].size() ||
                biases[l].size() != net.biases_[l].size())
                throw ParseError("model: layer size mismatch");
            net.weights_[l] = weights[l];
            net.biases_[l] = biases[l];
        }
        return net;
    } catch (const VersionError&) {
        throw;
    } catch (const ParseError&) {
        throw;
    } catch (const json::exception& e) {
        throw ParseError("model file " + path + ": " + e.what());
    }
}

std::vector<double> q_forward(const QNetwork& net, std::span<const double> s) {
    return net.forward(s);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) throw ConfigError("ReplayMemory: capacity must be >= 1");
    buf_.resize(capacity_);
}

void ReplayMemory::push(Transition t) {
    buf_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
}

const Transition& ReplayMemory::at(std::size_t i) const {
    if (i >= size_) throw ConfigError("ReplayMemory: index out of range");
    std::size_t oldest = (head_ + capacity_ - size_) % capacity_;
    return buf_[(oldest + i) % capacity_];
}

VehicleGroup ActionCatalog::group(int action) {
    if (action < 0 || action >= size())
        throw ConfigError("action index out of range");
    return static_cast<VehicleGroup>(action / 3);
}

int ActionCatalog::delta(int action) {
    if (action < 0 || action >= size())
        throw ConfigError("action index out of range");
    return action % 3 - 1;
}

int ActionCatalog::index(VehicleGroup g, int delta) {
    if (delta < -1 || delta > 1) throw ConfigError("delta must be in {-1,0,1}");
    return static_cast<int>(g) * 3 + delta + 1;
}

double epsilon_at(const TrainConfig& cfg, int episode) {
    if (episode < 0) throw ConfigError("epsilon_at: episode must be >= 0");
    if (cfg.eps_decay_episodes <= 0 || episode >= cfg.eps_decay_episodes)
        return cfg.eps_end;
    double frac = static_cast<double>(episode) / cfg.eps_decay_episodes;
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;
}

int select_action(const QNetwork& net, std::span<const double> s, double eps,
                  Rng& rng) {
    if (eps < 0.0 || eps > 1.0)
        throw ConfigError("select_action: epsilon must be in [0, 1]");
    if (eps > 0.0 && uniform01(rng) < eps)
        return static_cast<int>(uniform_below(rng, ActionCatalog::size()));
    std::vector<double> q = net.forward(s);
    return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

double reward(const std::vector<ArrivalRecord>& arrived, double time_scale_s) {
    double r = 0.0;
    for (const ArrivalRecord& a : arrived)
        r += std::exp(-std::abs(a.t_sim_s - a.t_real_s) / time_scale_s);
    return r;
}

double td_target(double r, std::span<const double> next, const QNetwork& net,
                 bool terminal, double gamma) {
    if (terminal) return r;
    std::vector<double> q = net.forward(next);
    return r + gamma * *std::max_element(q.begin(), q.end());
}

DqnLearner::DqnLearner(QNetwork& net, const TrainConfig& cfg)
    : net_(net),
      cfg_(cfg),
      m_(net.parameter_count(), 0.0),
      v_(net.parameter_count(), 0.0) {}

std::vector<double> DqnLearner::td_targets(const QNetwork& net,
                                           std::span<const Transition> batch,
                                           double gamma) {
    const int B = static_cast<int>(batch.size());
    const int L = net.layer_count();
    const auto& dims = net.dims_;

    Eigen::MatrixXd Hn(dims.front(), B);
    for (int j = 0; j < B; ++j) {
        const Transition& t = batch[j];
        if (static_cast<int>(t.next.size()) != dims.front())
            throw ConfigError("td_targets: transition " + std::to_string(j) +
                              " has wrong state width");
        Hn.col(j) =
            Eigen::Map<const Eigen::VectorXd>(t.next.data(), t.next.size());
    }
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd Z =
            (weight_map(net.weights_[l], dims[l + 1], dims[l]) * Hn).colwise() +
            Eigen::Map<const Eigen::VectorXd>(net.biases_[l].data(),
                                              net.biases_[l].size());
        if (l + 1 < L) Z = Z.cwiseMax(0.0);
        Hn = std::move(Z);
    }
    std::vector<double> target(B);
    for (int j = 0; j < B; ++j) {
        const Transition& t = batch[j];
        target[j] =
            t.terminal ? t.reward : t.reward + gamma * Hn.col(j).maxCoeff();
    }
    return target;
}

double DqnLearner::loss_and_gradient(const QNetwork& net,
                                     std::span<const Transition> batch,
                                     std::span<const double> targets,
                                     std::vector<double>* grad) {
    if (batch.empty()) throw ConfigError("train_step: empty batch");
    if (targets.size() != batch.size())
        throw ConfigError("train_step: target count does not match batch");
    const int B = static_cast<int>(batch.size());
    const int L = net.layer_count();
    const auto& dims = net.dims_;

    Eigen::MatrixXd X(dims.front(), B);
    for (int j = 0; j < B; ++j) {
        const Transition& t = batch[j];
        if (static_cast<int>(t.s.size()) != dims.front())
            throw ConfigError("train_step: transition " + std::to_string(j) +
                              " has wrong state width");
        X.col(j) = Eigen::Map<const Eigen::VectorXd>(t.s.data(), t.s.size());
    }

    std::vector<Eigen::MatrixXd> acts(L + 1);
    acts[0] = std::move(X);
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd Z =
            (weight_map(net.weights_[l], dims[l + 1], dims[l]) * acts[l])
                .colwise() +
            Eigen::Map<const Eigen::VectorXd>(net.biases_[l].data(),
                                              net.biases_[l].size());
        if (l + 1 < L) Z = Z.cwiseMax(0.0);
        acts[l + 1] = std::move(Z);
    }

    double loss = 0.0;
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(dims.back(), B);
    for (int j = 0; j < B; ++j) {
        int a = batch[j].action;
        if (a < 0 || a >= dims.back())
            throw ConfigError("train_step: transition " + std::to_string(j) +
                              " has invalid action");
        double residual = acts[L](a, j) - targets[j];
        if (!std::isfinite(residual))
            throw NumericError("train_step: non-finite TD error at transition " +
                               std::to_string(j));
        loss += residual * residual;
        delta(a, j) = 2.0 * residual / B;
    }
    loss /= B;
    if (!std::isfinite(loss))
        throw NumericError("train_step: non-finite loss");
    if (!grad) return loss;

    grad->assign(net.parameter_count(), 0.0);
    std::vector<std::size_t> offset(L);
    std::size_t pos = 0;
    for (int l = 0; l < L; ++l) {
        offset[l] = pos;
        pos += net.weights_[l].size() + net.biases_[l].size();
    }
    for (int l = L - 1; l >= 0; --l) {
        Eigen::MatrixXd grad_w = delta * acts[l].transpose();
        Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd up =
                weight_map(net.weights_[l], dims[l + 1], dims[l]).transpose() *
                delta;
            delta = (acts[l].array() > 0.0).cast<double>() * up.array();
        }
        double* gw = grad->data() + offset[l];
        for (int r = 0; r < dims[l + 1]; ++r)
            for (int c = 0; c < dims[l]; ++c)
                gw[static_cast<std::size_t>(r) * dims[l] + c] = grad_w(r, c);
        double* gb = gw + net.weights_[l].size();
        for (int r = 0; r < dims[l + 1]; ++r) gb[r] = grad_b(r);
    }
    return loss;
}

double DqnLearner::train_step(std::span<const Transition> batch) {
    std::vector<double> targets = td_targets(net_, batch, cfg_.gamma);
    std::vector<double> grad;
    double loss = loss_and_gradient(net_, batch, targets, &grad);

    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.adam_beta1, step_);
    double bc2 = 1.0 - std::pow(cfg_.adam_beta2, step_);

    std::size_t idx = 0;
    for (std::size_t l = 0; l < net_.weights_.size(); ++l) {
        for (std::vector<double>* params : {&net_.weights_[l], &net_.biases_[l]}) {
            for (double& p : *params) {
                double g = grad[idx];
                double& mm = m_[idx];
                double& vv = v_[idx];
                mm = cfg_.adam_beta1 * mm + (1.0 - cfg_.adam_beta1) * g;
                vv = cfg_.adam_beta2 * vv + (1.0 - cfg_.adam_beta2) * g * g;
                p -= cfg_.lr * (mm / bc1) / (std::sqrt(vv / bc2) + cfg_.adam_eps);
                ++idx;
            }
        }
    }
    return loss;
}

StateFeatures condition_state(const StateFeatures& raw) {
    if (raw.size() % 4 != 0)
        throw ConfigError("condition_state: length must be a multiple of 4");
    std::size_t m = raw.size() / 4;
    StateFeatures out(raw.size());
    for (std::size_t i = 0; i < m; ++i) {
        out[i] = raw[i] / 20.0;
        out[m + i] = raw[m + i] / 120.0;
        out[2 * m + i] = raw[2 * m + i] / 40.0;
        out[3 * m + i] = raw[3 * m + i] / 120.0;
    }
    return out;
}

TrainResult train(const Scenario& scenario, const SimConfig& sim_cfg,
                  const TrainConfig& cfg) {
    TrajectorySet incomplete = incomplete_trajectories(scenario);
    int m = static_cast<int>(scenario.network.segments.size());
    TrainResult result{
        QNetwork::for_segments(m, mix_seed(cfg.seed, 21)), {}, {}, 0.0};
    result.tuned_limits = sim_cfg.limits;
    if (cfg.episodes <= 0) return result;

    // Mean |t_sim - t_real| of a fixed-limits, action-free run over the
    // episode window; the selection score for candidate limits.
    auto window_error = [&](const GroupLimits& limits) {
        SimConfig probe_cfg = sim_cfg;
        probe_cfg.limits = limits;
        Simulator probe(scenario.network, incomplete, probe_cfg);
        double sum = 0.0;
        std::size_t count = 0;
        int steps = 0;
        while (!probe.finished() &&
               (cfg.max_steps_per_episode <= 0 ||
                steps < cfg.max_steps_per_episode)) {
            MacroResult res = probe.macro_step();
            for (const ArrivalRecord& a : res.arrivals) {
                sum += std::abs(a.t_sim_s - a.t_real_s);
                ++count;
            }
            ++steps;
        }
        return count ? sum / count
                     : std::numeric_limits<double>::infinity();
    };

    result.tuned_window_error_s = window_error(result.tuned_limits);

    ReplayMemory memory(cfg.memory_capacity);
    DqnLearner learner(result.net, cfg);
    Rng rng = make_rng(mix_seed(cfg.seed, 22));

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        SimConfig ep_cfg = sim_cfg;
        if (cfg.start_jitter_mps > 0.0)
            for (double& l : ep_cfg.limits.mps)
                l = std::clamp(
                    l + uniform_range(rng, -cfg.start_jitter_mps,
                                      cfg.start_jitter_mps),
                    kGroupLimitMin, kGroupLimitMax);
        Simulator sim(scenario.network, incomplete, ep_cfg);
        double eps = epsilon_at(cfg, ep);
        StateFeatures state = condition_state(sim.zero_features());
        double total_reward = 0.0;
        double abs_err_sum = 0.0;
        std::size_t err_count = 0;
        std::vector<GroupLimits> snapshots;
        int steps = 0;
        while (!sim.finished() &&
               (cfg.max_steps_per_episode <= 0 ||
                steps < cfg.max_steps_per_episode)) {
            int action = select_action(result.net, state, eps, rng);
            sim.apply_action(ActionCatalog::group(action),
                             ActionCatalog::delta(action));
            MacroResult res = sim.macro_step();
            double r = reward(res.arrivals, cfg.reward_time_scale_s);
            StateFeatures next = condition_state(res.features);
            memory.push(
                {state, action, next, r, sim.finished()});
            if (memory.size() >= static_cast<std::size_t>(cfg.batch)) {
                std::vector<Transition> batch;
                batch.reserve(cfg.batch);
                for (int k = 0; k < cfg.batch; ++k)
                    batch.push_back(
                        memory.at(uniform_below(rng, memory.size())));
                learner.train_step(batch);
            }
            for (const ArrivalRecord& a : res.arrivals) {
                abs_err_sum += std::abs(a.t_sim_s - a.t_real_s);
                ++err_count;
            }
            total_reward += r;
            state = std::move(next);
            ++steps;
            if (steps % 20 == 0 || sim.finished() ||
                steps == cfg.max_steps_per_episode)
                if (snapshots.empty() || snapshots.back() != sim.limits())
                    snapshots.push_back(sim.limits());
        }

        double episode_best = std::numeric_limits<double>::infinity();
        for (const GroupLimits& cand : snapshots) {
            double err = window_error(cand);
            episode_best = std::min(episode_best, err);
            if (err < result.tuned_window_error_s) {
                result.tuned_window_error_s = err;
                result.tuned_limits = cand;
            }
        }

        EpisodeLog log;
        log.episode = ep;
        log.total_reward = total_reward;
        log.recovery_error_s = err_count ? abs_err_sum / err_count : 0.0;
        log.epsilon = eps;
        log.probe_error_s = std::isfinite(episode_best) ? episode_best : 0.0;
        result.log.push_back(log);
    }
    return result;
}

RunResult run_recovery(const Scenario& scenario, const SimConfig& sim_cfg,
                       const QNetwork* net) {
    TrajectorySet incomplete = incomplete_trajectories(scenario);
    Simulator sim(scenario.network, incomplete, sim_cfg);
    StateFeatures state = condition_state(sim.zero_features());
    while (!sim.finished()) {
        if (net) {
            std::vector<double> q = net->forward(state);
            int action = static_cast<int>(
                std::max_element(q.begin(), q.end()) - q.begin());
            sim.apply_action(ActionCatalog::group(action),
                             ActionCatalog::delta(action));
        }
        MacroResult res = sim.macro_step();
        if (net) state = condition_state(res.features);
    }
    return sim.run_to_completion();
}

void save_training_log(const std::vector<EpisodeLog>& log,
                       const std::string& path) {
    CsvWriter out(path);
    out.row({"episode", "total_reward", "recovery_error_s", "epsilon",
             "probe_error_s"});
    for (const EpisodeLog& e : log)
        out.row({std::to_string(e.episode), format_double(e.total_reward),
                 format_double(e.recovery_error_s), format_double(e.epsilon),
                 format_double(e.probe_error_s)});
    out.close();
}

}  // namespace cityvol
