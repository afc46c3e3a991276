#include <doctest.h>

#include <cmath>
#include <vector>

#include "cityvol/csv.hpp"
#include "cityvol/embedding.hpp"
#include "oracles.hpp"

using namespace cityvol;
using testutil::line_network;

namespace {

EmbeddingTable blank_table(int segments, int intervals, int dim) {
    EmbeddingTable t;
    t.segments = segments;
    t.intervals = intervals;
    t.dim = dim;
    t.center.assign(t.node_count() * dim, 0.0);
    t.context.assign(t.node_count() * dim, 0.0);
    return t;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// The pair objective sgns_step ascends, recomputed from scratch.
double pair_objective(const EmbeddingTable& t, int center, int context,
                      const std::vector<int>& negatives) {
    auto dot = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    double obj = std::log(sigmoid(dot(t.uc(context), t.u(center))));
    for (int n : negatives)
        obj += std::log(sigmoid(-dot(t.uc(n), t.u(center))));
    return obj;
}

// Two clusters of segment rows {0,1} and {2,3}; flow only inside clusters.
STGraph two_cluster_graph() {
    STGraph g;
    g.segments = 4;
    g.intervals = 2;
    g.out.resize(g.node_count());
    auto add = [&](int ra, int rb, double w) {
        g.out[g.node_index(ra, 0)].push_back({g.node_index(rb, 1), w});
    };
    add(0, 1, 6.0);
    add(1, 0, 6.0);
    add(0, 0, 2.0);
    add(1, 1, 2.0);
    add(2, 3, 6.0);
    add(3, 2, 6.0);
    add(2, 2, 2.0);
    add(3, 3, 2.0);
    return g;
}

STGraph empty_graph(int segments, int intervals) {
    STGraph g;
    g.segments = segments;
    g.intervals = intervals;
    g.out.resize(g.node_count());
    return g;
}

}  // namespace

TEST_SUITE("embedding") {

TEST_CASE("context_pairs enumerates the window") {
    std::vector<std::pair<int, int>> got = context_pairs({10, 11, 12}, 1);
    std::vector<std::pair<int, int>> want{
        {10, 11}, {11, 10}, {11, 12}, {12, 11}};
    CHECK(got == want);

    CHECK(context_pairs({5}, 3).empty());
    CHECK(context_pairs({1, 2, 3, 4}, 10).size() == 12);
    CHECK_THROWS_AS(context_pairs({1, 2}, 0), ConfigError);
}

TEST_CASE("negative sampling respects the exclusion and distribution") {
    std::vector<std::vector<int>> walks{{0, 1}, {1, 0}, {0, 1}};
    NoiseDistribution noise(walks, 2, 1.0);
    Rng rng = make_rng(5);

    std::vector<int> only = negative_sample(noise, 6, 0, rng);
    REQUIRE(only.size() == 6);
    for (int n : only) CHECK(n == 1);

    CHECK(negative_sample(noise, 0, 0, rng).empty());

    std::vector<std::vector<int>> uniform_walks;
    for (int i = 0; i < 10; ++i) uniform_walks.push_back({i, i});
    NoiseDistribution uniform(uniform_walks, 10, 0.75);
    std::vector<int> counts(10, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        std::vector<int> s = negative_sample(uniform, 1, 10, rng);
        REQUIRE(s.size() == 1);
        ++counts[s[0]];
    }
    for (int c : counts) {
        double freq = static_cast<double>(c) / draws;
        CHECK(freq > 0.08);
        CHECK(freq < 0.12);
    }
}

TEST_CASE("sgns_step takes the documented gradient step") {
    EmbeddingTable t = blank_table(2, 1, 2);
    t.u(0)[0] = 1.0;
    t.u(0)[1] = 0.0;
    t.uc(1)[0] = 0.0;
    t.uc(1)[1] = 1.0;

    double obj = sgns_step(t, 0, 1, {}, 1.0, 1.0);
    CHECK(obj == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    // g = 1 - sigma(0) = 0.5 with lr*weight = 1.
    CHECK(t.u(0)[0] == doctest::Approx(1.0));
    CHECK(t.u(0)[1] == doctest::Approx(0.5));
    CHECK(t.uc(1)[0] == doctest::Approx(0.5));
    CHECK(t.uc(1)[1] == doctest::Approx(1.0));
}

TEST_CASE("a zero-weight sgns step changes nothing") {
    EmbeddingTable t = blank_table(3, 1, 4);
    Rng rng = make_rng(2);
    for (double& x : t.center) x = uniform_range(rng, -0.5, 0.5);
    for (double& x : t.context) x = uniform_range(rng, -0.5, 0.5);
    EmbeddingTable before = t;
    std::vector<int> negs{2};
    sgns_step(t, 0, 1, negs, 0.025, 0.0);
    CHECK(t.center == before.center);
    CHECK(t.context == before.context);
}

TEST_CASE("sgns_step ascends the exact pair objective gradient") {
    const int dim = 3;
    EmbeddingTable t = blank_table(5, 1, dim);
    Rng rng = make_rng(31);
    for (double& x : t.center) x = uniform_range(rng, -0.8, 0.8);
    for (double& x : t.context) x = uniform_range(rng, -0.8, 0.8);

    const int center = 0;
    const int context = 1;
    const std::vector<int> negs{2, 3};

    EmbeddingTable stepped = t;
    sgns_step(stepped, center, context, negs, 1.0, 1.0);

    // With lr * weight = 1 the update equals the gradient; check every
    // touched coordinate against central differences of the objective.
    auto probe = [&](std::vector<double>* vec, std::size_t base, int d,
                     double delta_got) {
        std::vector<double> params{(*vec)[base + d]};
        auto f = [&](const std::vector<double>& p) {
            EmbeddingTable copy = t;
            (vec == &t.center ? copy.center : copy.context)[base + d] = p[0];
            return pair_objective(copy, center, context, negs);
        };
        double fd = testutil::central_diff(f, params, 0, 1e-6);
        CHECK(testutil::rel_err(delta_got, fd) < 1e-6);
    };

    for (int d = 0; d < dim; ++d) {
        std::size_t base = static_cast<std::size_t>(center) * dim;
        probe(&t.center, base, d, stepped.center[base + d] - t.center[base + d]);
    }
    for (int node : {context, 2, 3}) {
        std::size_t base = static_cast<std::size_t>(node) * dim;
        for (int d = 0; d < dim; ++d)
            probe(&t.context, base, d,
                  stepped.context[base + d] - t.context[base + d]);
    }
}

TEST_CASE("similarity is the center dot product") {
    EmbeddingTable t = blank_table(2, 1, 2);
    t.u(0)[0] = 1.0;
    t.u(1)[0] = 0.5;
    t.u(1)[1] = 0.5;
    CHECK(similarity(t, 0, 0, 1, 0) == 0.5);
    CHECK(similarity(t, 1, 0, 1, 0) == 0.5);
    CHECK(similarity(t, 0, 0, 0, 0) == 1.0);

    t.u(0)[0] = 0.0;
    t.u(0)[1] = 2.0;
    t.u(1)[1] = 0.0;
    CHECK(similarity(t, 0, 0, 1, 0) == 0.0);
}

TEST_CASE("joint training at an alpha endpoint ignores the other graph") {
    STGraph gd = two_cluster_graph();
    STGraph gi = empty_graph(4, 2);
    STGraph gi_other;
    {
        gi_other = empty_graph(4, 2);
        gi_other.out[gi_other.node_index(0, 0)].push_back(
            {gi_other.node_index(3, 1), 5.0});
    }

    EmbedConfig cfg;
    cfg.dim = 4;
    cfg.window = 2;
    cfg.negatives = 2;
    cfg.epochs = 1;
    cfg.walk_len = 2;
    cfg.walks_per_node = 3;
    cfg.alpha = 1.0;
    cfg.seed = 9;

    JointTrainResult a = joint_train(gd, gi, cfg);
    JointTrainResult b = joint_train(gd, gi_other, cfg);
    CHECK(a.table.center == b.table.center);
    CHECK(a.table.context == b.table.context);

    cfg.alpha = 0.0;
    JointTrainResult c = joint_train(gd, gi_other, cfg);
    JointTrainResult d = joint_train(empty_graph(4, 2), gi_other, cfg);
    CHECK(c.table.center == d.table.center);
}

TEST_CASE("joint training is deterministic per seed") {
    STGraph gd = two_cluster_graph();
    STGraph gi = empty_graph(4, 2);
    gi.out[gi.node_index(1, 0)].push_back({gi.node_index(0, 1), 3.0});

    EmbedConfig cfg;
    cfg.dim = 4;
    cfg.window = 2;
    cfg.negatives = 2;
    cfg.epochs = 2;
    cfg.walk_len = 2;
    cfg.walks_per_node = 2;
    cfg.seed = 13;

    JointTrainResult a = joint_train(gd, gi, cfg);
    JointTrainResult b = joint_train(gd, gi, cfg);
    CHECK(a.table.center == b.table.center);
    CHECK(a.epoch_mean_objective == b.epoch_mean_objective);
    CHECK(a.epoch_mean_objective.size() == 2);

    EmbedConfig other = cfg;
    other.seed = 14;
    JointTrainResult c = joint_train(gd, gi, other);
    CHECK(a.table.center != c.table.center);
}

TEST_CASE("training rejects empty corpora and bad config") {
    STGraph gd = empty_graph(2, 2);
    STGraph gi = empty_graph(2, 2);
    EmbedConfig cfg;
    cfg.dim = 4;
    CHECK_THROWS_AS(joint_train(gd, gi, cfg), ConfigError);

    STGraph usable = two_cluster_graph();
    EmbedConfig bad = cfg;
    bad.alpha = 1.2;
    CHECK_THROWS_AS(joint_train(usable, gi, bad), ConfigError);
    bad = cfg;
    bad.dim = 0;
    CHECK_THROWS_AS(joint_train(usable, gi, bad), ConfigError);
    bad = cfg;
    bad.window = 0;
    CHECK_THROWS_AS(joint_train(usable, gi, bad), ConfigError);
    bad = cfg;
    bad.negatives = -1;
    CHECK_THROWS_AS(joint_train(usable, gi, bad), ConfigError);
}

TEST_CASE("co-occurring nodes embed closer than disconnected ones") {
    STGraph gd = two_cluster_graph();
    STGraph gi = empty_graph(4, 2);

    EmbedConfig cfg;
    cfg.dim = 8;
    cfg.window = 2;
    cfg.negatives = 3;
    cfg.epochs = 20;
    cfg.walk_len = 2;
    cfg.walks_per_node = 50;
    cfg.alpha = 1.0;

    // Rows 0 and 1 share their walk contexts {0@1, 1@1}; row 2 shares none
    // of them, so the center vectors of 0@0 and 1@0 should align more often.
    int wins = 0;
    const int trials = 25;
    for (int s = 0; s < trials; ++s) {
        cfg.seed = 100 + s;
        JointTrainResult r = joint_train(gd, gi, cfg);
        double together = similarity(r.table, 0, 0, 1, 0);
        double apart = similarity(r.table, 0, 0, 2, 0);
        if (together > apart) ++wins;
    }
    CHECK(wins >= 22);
}

TEST_CASE("epoch objective trends upward") {
    STGraph gd = two_cluster_graph();
    STGraph gi = empty_graph(4, 2);

    EmbedConfig cfg;
    cfg.dim = 8;
    cfg.window = 2;
    cfg.negatives = 3;
    cfg.epochs = 5;
    cfg.walk_len = 2;
    cfg.walks_per_node = 30;
    cfg.alpha = 1.0;
    cfg.seed = 4;

    JointTrainResult r = joint_train(gd, gi, cfg);
    REQUIRE(r.epoch_mean_objective.size() == 5);
    int violations = 0;
    for (std::size_t e = 1; e < r.epoch_mean_objective.size(); ++e)
        if (r.epoch_mean_objective[e] < r.epoch_mean_objective[e - 1] - 1e-12)
            ++violations;
    CHECK(violations <= 1);
    CHECK(r.epoch_mean_objective.back() > r.epoch_mean_objective.front());
}

TEST_CASE("embedding CSV files round-trip the center vectors") {
    RoadNetwork net = line_network(3);
    EmbeddingTable t = blank_table(3, 2, 4);
    Rng rng = make_rng(77);
    for (double& x : t.center) x = uniform_range(rng, -1.0, 1.0);
    for (double& x : t.context) x = uniform_range(rng, -1.0, 1.0);

    testutil::TempDir dir("emb");
    std::string path = dir.str("e.csv");
    save_embedding_csv(t, net, path);
    EmbeddingTable back = load_embedding_csv(path, net, 2);
    CHECK(back.segments == 3);
    CHECK(back.intervals == 2);
    CHECK(back.dim == 4);
    CHECK(back.center == t.center);
    for (double x : back.context) CHECK(x == 0.0);

    CHECK_THROWS_AS(load_embedding_csv(dir.str("none.csv"), net, 2), IoError);
}

}  // TEST_SUITE
