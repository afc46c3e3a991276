#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cityvol/csv.hpp"
#include "cityvol/inference.hpp"
#include "oracles.hpp"

using namespace cityvol;
using testutil::line_network;

namespace {

EmbeddingTable table_for(int segments, int intervals, int dim) {
    EmbeddingTable t;
    t.segments = segments;
    t.intervals = intervals;
    t.dim = dim;
    t.center.assign(t.node_count() * dim, 0.0);
    t.context.assign(t.node_count() * dim, 0.0);
    return t;
}

double pair_weight(const MaskedSimilarityGraph& g, int a, int b) {
    if (a > b) std::swap(a, b);
    for (const auto& p : g.pairs)
        if (p.a == a && p.b == b) return p.weight;
    return 0.0;
}

bool has_pair(const MaskedSimilarityGraph& g, int a, int b) {
    if (a > b) std::swap(a, b);
    for (const auto& p : g.pairs)
        if (p.a == a && p.b == b) return true;
    return false;
}

// Random connected problem: spanning tree over all cells plus extras.
struct RandomProblem {
    InferenceProblem problem;
    double observed_mean = 0.0;
};

RandomProblem random_problem(int m, int n, std::uint64_t seed,
                             SolveMode mode) {
    Rng rng = make_rng(seed);
    RandomProblem rp;
    InferenceProblem& p = rp.problem;
    p.volumes = VolumeTensor(m, n);
    p.graph.segments = m;
    p.graph.intervals = n;
    p.mode = mode;
    p.tol = 1e-13;
    p.max_iter = 2000000;

    const int cells = m * n;
    std::vector<int> order(cells);
    for (int i = 0; i < cells; ++i) order[i] = i;
    shuffle_in_place(order, rng);
    for (int i = 1; i < cells; ++i) {
        int other = order[uniform_below(rng, static_cast<std::size_t>(i))];
        int a = std::min(order[i], other);
        int b = std::max(order[i], other);
        p.graph.pairs.push_back({a, b, uniform_range(rng, 0.1, 2.0)});
    }
    for (int extra = 0; extra < cells; ++extra) {
        int a = static_cast<int>(uniform_below(rng, cells));
        int b = static_cast<int>(uniform_below(rng, cells));
        if (a == b) continue;
        p.graph.pairs.push_back({std::min(a, b), std::max(a, b),
                                 uniform_range(rng, 0.1, 2.0)});
    }

    int observed = 0;
    double sum = 0.0;
    for (int i = 0; i < m; ++i)
        for (int t = 0; t < n; ++t)
            if (uniform01(rng) < 0.3) {
                double v = uniform_range(rng, 0.0, 100.0);
                p.volumes.at(i, t) = v;
                p.volumes.set_observed(i, t, true);
                sum += v;
                ++observed;
            }
    if (observed == 0) {
        p.volumes.at(0, 0) = 42.0;
        p.volumes.set_observed(0, 0, true);
        sum = 42.0;
        observed = 1;
    }
    rp.observed_mean = sum / observed;
    return rp;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("the mask keeps adjacent near-in-time pairs only") {
    RoadNetwork net = line_network(3);
    EmbeddingTable t = table_for(3, 3, 2);
    for (std::size_t i = 0; i < t.center.size(); i += 2) t.center[i] = 1.0;
    // (0,0) dot (1,1) = 0.5 after reshaping those two vectors.
    t.u(t.node_index(0, 0))[0] = 1.0;
    t.u(t.node_index(0, 0))[1] = 0.0;
    t.u(t.node_index(1, 1))[0] = 0.5;
    t.u(t.node_index(1, 1))[1] = 0.5;

    MaskedSimilarityGraph g = build_masked_graph(t, net, 3);
    CHECK(g.segments == 3);
    CHECK(g.intervals == 3);

    CHECK(pair_weight(g, g.node_index(0, 0), g.node_index(1, 1)) == 0.5);
    // Non-adjacent rows never pair, regardless of time.
    CHECK_FALSE(has_pair(g, g.node_index(0, 0), g.node_index(2, 0)));
    CHECK_FALSE(has_pair(g, g.node_index(0, 1), g.node_index(2, 1)));
    // Two intervals apart never pairs, even for the same row.
    CHECK_FALSE(has_pair(g, g.node_index(0, 0), g.node_index(0, 2)));
    CHECK_FALSE(has_pair(g, g.node_index(0, 0), g.node_index(1, 2)));
    // Same row, one interval apart: the reflexive self-pair.
    CHECK(has_pair(g, g.node_index(0, 0), g.node_index(0, 1)));
    // Adjacent rows in the same interval.
    CHECK(has_pair(g, g.node_index(1, 0), g.node_index(2, 0)));

    for (const auto& p : g.pairs) {
        CHECK(p.a < p.b);
        CHECK(p.weight > 0.0);
    }
}

TEST_CASE("negative similarities clamp to zero by default") {
    RoadNetwork net = line_network(2);
    EmbeddingTable t = table_for(2, 1, 1);
    t.u(0)[0] = 1.0;
    t.u(1)[0] = -1.0;
    MaskedSimilarityGraph clamped = build_masked_graph(t, net, 1);
    CHECK(clamped.pairs.empty());

    MaskedSimilarityGraph raw = build_masked_graph(t, net, 1, false);
    REQUIRE(raw.pairs.size() == 1);
    CHECK(raw.pairs[0].weight == -1.0);

    InferenceProblem p;
    p.volumes = VolumeTensor(2, 1);
    p.volumes.set_observed(0, 0, true);
    p.graph = raw;
    CHECK_THROWS_AS(solve(p), ConfigError);
}

TEST_CASE("one unknown between two observed cells takes their mean") {
    InferenceProblem p;
    p.volumes = VolumeTensor(3, 1);
    p.volumes.at(0, 0) = 4.0;
    p.volumes.set_observed(0, 0, true);
    p.volumes.at(2, 0) = 8.0;
    p.volumes.set_observed(2, 0, true);
    p.graph.segments = 3;
    p.graph.intervals = 1;
    p.graph.pairs = {{0, 1, 1.0}, {1, 2, 1.0}};

    SolveResult r = solve(p);
    CHECK(r.converged);
    CHECK(r.volumes.at(1, 0) == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(r.volumes.at(0, 0) == 4.0);
    CHECK(r.volumes.at(2, 0) == 8.0);
    CHECK(r.isolated_cells.empty());
}

TEST_CASE("fully observed problems return unchanged") {
    InferenceProblem p;
    p.volumes = VolumeTensor(2, 2, true);
    p.volumes.at(0, 0) = 1.0;
    p.volumes.at(1, 0) = 2.0;
    p.volumes.at(0, 1) = 3.0;
    p.volumes.at(1, 1) = 4.0;
    p.graph.segments = 2;
    p.graph.intervals = 2;
    p.graph.pairs = {{0, 1, 1.0}, {0, 2, 1.0}};

    SolveResult r = solve(p);
    CHECK(r.converged);
    CHECK(r.volumes == p.volumes);
}

TEST_CASE("isolated unknowns fall back to the observed mean") {
    InferenceProblem p;
    p.volumes = VolumeTensor(2, 1);
    p.volumes.at(0, 0) = 10.0;
    p.volumes.set_observed(0, 0, true);
    p.graph.segments = 2;
    p.graph.intervals = 1;

    SolveResult r = solve(p);
    CHECK(r.converged);
    CHECK(r.volumes.at(1, 0) == 10.0);
    REQUIRE(r.isolated_cells.size() == 1);
    CHECK(r.isolated_cells[0] == 1);
}

TEST_CASE("solving with no observed cells is rejected") {
    InferenceProblem p;
    p.volumes = VolumeTensor(2, 1);
    p.graph.segments = 2;
    p.graph.intervals = 1;
    p.graph.pairs = {{0, 1, 1.0}};
    CHECK_THROWS_AS(solve(p), ConfigError);

    InferenceProblem bad_tol;
    bad_tol.volumes = VolumeTensor(1, 1, true);
    bad_tol.graph.segments = 1;
    bad_tol.graph.intervals = 1;
    bad_tol.tol = 0.0;
    CHECK_THROWS_AS(solve(bad_tol), ConfigError);
    bad_tol.tol = 1e-8;
    bad_tol.max_iter = 0;
    CHECK_THROWS_AS(solve(bad_tol), ConfigError);
}

TEST_CASE("self-adjacency smooths each segment through time") {
    RoadNetwork net = testutil::disconnected_pair_network();
    EmbeddingTable t = table_for(2, 4, 2);
    for (double& x : t.center) x = 1.0;  // every allowed dot is positive

    MaskedSimilarityGraph g = build_masked_graph(t, net, 4);
    for (const auto& p : g.pairs)
        CHECK(p.a % 2 == p.b % 2);  // rows never mix: only self-pairs

    InferenceProblem p;
    p.volumes = VolumeTensor(2, 4);
    p.volumes.at(0, 0) = 10.0;
    p.volumes.set_observed(0, 0, true);
    p.volumes.at(1, 0) = 20.0;
    p.volumes.set_observed(1, 0, true);
    p.graph = g;
    p.tol = 1e-13;
    p.max_iter = 100000;

    SolveResult r = solve(p);
    CHECK(r.converged);
    for (int t2 = 0; t2 < 4; ++t2) {
        CHECK(r.volumes.at(0, t2) == doctest::Approx(10.0).epsilon(1e-9));
        CHECK(r.volumes.at(1, t2) == doctest::Approx(20.0).epsilon(1e-9));
    }
}

TEST_CASE("both sweep modes match dense elimination") {
    for (int trial = 0; trial < 6; ++trial) {
        SolveMode mode = trial % 2 == 0 ? SolveMode::GaussSeidel
                                        : SolveMode::Jacobi;
        RandomProblem rp = random_problem(8, 5, 1000 + trial, mode);
        SolveResult r = solve(rp.problem);
        REQUIRE(r.converged);

        std::vector<double> want = testutil::dense_propagation(
            rp.problem.graph, rp.problem.volumes, rp.observed_mean);
        const int m = rp.problem.volumes.segment_count();
        for (int i = 0; i < m; ++i)
            for (int t = 0; t < rp.problem.volumes.interval_count(); ++t)
                CHECK(std::abs(r.volumes.at(i, t) -
                               want[static_cast<std::size_t>(t) * m + i]) <
                      1e-6);
    }
}

TEST_CASE("solutions respect the observed range") {
    RandomProblem rp = random_problem(10, 4, 77, SolveMode::GaussSeidel);
    double lo = 1e300;
    double hi = -1e300;
    const VolumeTensor& v = rp.problem.volumes;
    for (int i = 0; i < v.segment_count(); ++i)
        for (int t = 0; t < v.interval_count(); ++t)
            if (v.observed(i, t)) {
                lo = std::min(lo, v.at(i, t));
                hi = std::max(hi, v.at(i, t));
            }
    SolveResult r = solve(rp.problem);
    for (int i = 0; i < v.segment_count(); ++i)
        for (int t = 0; t < v.interval_count(); ++t) {
            CHECK(r.volumes.at(i, t) >= lo);
            CHECK(r.volumes.at(i, t) <= hi);
        }
}

TEST_CASE("scaling the observations scales the solution") {
    RandomProblem base = random_problem(6, 4, 5, SolveMode::GaussSeidel);
    SolveResult r1 = solve(base.problem);
    REQUIRE(r1.converged);

    for (double c : {2.0, 0.25, 8.0}) {
        InferenceProblem scaled = base.problem;
        for (double& x : scaled.volumes.values()) x *= c;
        SolveResult rc = solve(scaled);
        REQUIRE(rc.converged);
        const int m = base.problem.volumes.segment_count();
        for (int i = 0; i < m; ++i)
            for (int t = 0; t < base.problem.volumes.interval_count(); ++t)
                CHECK(rc.volumes.at(i, t) == c * r1.volumes.at(i, t));
    }
}

TEST_CASE("the objective is a weighted sum of squared gaps") {
    InferenceProblem p;
    p.volumes = VolumeTensor(2, 1);
    p.graph.segments = 2;
    p.graph.intervals = 1;
    p.graph.pairs = {{0, 1, 2.0}};

    VolumeTensor x(2, 1);
    x.at(0, 0) = 1.0;
    x.at(1, 0) = 3.0;
    CHECK(objective(p, x) == 8.0);

    x.at(1, 0) = 1.0;
    CHECK(objective(p, x) == 0.0);
}

TEST_CASE("the solved point minimizes the objective over feasible points") {
    RandomProblem rp = random_problem(6, 3, 11, SolveMode::GaussSeidel);
    SolveResult r = solve(rp.problem);
    REQUIRE(r.converged);
    double best = objective(rp.problem, r.volumes);

    Rng rng = make_rng(2);
    const VolumeTensor& obs = rp.problem.volumes;
    for (int trial = 0; trial < 100; ++trial) {
        VolumeTensor x = r.volumes;
        for (int i = 0; i < obs.segment_count(); ++i)
            for (int t = 0; t < obs.interval_count(); ++t)
                if (!obs.observed(i, t))
                    x.at(i, t) += uniform_range(rng, -5.0, 5.0);
        CHECK(objective(rp.problem, x) >= best - 1e-9);
    }
}

TEST_CASE("objective traces decrease monotonically") {
    RandomProblem rp = random_problem(7, 4, 23, SolveMode::GaussSeidel);
    SolveResult r = solve(rp.problem, true);
    REQUIRE(r.converged);
    REQUIRE_FALSE(r.objective_trace.empty());
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
        CHECK(r.objective_trace[k] <=
              r.objective_trace[k - 1] +
                  1e-9 * std::max(1.0, std::abs(r.objective_trace[k - 1])));
}

TEST_CASE("hitting max_iter reports non-convergence") {
    RandomProblem rp = random_problem(8, 5, 3, SolveMode::GaussSeidel);
    rp.problem.max_iter = 1;
    SolveResult r = solve(rp.problem);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 1);
    CHECK(r.final_residual > 0.0);
}

TEST_CASE("st-edge graphs sum undirected weights") {
    STGraph gd;
    gd.segments = 2;
    gd.intervals = 2;
    gd.out.resize(gd.node_count());
    gd.out[gd.node_index(0, 0)].push_back({gd.node_index(1, 1), 2.0});

    STGraph gi = gd;
    gi.out[gi.node_index(0, 0)].back().weight = 3.0;
    gi.out[gi.node_index(1, 0)].push_back({gi.node_index(0, 1), 4.0});

    MaskedSimilarityGraph g = graph_from_st_edges(gd, gi);
    CHECK(pair_weight(g, gd.node_index(0, 0), gd.node_index(1, 1)) == 5.0);
    CHECK(pair_weight(g, gd.node_index(1, 0), gd.node_index(0, 1)) == 4.0);
    CHECK(g.pairs.size() == 2);
}

TEST_CASE("unmasked graphs keep the time window but ignore adjacency") {
    EmbeddingTable t = table_for(3, 2, 1);
    for (double& x : t.center) x = 1.0;
    MaskedSimilarityGraph g = build_unmasked_graph(t, 2);
    CHECK(has_pair(g, g.node_index(0, 0), g.node_index(2, 0)));
    CHECK(has_pair(g, g.node_index(0, 0), g.node_index(2, 1)));
    CHECK_FALSE(has_pair(g, g.node_index(0, 0), g.node_index(0, 0)));
    // 15 unordered pairs within one interval of each other.
    CHECK(g.pairs.size() == 15);
}

TEST_CASE("volume CSV files round-trip values and masks") {
    RoadNetwork net = line_network(3);
    VolumeTensor v(3, 2);
    v.at(0, 0) = 1.5;
    v.at(2, 1) = 7.25;
    v.set_observed(2, 1, true);

    testutil::TempDir dir("vol");
    std::string path = dir.str("v.csv");
    save_volumes_csv(v, net, path);
    VolumeTensor back = load_volumes_csv(path, net, 2);
    CHECK(back == v);

    write_text_file(path, "segment_id,interval,volume,observed\n0,0,1,2\n");
    CHECK_THROWS_AS(load_volumes_csv(path, net, 2), ParseError);

    write_text_file(path, "segment_id,interval,volume,observed\n0,0,1,1\n");
    CHECK_THROWS_AS(load_volumes_csv(path, net, 2), ParseError);
}

}  // TEST_SUITE
