#include "doctest.h"

#include "oracles.hpp"
#include "psld/rss.hpp"

#include <algorithm>
#include <numeric>

using namespace psld;

namespace {

SeriesStore ring_store(std::size_t n) {
    SeriesStore s;
    s.values = Matrix(n, 4);
    for (std::size_t i = 0; i < n; ++i) {
        s.values(i, 0) = double(i);
        if (n > 1) {
            const std::size_t j = (i + 1) % n;
            if (j != i) s.adjacency.push_back({i, j, 1.0 + double(i)});
        }
    }
    return s;
}

std::vector<std::size_t> concat_sorted(const std::vector<SubgraphBatch>& batches) {
    std::vector<std::size_t> all;
    for (const auto& b : batches) all.insert(all.end(), b.node_index.begin(), b.node_index.end());
    std::sort(all.begin(), all.end());
    return all;
}

} // namespace

TEST_SUITE("rss") {

TEST_CASE("identity partition in evaluation mode") {
    Rng rng(1);
    const auto batches = rss_partition(ring_store(6), 2, false, rng);
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].node_index == std::vector<std::size_t>{0, 1, 2});
    CHECK(batches[1].node_index == std::vector<std::size_t>{3, 4, 5});
    CHECK(batches[1].series.values(0, 0) == 3.0);
}

TEST_CASE("training partition covers every node") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const auto batches = rss_partition(ring_store(6), 2, true, rng);
        std::vector<std::size_t> expected(6);
        std::iota(expected.begin(), expected.end(), std::size_t{0});
        CHECK(concat_sorted(batches) == expected);
    }
}

TEST_CASE("remainder goes to the last group") {
    CHECK(rss_group_sizes(10, 3) == std::vector<std::size_t>{3, 3, 4});
    CHECK(rss_group_sizes(64, 24).back() == 18);
    Rng rng(0);
    CHECK_THROWS_AS(rss_partition(ring_store(3), 4, true, rng), std::invalid_argument);
    CHECK_THROWS_AS(rss_group_sizes(3, 0), std::invalid_argument);
}

TEST_CASE("partition is disjoint and exhaustive for all small sizes") {
    Rng rng(77);
    for (std::size_t n = 1; n <= 64; ++n) {
        const auto store = ring_store(n);
        std::vector<std::size_t> expected(n);
        std::iota(expected.begin(), expected.end(), std::size_t{0});
        for (std::size_t s = 1; s <= n; ++s) {
            for (bool training : {false, true}) {
                const auto batches = rss_partition(store, s, training, rng);
                REQUIRE(batches.size() == s);
                CHECK(concat_sorted(batches) == expected);
            }
        }
    }
}

TEST_CASE("e_sub is the double slice of the adjacency") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng.below(20);
        SeriesStore store;
        store.values = Matrix(n, 4);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j && rng.bernoulli(0.3)) store.adjacency.push_back({i, j, rng.uniform()});
        const Matrix e = dense_adjacency(store);
        const std::size_t s = 1 + rng.below(n);
        for (const auto& b : rss_partition(store, s, true, rng))
            for (std::size_t i = 0; i < b.node_index.size(); ++i)
                for (std::size_t j = 0; j < b.node_index.size(); ++j)
                    CHECK(b.e_sub(i, j) == e(b.node_index[i], b.node_index[j]));
    }
}

TEST_CASE("aggregate_true") {
    GraphSpec g;
    g.neighbors = {{1, 2}, {0}, {0}};
    g.features = Matrix{{0.0}, {3.0}, {5.0}};
    g.weight = Matrix{{1.0}};
    // With C = 1 the estimate is h1 + h2; target-degree normalisation divides by deg(0) = 2.
    CHECK(aggregate_true(g, 0) == std::vector<double>{(3.0 + 5.0) / 2.0});

    GraphSpec single;
    single.neighbors = {{1}, {0}};
    single.features = Matrix{{1.0, 2.0}, {3.0, 4.0}};
    single.weight = Matrix{{1.0, 0.0}, {0.0, 1.0}};
    CHECK(aggregate_true(single, 0) == std::vector<double>{3.0, 4.0});

    GraphSpec isolated;
    isolated.neighbors = {{}, {}};
    isolated.features = Matrix{{1.0}, {2.0}};
    isolated.weight = Matrix{{1.0}};
    CHECK(aggregate_true(isolated, 0) == std::vector<double>{0.0});
}

TEST_CASE("aggregate_true matches the double-loop oracle") {
    Rng rng(31);
    for (bool symmetric : {false, true}) {
        GraphSpec g = random_graph(5, 3, 2, 0.5, rng);
        g.norm_mode = symmetric ? NormMode::symmetric_sqrt : NormMode::target_degree;
        for (std::size_t v = 0; v < 5; ++v) {
            const auto got = aggregate_true(g, v);
            const auto want = oracle::double_loop_aggregate(g.neighbors, g.features, g.weight, v, symmetric);
            for (std::size_t j = 0; j < got.size(); ++j)
                CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-13));
        }
    }
}

TEST_CASE("aggregate_sampled") {
    Rng rng(8);
    GraphSpec g = random_graph(6, 2, 3, 0.4, rng);
    const auto all = SampleDesign::uniform(6, 1.0);
    std::vector<bool> everyone(6, true);
    for (std::size_t v = 0; v < 6; ++v) CHECK(aggregate_sampled(g, v, everyone, all) == aggregate_true(g, v));

    const std::vector<std::size_t> none;
    CHECK(aggregate_sampled(g, 0, std::span(none), all) == std::vector<double>(3, 0.0));

    // Two neighbours, P = 0.5, only u1 sampled: 2 * (1 / C) * W h_u1.
    GraphSpec two;
    two.neighbors = {{1, 2}, {0}, {0}};
    two.features = Matrix{{0.0}, {3.0}, {5.0}};
    two.weight = Matrix{{2.0}};
    const std::vector<std::size_t> only_u1{1};
    const auto est = aggregate_sampled(two, 0, std::span(only_u1), SampleDesign::uniform(3, 0.5));
    CHECK(est[0] == doctest::Approx(2.0 * (1.0 / 2.0) * 2.0 * 3.0));

    SampleDesign zero{{1.0, 0.0, 1.0}};
    CHECK_THROWS_AS(aggregate_sampled(two, 0, std::span(only_u1), zero), std::invalid_argument);
}

TEST_CASE("unbiasedness check: full inclusion is exact") {
    Rng rng(12);
    const GraphSpec g = random_graph(10, 2, 2, 0.3, rng);
    const auto report = unbiasedness_mc_check(g, SampleDesign::uniform(10, 1.0), 100, Rng(1));
    CHECK(report.max_rel_err == 0.0);
    CHECK(report.max_z == 0.0);
    CHECK(report.pass);
}

TEST_CASE("unbiasedness check: star graph centre") {
    // h = 1 and an effective 1 / C_vu of 1: W = 4 cancels target-degree C = 4.
    GraphSpec g = star_graph(4);
    g.weight = Matrix{{4.0}};
    REQUIRE(aggregate_true(g, 0)[0] == 4.0);
    const auto report = unbiasedness_mc_check(g, SampleDesign::uniform(5, 0.5), 20000, Rng(2024));
    // Within three empirical standard errors of the truth.
    CHECK(report.z[0] <= 3.0);
    CHECK(report.mc_mean[0][0] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("unbiasedness check flags unreliable trial counts") {
    Rng rng(3);
    const GraphSpec g = random_graph(5, 1, 1, 0.5, rng);
    const auto report = unbiasedness_mc_check(g, SampleDesign::uniform(5, 0.5), 10, Rng(0));
    CHECK_FALSE(report.reliable);
    CHECK(report.trials == 10);
}

} // TEST_SUITE
