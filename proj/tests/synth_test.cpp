#include "doctest.h"

#include <cmath>

#include "gcs/synth.hpp"

using namespace gcs;

TEST_CASE("planted instance verifies and is deterministic per seed") {
    PlantedConfig cfg;
    cfg.n_nodes = 120;
    cfg.seed = 5;
    PlantedInstance a = gen_planted(cfg);
    verify_planted(a);
    PlantedInstance b = gen_planted(cfg);
    CHECK(a.x_base == b.x_base);
    CHECK(a.x_enh == b.x_enh);
    CHECK(a.edge_is_planted == b.edge_is_planted);
    CHECK(a.cr_nodes == b.cr_nodes);
    CHECK(a.cf_nodes == b.cf_nodes);

    cfg.seed = 6;
    PlantedInstance c = gen_planted(cfg);
    CHECK(!(a.x_base == c.x_base));
}

TEST_CASE("zero planted fraction leaves every non-CF node unmixed") {
    PlantedConfig cfg;
    cfg.n_nodes = 80;
    cfg.planted_fraction = 0.0;
    cfg.seed = 7;
    PlantedInstance inst = gen_planted(cfg);
    verify_planted(inst);
    std::vector<char> is_cf(inst.graph.node_count(), 0);
    for (NodeId v : inst.cf_nodes)
        is_cf[v] = 1;
    for (NodeId i = 0; i < inst.graph.node_count(); ++i) {
        if (is_cf[i])
            continue;
        for (std::size_t c = 0; c < inst.x_base.cols(); ++c)
            CHECK(inst.x_enh(i, c) ==
                  doctest::Approx(inst.x_base(i, c) + cfg.sigma * inst.noise(i, c)).epsilon(1e-15));
    }
}

TEST_CASE("beta one with zero noise copies the base embeddings") {
    PlantedConfig cfg;
    cfg.n_nodes = 60;
    cfg.beta = 1.0;
    cfg.sigma = 0.0;
    cfg.seed = 8;
    PlantedInstance inst = gen_planted(cfg);
    verify_planted(inst);
    std::vector<char> is_cf(inst.graph.node_count(), 0);
    for (NodeId v : inst.cf_nodes)
        is_cf[v] = 1;
    for (NodeId i = 0; i < inst.graph.node_count(); ++i) {
        if (is_cf[i])
            continue;
        for (std::size_t c = 0; c < inst.x_base.cols(); ++c)
            CHECK(inst.x_enh(i, c) == inst.x_base(i, c));
    }
}

TEST_CASE("planted edges never touch CR or CF nodes") {
    PlantedConfig cfg;
    cfg.n_nodes = 150;
    cfg.seed = 9;
    PlantedInstance inst = gen_planted(cfg);
    std::vector<char> frozen(inst.graph.node_count(), 0);
    for (NodeId v : inst.cr_nodes)
        frozen[v] = 1;
    for (NodeId v : inst.cf_nodes)
        frozen[v] = 1;
    for (std::size_t e = 0; e < inst.graph.edge_count(); ++e)
        if (inst.edge_is_planted[e]) {
            const auto& [u, v] = inst.graph.edges()[e];
            CHECK_FALSE(frozen[u]);
            CHECK_FALSE(frozen[v]);
        }
}

TEST_CASE("infeasible fraction combinations are rejected") {
    PlantedConfig cfg;
    cfg.n_nodes = 50;
    cfg.cr_fraction = 0.7;
    cfg.cf_fraction = 0.6;
    cfg.seed = 10;
    CHECK_THROWS_AS(gen_planted(cfg), UsageError);

    PlantedConfig cfg2;
    cfg2.n_nodes = 50;
    cfg2.cr_fraction = 0.45;
    cfg2.cf_fraction = 0.45;
    cfg2.planted_fraction = 1.0;
    cfg2.seed = 11;
    CHECK_THROWS_AS(gen_planted(cfg2), UsageError); // almost no eligible edges left
}

TEST_CASE("mixing map is orthogonal") {
    PlantedConfig cfg;
    cfg.n_nodes = 40;
    cfg.seed = 12;
    PlantedInstance inst = gen_planted(cfg);
    Matrix mtm = matmul(transpose(inst.mixing_map), inst.mixing_map);
    for (std::size_t i = 0; i < mtm.rows(); ++i)
        for (std::size_t j = 0; j < mtm.cols(); ++j)
            CHECK(mtm(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
}

TEST_CASE("verifier catches a corrupted instance") {
    PlantedConfig cfg;
    cfg.n_nodes = 40;
    cfg.seed = 13;
    PlantedInstance inst = gen_planted(cfg);
    inst.x_enh(0, 0) += 1e-6;
    CHECK_THROWS_AS(verify_planted(inst), DataError);
}

TEST_CASE("gaussian pair statistics") {
    SUBCASE("independent pairs have near-zero correlation") {
        auto [a, b] = gen_gaussian_pairs(10000, 0.0, 14);
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < 10000; ++i) {
            ma += a(i, 0);
            mb += b(i, 0);
        }
        ma /= 10000;
        mb /= 10000;
        CHECK(std::abs(ma) < 4.0 / 100.0);
        CHECK(std::abs(mb) < 4.0 / 100.0);
        double sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < 10000; ++i) {
            sxy += (a(i, 0) - ma) * (b(i, 0) - mb);
            sxx += (a(i, 0) - ma) * (a(i, 0) - ma);
            syy += (b(i, 0) - mb) * (b(i, 0) - mb);
        }
        CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.05);
    }
    SUBCASE("correlated pairs track rho") {
        auto [a, b] = gen_gaussian_pairs(10000, 0.9, 15);
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < 10000; ++i) {
            ma += a(i, 0);
            mb += b(i, 0);
        }
        ma /= 10000;
        mb /= 10000;
        double sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < 10000; ++i) {
            sxy += (a(i, 0) - ma) * (b(i, 0) - mb);
            sxx += (a(i, 0) - ma) * (a(i, 0) - ma);
            syy += (b(i, 0) - mb) * (b(i, 0) - mb);
        }
        CHECK(sxy / std::sqrt(sxx * syy) == doctest::Approx(0.9).epsilon(0.04 / 0.9));
    }
    SUBCASE("analytic MI values") {
        CHECK(gaussian_mi_nats(0.0) == 0.0);
        CHECK(gaussian_mi_nats(0.9) == doctest::Approx(0.8304).epsilon(1e-4));
        CHECK(gaussian_mi_nats(0.5) == doctest::Approx(0.1438).epsilon(1e-3));
    }
    SUBCASE("rho out of range rejected") {
        CHECK_THROWS_AS(gen_gaussian_pairs(10, 1.0, 16), UsageError);
        CHECK_THROWS_AS(gen_gaussian_pairs(10, -1.5, 17), UsageError);
    }
}

TEST_CASE("auc") {
    SUBCASE("perfect and inverted rankings") {
        std::vector<double> scores = {0.1, 0.2, 0.8, 0.9};
        std::vector<char> labels = {0, 0, 1, 1};
        CHECK(auc(scores, labels) == 1.0);
        std::vector<char> inverted = {1, 1, 0, 0};
        CHECK(auc(scores, inverted) == 0.0);
    }
    SUBCASE("random scores sit near one half") {
        SplitMix64 rng(18);
        std::vector<double> scores(1000);
        std::vector<char> labels(1000);
        for (int i = 0; i < 1000; ++i) {
            scores[i] = rng.next_double();
            labels[i] = rng.bernoulli(0.5) ? 1 : 0;
        }
        const double a = auc(scores, labels);
        CHECK(a > 0.45);
        CHECK(a < 0.55);
    }
    SUBCASE("invariant under strictly increasing transforms") {
        SplitMix64 rng(19);
        std::vector<double> scores(200), warped(200);
        std::vector<char> labels(200);
        for (int i = 0; i < 200; ++i) {
            scores[i] = rng.normal();
            warped[i] = std::exp(scores[i]) + 3.0 * scores[i];
            labels[i] = rng.bernoulli(0.3) ? 1 : 0;
        }
        CHECK(auc(scores, labels) == doctest::Approx(auc(warped, labels)).epsilon(1e-12));
    }
    SUBCASE("ties get average ranks") {
        std::vector<double> scores = {1.0, 1.0, 1.0, 1.0};
        std::vector<char> labels = {1, 0, 1, 0};
        CHECK(auc(scores, labels) == 0.5);
    }
    SUBCASE("single-class input rejected") {
        std::vector<double> scores = {1.0, 2.0};
        std::vector<char> ones = {1, 1};
        CHECK_THROWS_AS(auc(scores, ones), DataError);
    }
}
