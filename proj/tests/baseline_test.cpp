#include "doctest.h"

#include <set>

#include "gcs/baseline.hpp"
#include "gcs/verify.hpp"

using namespace gcs;

TEST_CASE("build_pairs rejects graphs with no free non-edges") {
    Graph k3 = Graph::from_edges({{0, 1}, {1, 2}, {0, 2}});
    Matrix x = random_normal_matrix(3, 2, 1);
    CHECK_THROWS_AS(build_pairs(k3, x, 1, 2), DataError);
}

TEST_CASE("negatives are verified non-edges and folds split evenly") {
    Graph g = random_connected_graph(40, 60, 3);
    Matrix x = random_normal_matrix(40, 4, 4);
    PairDataset ds = build_pairs(g, x, 1, 5);
    CHECK(ds.n_pos == g.edge_count());
    CHECK(ds.n_neg == g.edge_count());
    std::size_t fold0_pos = 0;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        if (s.label) {
            CHECK(g.has_edge(s.u, s.v));
            if (s.fold == 0)
                ++fold0_pos;
        } else {
            CHECK_FALSE(g.has_edge(s.u, s.v));
            CHECK(s.u != s.v);
        }
    }
    CHECK(fold0_pos >= ds.n_pos / 2);
    CHECK(fold0_pos <= (ds.n_pos + 1) / 2);

    // features are [x_u ; x_v]
    const auto& s0 = ds.samples[0];
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(ds.features(0, c) == x(s0.u, c));
        CHECK(ds.features(0, 4 + c) == x(s0.v, c));
    }
}

TEST_CASE("different seeds change negatives but not positives") {
    Graph g = random_connected_graph(30, 40, 7);
    Matrix x = random_normal_matrix(30, 3, 8);
    PairDataset a = build_pairs(g, x, 1, 100);
    PairDataset b = build_pairs(g, x, 1, 101);
    std::set<std::pair<NodeId, NodeId>> na, nb;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        if (!a.samples[i].label)
            na.insert({a.samples[i].u, a.samples[i].v});
        if (!b.samples[i].label)
            nb.insert({b.samples[i].u, b.samples[i].v});
    }
    CHECK(na != nb);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        CHECK(a.samples[e].u == b.samples[e].u);
        CHECK(a.samples[e].v == b.samples[e].v);
    }
}

TEST_CASE("zero-epoch logistic model predicts one half everywhere") {
    Graph g = random_connected_graph(10, 10, 9);
    Matrix x = random_normal_matrix(10, 3, 10);
    PairDataset ds = build_pairs(g, x, 1, 11);
    LogisticModel m = train_logistic(ds, 0, 0.1, 0);
    for (double w : m.w)
        CHECK(w == 0.0);
    CHECK(m.predict(ds.features.row(0)) == 0.5);
}

TEST_CASE("logistic probe separates a separable toy set") {
    // features carry the label directly
    PairDataset ds;
    SplitMix64 rng(12);
    ds.features = Matrix(80, 2);
    for (int i = 0; i < 80; ++i) {
        const char label = i % 2;
        ds.samples.push_back({0, 1, label, static_cast<char>(i < 40 ? 0 : 1)});
        ds.features(i, 0) = label ? 1.5 + rng.next_double() : -1.5 - rng.next_double();
        ds.features(i, 1) = rng.normal() * 0.1;
    }
    ds.n_pos = 40;
    ds.n_neg = 40;
    LogisticModel m = train_logistic(ds, 0, 0.5, 200);
    std::size_t correct = 0;
    for (int i = 0; i < 80; ++i)
        if ((m.predict(ds.features.row(i)) >= 0.5) == (ds.samples[i].label == 1))
            ++correct;
    CHECK(correct == 80);
}

TEST_CASE("logistic gradient step matches finite differences of the loss") {
    Graph g = random_connected_graph(16, 14, 13);
    Matrix x = random_normal_matrix(16, 3, 14);
    PairDataset ds = build_pairs(g, x, 1, 15);
    // one tiny GD step from zero recovers the gradient: delta = -lr * grad
    const double lr = 1e-6;
    LogisticModel stepped = train_logistic(ds, 0, lr, 1);
    // FD oracle on the training-fold mean BCE at w = 0
    const double fd_h = 1e-6;
    for (std::size_t c = 0; c < 2 * 3 + 1; ++c) {
        LogisticModel plus, minus;
        plus.w.assign(6, 0.0);
        minus.w.assign(6, 0.0);
        if (c < 6) {
            plus.w[c] = fd_h;
            minus.w[c] = -fd_h;
        } else {
            plus.b = fd_h;
            minus.b = -fd_h;
        }
        const double fd = (logistic_loss(ds, plus, 0) - logistic_loss(ds, minus, 0)) / (2 * fd_h);
        const double analytic = c < 6 ? -stepped.w[c] / lr : -stepped.b / lr;
        CHECK(std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-8}) < 1e-5);
    }
}

TEST_CASE("logistic loss decreases under a small learning rate") {
    Graph g = random_connected_graph(20, 18, 16);
    Matrix x = random_normal_matrix(20, 4, 17);
    PairDataset ds = build_pairs(g, x, 1, 18);
    double prev = logistic_loss(ds, train_logistic(ds, 0, 1e-3, 0), 0);
    for (int epochs : {5, 10, 20, 40}) {
        const double cur = logistic_loss(ds, train_logistic(ds, 0, 1e-3, epochs), 0);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("ki labels from probe predictions") {
    std::vector<double> base = {0.3, 0.3, 0.8, 0.7};
    std::vector<double> enh = {0.8, 0.3, 0.8, 0.2};
    auto labels = ki_label_by_probe(base, enh);
    CHECK(labels[0] == KiLabel::Integrated);
    CHECK(labels[1] == KiLabel::NonIntegrated);
    CHECK(labels[2] == KiLabel::Other);
    CHECK(labels[3] == KiLabel::Other);
    CHECK_THROWS_AS(ki_label_by_probe(base, std::vector<double>(3)), DataError);
}

TEST_CASE("identical seeds give zero entropy in the variance experiment") {
    PlantedConfig pc;
    pc.n_nodes = 40;
    pc.seed = 19;
    PlantedInstance inst = gen_planted(pc);
    VarianceConfig vc;
    vc.gcs.epochs = 4;
    vc.gcs.heads = 1;
    vc.gcs.attn_dim = 2;
    vc.gcs.stat_hidden = 8;
    vc.probe_epochs = 10;
    const std::vector<std::uint64_t> seeds = {123, 123};
    auto vr = variance_experiment(inst.graph, inst.x_base, inst.x_enh, seeds, vc);
    for (double e : vr.probe_entropy)
        CHECK(e == 0.0);
    for (double e : vr.gcs_entropy)
        CHECK(e == 0.0);
    for (double e : vr.control_entropy)
        CHECK(e == 0.0);
}

TEST_CASE("random-guess control concentrates near one bit") {
    // Bernoulli(0.5) classifications across 100 runs, 500 items
    SplitMix64 rng(20);
    std::vector<std::vector<char>> runs(100, std::vector<char>(500));
    for (auto& r : runs)
        for (auto& v : r)
            v = rng.bernoulli(0.5) ? 1 : 0;
    CHECK(median(entropy_of_runs(runs)) > 0.9);
}

TEST_CASE("median helper") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS_AS(median({}), DataError);
}
