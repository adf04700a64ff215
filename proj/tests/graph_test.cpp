#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "gcs/graph.hpp"
#include "gcs/rng.hpp"

using namespace gcs;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = "test_tmp_" + name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

} // namespace

TEST_CASE("load_edge_list basic") {
    const auto path = write_temp("basic.tsv", "0\t1\n1\t2\n");
    Graph g = load_edge_list(path);
    CHECK(g.node_count() == 3);
    CHECK(g.edge_count() == 2);
    CHECK(g.degree(0) == 1);
    CHECK(g.degree(1) == 2);
    CHECK(g.degree(2) == 1);
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(2, 1));
    CHECK_FALSE(g.has_edge(0, 2));
    std::remove(path.c_str());
}

TEST_CASE("load_edge_list dedup and self-loop rules") {
    const auto path = write_temp("dedup.tsv", "0\t0\n0\t1\n0\t1\n");
    Graph g = load_edge_list(path);
    CHECK(g.node_count() == 2);
    CHECK(g.edge_count() == 1);
    CHECK(g.self_loops_dropped() == 1);
    CHECK(g.duplicates_merged() == 1);
    std::remove(path.c_str());
}

TEST_CASE("load_edge_list comments, blank lines, reversed duplicates, expected_nodes") {
    const auto path = write_temp("mixed.tsv", "# comment\n\n2\t1\n1\t2\n");
    Graph g = load_edge_list(path, 5);
    CHECK(g.node_count() == 5);
    CHECK(g.edge_count() == 1);
    CHECK(g.duplicates_merged() == 1);
    CHECK(g.degree(4) == 0);
    std::remove(path.c_str());
}

TEST_CASE("load_edge_list error paths") {
    const auto bad = write_temp("bad.tsv", "0\t1\nnot a line\n");
    CHECK_THROWS_WITH_AS(load_edge_list(bad), doctest::Contains(":2"), DataError);
    std::remove(bad.c_str());

    const auto overflow = write_temp("overflow.tsv", "0\t99999999999\n");
    CHECK_THROWS_AS(load_edge_list(overflow), DataError);
    std::remove(overflow.c_str());

    const auto empty = write_temp("empty.tsv", "# nothing\n");
    CHECK_THROWS_AS(load_edge_list(empty), DataError);
    std::remove(empty.c_str());

    CHECK_THROWS_AS(load_edge_list("no_such_file.tsv"), DataError);
}

TEST_CASE("annotations kept per stored edge, first one wins") {
    const auto path = write_temp("ann.tsv", "0\t1\ta\n1\t2\ta\n2\t3\tb\n1\t0\tzzz\n");
    Graph g = load_edge_list(path);
    CHECK(g.edge_count() == 3);
    auto hist = annotation_histogram(g);
    CHECK(hist.size() == 2);
    CHECK(hist["a"] == 2);
    CHECK(hist["b"] == 1);
    std::remove(path.c_str());
}

TEST_CASE("degree histogram of a path") {
    Graph g = Graph::from_edges({{0, 1}, {1, 2}});
    auto hist = degree_histogram(g);
    CHECK(hist[1] == 2);
    CHECK(hist[2] == 1);
}

TEST_CASE("annotation histogram empty without labels") {
    Graph g = Graph::from_edges({{0, 1}});
    CHECK(annotation_histogram(g).empty());
}

TEST_CASE("skewed label fixture: top decile of labels covers most edges") {
    // 10 labels, label 0 on half the edges by construction
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<std::string> labels;
    NodeId next = 0;
    for (int i = 0; i < 100; ++i) {
        edges.emplace_back(next, next + 1);
        next += 2;
        labels.push_back(i < 55 ? "hub" : "tail" + std::to_string(i % 9));
    }
    Graph g = Graph::from_edges(edges, 0, labels);
    auto hist = annotation_histogram(g);
    std::size_t best = 0;
    for (const auto& [label, count] : hist)
        best = std::max(best, count);
    CHECK(best * 2 > g.edge_count());
}

TEST_CASE("edge topology classes") {
    SUBCASE("isolated pair is 1-1") {
        Graph g = Graph::from_edges({{0, 1}});
        CHECK(classify_edge_topology(g, 0, 1) == EdgeTopologyClass::OneOne);
    }
    SUBCASE("path edge is N-1") {
        Graph g = Graph::from_edges({{0, 1}, {1, 2}});
        CHECK(classify_edge_topology(g, 0, 1) == EdgeTopologyClass::NOne);
    }
    SUBCASE("triangle edges are N-M") {
        Graph g = Graph::from_edges({{0, 1}, {1, 2}, {0, 2}});
        CHECK(classify_edge_topology(g, 0, 1) == EdgeTopologyClass::NM);
        CHECK(classify_edge_topology(g, 1, 2) == EdgeTopologyClass::NM);
    }
    SUBCASE("edge not in graph is an error") {
        Graph g = Graph::from_edges({{0, 1}, {1, 2}});
        CHECK_THROWS_AS(classify_edge_topology(g, 0, 2), DataError);
    }
    SUBCASE("bad thresholds rejected") {
        Graph g = Graph::from_edges({{0, 1}});
        CHECK_THROWS_AS(classify_edge_topology(g, 0, 1, 3, 2), UsageError);
    }
}

TEST_CASE("topology classification partitions the edge set") {
    SplitMix64 rng(7);
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId v = 1; v < 60; ++v)
        edges.emplace_back(static_cast<NodeId>(rng.below(v)), v);
    for (int e = 0; e < 40; ++e)
        edges.emplace_back(static_cast<NodeId>(rng.below(60)), static_cast<NodeId>(rng.below(60)));
    std::vector<std::pair<NodeId, NodeId>> clean;
    for (auto [u, v] : edges)
        if (u != v)
            clean.emplace_back(u, v);
    Graph g = Graph::from_edges(clean, 60);
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& [u, v] : g.edges())
        ++counts[static_cast<int>(classify_edge_topology(g, u, v))];
    CHECK(counts[0] + counts[1] + counts[2] == g.edge_count());
}

TEST_CASE("degree sum is twice the edge count") {
    SplitMix64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::pair<NodeId, NodeId>> edges;
        const NodeId n = 2 + static_cast<NodeId>(rng.below(40));
        for (int e = 0; e < 60; ++e) {
            NodeId u = static_cast<NodeId>(rng.below(n));
            NodeId v = static_cast<NodeId>(rng.below(n));
            if (u != v)
                edges.emplace_back(u, v);
        }
        if (edges.empty())
            continue;
        Graph g = Graph::from_edges(edges, n);
        std::size_t total = 0;
        for (NodeId v = 0; v < g.node_count(); ++v)
            total += g.degree(v);
        CHECK(total == 2 * g.edge_count());
    }
}

TEST_CASE("sample_subgraph full target is an identity copy") {
    Graph g = Graph::from_edges({{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    auto sub = sample_subgraph(g, 4, 99);
    CHECK(sub.graph.node_count() == 4);
    CHECK(sub.graph.edge_count() == g.edge_count());
    for (NodeId v = 0; v < 4; ++v)
        CHECK(sub.old_to_new[v] == v);
}

TEST_CASE("sample_subgraph deterministic and induced") {
    Graph g = Graph::from_edges({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});
    auto a = sample_subgraph(g, 3, 5);
    auto b = sample_subgraph(g, 3, 5);
    CHECK(a.new_to_old == b.new_to_old);
    CHECK(a.graph.edges() == b.graph.edges());
    CHECK(a.graph.node_count() == 3);

    // induced: every subgraph edge maps to an original edge
    for (const auto& [u, v] : a.graph.edges())
        CHECK(g.has_edge(a.new_to_old[u], a.new_to_old[v]));

    // subgraph invariants
    std::size_t total = 0;
    for (NodeId v = 0; v < a.graph.node_count(); ++v)
        total += a.graph.degree(v);
    CHECK(total == 2 * a.graph.edge_count());
}

TEST_CASE("sample_subgraph rejects bad targets") {
    Graph g = Graph::from_edges({{0, 1}});
    CHECK_THROWS_AS(sample_subgraph(g, 0, 1), UsageError);
    CHECK_THROWS_AS(sample_subgraph(g, 3, 1), UsageError);
}

TEST_CASE("edge_index finds canonical pairs") {
    Graph g = Graph::from_edges({{0, 1}, {1, 2}});
    CHECK(g.edge_index(1, 0).has_value());
    CHECK(g.edge_index(2, 1) == g.edge_index(1, 2));
    CHECK_FALSE(g.edge_index(0, 2).has_value());
}
