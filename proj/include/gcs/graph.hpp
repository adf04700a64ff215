#pragma once
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcs/error.hpp"
#include "gcs/rng.hpp"

namespace gcs {

using NodeId = std::uint32_t;
constexpr NodeId kInvalidNode = ~NodeId{0};

// Undirected, unlabeled entity graph. Edges are stored once in canonical
// (u < v) order; neighbor lists are CSR with sorted adjacency. Self-loops are
// never stored; the convolution adds them implicitly. Immutable after
// construction.
class Graph {
public:
    Graph() = default;

    // Deduplicates, drops self-loops (counted), keeps the first annotation
    // seen per edge. node_count = max(min_nodes, max id + 1).
    static Graph from_edges(std::vector<std::pair<NodeId, NodeId>> edges,
                            std::size_t min_nodes = 0,
                            std::vector<std::string> annotations = {}) {
        Graph g;
        if (!annotations.empty() && annotations.size() != edges.size())
            throw DataError("Graph::from_edges: annotation count does not match edge count");

        NodeId max_id = 0;
        std::vector<std::size_t> order(edges.size());
        for (std::size_t i = 0; i < edges.size(); ++i) {
            auto& [u, v] = edges[i];
            if (u > v)
                std::swap(u, v);
            max_id = std::max(max_id, v);
            order[i] = i;
        }
        std::size_t n = edges.empty() ? 0 : static_cast<std::size_t>(max_id) + 1;
        n = std::max(n, min_nodes);
        if (n == 0)
            throw DataError("Graph::from_edges: empty graph");

        // Stable sort of line indices by canonical edge so the first
        // annotation per duplicate group wins.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return edges[a] < edges[b];
        });

        g.node_count_ = n;
        for (std::size_t idx : order) {
            const auto& e = edges[idx];
            if (e.first == e.second) {
                ++g.self_loops_dropped_;
                continue;
            }
            if (!g.edges_.empty() && g.edges_.back() == e) {
                ++g.duplicates_merged_;
                continue;
            }
            g.edges_.push_back(e);
            if (!annotations.empty())
                g.annotations_.push_back(annotations[idx]);
        }
        g.build_csr();
        return g;
    }

    std::size_t node_count() const { return node_count_; }
    std::size_t edge_count() const { return edges_.size(); }
    std::size_t self_loops_dropped() const { return self_loops_dropped_; }
    std::size_t duplicates_merged() const { return duplicates_merged_; }

    const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

    bool has_annotations() const { return !annotations_.empty(); }
    const std::vector<std::string>& annotations() const { return annotations_; }

    std::span<const NodeId> neighbors(NodeId v) const {
        check_node(v);
        return {adj_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }

    std::size_t degree(NodeId v) const {
        check_node(v);
        return offsets_[v + 1] - offsets_[v];
    }

    bool has_edge(NodeId u, NodeId v) const {
        if (u >= node_count_ || v >= node_count_ || u == v)
            return false;
        auto nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), v);
    }

    // Index into edges() for the canonical pair, or nullopt.
    std::optional<std::size_t> edge_index(NodeId u, NodeId v) const {
        if (u > v)
            std::swap(u, v);
        auto it = std::lower_bound(edges_.begin(), edges_.end(), std::make_pair(u, v));
        if (it == edges_.end() || *it != std::make_pair(u, v))
            return std::nullopt;
        return static_cast<std::size_t>(it - edges_.begin());
    }

private:
    void build_csr() {
        offsets_.assign(node_count_ + 1, 0);
        for (const auto& [u, v] : edges_) {
            ++offsets_[u + 1];
            ++offsets_[v + 1];
        }
        for (std::size_t i = 0; i < node_count_; ++i)
            offsets_[i + 1] += offsets_[i];
        adj_.resize(edges_.size() * 2);
        std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
        for (const auto& [u, v] : edges_) {
            adj_[cursor[u]++] = v;
            adj_[cursor[v]++] = u;
        }
        for (std::size_t i = 0; i < node_count_; ++i)
            std::sort(adj_.begin() + offsets_[i], adj_.begin() + offsets_[i + 1]);
    }

    void check_node(NodeId v) const {
        if (v >= node_count_)
            throw DataError("node id " + std::to_string(v) + " out of range [0, " +
                            std::to_string(node_count_) + ")");
    }

    std::size_t node_count_ = 0;
    std::vector<std::pair<NodeId, NodeId>> edges_;     // canonical, sorted
    std::vector<std::string> annotations_;             // parallel to edges_, optional
    std::vector<std::size_t> offsets_;                 // CSR, size n+1
    std::vector<NodeId> adj_;                          // sorted per node
    std::size_t self_loops_dropped_ = 0;
    std::size_t duplicates_merged_ = 0;
};

namespace detail {

inline bool parse_node_id(const std::string& tok, NodeId& out) {
    if (tok.empty())
        return false;
    std::uint64_t acc = 0;
    for (char c : tok) {
        if (c < '0' || c > '9')
            return false;
        acc = acc * 10 + static_cast<std::uint64_t>(c - '0');
        if (acc > 0xFFFFFFFFull)
            throw DataError("node id overflow: " + tok);
    }
    out = static_cast<NodeId>(acc);
    return true;
}

} // namespace detail

// Edge-list TSV: "u<TAB>v" or "u<TAB>v<TAB>label" per line, '#' comments and
// blank lines skipped, ids decimal and 0-based. Self-loop lines are dropped
// (counted on the Graph), duplicate edges merged.
inline Graph load_edge_list(const std::string& path, std::size_t expected_nodes = 0) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open edge list: " + path);

    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<std::string> annotations;
    bool any_annotation = false;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        const auto tab1 = line.find('\t');
        if (tab1 == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 'u<TAB>v'");
        const auto tab2 = line.find('\t', tab1 + 1);
        const std::string ustr = line.substr(0, tab1);
        const std::string vstr = tab2 == std::string::npos ? line.substr(tab1 + 1)
                                                           : line.substr(tab1 + 1, tab2 - tab1 - 1);
        NodeId u, v;
        if (!detail::parse_node_id(ustr, u) || !detail::parse_node_id(vstr, v))
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed node id");
        edges.emplace_back(u, v);
        if (tab2 != std::string::npos) {
            annotations.push_back(line.substr(tab2 + 1));
            any_annotation = true;
        } else {
            annotations.emplace_back();
        }
    }
    if (edges.empty())
        throw DataError(path + ": no edges");
    if (!any_annotation)
        annotations.clear();
    return Graph::from_edges(std::move(edges), expected_nodes, std::move(annotations));
}

inline void save_edge_list(const Graph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: no newline translation
    if (!out)
        throw DataError("cannot write edge list: " + path);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const auto& [u, v] = g.edges()[e];
        out << u << '\t' << v;
        if (g.has_annotations())
            out << '\t' << g.annotations()[e];
        out << '\n';
    }
    if (!out)
        throw DataError("write failed: " + path);
}

// Relation topology by endpoint degree: both leaves -> 1-1, both centers ->
// N-M, otherwise N-1.
enum class EdgeTopologyClass { OneOne, NOne, NM };

inline const char* topology_name(EdgeTopologyClass c) {
    switch (c) {
    case EdgeTopologyClass::OneOne: return "1-1";
    case EdgeTopologyClass::NOne: return "N-1";
    default: return "N-M";
    }
}

inline EdgeTopologyClass classify_edge_topology(const Graph& g, NodeId u, NodeId v,
                                                std::size_t leaf_max_degree = 1,
                                                std::size_t center_min_degree = 2) {
    if (leaf_max_degree >= center_min_degree)
        throw UsageError("leaf_max_degree must be < center_min_degree");
    if (!g.has_edge(u, v))
        throw DataError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") not in graph");
    const std::size_t du = g.degree(u), dv = g.degree(v);
    if (du <= leaf_max_degree && dv <= leaf_max_degree)
        return EdgeTopologyClass::OneOne;
    if (du >= center_min_degree && dv >= center_min_degree)
        return EdgeTopologyClass::NM;
    return EdgeTopologyClass::NOne;
}

struct SubgraphSample {
    Graph graph;
    std::vector<NodeId> old_to_new; // kInvalidNode where not sampled
    std::vector<NodeId> new_to_old;
};

// Seeded breadth-first expansion from random roots until target_nodes are
// gathered, then the induced subgraph. New ids follow ascending old ids, so
// sampling the whole graph yields an identity mapping.
inline SubgraphSample sample_subgraph(const Graph& g, std::size_t target_nodes, std::uint64_t seed) {
    const std::size_t n = g.node_count();
    if (target_nodes == 0 || target_nodes > n)
        throw UsageError("sample_subgraph: target_nodes must be in (0, node_count]");

    SplitMix64 rng(seed);
    std::vector<char> visited(n, 0);
    std::size_t taken = 0;
    std::vector<NodeId> queue;
    queue.reserve(target_nodes);
    std::size_t head = 0;

    while (taken < target_nodes) {
        if (head == queue.size()) {
            // exhausted component: new random unvisited root
            NodeId root;
            do {
                root = static_cast<NodeId>(rng.below(n));
            } while (visited[root]);
            visited[root] = 1;
            ++taken;
            queue.push_back(root);
            continue;
        }
        const NodeId cur = queue[head++];
        for (NodeId nb : g.neighbors(cur)) {
            if (taken == target_nodes)
                break;
            if (!visited[nb]) {
                visited[nb] = 1;
                ++taken;
                queue.push_back(nb);
            }
        }
    }

    SubgraphSample out;
    out.old_to_new.assign(n, kInvalidNode);
    out.new_to_old.reserve(target_nodes);
    for (NodeId v = 0; v < n; ++v) {
        if (visited[v]) {
            out.old_to_new[v] = static_cast<NodeId>(out.new_to_old.size());
            out.new_to_old.push_back(v);
        }
    }

    std::vector<std::pair<NodeId, NodeId>> sub_edges;
    std::vector<std::string> sub_annotations;
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const auto& [u, v] = g.edges()[e];
        if (visited[u] && visited[v]) {
            sub_edges.emplace_back(out.old_to_new[u], out.old_to_new[v]);
            if (g.has_annotations())
                sub_annotations.push_back(g.annotations()[e]);
        }
    }
    out.graph = Graph::from_edges(std::move(sub_edges), target_nodes, std::move(sub_annotations));
    return out;
}

inline std::map<std::size_t, std::size_t> degree_histogram(const Graph& g) {
    std::map<std::size_t, std::size_t> hist;
    for (NodeId v = 0; v < g.node_count(); ++v)
        ++hist[g.degree(v)];
    return hist;
}

// Counts stored-edge labels; empty when the edge list had no third column.
inline std::map<std::string, std::size_t> annotation_histogram(const Graph& g) {
    std::map<std::string, std::size_t> hist;
    if (!g.has_annotations())
        return hist;
    for (const auto& label : g.annotations())
        ++hist[label];
    return hist;
}

} // namespace gcs
