#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gcs/error.hpp"
#include "gcs/graph.hpp"
#include "gcs/matrix.hpp"
#include "gcs/rng.hpp"

namespace gcs {

// Synthetic knowledge-integration instance with planted ground truth:
//   planted edge (i,j): x_enh mixes neighbor information through an
//     orthogonal map M, so a one-hop attention layer can recover it;
//   CR node: x_enh = x_base + sigma*eps (information fully retained);
//   CF node: x_enh = fresh standard normal (information fully lost);
//   other nodes keep their base embedding up to noise, like CR.
// CR/CF nodes never touch planted edges.
struct PlantedInstance {
    Graph graph;
    Matrix x_base;
    Matrix x_enh;
    Matrix noise;                         // per-node eps; for CF nodes this IS x_enh
    std::vector<char> edge_is_planted;    // |E|, aligned with graph.edges()
    std::vector<NodeId> cr_nodes, cf_nodes;
    double beta = 0.5;
    double sigma = 0.05;
    Matrix mixing_map;                    // orthogonal dim x dim
    Matrix score_map;                     // orthogonal dim x dim, drives planted selection
};

struct PlantedConfig {
    std::size_t n_nodes = 500;
    double avg_degree = 8.0;
    double planted_fraction = 0.3; // of edges
    double cr_fraction = 0.05;     // of nodes
    double cf_fraction = 0.05;
    std::size_t dim = 16;
    double beta = 0.5;
    double sigma = 0.05;
    std::uint64_t seed = 0;
};

namespace detail {

// QR of a Gaussian matrix via modified Gram-Schmidt, R diagonal forced
// positive so the rotation is unique per seed.
inline Matrix random_orthogonal(std::size_t d, std::uint64_t seed) {
    Matrix a = random_normal_matrix(d, d, seed);
    Matrix q(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> col(d);
        for (std::size_t i = 0; i < d; ++i)
            col[i] = a(i, j);
        for (std::size_t prev = 0; prev < j; ++prev) {
            double proj = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                proj += q(i, prev) * col[i];
            for (std::size_t i = 0; i < d; ++i)
                col[i] -= proj * q(i, prev);
        }
        double norm = 0.0;
        for (double v : col)
            norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-12)
            throw NumericError("random_orthogonal: degenerate column");
        for (std::size_t i = 0; i < d; ++i)
            q(i, j) = col[i] / norm;
    }
    return q;
}

// (A x_u) . (A x_v) = x_u^T (A^T A) x_v: a symmetric bilinear content score
// over an edge. A is a generic (non-orthogonal) seeded matrix, so the induced
// form differs from the plain dot product.
inline double planted_score(const PlantedInstance& inst, std::size_t edge_index) {
    const auto& [u, v] = inst.graph.edges()[edge_index];
    const std::size_t d = inst.x_base.cols();
    std::vector<double> au(d), av(d);
    matvec(inst.score_map, inst.x_base.row(u), au);
    matvec(inst.score_map, inst.x_base.row(v), av);
    return dot(au, av);
}

inline std::vector<char> largest_component(const Graph& g) {
    const std::size_t n = g.node_count();
    std::vector<std::uint32_t> comp(n, ~0u);
    std::uint32_t n_comp = 0;
    std::vector<NodeId> stack;
    for (NodeId s = 0; s < n; ++s) {
        if (comp[s] != ~0u)
            continue;
        comp[s] = n_comp;
        stack.push_back(s);
        while (!stack.empty()) {
            const NodeId cur = stack.back();
            stack.pop_back();
            for (NodeId nb : g.neighbors(cur))
                if (comp[nb] == ~0u) {
                    comp[nb] = n_comp;
                    stack.push_back(nb);
                }
        }
        ++n_comp;
    }
    std::vector<std::size_t> sizes(n_comp, 0);
    for (std::uint32_t c : comp)
        ++sizes[c];
    const std::uint32_t best =
        static_cast<std::uint32_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::vector<char> keep(n, 0);
    for (NodeId v = 0; v < n; ++v)
        keep[v] = comp[v] == best ? 1 : 0;
    return keep;
}

} // namespace detail

inline PlantedInstance gen_planted(const PlantedConfig& cfg) {
    if (cfg.n_nodes < 2 || cfg.dim == 0)
        throw UsageError("gen_planted: need at least 2 nodes and dim >= 1");
    if (cfg.avg_degree < 1.0)
        throw UsageError("gen_planted: avg_degree must be >= 1");
    for (double f : {cfg.planted_fraction, cfg.cr_fraction, cfg.cf_fraction})
        if (f < 0.0 || f > 1.0)
            throw UsageError("gen_planted: fractions must be in [0,1]");
    if (cfg.beta < 0.0 || cfg.beta > 1.0 || cfg.sigma < 0.0)
        throw UsageError("gen_planted: beta in [0,1], sigma >= 0");

    // Erdos-Renyi, then keep the largest connected component.
    const double p = std::min(1.0, cfg.avg_degree / static_cast<double>(cfg.n_nodes - 1));
    SplitMix64 edge_rng(derive_seed(cfg.seed, 1));
    std::vector<std::pair<NodeId, NodeId>> raw_edges;
    for (NodeId u = 0; u < cfg.n_nodes; ++u)
        for (NodeId v = u + 1; v < cfg.n_nodes; ++v)
            if (edge_rng.next_double() < p)
                raw_edges.emplace_back(u, v);
    if (raw_edges.empty())
        throw DataError("gen_planted: generated graph has no edges");
    Graph full = Graph::from_edges(std::move(raw_edges), cfg.n_nodes);

    const auto keep = detail::largest_component(full);
    std::vector<NodeId> relabel(full.node_count(), kInvalidNode);
    std::size_t n = 0;
    for (NodeId v = 0; v < full.node_count(); ++v)
        if (keep[v])
            relabel[v] = static_cast<NodeId>(n++);
    std::vector<std::pair<NodeId, NodeId>> lcc_edges;
    for (const auto& [u, v] : full.edges())
        if (keep[u] && keep[v])
            lcc_edges.emplace_back(relabel[u], relabel[v]);

    PlantedInstance inst;
    inst.beta = cfg.beta;
    inst.sigma = cfg.sigma;
    inst.graph = Graph::from_edges(std::move(lcc_edges), n);
    const std::size_t n_edges = inst.graph.edge_count();

    // CR/CF nodes first, then planted edges among the untouched remainder, so
    // the "no planted edge at a CR/CF node" invariant holds by construction.
    // Planted edges are the top planted_fraction of eligible edges under a
    // seeded bilinear content score: a relation graph attention can express.
    // (A content-independent random subset is unlearnable for content-based
    // attention, which would defeat the benchmark's purpose.)
    const std::size_t n_cr = static_cast<std::size_t>(cfg.cr_fraction * static_cast<double>(n));
    const std::size_t n_cf = static_cast<std::size_t>(cfg.cf_fraction * static_cast<double>(n));
    if (n_cr + n_cf > n)
        throw UsageError("gen_planted: cr_fraction + cf_fraction exceed the node budget");
    std::vector<NodeId> node_order(n);
    std::iota(node_order.begin(), node_order.end(), 0);
    SplitMix64 node_rng(derive_seed(cfg.seed, 2));
    for (std::size_t i = n; i > 1; --i)
        std::swap(node_order[i - 1], node_order[node_rng.below(i)]);
    inst.cr_nodes.assign(node_order.begin(), node_order.begin() + n_cr);
    inst.cf_nodes.assign(node_order.begin() + n_cr, node_order.begin() + n_cr + n_cf);
    std::sort(inst.cr_nodes.begin(), inst.cr_nodes.end());
    std::sort(inst.cf_nodes.begin(), inst.cf_nodes.end());

    std::vector<char> frozen(n, 0);
    for (NodeId v : inst.cr_nodes)
        frozen[v] = 1;
    for (NodeId v : inst.cf_nodes)
        frozen[v] = 1;

    std::vector<std::size_t> eligible_edges;
    for (std::size_t e = 0; e < n_edges; ++e) {
        const auto& [u, v] = inst.graph.edges()[e];
        if (!frozen[u] && !frozen[v])
            eligible_edges.push_back(e);
    }
    const std::size_t n_planted =
        static_cast<std::size_t>(cfg.planted_fraction * static_cast<double>(n_edges));
    if (n_planted > eligible_edges.size())
        throw UsageError("gen_planted: not enough edges outside CR/CF nodes to plant (" +
                         std::to_string(eligible_edges.size()) + " eligible, " +
                         std::to_string(n_planted) + " requested)");

    inst.x_base = random_normal_matrix(n, cfg.dim, derive_seed(cfg.seed, 4));
    inst.mixing_map = detail::random_orthogonal(cfg.dim, derive_seed(cfg.seed, 5));
    inst.noise = random_normal_matrix(n, cfg.dim, derive_seed(cfg.seed, 6));
    inst.score_map = random_normal_matrix(cfg.dim, cfg.dim, derive_seed(cfg.seed, 7));
    for (std::size_t i = 0; i < cfg.dim; ++i)
        for (std::size_t j = 0; j < cfg.dim; ++j)
            inst.score_map(i, j) /= std::sqrt(static_cast<double>(cfg.dim));

    std::stable_sort(eligible_edges.begin(), eligible_edges.end(), [&](std::size_t a, std::size_t b) {
        return detail::planted_score(inst, a) > detail::planted_score(inst, b);
    });
    inst.edge_is_planted.assign(n_edges, 0);
    for (std::size_t i = 0; i < n_planted; ++i)
        inst.edge_is_planted[eligible_edges[i]] = 1;

    // planted adjacency
    std::vector<std::vector<NodeId>> planted_nbrs(n);
    for (std::size_t e = 0; e < n_edges; ++e)
        if (inst.edge_is_planted[e]) {
            const auto& [u, v] = inst.graph.edges()[e];
            planted_nbrs[u].push_back(v);
            planted_nbrs[v].push_back(u);
        }
    for (auto& nb : planted_nbrs)
        std::sort(nb.begin(), nb.end());

    std::vector<char> is_cf(n, 0);
    for (NodeId v : inst.cf_nodes)
        is_cf[v] = 1;

    inst.x_enh = Matrix(n, cfg.dim);
    std::vector<double> mixed(cfg.dim);
    for (NodeId i = 0; i < n; ++i) {
        if (is_cf[i]) {
            for (std::size_t c = 0; c < cfg.dim; ++c)
                inst.x_enh(i, c) = inst.noise(i, c);
            continue;
        }
        if (!planted_nbrs[i].empty()) {
            std::fill(mixed.begin(), mixed.end(), 0.0);
            std::vector<double> mx(cfg.dim);
            for (NodeId j : planted_nbrs[i]) {
                matvec(inst.mixing_map, inst.x_base.row(j), mx);
                for (std::size_t c = 0; c < cfg.dim; ++c)
                    mixed[c] += mx[c];
            }
            const double inv = 1.0 / static_cast<double>(planted_nbrs[i].size());
            for (std::size_t c = 0; c < cfg.dim; ++c)
                inst.x_enh(i, c) = cfg.beta * inst.x_base(i, c) + (1.0 - cfg.beta) * mixed[c] * inv +
                                   cfg.sigma * inst.noise(i, c);
        } else {
            for (std::size_t c = 0; c < cfg.dim; ++c)
                inst.x_enh(i, c) = inst.x_base(i, c) + cfg.sigma * inst.noise(i, c);
        }
    }
    return inst;
}

// Re-derives x_enh from the stored ingredients and compares; throws on any
// violation. Independent of gen_planted's internal loop structure.
inline void verify_planted(const PlantedInstance& inst, double tol = 1e-12) {
    const std::size_t n = inst.graph.node_count();
    const std::size_t d = inst.x_base.cols();
    if (inst.x_enh.rows() != n || inst.noise.rows() != n)
        throw DataError("verify_planted: shape mismatch");
    if (inst.edge_is_planted.size() != inst.graph.edge_count())
        throw DataError("verify_planted: planted flag count mismatch");

    std::vector<char> is_cr(n, 0), is_cf(n, 0);
    for (NodeId v : inst.cr_nodes)
        is_cr[v] = 1;
    for (NodeId v : inst.cf_nodes)
        is_cf[v] = 1;
    for (NodeId v = 0; v < n; ++v)
        if (is_cr[v] && is_cf[v])
            throw DataError("verify_planted: node " + std::to_string(v) + " is both CR and CF");

    std::vector<std::vector<NodeId>> planted_nbrs(n);
    for (std::size_t e = 0; e < inst.graph.edge_count(); ++e)
        if (inst.edge_is_planted[e]) {
            const auto& [u, v] = inst.graph.edges()[e];
            if (is_cr[u] || is_cf[u] || is_cr[v] || is_cf[v])
                throw DataError("verify_planted: planted edge touches a CR/CF node");
            planted_nbrs[u].push_back(v);
            planted_nbrs[v].push_back(u);
        }
    for (auto& nb : planted_nbrs)
        std::sort(nb.begin(), nb.end());

    // planted selection re-derivation: top-k eligible edges by content score
    if (inst.score_map.rows() == d && inst.score_map.cols() == d) {
        std::vector<std::size_t> eligible;
        std::size_t n_planted = 0;
        for (std::size_t e = 0; e < inst.graph.edge_count(); ++e) {
            const auto& [u, v] = inst.graph.edges()[e];
            if (!is_cr[u] && !is_cf[u] && !is_cr[v] && !is_cf[v])
                eligible.push_back(e);
            if (inst.edge_is_planted[e])
                ++n_planted;
        }
        std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
            return detail::planted_score(inst, a) > detail::planted_score(inst, b);
        });
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            const bool expect_planted = i < n_planted;
            if (static_cast<bool>(inst.edge_is_planted[eligible[i]]) != expect_planted)
                throw DataError("verify_planted: planted set does not match the content-score rule");
        }
    }

    std::vector<double> expect(d), mx(d);
    for (NodeId i = 0; i < n; ++i) {
        if (is_cf[i]) {
            for (std::size_t c = 0; c < d; ++c)
                expect[c] = inst.noise(i, c);
        } else if (!planted_nbrs[i].empty()) {
            std::fill(expect.begin(), expect.end(), 0.0);
            for (NodeId j : planted_nbrs[i]) {
                matvec(inst.mixing_map, inst.x_base.row(j), mx);
                for (std::size_t c = 0; c < d; ++c)
                    expect[c] += mx[c];
            }
            const double inv = 1.0 / static_cast<double>(planted_nbrs[i].size());
            for (std::size_t c = 0; c < d; ++c)
                expect[c] = inst.beta * inst.x_base(i, c) + (1.0 - inst.beta) * expect[c] * inv +
                            inst.sigma * inst.noise(i, c);
        } else {
            for (std::size_t c = 0; c < d; ++c)
                expect[c] = inst.x_base(i, c) + inst.sigma * inst.noise(i, c);
        }
        for (std::size_t c = 0; c < d; ++c)
            if (std::abs(expect[c] - inst.x_enh(i, c)) > tol)
                throw DataError("verify_planted: construction equation violated at node " +
                                std::to_string(i));
    }
}

// Correlated standard-normal pairs (a, rho*a + sqrt(1-rho^2)*b); analytic
// MI = -0.5*ln(1-rho^2) nats.
inline std::pair<Matrix, Matrix> gen_gaussian_pairs(std::size_t n, double rho, std::uint64_t seed) {
    if (!(std::abs(rho) < 1.0))
        throw UsageError("gen_gaussian_pairs: |rho| must be < 1");
    Matrix a(n, 1), c(n, 1);
    SplitMix64 rng(seed);
    const double w = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.normal();
        const double v = rng.normal();
        a(i, 0) = u;
        c(i, 0) = rho * u + w * v;
    }
    return {std::move(a), std::move(c)};
}

inline double gaussian_mi_nats(double rho) { return -0.5 * std::log(1.0 - rho * rho); }

// Rank AUC with average ranks for ties.
inline double auc(std::span<const double> scores, std::span<const char> labels) {
    if (scores.size() != labels.size())
        throw DataError("auc: size mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (char l : labels)
        if (l)
            ++n_pos;
    if (n_pos == 0 || n_pos == n)
        throw DataError("auc: need both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]])
            ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]])
                pos_rank_sum += avg_rank;
        i = j;
    }
    const double n_neg = static_cast<double>(n - n_pos);
    return (pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * n_neg);
}

} // namespace gcs
