#pragma once
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <thread>
#include <vector>

#include "gcs/error.hpp"
#include "gcs/graph.hpp"
#include "gcs/interpret.hpp"
#include "gcs/matrix.hpp"
#include "gcs/rng.hpp"
#include "gcs/trainer.hpp"

namespace gcs {

// Linear-probe baseline: logistic regression on [x_u; x_v] predicting edge
// existence, 2-fold CV, classifications from the base and enhanced LM probes
// compared for knowledge-integration labels.

struct PairSample {
    NodeId u = 0, v = 0;
    char label = 0; // 1 = edge, 0 = sampled non-edge
    char fold = 0;  // 0 or 1
};

struct PairDataset {
    std::vector<PairSample> samples; // positives (graph edge order) first
    Matrix features;                 // one row per sample: [x_u ; x_v]
    std::size_t n_pos = 0, n_neg = 0;
};

// Negatives by uniform rejection sampling; folds split positives and
// negatives evenly (+-1). Pair/fold structure depends only on (graph, seed),
// so base and enhanced feature sets built with the same seed stay aligned.
inline PairDataset build_pairs(const Graph& g, const Matrix& x, std::size_t neg_per_pos,
                               std::uint64_t seed) {
    if (neg_per_pos < 1)
        throw UsageError("build_pairs: neg_per_pos must be >= 1");
    if (x.rows() != g.node_count())
        throw DataError("build_pairs: embedding rows != node count");
    const std::size_t n = g.node_count();
    const std::size_t n_pos = g.edge_count();
    const std::size_t want_neg = n_pos * neg_per_pos;
    const std::size_t possible = n * (n - 1) / 2 - n_pos;
    if (want_neg > possible)
        throw DataError("build_pairs: graph too dense to sample " + std::to_string(want_neg) +
                        " non-edges (only " + std::to_string(possible) + " exist)");

    PairDataset ds;
    ds.n_pos = n_pos;
    ds.n_neg = want_neg;
    ds.samples.reserve(n_pos + want_neg);
    for (const auto& [u, v] : g.edges())
        ds.samples.push_back({u, v, 1, 0});

    SplitMix64 rng(derive_seed(seed, 1));
    std::vector<std::pair<NodeId, NodeId>> seen;
    seen.reserve(want_neg);
    std::size_t drawn = 0;
    while (drawn < want_neg) {
        NodeId u = static_cast<NodeId>(rng.below(n));
        NodeId v = static_cast<NodeId>(rng.below(n));
        if (u == v)
            continue;
        if (u > v)
            std::swap(u, v);
        if (g.has_edge(u, v))
            continue;
        const auto key = std::make_pair(u, v);
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            continue;
        seen.push_back(key);
        ds.samples.push_back({u, v, 0, 0});
        ++drawn;
    }

    // fold assignment: seeded shuffle of positives and negatives separately
    auto assign_folds = [&](std::size_t begin, std::size_t count, std::uint64_t fold_seed) {
        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), 0);
        SplitMix64 frng(fold_seed);
        for (std::size_t i = count; i > 1; --i)
            std::swap(order[i - 1], order[frng.below(i)]);
        for (std::size_t i = 0; i < count; ++i)
            ds.samples[begin + order[i]].fold = i < (count + 1) / 2 ? 0 : 1;
    };
    assign_folds(0, n_pos, derive_seed(seed, 2));
    assign_folds(n_pos, want_neg, derive_seed(seed, 3));

    const std::size_t d = x.cols();
    ds.features = Matrix(ds.samples.size(), 2 * d);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        for (std::size_t c = 0; c < d; ++c) {
            ds.features(i, c) = x(s.u, c);
            ds.features(i, d + c) = x(s.v, c);
        }
    }
    return ds;
}

struct LogisticModel {
    std::vector<double> w;
    double b = 0.0;

    double predict(std::span<const double> f) const {
        const double s = dot(w, f) + b;
        // clamped sigmoid
        if (s > 35.0)
            return 1.0;
        if (s < -35.0)
            return 0.0;
        return 1.0 / (1.0 + std::exp(-s));
    }
};

// Full-batch gradient descent from zero weights on the given training fold.
// Nothing here is stochastic; the seed is accepted for interface symmetry
// with the other trainers and reserved for future minibatching.
inline LogisticModel train_logistic(const PairDataset& ds, int train_fold, double lr, int epochs,
                                    std::uint64_t seed = 0) {
    (void)seed;
    if (train_fold != 0 && train_fold != 1)
        throw UsageError("train_logistic: fold must be 0 or 1");
    if (ds.samples.empty())
        throw DataError("train_logistic: empty dataset");
    const std::size_t d = ds.features.cols();
    LogisticModel m;
    m.w.assign(d, 0.0);

    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (ds.samples[i].fold == train_fold)
            train_idx.push_back(i);
    if (train_idx.empty())
        throw DataError("train_logistic: training fold is empty");

    std::vector<double> gw(d);
    for (int ep = 0; ep < epochs; ++ep) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i : train_idx) {
            const auto f = ds.features.row(i);
            const double err = m.predict(f) - static_cast<double>(ds.samples[i].label);
            for (std::size_t c = 0; c < d; ++c)
                gw[c] += err * f[c];
            gb += err;
        }
        const double inv = 1.0 / static_cast<double>(train_idx.size());
        for (std::size_t c = 0; c < d; ++c)
            m.w[c] -= lr * gw[c] * inv;
        m.b -= lr * gb * inv;
    }
    return m;
}

// mean binary cross-entropy on one fold (monotonicity fixture)
inline double logistic_loss(const PairDataset& ds, const LogisticModel& m, int fold) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].fold != fold)
            continue;
        const double p = std::clamp(m.predict(ds.features.row(i)), 1e-12, 1.0 - 1e-12);
        acc -= ds.samples[i].label ? std::log(p) : std::log(1.0 - p);
        ++count;
    }
    return count ? acc / static_cast<double>(count) : 0.0;
}

// Out-of-fold probability for every positive sample (graph edge order):
// the model trained on fold f predicts the edges in fold 1-f.
inline std::vector<double> probe_edge_predictions(const PairDataset& ds, double lr, int epochs) {
    std::vector<double> preds(ds.n_pos, 0.0);
    for (int f = 0; f < 2; ++f) {
        const LogisticModel m = train_logistic(ds, f, lr, epochs);
        for (std::size_t i = 0; i < ds.n_pos; ++i)
            if (ds.samples[i].fold == 1 - f)
                preds[i] = m.predict(ds.features.row(i));
    }
    return preds;
}

enum class KiLabel { Integrated, NonIntegrated, Other };

// A triple is integrated when the base probe misses it but the enhanced
// probe finds it; non-integrated when both miss it.
inline std::vector<KiLabel> ki_label_by_probe(std::span<const double> base_preds,
                                              std::span<const double> enhanced_preds,
                                              double threshold = 0.5) {
    if (base_preds.size() != enhanced_preds.size())
        throw DataError("ki_label_by_probe: prediction lists misaligned");
    std::vector<KiLabel> out(base_preds.size());
    for (std::size_t i = 0; i < base_preds.size(); ++i) {
        const bool base_learned = base_preds[i] >= threshold;
        const bool enh_learned = enhanced_preds[i] >= threshold;
        if (!base_learned && enh_learned)
            out[i] = KiLabel::Integrated;
        else if (!base_learned && !enh_learned)
            out[i] = KiLabel::NonIntegrated;
        else
            out[i] = KiLabel::Other;
    }
    return out;
}

struct VarianceConfig {
    std::size_t neg_per_pos = 1;
    double probe_lr = 0.1;
    int probe_epochs = 200;
    TrainConfig gcs; // seed field is overwritten per run
    double edge_threshold = 0.1;
    double probe_threshold = 0.5;
};

struct VarianceResult {
    std::vector<double> probe_entropy;   // per edge, bits
    std::vector<double> gcs_entropy;     // per edge, bits
    std::vector<double> control_entropy; // Bernoulli(0.5) control
};

// K seeded runs of the full linear-probe pipeline and the full GCS pipeline;
// per-edge classification entropy for both plus a random-guess control. Runs
// are independent and deterministic per seed, so they may fan out across
// workers without changing any result.
inline VarianceResult variance_experiment(const Graph& g, const Matrix& x_base,
                                          const Matrix& x_enh, const std::vector<std::uint64_t>& seeds,
                                          const VarianceConfig& cfg, unsigned workers = 1) {
    if (seeds.size() < 2)
        throw UsageError("variance_experiment: need at least 2 runs");
    const std::size_t n_edges = g.edge_count();
    const std::size_t runs = seeds.size();
    std::vector<std::vector<char>> probe_runs(runs), gcs_runs(runs), control_runs(runs);

    auto run_one = [&](std::size_t r) {
        const std::uint64_t seed = seeds[r];
        // linear probe pipeline
        PairDataset ds_base = build_pairs(g, x_base, cfg.neg_per_pos, seed);
        PairDataset ds_enh = build_pairs(g, x_enh, cfg.neg_per_pos, seed);
        const auto preds_base = probe_edge_predictions(ds_base, cfg.probe_lr, cfg.probe_epochs);
        const auto preds_enh = probe_edge_predictions(ds_enh, cfg.probe_lr, cfg.probe_epochs);
        const auto labels = ki_label_by_probe(preds_base, preds_enh, cfg.probe_threshold);
        std::vector<char> probe_flags(n_edges);
        for (std::size_t e = 0; e < n_edges; ++e)
            probe_flags[e] = labels[e] == KiLabel::Integrated ? 1 : 0;
        probe_runs[r] = std::move(probe_flags);

        // GCS pipeline
        TrainConfig tc = cfg.gcs;
        tc.seed = seed;
        const TrainResult tr = train(g, x_base, x_enh, tc);
        const GcsForward fwd = gcs_forward(tr.gcs, g, x_base, /*training=*/false);
        const auto ea = edge_attention(fwd.attn, g);
        std::vector<char> gcs_flags(n_edges);
        for (std::size_t e = 0; e < n_edges; ++e)
            gcs_flags[e] = ea[e].mean > cfg.edge_threshold ? 1 : 0;
        gcs_runs[r] = std::move(gcs_flags);

        // random-guess control
        SplitMix64 rng(derive_seed(seed, 0xCC));
        std::vector<char> control_flags(n_edges);
        for (std::size_t e = 0; e < n_edges; ++e)
            control_flags[e] = rng.bernoulli(0.5) ? 1 : 0;
        control_runs[r] = std::move(control_flags);
    };

    if (workers <= 1) {
        for (std::size_t r = 0; r < runs; ++r)
            run_one(r);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (std::size_t r = next.fetch_add(1); r < runs; r = next.fetch_add(1))
                run_one(r);
        };
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < std::min<std::size_t>(workers, runs); ++t)
            pool.emplace_back(worker);
        worker();
        for (auto& t : pool)
            t.join();
    }

    VarianceResult out;
    out.probe_entropy = entropy_of_runs(probe_runs);
    out.gcs_entropy = entropy_of_runs(gcs_runs);
    out.control_entropy = entropy_of_runs(control_runs);
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty())
        throw DataError("median: empty input");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace gcs
