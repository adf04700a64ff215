#pragma once
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "gcs/error.hpp"
#include "gcs/graph.hpp"
#include "gcs/matrix.hpp"
#include "gcs/mi.hpp"
#include "gcs/model.hpp"
#include "gcs/rng.hpp"

namespace gcs {

// Flat per-element views over parameters/gradients, in one fixed order so the
// optimizer and the finite-difference harness walk the same layout.
namespace detail {

inline void collect(std::vector<double*>& out, Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        out.push_back(m.data() + i);
}
inline void collect(std::vector<double*>& out, std::vector<double>& v) {
    for (double& x : v)
        out.push_back(&x);
}

} // namespace detail

inline std::vector<double*> param_pointers(GcsParams& p, bool include_temperature = false) {
    std::vector<double*> out;
    detail::collect(out, p.w_in);
    detail::collect(out, p.b_in);
    for (std::size_t h = 0; h < p.head_count; ++h) {
        detail::collect(out, p.wq[h]);
        detail::collect(out, p.wk[h]);
        detail::collect(out, p.wv[h]);
    }
    detail::collect(out, p.w_out);
    detail::collect(out, p.b_out);
    if (include_temperature)
        out.push_back(&p.temperature);
    return out;
}

inline std::vector<double*> grad_pointers(GcsGrads& g, bool include_temperature = false) {
    std::vector<double*> out;
    detail::collect(out, g.w_in);
    detail::collect(out, g.b_in);
    for (std::size_t h = 0; h < g.wq.size(); ++h) {
        detail::collect(out, g.wq[h]);
        detail::collect(out, g.wk[h]);
        detail::collect(out, g.wv[h]);
    }
    detail::collect(out, g.w_out);
    detail::collect(out, g.b_out);
    if (include_temperature)
        out.push_back(&g.temperature);
    return out;
}

inline std::vector<double*> param_pointers(StatNetParams& s) {
    std::vector<double*> out;
    detail::collect(out, s.w1);
    detail::collect(out, s.b1);
    detail::collect(out, s.w2);
    out.push_back(&s.b2);
    return out;
}

inline std::vector<double*> grad_pointers(StatNetGrads& g) {
    std::vector<double*> out;
    detail::collect(out, g.w1);
    detail::collect(out, g.b1);
    detail::collect(out, g.w2);
    out.push_back(&g.b2);
    return out;
}

// Adam (Kingma & Ba) with bias correction; defaults lr 1e-3, beta 0.9/0.999,
// eps 1e-8.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<double> m, v;

    explicit AdamState(std::size_t n_params = 0, double learning_rate = 1e-3)
        : lr(learning_rate), m(n_params, 0.0), v(n_params, 0.0) {}

    void update(const std::vector<double*>& params, const std::vector<double*>& grads) {
        if (params.size() != m.size() || grads.size() != m.size())
            throw DataError("AdamState: parameter count mismatch");
        ++step_count;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double g = *grads[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            *params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

struct TrainConfig {
    int epochs = 200;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double dropout = 0.2;
    double temperature = 0.1;
    std::size_t heads = 8;
    std::size_t attn_dim = 64;
    std::size_t stat_hidden = 64;
    std::size_t subsample_nodes = 0; // 0 = full graph
    int log_every = 1;
    double init_noise = 1.0;

    void validate() const {
        if (epochs < 0 || lr < 0.0)
            throw UsageError("TrainConfig: epochs/lr must be non-negative");
        if (!(temperature > 0.0))
            throw UsageError("TrainConfig: temperature must be > 0");
        if (dropout < 0.0 || dropout >= 1.0)
            throw UsageError("TrainConfig: dropout must be in [0,1)");
        if (heads == 0 || attn_dim == 0 || stat_hidden == 0 || log_every <= 0)
            throw UsageError("TrainConfig: counts must be positive");
    }
};

struct TrainResult {
    GcsParams gcs;
    StatNetParams stat;
    std::vector<std::pair<int, double>> mi_curve; // (step, bound nats) before each update
};

// Joint full-batch Adam over simulator and statistic network. When
// subsample_nodes is set, optimization runs on an induced subgraph; callers
// extract attention on the full graph afterwards. Bit-deterministic given the
// config on a fixed platform.
inline TrainResult train(const Graph& g, const Matrix& x, const Matrix& h, const TrainConfig& cfg) {
    cfg.validate();
    if (x.rows() != g.node_count() || h.rows() != g.node_count())
        throw DataError("train: embedding rows != node count");
    if (!x.all_finite() || !h.all_finite())
        throw NumericError("train: non-finite input embedding");

    const Graph* train_graph = &g;
    Graph sub_storage;
    Matrix x_storage, h_storage;
    const Matrix* xt = &x;
    const Matrix* ht = &h;
    if (cfg.subsample_nodes > 0 && cfg.subsample_nodes < g.node_count()) {
        SubgraphSample sub = sample_subgraph(g, cfg.subsample_nodes, derive_seed(cfg.seed, 0xA0));
        x_storage = Matrix(sub.new_to_old.size(), x.cols());
        h_storage = Matrix(sub.new_to_old.size(), h.cols());
        for (std::size_t i = 0; i < sub.new_to_old.size(); ++i) {
            const NodeId old = sub.new_to_old[i];
            for (std::size_t c = 0; c < x.cols(); ++c)
                x_storage(i, c) = x(old, c);
            for (std::size_t c = 0; c < h.cols(); ++c)
                h_storage(i, c) = h(old, c);
        }
        sub_storage = std::move(sub.graph);
        train_graph = &sub_storage;
        xt = &x_storage;
        ht = &h_storage;
    }

    TrainResult res;
    res.gcs = init_params(x.cols(), cfg.heads, cfg.attn_dim, cfg.temperature,
                          derive_seed(cfg.seed, 0xA1), cfg.init_noise, cfg.dropout);
    res.stat = init_statnet(x.cols(), h.cols(), derive_seed(cfg.seed, 0xA2), cfg.stat_hidden);

    auto gcs_view = param_pointers(res.gcs);
    auto stat_view = param_pointers(res.stat);
    std::vector<double*> params = gcs_view;
    params.insert(params.end(), stat_view.begin(), stat_view.end());
    AdamState adam(params.size(), cfg.lr);

    for (int step = 0; step < cfg.epochs; ++step) {
        LossGrad lg;
        try {
            lg = loss_and_grad(res.gcs, res.stat, *train_graph, *xt, *ht,
                               derive_seed(cfg.seed, 0xB000 + static_cast<std::uint64_t>(step)));
        } catch (const NumericError& e) {
            throw NumericError("train: aborted at step " + std::to_string(step) + ": " + e.what());
        }
        if (!std::isfinite(lg.loss))
            throw NumericError("train: non-finite loss at step " + std::to_string(step));
        if (step % cfg.log_every == 0)
            res.mi_curve.emplace_back(step, lg.bound);

        auto g_gcs = grad_pointers(lg.gcs);
        auto g_stat = grad_pointers(lg.stat);
        std::vector<double*> grads = g_gcs;
        grads.insert(grads.end(), g_stat.begin(), g_stat.end());
        adam.update(params, grads);
    }
    return res;
}

// Analytic composite gradient vs central finite differences on a random
// subset of parameters (temperature included). Returns the worst relative
// error; pairs agreeing within 1e-8 absolute count as exact, matching the
// zero-gradient configurations.
inline double grad_check(const Graph& g, const Matrix& x, const Matrix& h, const TrainConfig& cfg,
                         std::size_t n_params_sampled) {
    cfg.validate();
    if (g.node_count() > 50)
        throw UsageError("grad_check: instance too large (max 50 nodes)");
    GcsParams gcs = init_params(x.cols(), cfg.heads, cfg.attn_dim, cfg.temperature,
                                derive_seed(cfg.seed, 0xA1), cfg.init_noise, cfg.dropout);
    StatNetParams stat = init_statnet(x.cols(), h.cols(), derive_seed(cfg.seed, 0xA2),
                                      cfg.stat_hidden);
    const std::uint64_t loss_seed = derive_seed(cfg.seed, 0xC0);

    LossGrad lg = loss_and_grad(gcs, stat, g, x, h, loss_seed);
    auto pv = param_pointers(gcs, /*include_temperature=*/true);
    auto sv = param_pointers(stat);
    pv.insert(pv.end(), sv.begin(), sv.end());
    auto gv = grad_pointers(lg.gcs, /*include_temperature=*/true);
    auto gs = grad_pointers(lg.stat);
    gv.insert(gv.end(), gs.begin(), gs.end());

    SplitMix64 rng(derive_seed(cfg.seed, 0xC1));
    double worst = 0.0;
    for (std::size_t k = 0; k < n_params_sampled; ++k) {
        const std::size_t idx = static_cast<std::size_t>(rng.below(pv.size()));
        double* theta = pv[idx];
        const double saved = *theta;
        const double step = 1e-6 * (1.0 + std::abs(saved));
        *theta = saved + step;
        const double lp = loss_value(gcs, stat, g, x, h, loss_seed);
        *theta = saved - step;
        const double lm = loss_value(gcs, stat, g, x, h, loss_seed);
        *theta = saved;
        const double fd = (lp - lm) / (2.0 * step);
        const double an = *gv[idx];
        const double diff = std::abs(an - fd);
        if (diff > 1e-8)
            worst = std::max(worst, diff / std::max(std::abs(an), std::abs(fd)));
    }
    return worst;
}

// Standalone statistic-network trainer for MI estimation on fixed sample
// pairs (the Gaussian calibration path). Fresh permutation per step.
struct StatTrainResult {
    StatNetParams stat;
    std::vector<double> bound_curve;
};

inline StatTrainResult train_statnet(const Matrix& z, const Matrix& h, int epochs, double lr,
                                     std::uint64_t seed, std::size_t hidden = 64) {
    if (z.rows() != h.rows())
        throw DataError("train_statnet: row count mismatch");
    StatTrainResult res;
    res.stat = init_statnet(z.cols(), h.cols(), derive_seed(seed, 1), hidden);
    auto view = param_pointers(res.stat);
    AdamState adam(view.size(), lr);
    res.bound_curve.reserve(static_cast<std::size_t>(epochs));
    for (int step = 0; step < epochs; ++step) {
        const auto perm = random_permutation(z.rows(), derive_seed(seed, 0xD000 + static_cast<std::uint64_t>(step)));
        DvCache cache;
        const double bound = dv_lower_bound(res.stat, z, h, perm, &cache);
        if (!std::isfinite(bound))
            throw NumericError("train_statnet: non-finite bound at step " + std::to_string(step));
        res.bound_curve.push_back(bound);
        DvBackward dvb = dv_backward(res.stat, z, h, cache, /*d_value=*/-1.0);
        auto gview = grad_pointers(dvb.stat);
        adam.update(view, gview);
    }
    return res;
}

// Converged-bound estimate: average the bound over fresh permutations of the
// trained statistic network.
inline double evaluate_bound(const StatNetParams& stat, const Matrix& z, const Matrix& h,
                             int n_perms, std::uint64_t seed) {
    double acc = 0.0;
    for (int k = 0; k < n_perms; ++k)
        acc += dv_lower_bound(stat, z, h,
                              random_permutation(z.rows(), derive_seed(seed, static_cast<std::uint64_t>(k))));
    return acc / static_cast<double>(n_perms);
}

} // namespace gcs
