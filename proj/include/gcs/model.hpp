#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gcs/error.hpp"
#include "gcs/graph.hpp"
#include "gcs/matrix.hpp"
#include "gcs/rng.hpp"
#include "gcs/spectral.hpp"

namespace gcs {

// ELU with alpha = 1. The derivative is recovered from the activation value
// (y > 0 ? 1 : y + 1), so pre-activations never need caching.
inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_prime_from_value(double y) { return y > 0.0 ? 1.0 : y + 1.0; }

// Simulator weights: bijective input MLP, H attention heads, bijective output
// MLP. All three MLP weight matrices are square so the nonsingularity check
// applies; wv is square so the convolution maps dim -> dim.
struct GcsParams {
    std::size_t dim = 0;
    std::size_t head_count = 0;
    std::size_t attn_dim = 0;
    double temperature = 0.1;
    double dropout_rate = 0.2;

    Matrix w_in;                 // dim x dim
    std::vector<double> b_in;    // dim
    std::vector<Matrix> wq, wk;  // head_count x (attn_dim x dim)
    std::vector<Matrix> wv;      // head_count x (dim x dim)
    Matrix w_out;                // dim x dim
    std::vector<double> b_out;   // dim

    void validate() const {
        if (dim == 0 || head_count == 0 || attn_dim == 0)
            throw DataError("GcsParams: dims must be positive");
        if (!(temperature > 0.0))
            throw DataError("GcsParams: temperature must be > 0");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw DataError("GcsParams: dropout_rate must be in [0,1)");
        require_shape(w_in, dim, dim, "w_in");
        require_shape(w_out, dim, dim, "w_out");
        if (b_in.size() != dim || b_out.size() != dim)
            throw DataError("GcsParams: bias size mismatch");
        if (wq.size() != head_count || wk.size() != head_count || wv.size() != head_count)
            throw DataError("GcsParams: per-head matrix count mismatch");
        for (std::size_t h = 0; h < head_count; ++h) {
            require_shape(wq[h], attn_dim, dim, "wq");
            require_shape(wk[h], attn_dim, dim, "wk");
            require_shape(wv[h], dim, dim, "wv");
        }
    }
};

// Gradients, same shapes as GcsParams. Temperature is differentiated for the
// finite-difference harness but treated as a fixed hyperparameter by the
// trainer.
struct GcsGrads {
    Matrix w_in;
    std::vector<double> b_in;
    std::vector<Matrix> wq, wk, wv;
    Matrix w_out;
    std::vector<double> b_out;
    double temperature = 0.0;

    static GcsGrads zeros_like(const GcsParams& p) {
        GcsGrads g;
        g.w_in = Matrix(p.dim, p.dim);
        g.b_in.assign(p.dim, 0.0);
        g.w_out = Matrix(p.dim, p.dim);
        g.b_out.assign(p.dim, 0.0);
        g.wq.assign(p.head_count, Matrix(p.attn_dim, p.dim));
        g.wk.assign(p.head_count, Matrix(p.attn_dim, p.dim));
        g.wv.assign(p.head_count, Matrix(p.dim, p.dim));
        return g;
    }
};

inline std::uint64_t fingerprint_add(std::uint64_t h, const double* v, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        static_assert(sizeof(double) == sizeof(std::uint64_t));
        std::memcpy(&bits, &v[i], 8);
        h ^= bits;
        h *= 0x100000001B3ull; // FNV prime
    }
    return h;
}

inline std::uint64_t params_fingerprint(const GcsParams& p) {
    std::uint64_t h = 0xCBF29CE484222325ull ^ p.dim ^ (p.head_count << 16) ^ (p.attn_dim << 32);
    h = fingerprint_add(h, &p.temperature, 1);
    h = fingerprint_add(h, &p.dropout_rate, 1);
    h = fingerprint_add(h, p.w_in.data(), p.w_in.size());
    h = fingerprint_add(h, p.b_in.data(), p.b_in.size());
    for (std::size_t i = 0; i < p.head_count; ++i) {
        h = fingerprint_add(h, p.wq[i].data(), p.wq[i].size());
        h = fingerprint_add(h, p.wk[i].data(), p.wk[i].size());
        h = fingerprint_add(h, p.wv[i].data(), p.wv[i].size());
    }
    h = fingerprint_add(h, p.w_out.data(), p.w_out.size());
    h = fingerprint_add(h, p.b_out.data(), p.b_out.size());
    return h;
}

// Square matrices start at identity plus uniform noise so they are near-
// orthogonal and pass the nonsingularity check; projections are plain
// uniform. noise_scale = 0 is a test hook giving exact identities.
inline GcsParams init_params(std::size_t dim, std::size_t head_count, std::size_t attn_dim,
                             double temperature, std::uint64_t seed, double noise_scale = 1.0,
                             double dropout_rate = 0.2) {
    GcsParams p;
    p.dim = dim;
    p.head_count = head_count;
    p.attn_dim = attn_dim;
    p.temperature = temperature;
    p.dropout_rate = dropout_rate;

    const double s_sq = noise_scale / std::sqrt(static_cast<double>(dim));
    const double s_pr = noise_scale / std::sqrt(static_cast<double>(attn_dim));

    for (int attempt = 0; attempt < 16; ++attempt) {
        SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
        auto square = [&]() {
            Matrix m = Matrix::identity(dim);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j)
                    m(i, j) += rng.uniform(-s_sq, s_sq);
            return m;
        };
        auto projection = [&]() {
            Matrix m(attn_dim, dim);
            for (std::size_t i = 0; i < attn_dim; ++i)
                for (std::size_t j = 0; j < dim; ++j)
                    m(i, j) = rng.uniform(-s_pr, s_pr);
            return m;
        };

        p.w_in = square();
        p.b_in.assign(dim, 0.0);
        p.wq.clear();
        p.wk.clear();
        p.wv.clear();
        for (std::size_t h = 0; h < head_count; ++h) {
            p.wq.push_back(projection());
            p.wk.push_back(projection());
            p.wv.push_back(square());
        }
        p.w_out = square();
        p.b_out.assign(dim, 0.0);

        bool ok = check_bijective_weight(p.w_in, 0.0).ok && check_bijective_weight(p.w_out, 0.0).ok;
        for (std::size_t h = 0; ok && h < head_count; ++h)
            ok = check_bijective_weight(p.wv[h], 0.0).ok;
        if (ok)
            return p;
    }
    throw NumericError("init_params: could not draw nonsingular square weights");
}

// Attention coefficients in CSR layout over each node's neighborhood
// (sorted neighbor ids with the implicit self-loop inserted in order).
struct AttentionRecord {
    std::size_t node_count = 0;
    std::size_t head_count = 0;
    std::vector<std::size_t> offsets;        // node_count + 1
    std::vector<NodeId> targets;             // concatenated neighborhoods
    std::vector<std::vector<double>> head;   // head_count arrays, nnz each
    std::vector<double> mean;                // head average, nnz

    std::span<const NodeId> row_targets(std::size_t i) const {
        return {targets.data() + offsets[i], offsets[i + 1] - offsets[i]};
    }
    std::span<const double> row_mean(std::size_t i) const {
        return {mean.data() + offsets[i], offsets[i + 1] - offsets[i]};
    }
    std::span<const double> row_head(std::size_t h, std::size_t i) const {
        return {head[h].data() + offsets[i], offsets[i + 1] - offsets[i]};
    }

    // position of j in row i, or npos
    std::size_t find(std::size_t i, NodeId j) const {
        auto row = row_targets(i);
        auto it = std::lower_bound(row.begin(), row.end(), j);
        if (it == row.end() || *it != j)
            return std::string::npos;
        return offsets[i] + static_cast<std::size_t>(it - row.begin());
    }

    // head-averaged directed coefficient a_{i->j}
    double mean_coeff(std::size_t i, NodeId j) const {
        const std::size_t pos = find(i, j);
        if (pos == std::string::npos)
            throw DataError("attention: " + std::to_string(j) + " not in neighborhood of " +
                            std::to_string(i));
        return mean[pos];
    }

    double self_mean(std::size_t i) const { return mean_coeff(i, static_cast<NodeId>(i)); }
};

// mean over heads, recomputed from the per-head arrays
inline std::vector<double> head_average(const AttentionRecord& attn) {
    const std::size_t nnz = attn.targets.size();
    std::vector<double> avg(nnz, 0.0);
    for (std::size_t h = 0; h < attn.head_count; ++h)
        for (std::size_t k = 0; k < nnz; ++k)
            avg[k] += attn.head[h][k];
    const double inv = 1.0 / static_cast<double>(attn.head_count);
    for (double& v : avg)
        v *= inv;
    return avg;
}

// Everything backward needs; holding it in the result keeps forward pure.
struct GcsForward {
    Matrix z;              // simulator output, n x dim
    AttentionRecord attn;

    // cached intermediates
    Matrix x;              // input copy
    Matrix u;              // post-ELU input MLP
    Matrix u_drop;         // after dropout (== u in eval mode)
    Matrix mask_u;         // scaled keep masks; empty in eval mode
    std::vector<Matrix> qu, ku; // per head, n x attn_dim
    std::vector<Matrix> head_out; // per head post-ELU, n x dim
    Matrix o;              // head mean
    Matrix o_drop;
    Matrix mask_o;
    bool training = false;
    std::uint64_t params_hash = 0;
};

namespace detail {

inline void attention_topology(const Graph& g, AttentionRecord& attn) {
    const std::size_t n = g.node_count();
    attn.node_count = n;
    attn.offsets.assign(n + 1, 0);
    for (NodeId i = 0; i < n; ++i)
        attn.offsets[i + 1] = attn.offsets[i] + g.degree(i) + 1;
    attn.targets.resize(attn.offsets[n]);
    for (NodeId i = 0; i < n; ++i) {
        auto nb = g.neighbors(i);
        std::size_t pos = attn.offsets[i];
        bool self_placed = false;
        for (NodeId j : nb) {
            if (!self_placed && i < j) {
                attn.targets[pos++] = i;
                self_placed = true;
            }
            attn.targets[pos++] = j;
        }
        if (!self_placed)
            attn.targets[pos++] = i;
    }
}

inline Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::uint64_t seed) {
    Matrix m(rows, cols);
    SplitMix64 rng(seed);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(i, j) = rng.next_double() >= rate ? keep_scale : 0.0;
    return m;
}

inline void apply_mask(const Matrix& src, const Matrix& mask, Matrix& dst) {
    dst = src;
    if (mask.empty())
        return;
    for (std::size_t i = 0; i < src.rows(); ++i)
        for (std::size_t j = 0; j < src.cols(); ++j)
            dst(i, j) = src(i, j) * mask(i, j);
}

} // namespace detail

// One pass of MLP -> multi-head graph attention convolution -> MLP. Heads are
// combined by averaging so the output stays dim-dimensional. Deterministic:
// fixed neighbor order, softmax with max subtraction, dropout mask drawn from
// the seed only in training mode.
inline GcsForward gcs_forward(const GcsParams& p, const Graph& g, const Matrix& x, bool training,
                              std::uint64_t seed = 0) {
    p.validate();
    const std::size_t n = g.node_count();
    if (x.rows() != n)
        throw DataError("gcs_forward: embedding rows (" + std::to_string(x.rows()) +
                        ") != node count (" + std::to_string(n) + ")");
    if (x.cols() != p.dim)
        throw DataError("gcs_forward: embedding dim != model dim");

    const std::size_t d = p.dim, H = p.head_count;
    GcsForward f;
    f.training = training;
    f.params_hash = params_fingerprint(p);
    f.x = x;

    // input MLP
    f.u = Matrix(n, d);
    std::vector<double> tmp(d);
    for (std::size_t i = 0; i < n; ++i) {
        matvec(p.w_in, x.row(i), tmp);
        auto ur = f.u.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            ur[c] = elu(tmp[c] + p.b_in[c]);
            if (!std::isfinite(ur[c]))
                throw NumericError("gcs_forward: non-finite activation at node " + std::to_string(i));
        }
    }
    const bool drop = training && p.dropout_rate > 0.0;
    if (drop)
        f.mask_u = detail::dropout_mask(n, d, p.dropout_rate, derive_seed(seed, 0x11));
    detail::apply_mask(f.u, f.mask_u, f.u_drop);

    detail::attention_topology(g, f.attn);
    f.attn.head_count = H;
    f.attn.head.assign(H, std::vector<double>(f.attn.targets.size(), 0.0));

    const Matrix& u_hat_t_src = f.u_drop;
    f.qu.resize(H);
    f.ku.resize(H);
    f.head_out.assign(H, Matrix(n, d));
    f.o = Matrix(n, d);

    std::vector<double> logits;
    std::vector<double> svec(d);
    for (std::size_t h = 0; h < H; ++h) {
        f.qu[h] = matmul(u_hat_t_src, transpose(p.wq[h]));
        f.ku[h] = matmul(u_hat_t_src, transpose(p.wk[h]));
        const Matrix vu = matmul(u_hat_t_src, transpose(p.wv[h]));

        auto& coeffs = f.attn.head[h];
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t begin = f.attn.offsets[i], end = f.attn.offsets[i + 1];
            logits.resize(end - begin);
            double max_logit = -std::numeric_limits<double>::infinity();
            for (std::size_t kpos = begin; kpos < end; ++kpos) {
                const NodeId j = f.attn.targets[kpos];
                const double l = dot(f.qu[h].row(i), f.ku[h].row(j)) / p.temperature;
                logits[kpos - begin] = l;
                max_logit = std::max(max_logit, l);
            }
            double denom = 0.0;
            for (double& l : logits) {
                l = std::exp(l - max_logit);
                denom += l;
            }
            if (!std::isfinite(denom) || denom <= 0.0)
                throw NumericError("gcs_forward: softmax failure at node " + std::to_string(i));
            std::fill(svec.begin(), svec.end(), 0.0);
            for (std::size_t kpos = begin; kpos < end; ++kpos) {
                const double a = logits[kpos - begin] / denom;
                coeffs[kpos] = a;
                const auto vj = vu.row(f.attn.targets[kpos]);
                for (std::size_t c = 0; c < d; ++c)
                    svec[c] += a * vj[c];
            }
            auto oh = f.head_out[h].row(i);
            auto omean = f.o.row(i);
            for (std::size_t c = 0; c < d; ++c) {
                oh[c] = elu(svec[c]);
                if (!std::isfinite(oh[c]))
                    throw NumericError("gcs_forward: non-finite head output at node " +
                                       std::to_string(i));
                omean[c] += oh[c] / static_cast<double>(H);
            }
        }
    }

    f.attn.mean = head_average(f.attn);

    if (drop)
        f.mask_o = detail::dropout_mask(n, d, p.dropout_rate, derive_seed(seed, 0x22));
    detail::apply_mask(f.o, f.mask_o, f.o_drop);

    // output MLP
    f.z = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        matvec(p.w_out, f.o_drop.row(i), tmp);
        auto zr = f.z.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            zr[c] = tmp[c] + p.b_out[c];
            if (!std::isfinite(zr[c]))
                throw NumericError("gcs_forward: non-finite output at node " + std::to_string(i));
        }
    }
    return f;
}

struct GcsBackward {
    GcsGrads grads;
    Matrix grad_x;
};

// Exact reverse-mode gradients of gcs_forward, dropout masks replayed from
// the cache.
inline GcsBackward gcs_backward(const GcsParams& p, const GcsForward& f, const Matrix& grad_z) {
    if (f.params_hash != params_fingerprint(p))
        throw DataError("gcs_backward: cache does not match these parameters");
    const std::size_t n = f.z.rows(), d = p.dim, H = p.head_count;
    if (grad_z.rows() != n || grad_z.cols() != d)
        throw DataError("gcs_backward: grad_z shape mismatch");

    GcsBackward out;
    out.grads = GcsGrads::zeros_like(p);
    out.grad_x = Matrix(n, d);

    // output MLP
    Matrix d_o(n, d);
    {
        std::vector<double> tmp(d);
        for (std::size_t i = 0; i < n; ++i) {
            const auto gz = grad_z.row(i);
            add_outer(out.grads.w_out, gz, f.o_drop.row(i));
            for (std::size_t c = 0; c < d; ++c)
                out.grads.b_out[c] += gz[c];
            matvec_transposed(p.w_out, gz, tmp);
            auto dor = d_o.row(i);
            if (!f.mask_o.empty()) {
                const auto mr = f.mask_o.row(i);
                for (std::size_t c = 0; c < d; ++c)
                    dor[c] = tmp[c] * mr[c];
            } else {
                for (std::size_t c = 0; c < d; ++c)
                    dor[c] = tmp[c];
            }
        }
    }

    Matrix d_uhat(n, d);
    const double inv_h = 1.0 / static_cast<double>(H);
    std::vector<double> ds(d);
    std::vector<double> row_ga;

    for (std::size_t h = 0; h < H; ++h) {
        const Matrix vu = matmul(f.u_drop, transpose(p.wv[h]));
        Matrix d_qu(n, p.attn_dim), d_ku(n, p.attn_dim), d_vu(n, d);
        const auto& coeffs = f.attn.head[h];

        for (std::size_t i = 0; i < n; ++i) {
            const auto oh = f.head_out[h].row(i);
            const auto dor = d_o.row(i);
            for (std::size_t c = 0; c < d; ++c)
                ds[c] = dor[c] * inv_h * elu_prime_from_value(oh[c]);

            const std::size_t begin = f.attn.offsets[i], end = f.attn.offsets[i + 1];
            row_ga.resize(end - begin);
            double inner = 0.0;
            for (std::size_t kpos = begin; kpos < end; ++kpos) {
                const NodeId j = f.attn.targets[kpos];
                row_ga[kpos - begin] = dot(ds, vu.row(j));
                inner += coeffs[kpos] * row_ga[kpos - begin];
            }
            const auto qi = f.qu[h].row(i);
            auto dqi = d_qu.row(i);
            for (std::size_t kpos = begin; kpos < end; ++kpos) {
                const NodeId j = f.attn.targets[kpos];
                const double dl = coeffs[kpos] * (row_ga[kpos - begin] - inner);
                if (dl != 0.0) {
                    const auto kj = f.ku[h].row(j);
                    const double scale = dl / p.temperature;
                    auto dkj = d_ku.row(j);
                    for (std::size_t c = 0; c < p.attn_dim; ++c) {
                        dqi[c] += scale * kj[c];
                        dkj[c] += scale * qi[c];
                    }
                    // logit = (q.k)/t, so d/dt = -logit/t
                    out.grads.temperature -= dl * dot(qi, kj) / (p.temperature * p.temperature);
                }
                const double a = coeffs[kpos];
                auto dvj = d_vu.row(j);
                for (std::size_t c = 0; c < d; ++c)
                    dvj[c] += a * ds[c];
            }
        }

        // project attention-space gradients back to parameters and u_hat
        Matrix tq = matmul(transpose(d_qu), f.u_drop);
        Matrix tk = matmul(transpose(d_ku), f.u_drop);
        Matrix tv = matmul(transpose(d_vu), f.u_drop);
        out.grads.wq[h] = std::move(tq);
        out.grads.wk[h] = std::move(tk);
        out.grads.wv[h] = std::move(tv);
        const Matrix back_q = matmul(d_qu, p.wq[h]);
        const Matrix back_k = matmul(d_ku, p.wk[h]);
        const Matrix back_v = matmul(d_vu, p.wv[h]);
        for (std::size_t i = 0; i < n; ++i) {
            auto acc = d_uhat.row(i);
            const auto bq = back_q.row(i);
            const auto bk = back_k.row(i);
            const auto bv = back_v.row(i);
            for (std::size_t c = 0; c < d; ++c)
                acc[c] += bq[c] + bk[c] + bv[c];
        }
    }

    // input MLP
    std::vector<double> dp(d), tmp(d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto du = d_uhat.row(i);
        const auto ur = f.u.row(i);
        if (!f.mask_u.empty()) {
            const auto mr = f.mask_u.row(i);
            for (std::size_t c = 0; c < d; ++c)
                dp[c] = du[c] * mr[c] * elu_prime_from_value(ur[c]);
        } else {
            for (std::size_t c = 0; c < d; ++c)
                dp[c] = du[c] * elu_prime_from_value(ur[c]);
        }
        add_outer(out.grads.w_in, dp, f.x.row(i));
        for (std::size_t c = 0; c < d; ++c)
            out.grads.b_in[c] += dp[c];
        matvec_transposed(p.w_in, dp, tmp);
        auto gx = out.grad_x.row(i);
        for (std::size_t c = 0; c < d; ++c)
            gx[c] = tmp[c];
    }
    return out;
}

// Directed attention pair and its mean for one undirected edge.
struct EdgeAttention {
    double uv = 0.0; // a_{u->v}, head-averaged
    double vu = 0.0; // a_{v->u}, head-averaged
    double mean = 0.0;
};

// Aligned with graph.edges().
inline std::vector<EdgeAttention> edge_attention(const AttentionRecord& attn, const Graph& g) {
    if (attn.node_count != g.node_count())
        throw DataError("edge_attention: attention/graph mismatch");
    std::vector<EdgeAttention> out(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const auto& [u, v] = g.edges()[e];
        EdgeAttention ea;
        ea.uv = attn.mean_coeff(u, v);
        ea.vu = attn.mean_coeff(v, u);
        ea.mean = 0.5 * (ea.uv + ea.vu);
        out[e] = ea;
    }
    return out;
}

} // namespace gcs
