#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gcs/error.hpp"
#include "gcs/matrix.hpp"
#include "gcs/model.hpp"
#include "gcs/rng.hpp"

namespace gcs {

// Statistic network T(z, h): concat -> hidden (ELU) -> scalar. Hidden width
// 64 by default; the two layers are deliberately not bijective.
struct StatNetParams {
    std::size_t z_dim = 0, h_dim = 0, hidden = 64;
    Matrix w1;              // hidden x (z_dim + h_dim)
    std::vector<double> b1; // hidden
    std::vector<double> w2; // hidden
    double b2 = 0.0;

    void validate() const {
        if (z_dim == 0 || h_dim == 0 || hidden == 0)
            throw DataError("StatNetParams: dims must be positive");
        require_shape(w1, hidden, z_dim + h_dim, "stat w1");
        if (b1.size() != hidden || w2.size() != hidden)
            throw DataError("StatNetParams: layer size mismatch");
    }
};

struct StatNetGrads {
    Matrix w1;
    std::vector<double> b1, w2;
    double b2 = 0.0;

    static StatNetGrads zeros_like(const StatNetParams& s) {
        StatNetGrads g;
        g.w1 = Matrix(s.hidden, s.z_dim + s.h_dim);
        g.b1.assign(s.hidden, 0.0);
        g.w2.assign(s.hidden, 0.0);
        return g;
    }
};

inline StatNetParams init_statnet(std::size_t z_dim, std::size_t h_dim, std::uint64_t seed,
                                  std::size_t hidden = 64) {
    StatNetParams s;
    s.z_dim = z_dim;
    s.h_dim = h_dim;
    s.hidden = hidden;
    SplitMix64 rng(seed);
    const std::size_t in = z_dim + h_dim;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    s.w1 = Matrix(hidden, in);
    for (std::size_t i = 0; i < hidden; ++i)
        for (std::size_t j = 0; j < in; ++j)
            s.w1(i, j) = rng.uniform(-s1, s1);
    s.b1.assign(hidden, 0.0);
    s.w2.resize(hidden);
    for (std::size_t i = 0; i < hidden; ++i)
        s.w2[i] = rng.uniform(-s2, s2);
    s.b2 = 0.0;
    return s;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    SplitMix64 rng(seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);
    return perm;
}

struct DvCache {
    Matrix hid_joint, hid_marg; // post-ELU hidden, n x hidden
    std::vector<double> t_joint, t_marg;
    std::vector<std::size_t> perm;
};

namespace detail {

inline double statnet_eval(const StatNetParams& s, std::span<const double> z,
                           std::span<const double> h, std::span<double> hid_out) {
    const std::size_t in = s.z_dim + s.h_dim;
    double t = s.b2;
    for (std::size_t r = 0; r < s.hidden; ++r) {
        double acc = s.b1[r];
        const double* w = s.w1.data() + r * in;
        for (std::size_t c = 0; c < s.z_dim; ++c)
            acc += w[c] * z[c];
        for (std::size_t c = 0; c < s.h_dim; ++c)
            acc += w[s.z_dim + c] * h[c];
        const double a = elu(acc);
        hid_out[r] = a;
        t += s.w2[r] * a;
    }
    return t;
}

} // namespace detail

// Donsker-Varadhan lower bound on MI(z; h):
//   mean_i T(z_i, h_i) - log( mean_i exp(T(z_i, h_perm(i))) )
// Joint pairs are index-aligned rows; the permutation provides marginal
// pairs. The log term goes through log-sum-exp.
inline double dv_lower_bound(const StatNetParams& s, const Matrix& z, const Matrix& h,
                             const std::vector<std::size_t>& perm, DvCache* cache = nullptr) {
    s.validate();
    const std::size_t n = z.rows();
    if (n < 2)
        throw DataError("dv_lower_bound: need at least 2 samples");
    if (h.rows() != n)
        throw DataError("dv_lower_bound: row count mismatch");
    if (z.cols() != s.z_dim || h.cols() != s.h_dim)
        throw DataError("dv_lower_bound: dim mismatch with statistic network");
    if (perm.size() != n)
        throw DataError("dv_lower_bound: bad permutation length");

    Matrix hid_joint(n, s.hidden), hid_marg(n, s.hidden);
    std::vector<double> t_joint(n), t_marg(n);
    for (std::size_t i = 0; i < n; ++i) {
        t_joint[i] = detail::statnet_eval(s, z.row(i), h.row(i), hid_joint.row(i));
        t_marg[i] = detail::statnet_eval(s, z.row(i), h.row(perm[i]), hid_marg.row(i));
        if (!std::isfinite(t_joint[i]) || !std::isfinite(t_marg[i]))
            throw NumericError("dv_lower_bound: non-finite statistic at sample " + std::to_string(i));
    }

    double mean_joint = 0.0;
    for (double t : t_joint)
        mean_joint += t;
    mean_joint /= static_cast<double>(n);

    const double m = *std::max_element(t_marg.begin(), t_marg.end());
    double sum_exp = 0.0;
    for (double t : t_marg)
        sum_exp += std::exp(t - m);
    const double log_mean_exp = m + std::log(sum_exp) - std::log(static_cast<double>(n));

    if (cache) {
        cache->hid_joint = std::move(hid_joint);
        cache->hid_marg = std::move(hid_marg);
        cache->t_joint = std::move(t_joint);
        cache->t_marg = std::move(t_marg);
        cache->perm = perm;
    }
    return mean_joint - log_mean_exp;
}

struct DvBackward {
    StatNetGrads stat;
    Matrix grad_z; // n x z_dim
};

// Gradient of (d_value * bound) w.r.t. statistic net and Z. H is data.
inline DvBackward dv_backward(const StatNetParams& s, const Matrix& z, const Matrix& h,
                              const DvCache& cache, double d_value) {
    const std::size_t n = z.rows();
    DvBackward out;
    out.stat = StatNetGrads::zeros_like(s);
    out.grad_z = Matrix(n, s.z_dim);

    // d bound / d T_joint_i = 1/n ; d bound / d T_marg_i = -softmax(T_marg)_i
    const double m = *std::max_element(cache.t_marg.begin(), cache.t_marg.end());
    double sum_exp = 0.0;
    for (double t : cache.t_marg)
        sum_exp += std::exp(t - m);

    const std::size_t in = s.z_dim + s.h_dim;
    std::vector<double> dhid(s.hidden);
    auto backprop_pair = [&](double dt, std::span<const double> hid, std::span<const double> zrow,
                             std::span<const double> hrow, std::span<double> gz) {
        out.stat.b2 += dt;
        for (std::size_t r = 0; r < s.hidden; ++r) {
            out.stat.w2[r] += dt * hid[r];
            dhid[r] = dt * s.w2[r] * elu_prime_from_value(hid[r]);
        }
        for (std::size_t r = 0; r < s.hidden; ++r) {
            const double dr = dhid[r];
            if (dr == 0.0)
                continue;
            double* gw = out.stat.w1.data() + r * in;
            const double* w = s.w1.data() + r * in;
            for (std::size_t c = 0; c < s.z_dim; ++c) {
                gw[c] += dr * zrow[c];
                gz[c] += dr * w[c];
            }
            for (std::size_t c = 0; c < s.h_dim; ++c)
                gw[s.z_dim + c] += dr * hrow[c];
            out.stat.b1[r] += dr;
        }
    };

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dt_joint = d_value * inv_n;
        backprop_pair(dt_joint, cache.hid_joint.row(i), z.row(i), h.row(i), out.grad_z.row(i));
        const double soft = std::exp(cache.t_marg[i] - m) / sum_exp;
        const double dt_marg = -d_value * soft;
        backprop_pair(dt_marg, cache.hid_marg.row(i), z.row(i), h.row(cache.perm[i]),
                      out.grad_z.row(i));
    }
    return out;
}

struct LossGrad {
    double loss = 0.0;  // = -bound
    double bound = 0.0; // nats
    GcsGrads gcs;
    StatNetGrads stat;
};

// Training objective: loss = -DV_bound(T(GCS(x), h)). Gradients flow through
// both the statistic network and the whole simulator forward pass. A fresh
// permutation and fresh dropout masks are drawn from the seed on every call.
inline LossGrad loss_and_grad(const GcsParams& gcs, const StatNetParams& stat, const Graph& g,
                              const Matrix& x, const Matrix& h, std::uint64_t seed) {
    if (h.rows() != g.node_count())
        throw DataError("loss_and_grad: enhanced embedding rows != node count");
    GcsForward fwd = gcs_forward(gcs, g, x, /*training=*/true, derive_seed(seed, 1));
    const auto perm = random_permutation(g.node_count(), derive_seed(seed, 2));
    DvCache cache;
    const double bound = dv_lower_bound(stat, fwd.z, h, perm, &cache);

    LossGrad out;
    out.bound = bound;
    out.loss = -bound;
    DvBackward dvb = dv_backward(stat, fwd.z, h, cache, /*d_value=*/-1.0);
    out.stat = std::move(dvb.stat);
    out.gcs = gcs_backward(gcs, fwd, dvb.grad_z).grads;
    return out;
}

// Loss without gradients, same seed convention (used by the finite-difference
// harness).
inline double loss_value(const GcsParams& gcs, const StatNetParams& stat, const Graph& g,
                         const Matrix& x, const Matrix& h, std::uint64_t seed) {
    if (h.rows() != g.node_count())
        throw DataError("loss_value: enhanced embedding rows != node count");
    GcsForward fwd = gcs_forward(gcs, g, x, /*training=*/true, derive_seed(seed, 1));
    const auto perm = random_permutation(g.node_count(), derive_seed(seed, 2));
    return -dv_lower_bound(stat, fwd.z, h, perm);
}

} // namespace gcs
