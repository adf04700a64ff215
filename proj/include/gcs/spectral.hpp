#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "gcs/error.hpp"
#include "gcs/graph.hpp"
#include "gcs/matrix.hpp"

namespace gcs {

// L_n = I - D^{-1/2} A D^{-1/2}. Isolated nodes get a bare 1 on the diagonal.
// Dense only; the cap exists because this module is verification machinery,
// not a production probing path.
inline Matrix normalized_laplacian(const Graph& g, std::size_t dense_cap = 2000) {
    const std::size_t n = g.node_count();
    if (n > dense_cap)
        throw UsageError("normalized_laplacian: graph exceeds dense cap (" +
                         std::to_string(n) + " > " + std::to_string(dense_cap) + " nodes)");
    std::vector<double> inv_sqrt_deg(n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
        const std::size_t d = g.degree(v);
        if (d > 0)
            inv_sqrt_deg[v] = 1.0 / std::sqrt(static_cast<double>(d));
    }
    Matrix l(n, n);
    for (NodeId v = 0; v < n; ++v)
        l(v, v) = 1.0;
    for (const auto& [u, v] : g.edges()) {
        const double w = -inv_sqrt_deg[u] * inv_sqrt_deg[v];
        l(u, v) = w;
        l(v, u) = w;
    }
    return l;
}

struct SpectralDecomposition {
    std::vector<double> eigenvalues; // ascending
    Matrix eigenvectors;             // column i pairs with eigenvalue i, orthonormal
    std::size_t source_node_count = 0;
};

// Cyclic Jacobi rotations. Deterministic: fixed sweep order (p ascending, q
// ascending) and a fixed sign convention (largest-magnitude entry of each
// eigenvector made positive).
inline SpectralDecomposition sym_eig(const Matrix& m, int max_sweeps = 100, double sym_tol = 1e-10) {
    const std::size_t n = m.rows();
    if (n != m.cols())
        throw DataError("sym_eig: matrix not square");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > sym_tol)
                throw DataError("sym_eig: matrix not symmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");

    Matrix a = m;
    Matrix v = Matrix::identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                s += a(i, j) * a(i, j);
        return std::sqrt(2.0 * s);
    };

    const double scale = std::max(max_abs(a), 1.0);
    const double tol = 1e-14 * scale * static_cast<double>(n);
    bool converged = n < 2;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        if (off_norm() <= tol) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300)
                    continue;
                const double app = a(p, p), aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged && off_norm() > tol)
        throw NumericError("sym_eig: no convergence in " + std::to_string(max_sweeps) + " sweeps");

    SpectralDecomposition dec;
    dec.source_node_count = n;
    dec.eigenvalues.resize(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i)
        diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });

    dec.eigenvectors = Matrix(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        const std::size_t src = order[col];
        dec.eigenvalues[col] = diag[src];
        // sign convention
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double mag = std::abs(v(k, src));
            if (mag > best) {
                best = mag;
                arg = k;
            }
        }
        const double flip = v(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n; ++k)
            dec.eigenvectors(k, col) = flip * v(k, src);
    }
    return dec;
}

// GFT(X) = U^T X
inline Matrix gft(const SpectralDecomposition& dec, const Matrix& x) {
    if (x.rows() != dec.source_node_count)
        throw DataError("gft: row count does not match decomposition");
    return matmul(transpose(dec.eigenvectors), x);
}

// RGFT(Y) = U Y
inline Matrix rgft(const SpectralDecomposition& dec, const Matrix& y) {
    if (y.rows() != dec.source_node_count)
        throw DataError("rgft: row count does not match decomposition");
    return matmul(dec.eigenvectors, y);
}

namespace detail {

// Partial-pivot LU; returns the smallest absolute pivot (0 for an exactly
// singular matrix).
inline double lu_min_abs_pivot(Matrix a) {
    const std::size_t n = a.rows();
    double min_pivot = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k)))
                piv = i;
        if (piv != k)
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(k, j), a(piv, j));
        const double akk = a(k, k);
        min_pivot = std::min(min_pivot, std::abs(akk));
        if (akk == 0.0)
            return 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / akk;
            for (std::size_t j = k; j < n; ++j)
                a(i, j) -= f * a(k, j);
        }
    }
    return min_pivot;
}

} // namespace detail

struct BijectiveCheck {
    bool ok = false;
    // Smallest singular value of W: a conservative lower bound on min |lambda'|,
    // not the true spectral minimum of a non-symmetric W.
    double min_abs_eigenvalue = 0.0;
};

// A square-weight MLP layer is invertible iff W - eps*I stays nonsingular for
// the chosen margin. The margin estimate comes from eig(W^T W); an explicit LU
// test of W - eps*I backs it up.
inline BijectiveCheck check_bijective_weight(const Matrix& w, double epsilon) {
    const std::size_t n = w.rows();
    if (n != w.cols())
        throw DataError("check_bijective_weight: matrix not square");
    BijectiveCheck out;

    Matrix wtw = matmul(transpose(w), w);
    // symmetrize against roundoff before the Jacobi pass
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (wtw(i, j) + wtw(j, i));
            wtw(i, j) = avg;
            wtw(j, i) = avg;
        }
    const auto dec = sym_eig(wtw);
    out.min_abs_eigenvalue = std::sqrt(std::max(0.0, dec.eigenvalues.front()));

    if (epsilon < 0.0 || epsilon >= out.min_abs_eigenvalue)
        return out;

    Matrix shifted = w;
    for (std::size_t i = 0; i < n; ++i)
        shifted(i, i) -= epsilon;
    const double threshold = 1e-12 * std::max(max_abs(w), 1e-300);
    out.ok = detail::lu_min_abs_pivot(shifted) > threshold;
    return out;
}

} // namespace gcs
