#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "pilae/error.hpp"
#include "pilae/matrix.hpp"
#include "pilae/svd.hpp"

namespace pilae {

// Number of singular values above max(m,n) * sigma_0 * machine epsilon,
// the usual numerical-rank tolerance. sigma must be non-increasing.
inline std::size_t numeric_rank(const std::vector<double>& sigma, std::size_t m,
                                std::size_t n) {
    if (sigma.empty()) return 0;
    const double tol = static_cast<double>(std::max(m, n)) * sigma.front() *
                       std::numeric_limits<double>::epsilon();
    std::size_t r = 0;
    for (double s : sigma) {
        if (s > tol) ++r;
    }
    return r;
}

namespace detail {

// Rows [0, nrows) of V Sigma^+ U^T. pinv and truncated_pinv both funnel
// through this loop, which is what makes a truncation an exact row slice
// of the full pseudoinverse.
inline Matrix pinv_rows(const SvdFactors& f, std::size_t rank, std::size_t nrows) {
    const std::size_t m = f.u.rows();
    Matrix ut = transpose(f.u);  // k x m, row j is u_j
    Matrix out(nrows, m);
    for (std::size_t i = 0; i < nrows; ++i) {
        double* oi = out.row(i);
        for (std::size_t j = 0; j < rank; ++j) {
            const double w = f.v(i, j) / f.sigma[j];
            const double* uj = ut.row(j);
            for (std::size_t c = 0; c < m; ++c) oi[c] += w * uj[c];
        }
    }
    return out;
}

}  // namespace detail

// Moore-Penrose pseudoinverse via the SVD, shape cols x rows.
inline Matrix pinv(const Matrix& a) {
    if (a.empty()) throw ArgumentError("pinv: empty matrix");
    const SvdFactors f = svd(a);
    const std::size_t r = numeric_rank(f.sigma, a.rows(), a.cols());
    Matrix out = detail::pinv_rows(f, r, a.cols());
    ensure_finite(out, "pinv");
    return out;
}

// First p rows of pinv(a), identical to slicing the full result.
inline Matrix truncated_pinv(const Matrix& a, std::size_t p) {
    if (a.empty()) throw ArgumentError("truncated_pinv: empty matrix");
    if (p < 1 || p > a.cols())
        throw ArgumentError("truncated_pinv: p = " + std::to_string(p) +
                            " out of range [1, " + std::to_string(a.cols()) + "]");
    const SvdFactors f = svd(a);
    const std::size_t r = numeric_rank(f.sigma, a.rows(), a.cols());
    Matrix out = detail::pinv_rows(f, r, p);
    ensure_finite(out, "truncated_pinv");
    return out;
}

namespace detail {

// Same slice computation reusing an already computed factorization.
inline Matrix truncated_pinv_from(const SvdFactors& f, std::size_t rows_a,
                                  std::size_t cols_a, std::size_t p) {
    const std::size_t r = numeric_rank(f.sigma, rows_a, cols_a);
    return pinv_rows(f, r, p);
}

}  // namespace detail

// Regularized pseudoinverse H^T (H H^T + lambda I)^{-1}, shape N x p.
// The shifted Gram matrix is solved by Cholesky, never inverted outright.
inline Matrix ridge_pinv(const Matrix& h, double lambda1) {
    if (h.empty()) throw ArgumentError("ridge_pinv: empty matrix");
    if (!(lambda1 > 0.0)) throw ArgumentError("ridge_pinv: lambda1 must be positive");
    Matrix c = gram(h);
    add_scaled_identity(c, lambda1);
    const Matrix l = cholesky(c);
    Matrix solved = cholesky_solve_rows(l, h);  // (H H^T + lambda I)^{-1} H
    Matrix out = transpose(solved);
    ensure_finite(out, "ridge_pinv");
    return out;
}

// || ridge_pinv(H, lambda) * H - I ||_F^2 / N^2, evaluated through the
// trace identity tr(M^2) - 2 tr(M) + N with M = (G + lambda I)^{-1} G,
// G = H H^T. Avoids ever forming the N x N product.
inline double identity_distance(const Matrix& h, double lambda1) {
    if (h.empty()) throw ArgumentError("identity_distance: empty matrix");
    if (!(lambda1 > 0.0))
        throw ArgumentError("identity_distance: lambda1 must be positive");
    const std::size_t p = h.rows();
    const double n = static_cast<double>(h.cols());
    Matrix g = gram(h);
    Matrix c = g;
    add_scaled_identity(c, lambda1);
    const Matrix l = cholesky(c);
    const Matrix m = cholesky_solve_rows(l, g);
    double tr = 0.0, tr2 = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        tr += m(i, i);
        const double* mi = m.row(i);
        for (std::size_t j = 0; j < p; ++j) tr2 += mi[j] * m(j, i);
    }
    return (tr2 - 2.0 * tr + n) / (n * n);
}

}  // namespace pilae
