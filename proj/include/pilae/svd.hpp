#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "pilae/error.hpp"
#include "pilae/matrix.hpp"

namespace pilae {

// Thin singular value decomposition A = U diag(sigma) V^T with
// k = min(rows, cols) columns in U and V and sigma sorted descending.
struct SvdFactors {
    Matrix u;                   // m x k
    std::vector<double> sigma;  // length k, non-negative, non-increasing
    Matrix v;                   // n x k
};

namespace detail {

// Fills columns [from, k) of m with vectors orthonormal to everything
// already present, drawn from the standard basis. Two projection passes
// keep the result orthogonal to working precision.
inline void complete_orthonormal_columns(Matrix& m, std::size_t from) {
    const std::size_t dim = m.rows(), k = m.cols();
    std::size_t cand = 0;
    for (std::size_t col = from; col < k; ++col) {
        bool placed = false;
        while (cand < dim && !placed) {
            std::vector<double> w(dim, 0.0);
            w[cand] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t j = 0; j < col; ++j) {
                    double d = 0.0;
                    for (std::size_t i = 0; i < dim; ++i) d += w[i] * m(i, j);
                    for (std::size_t i = 0; i < dim; ++i) w[i] -= d * m(i, j);
                }
            }
            double nrm = 0.0;
            for (double x : w) nrm += x * x;
            nrm = std::sqrt(nrm);
            ++cand;
            if (nrm > 0.25) {
                for (std::size_t i = 0; i < dim; ++i) m(i, col) = w[i] / nrm;
                placed = true;
            }
        }
        if (!placed)
            throw NumericError("svd: failed to complete an orthonormal basis");
    }
}

// Fixes the sign of each singular-vector pair so that the entry of u with
// the largest magnitude is non-negative. Ties resolve to the lowest index.
inline void apply_sign_convention(Matrix& u, Matrix& v) {
    for (std::size_t j = 0; j < u.cols(); ++j) {
        std::size_t arg = 0;
        double best = std::fabs(u(0, j));
        for (std::size_t i = 1; i < u.rows(); ++i) {
            const double a = std::fabs(u(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (u(arg, j) < 0.0) {
            for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = -u(i, j);
            if (j < v.cols())
                for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
        }
    }
}

struct EigenSym {
    std::vector<double> values;  // descending
    Matrix vectors_t;            // row i is the eigenvector of values[i]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Rotations are
// accumulated into rows of vectors_t so the hot updates stay contiguous.
inline EigenSym eigen_symmetric_jacobi(Matrix w) {
    const std::size_t n = w.rows();
    Matrix q = Matrix::identity(n);
    const int max_sweeps = 48;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += w(i, j) * w(i, j);
        return std::sqrt(2.0 * s);
    };

    const double scale = frobenius_norm(w);
    const double stop = scale * 1e-14;
    int sweep = 0;
    if (scale > 0.0) {
        while (off_norm() > stop) {
            if (++sweep > max_sweeps)
                throw NumericError("eigen_symmetric_jacobi: no convergence after " +
                                   std::to_string(max_sweeps) + " sweeps");
            for (std::size_t p = 0; p + 1 < n; ++p) {
                for (std::size_t r = p + 1; r < n; ++r) {
                    const double apr = w(p, r);
                    if (std::fabs(apr) <= 1e-18 * scale) continue;
                    const double theta = (w(r, r) - w(p, p)) / (2.0 * apr);
                    const double t =
                        (theta >= 0.0 ? 1.0 : -1.0) /
                        (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    double* wp = w.row(p);
                    double* wr = w.row(r);
                    for (std::size_t j = 0; j < n; ++j) {
                        const double a = wp[j], b = wr[j];
                        wp[j] = c * a - s * b;
                        wr[j] = s * a + c * b;
                    }
                    for (std::size_t i = 0; i < n; ++i) {
                        const double a = w(i, p), b = w(i, r);
                        w(i, p) = c * a - s * b;
                        w(i, r) = s * a + c * b;
                    }
                    double* qp = q.row(p);
                    double* qr = q.row(r);
                    for (std::size_t j = 0; j < n; ++j) {
                        const double a = qp[j], b = qr[j];
                        qp[j] = c * a - s * b;
                        qr[j] = s * a + c * b;
                    }
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return w(a, a) > w(b, b); });

    EigenSym out;
    out.values.resize(n);
    out.vectors_t = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = w(order[i], order[i]);
        std::copy(q.row(order[i]), q.row(order[i]) + n, out.vectors_t.row(i));
    }
    return out;
}

// One-sided Jacobi on a tall matrix B (m >= n). Works on B^T so the
// rotated columns of B are contiguous rows, and accumulates the right
// rotations the same way. Small singular values come out with high
// relative accuracy, which is what makes rank decisions trustworthy.
inline SvdFactors one_sided_jacobi(const Matrix& b) {
    const std::size_t m = b.rows(), n = b.cols();
    Matrix wt = transpose(b);           // n x m, row j is column j of B
    Matrix rt = Matrix::identity(n);    // accumulates V^T
    const int max_sweeps = 64;
    const double tol = 1e-15;

    int sweep = 0;
    bool rotated = true;
    while (rotated) {
        if (++sweep > max_sweeps)
            throw NumericError("svd: one-sided Jacobi did not converge after " +
                               std::to_string(max_sweeps) + " sweeps");
        rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double* wi = wt.row(i);
                double* wj = wt.row(j);
                double aii = 0.0, ajj = 0.0, aij = 0.0;
                for (std::size_t l = 0; l < m; ++l) {
                    aii += wi[l] * wi[l];
                    ajj += wj[l] * wj[l];
                    aij += wi[l] * wj[l];
                }
                if (aii == 0.0 || ajj == 0.0) continue;
                if (std::fabs(aij) <= tol * std::sqrt(aii * ajj)) continue;
                const double tau = (ajj - aii) / (2.0 * aij);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(tau * tau + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t l = 0; l < m; ++l) {
                    const double a = wi[l], bb = wj[l];
                    wi[l] = c * a - s * bb;
                    wj[l] = s * a + c * bb;
                }
                double* ri = rt.row(i);
                double* rj = rt.row(j);
                for (std::size_t l = 0; l < n; ++l) {
                    const double a = ri[l], bb = rj[l];
                    ri[l] = c * a - s * bb;
                    rj[l] = s * a + c * bb;
                }
                rotated = true;
            }
        }
    }

    std::vector<double> nrm(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        const double* wj = wt.row(j);
        for (std::size_t l = 0; l < m; ++l) s += wj[l] * wj[l];
        nrm[j] = std::sqrt(s);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return nrm[a] > nrm[c]; });

    SvdFactors f;
    f.sigma.resize(n);
    f.u = Matrix(m, n);
    f.v = Matrix(n, n);
    std::size_t positive = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        f.sigma[j] = nrm[src];
        if (nrm[src] > 0.0) {
            const double inv = 1.0 / nrm[src];
            const double* wj = wt.row(src);
            for (std::size_t i = 0; i < m; ++i) f.u(i, j) = wj[i] * inv;
            positive = j + 1;
        }
        const double* rj = rt.row(src);
        for (std::size_t i = 0; i < n; ++i) f.v(i, j) = rj[i];
    }
    complete_orthonormal_columns(f.u, positive);
    return f;
}

// Gram route for strongly rectangular input: eigendecompose the small-side
// Gram matrix and recover the long-side factor by one matrix product.
// Squaring costs half the digits, so eigenvalues below max(m,n)*eps*lmax
// are flushed to exact zeros before taking square roots; the matching
// long-side columns are filled by basis completion.
inline SvdFactors gram_route(const Matrix& a) {
    const bool wide = a.cols() >= a.rows();  // Gram over the row side when wide
    const Matrix& b = a;
    Matrix bt_storage;
    const Matrix* work = &b;
    if (!wide) {
        bt_storage = transpose(a);
        work = &bt_storage;
    }
    const std::size_t small = work->rows(), large = work->cols();

    EigenSym eig = eigen_symmetric_jacobi(gram(*work));
    const double lmax = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
    const double cutoff =
        lmax * static_cast<double>(std::max(a.rows(), a.cols())) *
        std::numeric_limits<double>::epsilon();

    const std::size_t k = small;
    std::vector<double> sigma(k, 0.0);
    std::size_t positive = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (eig.values[j] > cutoff && eig.values[j] > 0.0) {
            sigma[j] = std::sqrt(eig.values[j]);
            positive = j + 1;
        }
    }

    // Small-side singular vectors are the eigenvector rows, transposed.
    Matrix u_small(small, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < small; ++i) u_small(i, j) = eig.vectors_t(j, i);

    // Long-side vectors: column j is work^T u_j / sigma_j.
    Matrix scaled(positive, small);
    for (std::size_t j = 0; j < positive; ++j) {
        const double inv = 1.0 / sigma[j];
        for (std::size_t i = 0; i < small; ++i) scaled(j, i) = eig.vectors_t(j, i) * inv;
    }
    Matrix v_large(large, k);
    if (positive > 0) {
        Matrix vt = matmul(scaled, *work);  // positive x large
        for (std::size_t j = 0; j < positive; ++j)
            for (std::size_t i = 0; i < large; ++i) v_large(i, j) = vt(j, i);
    }
    complete_orthonormal_columns(v_large, positive);

    SvdFactors f;
    f.sigma = std::move(sigma);
    if (wide) {
        f.u = std::move(u_small);
        f.v = std::move(v_large);
    } else {
        f.u = std::move(v_large);
        f.v = std::move(u_small);
    }
    return f;
}

}  // namespace detail

// Deterministic thin SVD. Strongly rectangular or large inputs go through
// the small-side Gram eigendecomposition (the O(d^2 N) path for d << N);
// everything else uses one-sided Jacobi.
inline SvdFactors svd(const Matrix& a) {
    if (a.empty()) throw ArgumentError("svd: empty matrix");
    ensure_finite(a, "svd input");
    const std::size_t small = std::min(a.rows(), a.cols());
    const std::size_t large = std::max(a.rows(), a.cols());

    SvdFactors f;
    if (large >= 4 * small || small > 512) {
        f = detail::gram_route(a);
    } else if (a.rows() >= a.cols()) {
        f = detail::one_sided_jacobi(a);
    } else {
        SvdFactors g = detail::one_sided_jacobi(transpose(a));
        f.u = std::move(g.v);
        f.v = std::move(g.u);
        f.sigma = std::move(g.sigma);
    }
    detail::apply_sign_convention(f.u, f.v);
    ensure_finite(f.u, "svd factor u");
    ensure_finite(f.v, "svd factor v");
    return f;
}

}  // namespace pilae
