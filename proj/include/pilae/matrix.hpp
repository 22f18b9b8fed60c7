#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "pilae/error.hpp"

namespace pilae {

// Dense row-major matrix of doubles. Samples are stored as columns
// throughout the library (a data set of N vectors in R^d is d x N).
class Matrix {
  public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
        std::size_t i = 0;
        for (const auto& r : rows) {
            if (r.size() != m.cols_) throw ArgumentError("from_rows: ragged initializer");
            std::copy(r.begin(), r.end(), m.row(i));
            ++i;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }
    bool operator!=(const Matrix& o) const { return !(*this == o); }

    // Bitwise equality, distinguishing -0.0 from 0.0 and treating NaNs as bytes.
    bool bit_equal(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ &&
               (data_.empty() ||
                std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(double)) == 0);
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(const Matrix& m) {
    const double* p = m.data();
    for (std::size_t i = 0, n = m.size(); i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

inline void ensure_finite(const Matrix& m, const char* what) {
    if (!all_finite(m)) throw NumericError(std::string(what) + ": non-finite entries");
}

inline double frobenius_sq(const Matrix& m) {
    double s = 0.0;
    const double* p = m.data();
    for (std::size_t i = 0, n = m.size(); i < n; ++i) s += p[i] * p[i];
    return s;
}

inline double frobenius_norm(const Matrix& m) { return std::sqrt(frobenius_sq(m)); }

inline Matrix transpose(const Matrix& a) {
    const std::size_t m = a.rows(), n = a.cols(), B = 64;
    Matrix t(n, m);
    for (std::size_t i0 = 0; i0 < m; i0 += B)
        for (std::size_t j0 = 0; j0 < n; j0 += B) {
            const std::size_t i1 = std::min(i0 + B, m), j1 = std::min(j0 + B, n);
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
        }
    return t;
}

// C = A * B, blocked over columns and the inner dimension so that the
// streamed panels of B stay cache resident. Single threaded and with a
// fixed accumulation order, so results are reproducible bit for bit.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ArgumentError("matmul: inner dimensions disagree (" + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.rows()) + ")");
    if (a.empty() || b.empty()) throw ArgumentError("matmul: empty operand");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    constexpr std::size_t JB = 1024, LB = 256;
    Matrix c(m, n);
    for (std::size_t j0 = 0; j0 < n; j0 += JB) {
        const std::size_t j1 = std::min(j0 + JB, n);
        for (std::size_t l0 = 0; l0 < k; l0 += LB) {
            const std::size_t l1 = std::min(l0 + LB, k);
            for (std::size_t i = 0; i < m; ++i) {
                double* ci = c.row(i);
                const double* ai = a.row(i);
                for (std::size_t l = l0; l < l1; ++l) {
                    const double av = ai[l];
                    const double* bl = b.row(l);
                    for (std::size_t j = j0; j < j1; ++j) ci[j] += av * bl[j];
                }
            }
        }
    }
    return c;
}

// C = A * B^T as tiled row-by-row dot products.
inline Matrix matmul_abt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ArgumentError("matmul_abt: inner dimensions disagree");
    if (a.empty() || b.empty()) throw ArgumentError("matmul_abt: empty operand");
    const std::size_t m = a.rows(), n = b.rows(), k = a.cols();
    constexpr std::size_t TI = 48, TJ = 48, LP = 1024;
    Matrix c(m, n);
    for (std::size_t l0 = 0; l0 < k; l0 += LP) {
        const std::size_t l1 = std::min(l0 + LP, k);
        for (std::size_t i0 = 0; i0 < m; i0 += TI) {
            const std::size_t i1 = std::min(i0 + TI, m);
            for (std::size_t j0 = 0; j0 < n; j0 += TJ) {
                const std::size_t j1 = std::min(j0 + TJ, n);
                for (std::size_t i = i0; i < i1; ++i) {
                    const double* ai = a.row(i);
                    double* ci = c.row(i);
                    for (std::size_t j = j0; j < j1; ++j) {
                        const double* bj = b.row(j);
                        double s = 0.0;
                        for (std::size_t l = l0; l < l1; ++l) s += ai[l] * bj[l];
                        ci[j] += s;
                    }
                }
            }
        }
    }
    return c;
}

// C = A^T * B with the small result kept hot while rows of A and B stream by.
inline Matrix matmul_atb(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ArgumentError("matmul_atb: inner dimensions disagree");
    if (a.empty() || b.empty()) throw ArgumentError("matmul_atb: empty operand");
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    Matrix c(m, n);
    for (std::size_t l = 0; l < k; ++l) {
        const double* al = a.row(l);
        const double* bl = b.row(l);
        for (std::size_t i = 0; i < m; ++i) {
            const double av = al[i];
            double* ci = c.row(i);
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
    return c;
}

// G = A * A^T, computing the upper triangle only and mirroring.
inline Matrix gram(const Matrix& a) {
    if (a.empty()) throw ArgumentError("gram: empty operand");
    const std::size_t m = a.rows(), k = a.cols();
    constexpr std::size_t TI = 48, TJ = 48, LP = 1024;
    Matrix g(m, m);
    for (std::size_t l0 = 0; l0 < k; l0 += LP) {
        const std::size_t l1 = std::min(l0 + LP, k);
        for (std::size_t i0 = 0; i0 < m; i0 += TI) {
            const std::size_t i1 = std::min(i0 + TI, m);
            for (std::size_t j0 = i0; j0 < m; j0 += TJ) {
                const std::size_t j1 = std::min(j0 + TJ, m);
                for (std::size_t i = i0; i < i1; ++i) {
                    const double* ai = a.row(i);
                    double* gi = g.row(i);
                    for (std::size_t j = std::max(i, j0); j < j1; ++j) {
                        const double* aj = a.row(j);
                        double s = 0.0;
                        for (std::size_t l = l0; l < l1; ++l) s += ai[l] * aj[l];
                        gi[j] += s;
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    return g;
}

inline void add_scaled_identity(Matrix& m, double s) {
    const std::size_t n = std::min(m.rows(), m.cols());
    for (std::size_t i = 0; i < n; ++i) m(i, i) += s;
}

// Lower triangular Cholesky factor of a symmetric positive definite matrix.
inline Matrix cholesky(const Matrix& a) {
    if (a.rows() != a.cols()) throw ArgumentError("cholesky: matrix not square");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            const double* li = l.row(i);
            const double* lj = l.row(j);
            for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
            if (i == j) {
                if (!(s > 0.0) || !std::isfinite(s))
                    throw NumericError("cholesky: matrix not positive definite at pivot " +
                                       std::to_string(i));
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

// Solves (L L^T) X = B for X where L is lower triangular and B is p x N.
// The substitution runs over rows of B so that every inner update is a
// contiguous axpy across all right-hand sides at once.
inline Matrix cholesky_solve_rows(const Matrix& l, const Matrix& b) {
    const std::size_t p = l.rows(), n = b.cols();
    if (b.rows() != p) throw ArgumentError("cholesky_solve_rows: dimension mismatch");
    Matrix x = b;
    for (std::size_t i = 0; i < p; ++i) {
        double* xi = x.row(i);
        const double* li = l.row(i);
        for (std::size_t k = 0; k < i; ++k) {
            const double c = li[k];
            if (c == 0.0) continue;
            const double* xk = x.row(k);
            for (std::size_t j = 0; j < n; ++j) xi[j] -= c * xk[j];
        }
        const double d = 1.0 / li[i];
        for (std::size_t j = 0; j < n; ++j) xi[j] *= d;
    }
    for (std::size_t ii = p; ii-- > 0;) {
        double* xi = x.row(ii);
        for (std::size_t k = ii + 1; k < p; ++k) {
            const double c = l(k, ii);
            if (c == 0.0) continue;
            const double* xk = x.row(k);
            for (std::size_t j = 0; j < n; ++j) xi[j] -= c * xk[j];
        }
        const double d = 1.0 / l(ii, ii);
        for (std::size_t j = 0; j < n; ++j) xi[j] *= d;
    }
    return x;
}

inline Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.cols()) throw ArgumentError("slice_cols: range out of bounds");
    Matrix out(a.rows(), end - begin);
    for (std::size_t i = 0; i < a.rows(); ++i)
        std::copy(a.row(i) + begin, a.row(i) + end, out.row(i));
    return out;
}

inline Matrix gather_cols(const Matrix& a, const std::vector<std::size_t>& idx) {
    Matrix out(a.rows(), idx.size());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* src = a.row(i);
        double* dst = out.row(i);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            if (idx[j] >= a.cols()) throw ArgumentError("gather_cols: index out of bounds");
            dst[j] = src[idx[j]];
        }
    }
    return out;
}

}  // namespace pilae
