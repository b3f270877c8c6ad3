#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "mnl/base.hpp"

namespace mnl {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Small sizes only; everything downstream
/// works on matrices with at most a few hundred rows.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;  // rows*cols entries, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(std::size_t r, std::size_t c, Vec entries) : rows(r), cols(c), data(std::move(entries)) {
        if (data.size() != rows * cols) fail("Matrix: entry count does not match rows*cols");
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
        Matrix m(rows_init.size(), rows_init.begin()->size());
        std::size_t i = 0;
        for (const auto& row : rows_init) {
            if (row.size() != m.cols) fail("Matrix::from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    /// Column-major vectorisation vec(W): entry (j,k) lands at k*rows + j.
    Vec vec_colmajor() const {
        Vec out(rows * cols);
        for (std::size_t k = 0; k < cols; ++k)
            for (std::size_t j = 0; j < rows; ++j) out[k * rows + j] = (*this)(j, k);
        return out;
    }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
    }
};

inline bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) fail("dot: size mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::fabs(v));
    return m;
}

inline Vec vec_sub(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) fail("vec_sub: size mismatch");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Vec vec_add(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) fail("vec_add: size mismatch");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Vec vec_scale(const Vec& a, double s) {
    Vec out(a);
    for (double& v : out) v *= s;
    return out;
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) fail("matmul: inner dimensions disagree");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * b.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

/// m * x
inline Vec matvec(const Matrix& m, const Vec& x) {
    if (m.cols != x.size()) fail("matvec: dimension mismatch");
    Vec y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = &m.data[i * m.cols];
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

/// m^T * x without forming the transpose.
inline Vec tmatvec(const Matrix& m, const Vec& x) {
    if (m.rows != x.size()) fail("tmatvec: dimension mismatch");
    Vec y(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = &m.data[i * m.cols];
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols; ++j) y[j] += row[j] * xi;
    }
    return y;
}

inline Matrix mat_sub(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) fail("mat_sub: shape mismatch");
    Matrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] - b.data[i];
    return c;
}

inline Matrix mat_scale(const Matrix& a, double s) {
    Matrix c(a);
    for (double& v : c.data) v *= s;
    return c;
}

/// Kronecker product: entry ((i*b.rows+k),(j*b.cols+l)) = a(i,j)*b(k,l).
inline Matrix kronecker(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows * b.rows, a.cols * b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) {
            const double aij = a(i, j);
            if (aij == 0.0) continue;
            for (std::size_t k = 0; k < b.rows; ++k)
                for (std::size_t l = 0; l < b.cols; ++l)
                    c(i * b.rows + k, j * b.cols + l) = aij * b(k, l);
        }
    return c;
}

inline double frobenius_norm(const Matrix& m) {
    double acc = 0.0;
    for (double v : m.data) acc += v * v;
    return std::sqrt(acc);
}

/// Entrywise norm of a collection of matrices: sqrt of the sum of squared
/// Frobenius norms.
inline double frobenius_norm_collection(std::span<const Matrix> ws) {
    double acc = 0.0;
    for (const Matrix& w : ws)
        for (double v : w.data) acc += v * v;
    return std::sqrt(acc);
}

inline double frobenius_norm_collection(const std::vector<Matrix>& ws) {
    return frobenius_norm_collection(std::span<const Matrix>(ws.data(), ws.size()));
}

// ---------------------------------------------------------------------------
// SVD (one-sided Jacobi) and derived quantities
// ---------------------------------------------------------------------------

struct SvdResult {
    Vec singular_values;  // non-increasing, length min(rows, cols)
    Matrix left_vectors;  // rows x min(rows, cols), orthonormal columns
    Matrix right_vectors; // cols x min(rows, cols), orthonormal columns
};

namespace detail {

// Orthonormal completion for columns whose singular value vanished: pick the
// standard basis vector with the largest residual after projecting out the
// columns already placed.
inline void complete_orthonormal_column(Matrix& u, std::size_t target_col, std::size_t n_valid_cols) {
    const std::size_t m = u.rows;
    Vec best;
    double best_norm = -1.0;
    for (std::size_t cand = 0; cand < m; ++cand) {
        Vec v(m, 0.0);
        v[cand] = 1.0;
        for (std::size_t c = 0; c < n_valid_cols; ++c) {
            if (c == target_col) continue;
            double proj = 0.0;
            for (std::size_t i = 0; i < m; ++i) proj += u(i, c) * v[i];
            for (std::size_t i = 0; i < m; ++i) v[i] -= proj * u(i, c);
        }
        const double nv = norm2(v);
        if (nv > best_norm) {
            best_norm = nv;
            best = std::move(v);
        }
    }
    if (best_norm <= 0.0) fail("svd: failed to complete orthonormal basis");
    for (std::size_t i = 0; i < m; ++i) u(i, target_col) = best[i] / best_norm;
    // One re-orthogonalisation pass keeps the completion orthogonal to 1e-14.
    for (std::size_t c = 0; c < n_valid_cols; ++c) {
        if (c == target_col) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += u(i, c) * u(i, target_col);
        for (std::size_t i = 0; i < m; ++i) u(i, target_col) -= proj * u(i, c);
    }
    double n = 0.0;
    for (std::size_t i = 0; i < m; ++i) n += u(i, target_col) * u(i, target_col);
    n = std::sqrt(n);
    for (std::size_t i = 0; i < m; ++i) u(i, target_col) /= n;
}

// One-sided Jacobi on a tall matrix (rows >= cols).
inline SvdResult svd_tall(const Matrix& m, int max_sweeps, double rel_tol) {
    const std::size_t nr = m.rows, nc = m.cols;
    Matrix b = m;
    Matrix v = Matrix::identity(nc);

    bool converged = (nc <= 1);
    int sweeps_done = 0;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        ++sweeps_done;
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < nc; ++p) {
            for (std::size_t q = p + 1; q < nc; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < nr; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    alpha += bp * bp;
                    beta += bq * bq;
                    gamma += bp * bq;
                }
                if (std::fabs(gamma) <= rel_tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < nr; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = c * bp - s * bq;
                    b(i, q) = s * bp + c * bq;
                }
                for (std::size_t i = 0; i < nc; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) converged = true;
    }
    if (!converged)
        fail("svd: Jacobi iteration did not converge after " + std::to_string(sweeps_done) + " sweeps");

    Vec sigma(nc, 0.0);
    for (std::size_t j = 0; j < nc; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < nr; ++i) acc += b(i, j) * b(i, j);
        sigma[j] = std::sqrt(acc);
    }

    std::vector<std::size_t> order(nc);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&sigma](std::size_t a2, std::size_t b2) { return sigma[a2] > sigma[b2]; });

    SvdResult out;
    out.singular_values.resize(nc);
    out.left_vectors = Matrix(nr, nc);
    out.right_vectors = Matrix(nc, nc);
    for (std::size_t j = 0; j < nc; ++j) {
        const std::size_t src = order[j];
        out.singular_values[j] = sigma[src];
        for (std::size_t i = 0; i < nc; ++i) out.right_vectors(i, j) = v(i, src);
        if (sigma[src] > 0.0) {
            for (std::size_t i = 0; i < nr; ++i) out.left_vectors(i, j) = b(i, src) / sigma[src];
        }
    }
    for (std::size_t j = 0; j < nc; ++j)
        if (out.singular_values[j] == 0.0) complete_orthonormal_column(out.left_vectors, j, nc);
    return out;
}

}  // namespace detail

/// Singular value decomposition via one-sided Jacobi rotations. Deterministic
/// for fixed input; throws after the sweep cap if off-diagonal mass persists.
inline SvdResult svd(const Matrix& m, int max_sweeps = 100, double rel_tol = 1e-14) {
    if (m.rows == 0 || m.cols == 0) fail("svd: empty matrix");
    if (!m.all_finite()) fail("svd: non-finite entries");
    if (m.rows >= m.cols) return detail::svd_tall(m, max_sweeps, rel_tol);
    SvdResult r = detail::svd_tall(transpose(m), max_sweeps, rel_tol);
    std::swap(r.left_vectors, r.right_vectors);
    return r;
}

inline double spectral_norm(const Matrix& m) { return svd(m).singular_values.front(); }

/// Count of singular values above tol_factor * sigma_1 * max(rows, cols) * eps.
inline std::size_t numerical_rank(const Matrix& m, double tol_factor = 1.0) {
    if (tol_factor <= 0.0) fail("numerical_rank: tol_factor must be positive");
    const SvdResult r = svd(m);
    const double s1 = r.singular_values.front();
    if (s1 == 0.0) return 0;
    const double thresh = tol_factor * s1 * static_cast<double>(std::max(m.rows, m.cols)) * k_eps;
    std::size_t rank = 0;
    for (double s : r.singular_values)
        if (s > thresh) ++rank;
    return rank;
}

// ---------------------------------------------------------------------------
// Symmetric positive definite solve (Cholesky), used by the Gauss-Newton step
// ---------------------------------------------------------------------------

/// Solves A x = b for symmetric positive definite A. Throws if a pivot is not
/// strictly positive (the caller reports damping and conditioning).
inline Vec cholesky_solve(const Matrix& a, const Vec& b) {
    const std::size_t n = a.rows;
    if (a.cols != n || b.size() != n) fail("cholesky_solve: shape mismatch");
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = a(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            if (i == j) {
                if (acc <= 0.0) fail("cholesky_solve: matrix not positive definite");
                l(i, i) = std::sqrt(acc);
            } else {
                l(i, j) = acc / l(j, j);
            }
        }
    }
    Vec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = b[i];
        for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * y[k];
        y[i] = acc / l(i, i);
    }
    Vec x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * x[k];
        x[ii] = acc / l(ii, ii);
    }
    return x;
}

}  // namespace mnl
