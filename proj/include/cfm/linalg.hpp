/**
 * @file linalg.hpp
 * @brief Minimal dense matrix type and the factorization/matvec kernels used
 * across the simulator. Row-major doubles throughout.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cfm {

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
    }

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// Lower-triangular Cholesky factor of a symmetric positive semidefinite
/// matrix. Zero (or numerically zero) pivots are tolerated: the corresponding
/// column of the factor is zeroed, which reproduces exactly degenerate
/// covariances such as fully correlated coordinates. Returns false if a pivot
/// is negative beyond tolerance (matrix not PSD).
inline bool cholesky_psd(const Matrix& a, Matrix& lower, double rel_tol = 1e-12) {
    if (a.rows != a.cols) throw std::invalid_argument("cholesky_psd: matrix not square");
    const int n = a.rows;
    lower = Matrix(n, n);
    double scale = 0.0;
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(j, j)));
    const double tol = rel_tol * std::max(scale, 1.0);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int c = 0; c < j; ++c) d -= lower(j, c) * lower(j, c);
        if (d < -tol) return false;
        const double piv = d > tol ? std::sqrt(d) : 0.0;
        lower(j, j) = piv;
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int c = 0; c < j; ++c) s -= lower(i, c) * lower(j, c);
            lower(i, j) = piv > 0.0 ? s / piv : 0.0;
        }
    }
    return true;
}

/// y = W x with W given as a row-major (rows x cols) block.
inline void matvec(const double* w, int rows, int cols, const double* x, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<size_t>(r) * cols;
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

/// y += W x
inline void matvec_accum(const double* w, int rows, int cols, const double* x, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<size_t>(r) * cols;
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] += acc;
    }
}

/// y += W^T x (W row-major rows x cols, x length rows, y length cols).
inline void matTvec_accum(const double* w, int rows, int cols, const double* x, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<size_t>(r) * cols;
        const double xr = x[r];
        for (int c = 0; c < cols; ++c) y[c] += wr[c] * xr;
    }
}

/// G += a b^T (G row-major rows x cols, a length rows, b length cols).
inline void outer_accum(double* g, int rows, int cols, const double* a, const double* b) {
    for (int r = 0; r < rows; ++r) {
        double* gr = g + static_cast<size_t>(r) * cols;
        const double ar = a[r];
        for (int c = 0; c < cols; ++c) gr[c] += ar * b[c];
    }
}

} // namespace cfm
