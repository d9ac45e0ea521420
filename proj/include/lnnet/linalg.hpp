#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lnnet/core.hpp"
#include "lnnet/errors.hpp"

namespace lnnet {

inline double frobenius_norm(const matd& m) {
    double s = 0;
    for (double v : m.a)
        s += v * v;
    return std::sqrt(s);
}

inline bool is_symmetric(const matd& m, double tol) {
    if (m.rows != m.cols)
        return false;
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i + 1; j < m.cols; ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol)
                return false;
    return true;
}

// Lower-triangular L with LLᵀ = A, for positive definite A.
inline matd cholesky(const matd& a) {
    if (a.rows != a.cols)
        throw shape_error("cholesky: matrix not square");
    std::size_t n = a.rows;
    matd l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k)
            d -= l(j, k) * l(j, k);
        if (!(d > 0))
            throw singular_error("cholesky: matrix is not positive definite (pivot " +
                                 std::to_string(j) + ")");
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

// Cholesky for positive semi-definite A: pivots within tol of zero produce a
// zero column, pivots below -tol are rejected. Used for covariance sampling.
inline matd cholesky_psd(const matd& a, double tol) {
    if (a.rows != a.cols)
        throw shape_error("cholesky_psd: matrix not square");
    std::size_t n = a.rows;
    matd l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k)
            d -= l(j, k) * l(j, k);
        if (d < -tol)
            throw validation_error("cholesky_psd: matrix is not positive semi-definite");
        if (d <= tol) {
            l(j, j) = 0;
            continue;
        }
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

// Solves L y = b for lower-triangular L.
inline vecd solve_lower(const matd& l, vecd b) {
    std::size_t n = l.rows;
    if (b.size() != n)
        throw shape_error("solve_lower: dimension mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= l(i, k) * b[k];
        b[i] = s / l(i, i);
    }
    return b;
}

// Solves Lᵀ x = b for lower-triangular L.
inline vecd solve_lower_transposed(const matd& l, vecd b) {
    std::size_t n = l.rows;
    if (b.size() != n)
        throw shape_error("solve_lower_transposed: dimension mismatch");
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k)
            s -= l(k, ii) * b[k];
        b[ii] = s / l(ii, ii);
    }
    return b;
}

// Solves L Lᵀ x = b.
inline vecd solve_spd(const matd& l, const vecd& b) {
    return solve_lower_transposed(l, solve_lower(l, b));
}

// L⁻¹ M L⁻ᵀ, symmetrized against round-off.
inline matd whiten(const matd& m, const matd& l) {
    std::size_t n = m.rows;
    if (m.cols != n || l.rows != n)
        throw shape_error("whiten: dimension mismatch");
    matd y(n, n);
    for (std::size_t j = 0; j < n; ++j)
        set_col(y, j, solve_lower(l, col(m, j))); // Y = L⁻¹ M
    matd b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        vecd row(n);
        for (std::size_t j = 0; j < n; ++j)
            row[j] = y(i, j);
        vecd z = solve_lower(l, row); // row i of L⁻¹ Yᵀ, i.e. column i of Y L⁻ᵀ
        for (std::size_t j = 0; j < n; ++j)
            b(i, j) = z[j];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 0.5 * (b(i, j) + b(j, i));
            b(i, j) = b(j, i) = v;
        }
    return b;
}

struct eig_result {
    vecd values;  // ascending
    matd vectors; // matching eigenvectors in the columns
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps rotate every
// off-diagonal pair in row order until the off-diagonal Frobenius mass falls
// below 1e-12 times the input norm.
inline eig_result jacobi_eigh(const matd& input, int max_sweeps = 50) {
    if (input.rows != input.cols)
        throw shape_error("jacobi_eigh: matrix not square");
    if (!is_symmetric(input, 1e-9 * (1.0 + frobenius_norm(input))))
        throw shape_error("jacobi_eigh: matrix not symmetric");
    std::size_t n = input.rows;
    matd a = input;
    matd v = matd::identity(n);
    const double tol = 1e-12 * frobenius_norm(input);

    auto off_norm = [&] {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    int sweep = 0;
    while (off_norm() > tol) {
        if (sweep++ >= max_sweeps)
            throw error("jacobi_eigh: no convergence within sweep limit");
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (apq == 0.0)
                    continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                double app = a(p, p), aqq = a(q, q);
                a(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                a(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q)
                        continue;
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
    eig_result out;
    out.values.resize(n);
    out.vectors = matd(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i)
            out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

} // namespace lnnet
