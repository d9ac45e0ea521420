#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "lnnet/errors.hpp"

namespace lnnet {

template <std::floating_point T>
using vec = std::vector<T>;

// Dense row-major matrix. Point sets are stored one point per column.
template <std::floating_point T>
struct mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> a; // row-major, rows*cols entries

    mat() = default;

    mat(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), a(r * c, fill) {}

    mat(std::size_t r, std::size_t c, std::initializer_list<T> entries)
        : rows(r), cols(c), a(entries) {
        if (a.size() != r * c)
            throw shape_error("mat: initializer has " + std::to_string(a.size()) +
                              " entries, expected " + std::to_string(r * c));
    }

    T& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static mat identity(std::size_t n) {
        mat m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = T(1);
        return m;
    }

    bool operator==(const mat&) const = default;
};

using vecd = vec<double>;
using matd = mat<double>;

constexpr double default_eps_zero = 1e-12;

template <std::floating_point T>
void require_finite(const vec<T>& x, const std::string& who) {
    for (T v : x)
        if (!std::isfinite(v))
            throw validation_error(who + ": non-finite entry");
}

template <std::floating_point T>
void require_finite(const mat<T>& m, const std::string& who) {
    for (T v : m.a)
        if (!std::isfinite(v))
            throw validation_error(who + ": non-finite entry");
}

template <std::floating_point T>
T dot(const vec<T>& x, const vec<T>& y) {
    if (x.size() != y.size())
        throw shape_error("dot: length mismatch");
    T s = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += x[i] * y[i];
    return s;
}

template <std::floating_point T>
T norm2(const vec<T>& x) {
    return std::sqrt(dot(x, x));
}

template <std::floating_point T>
T mean(const vec<T>& x) {
    if (x.empty())
        throw shape_error("mean: empty vector");
    T s = 0;
    for (T v : x)
        s += v;
    return s / T(x.size());
}

// Mean and population standard deviation (1/d normalization).
template <std::floating_point T>
struct norm_stats {
    T mean;
    T stddev;
};

template <std::floating_point T>
norm_stats<T> moments(const vec<T>& x) {
    T mu = mean(x);
    T s = 0;
    for (T v : x)
        s += (v - mu) * (v - mu);
    return {mu, std::sqrt(s / T(x.size()))};
}

template <std::floating_point T>
vec<T> col(const mat<T>& m, std::size_t j) {
    vec<T> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        out[i] = m(i, j);
    return out;
}

template <std::floating_point T>
void set_col(mat<T>& m, std::size_t j, const vec<T>& v) {
    if (v.size() != m.rows)
        throw shape_error("set_col: length mismatch");
    for (std::size_t i = 0; i < m.rows; ++i)
        m(i, j) = v[i];
}

template <std::floating_point T>
mat<T> hcat(const mat<T>& a, const mat<T>& b) {
    if (a.rows != b.rows)
        throw shape_error("hcat: row mismatch");
    mat<T> out(a.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j)
            out(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols; ++j)
            out(i, a.cols + j) = b(i, j);
    }
    return out;
}

template <std::floating_point T>
mat<T> transpose(const mat<T>& m) {
    mat<T> out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j)
            out(j, i) = m(i, j);
    return out;
}

template <std::floating_point T>
mat<T> mat_mul(const mat<T>& a, const mat<T>& b) {
    if (a.cols != b.rows)
        throw shape_error("mat_mul: inner dimensions differ");
    mat<T> out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            T aik = a(i, k);
            for (std::size_t j = 0; j < b.cols; ++j)
                out(i, j) += aik * b(k, j);
        }
    return out;
}

template <std::floating_point T>
vec<T> mat_vec(const mat<T>& m, const vec<T>& x) {
    if (m.cols != x.size())
        throw shape_error("mat_vec: dimension mismatch");
    vec<T> out(m.rows, T(0));
    for (std::size_t i = 0; i < m.rows; ++i) {
        T s = 0;
        for (std::size_t j = 0; j < m.cols; ++j)
            s += m(i, j) * x[j];
        out[i] = s;
    }
    return out;
}

// A += w * u vᵀ
template <std::floating_point T>
void add_outer(mat<T>& a, const vec<T>& u, const vec<T>& v, T w = T(1)) {
    if (a.rows != u.size() || a.cols != v.size())
        throw shape_error("add_outer: dimension mismatch");
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            a(i, j) += w * u[i] * v[j];
}

// Total squared deviation of the columns from their mean.
template <std::floating_point T>
T sum_of_squares(const mat<T>& x) {
    if (x.cols == 0)
        throw validation_error("sum_of_squares: matrix has no columns");
    require_finite(x, "sum_of_squares");
    vec<T> mu(x.rows, T(0));
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j)
            mu[i] += x(i, j);
        mu[i] /= T(x.cols);
    }
    T ss = 0;
    for (std::size_t j = 0; j < x.cols; ++j)
        for (std::size_t i = 0; i < x.rows; ++i) {
            T d = x(i, j) - mu[i];
            ss += d * d;
        }
    return ss;
}

// Scalar point sets get their own overload; used heavily on projections.
template <std::floating_point T>
T sum_of_squares(const vec<T>& x) {
    if (x.empty())
        throw validation_error("sum_of_squares: no points");
    T mu = mean(x);
    T ss = 0;
    for (T v : x)
        ss += (v - mu) * (v - mu);
    return ss;
}

// x minus its coordinate mean; the projection onto the zero-sum hyperplane.
template <std::floating_point T>
vec<T> center(const vec<T>& x) {
    if (x.empty())
        throw shape_error("center: empty vector");
    require_finite(x, "center");
    T mu = mean(x);
    vec<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] - mu;
    return out;
}

// x / ‖x‖₂, the unit-radius projection.
template <std::floating_point T>
vec<T> spherical_project(const vec<T>& x, T eps_zero = T(default_eps_zero)) {
    require_finite(x, "spherical_project");
    T n = norm2(x);
    if (!(n > eps_zero))
        throw degenerate_error("spherical_project: input norm is below " +
                               std::to_string(double(eps_zero)));
    vec<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] / n;
    return out;
}

// (x − μ)/σ with population σ. Output has zero mean and squared norm d.
template <std::floating_point T>
vec<T> layer_norm(const vec<T>& x, T eps_zero = T(default_eps_zero)) {
    if (x.size() < 2)
        throw shape_error("layer_norm: dimension must be at least 2");
    require_finite(x, "layer_norm");
    auto [mu, sigma] = moments(x);
    if (!(sigma > eps_zero))
        throw degenerate_error("layer_norm: input variance is zero");
    vec<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = (x[i] - mu) / sigma;
    return out;
}

// layer_norm applied independently to g contiguous groups of size d/g.
template <std::floating_point T>
vec<T> group_layer_norm(const vec<T>& x, std::size_t g, T eps_zero = T(default_eps_zero)) {
    if (g == 0 || x.size() % g != 0)
        throw shape_error("group_layer_norm: group count must divide the dimension");
    std::size_t c = x.size() / g;
    if (c < 2)
        throw degenerate_error("group_layer_norm: group size 1 leaves every group constant");
    vec<T> out(x.size());
    for (std::size_t k = 0; k < g; ++k) {
        vec<T> z(x.begin() + k * c, x.begin() + (k + 1) * c);
        vec<T> zn = layer_norm(z, eps_zero);
        for (std::size_t i = 0; i < c; ++i)
            out[k * c + i] = zn[i];
    }
    return out;
}

// Wx + b
template <std::floating_point T>
vec<T> apply_affine(const mat<T>& w, const vec<T>& b, const vec<T>& x) {
    if (w.cols != x.size() || w.rows != b.size())
        throw shape_error("apply_affine: shapes do not conform");
    vec<T> out = mat_vec(w, x);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += b[i];
    return out;
}

} // namespace lnnet
