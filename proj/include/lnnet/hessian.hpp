#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lnnet/core.hpp"
#include "lnnet/errors.hpp"
#include "lnnet/format.hpp"

namespace lnnet {

namespace detail {

inline double population_variance(const vecd& x, std::size_t begin, std::size_t count) {
    double mu = 0;
    for (std::size_t i = 0; i < count; ++i)
        mu += x[begin + i];
    mu /= double(count);
    double var = 0;
    for (std::size_t i = 0; i < count; ++i) {
        double d = x[begin + i] - mu;
        var += d * d;
    }
    return var / double(count);
}

} // namespace detail

// Per-group population variances for d entries split into g contiguous
// groups.
inline vecd group_variances(const vecd& x, std::size_t g) {
    if (g == 0 || x.size() % g != 0)
        throw shape_error("group_variances: " + format_size(g) +
                          " groups do not divide dimension " + format_size(x.size()));
    std::size_t c = x.size() / g;
    vecd out(g);
    for (std::size_t i = 0; i < g; ++i)
        out[i] = detail::population_variance(x, i * c, c);
    return out;
}

// Squared-Frobenius Hessian mass of layer normalization at x:
// 3(d - 2) / (d sigma^4). Zero exactly at d = 2.
inline double hessian_measure_ln_closed(const vecd& x, double eps_zero = default_eps_zero) {
    std::size_t d = x.size();
    if (d < 2)
        throw shape_error("hessian_measure_ln_closed: need dimension >= 2");
    require_finite(x, "hessian_measure_ln_closed");
    double var = detail::population_variance(x, 0, d);
    if (std::sqrt(var) <= eps_zero)
        throw degenerate_error("hessian_measure_ln_closed: constant input");
    return 3.0 * double(d - 2) / (double(d) * var * var);
}

// Group variant: sum of 3(c - 2) / (c sigma_i^4) over the g groups of size
// c = d / g.
inline double hessian_measure_lng_closed(const vecd& x, std::size_t g,
                                         double eps_zero = default_eps_zero) {
    std::size_t d = x.size();
    if (g == 0 || d % g != 0)
        throw shape_error("hessian_measure_lng_closed: " + format_size(g) +
                          " groups do not divide dimension " + format_size(d));
    std::size_t c = d / g;
    if (c < 2)
        throw degenerate_error("hessian_measure_lng_closed: group size 1 has zero variance");
    require_finite(x, "hessian_measure_lng_closed");
    vecd vars = group_variances(x, g);
    double sum = 0;
    for (double var : vars) {
        if (std::sqrt(var) <= eps_zero)
            throw degenerate_error("hessian_measure_lng_closed: a group is constant");
        sum += 3.0 * double(c - 2) / (double(c) * var * var);
    }
    return sum;
}

// Finite-difference oracle for the same quantity, for any vector-valued map:
// every second partial of every output coordinate by central differences,
// then the sum of squared entries. F must accept vecd and return vecd.
template <typename F>
double hessian_indicator_fd(F&& f, const vecd& x, double h) {
    if (h <= 0)
        throw validation_error("hessian_indicator_fd: step must be positive");
    std::size_t d = x.size();
    auto eval = [&](std::size_t j, double sj, std::size_t k, double sk) {
        vecd probe = x;
        probe[j] += sj * h;
        probe[k] += sk * h;
        return f(probe);
    };
    vecd base = f(x);
    std::size_t out_dim = base.size();
    double total = 0;
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
            for (std::size_t i = 0; i < out_dim; ++i) {
                double entry;
                if (j == k) {
                    vecd up = eval(j, +1, j, 0);
                    vecd down = eval(j, -1, j, 0);
                    entry = (up[i] - 2 * base[i] + down[i]) / (h * h);
                } else {
                    vecd pp = eval(j, +1, k, +1);
                    vecd pm = eval(j, +1, k, -1);
                    vecd mp = eval(j, -1, k, +1);
                    vecd mm = eval(j, -1, k, -1);
                    entry = (pp[i] - pm[i] - mp[i] + mm[i]) / (4 * h * h);
                }
                total += (j == k ? 1.0 : 2.0) * entry * entry;
            }
        }
    }
    return total;
}

inline double default_fd_step(const vecd& x) {
    double inf_norm = 0;
    for (double v : x)
        inf_norm = std::max(inf_norm, std::abs(v));
    return 1e-4 * (1.0 + inf_norm);
}

// Oracle evaluation of the group normalization measure; h = 0 picks the
// step 1e-4 (1 + |x|_inf). g = 1 probes plain layer normalization.
inline double hessian_measure_fd(const vecd& x, std::size_t g, double h = 0) {
    if (h == 0)
        h = default_fd_step(x);
    return hessian_indicator_fd([g](const vecd& v) { return group_layer_norm(v, g); }, x, h);
}

struct nonlinearity_report {
    double h_closed = 0;
    double h_fd = 0;
    double rel_err = 0;
    vecd per_group_variances;
    double global_variance = 0;
    std::size_t group_count = 1;
    std::size_t group_size = 0;
};

inline nonlinearity_report hessian_report(const vecd& x, std::size_t g, double h = 0) {
    nonlinearity_report r;
    r.group_count = g;
    r.group_size = g == 0 ? 0 : x.size() / g;
    r.h_closed = hessian_measure_lng_closed(x, g);
    r.h_fd = hessian_measure_fd(x, g, h);
    r.rel_err = std::abs(r.h_closed - r.h_fd) / std::max(r.h_closed, 1e-12);
    r.per_group_variances = group_variances(x, g);
    r.global_variance = detail::population_variance(x, 0, x.size());
    return r;
}

// Amplification of the measure when splitting layer normalization into g
// groups, with the two supporting moment inequalities checked on the spot.
struct group_ratio_report {
    double h_ln = 0;
    double h_lng = 0;
    double ratio = 0;
    bool variance_dominance_ok = false; // global variance >= mean of group variances
    bool inverse_quartic_bound_ok = false; // sum 1/sigma_i^4 >= g / sigma^4
    vecd per_group_variances;
    double global_variance = 0;
    std::size_t group_count = 1;
    std::size_t group_size = 0;
};

inline group_ratio_report group_ratio(const vecd& x, std::size_t g,
                                      double eps_zero = default_eps_zero) {
    std::size_t d = x.size();
    if (d <= 2)
        throw validation_error("group_ratio: the plain measure is 0 at dimension 2, "
                               "the ratio is undefined");
    group_ratio_report r;
    r.group_count = g;
    r.h_ln = hessian_measure_ln_closed(x, eps_zero);
    r.h_lng = hessian_measure_lng_closed(x, g, eps_zero);
    r.ratio = r.h_lng / r.h_ln;
    r.group_size = d / g;
    r.per_group_variances = group_variances(x, g);
    r.global_variance = detail::population_variance(x, 0, d);
    double mean_group_var = 0;
    double inv_quartic_sum = 0;
    for (double var : r.per_group_variances) {
        mean_group_var += var / double(g);
        inv_quartic_sum += 1.0 / (var * var);
    }
    double global_quartic = r.global_variance * r.global_variance;
    r.variance_dominance_ok = r.global_variance >= mean_group_var - 1e-12;
    r.inverse_quartic_bound_ok = inv_quartic_sum >= (double(g) / global_quartic) * (1.0 - 1e-9);
    return r;
}

} // namespace lnnet
