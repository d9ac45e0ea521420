#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lnnet/core.hpp"
#include "lnnet/dataset.hpp"
#include "lnnet/errors.hpp"
#include "lnnet/format.hpp"
#include "lnnet/linalg.hpp"
#include "lnnet/net.hpp"
#include "lnnet/rng.hpp"

namespace lnnet {

// Two point sets of the same dimension, one matrix per class, points as
// columns.
struct class_pair {
    matd x1;
    matd x2;
};

inline class_pair make_class_pair(matd x1, matd x2) {
    if (x1.rows != x2.rows)
        throw shape_error("class_pair: dimensions differ (" + format_size(x1.rows) + " vs " +
                          format_size(x2.rows) + ")");
    if (x1.rows == 0)
        throw shape_error("class_pair: dimension 0");
    if (x1.cols == 0 || x2.cols == 0)
        throw validation_error("class_pair: each class needs at least one point");
    require_finite(x1, "class_pair");
    require_finite(x2, "class_pair");
    return {std::move(x1), std::move(x2)};
}

// Splits a two-class dataset into a class_pair; the smaller class id becomes
// x1.
inline class_pair split_by_label(const labeled_dataset& ds) {
    validate_dataset(ds);
    std::vector<int> labels = distinct_labels(ds);
    if (labels.size() != 2)
        throw validation_error("split_by_label: need exactly 2 classes, found " +
                               format_size(labels.size()));
    std::size_t m1 = 0;
    for (int l : ds.labels)
        m1 += l == labels[0] ? 1 : 0;
    matd x1(ds.points.rows, m1);
    matd x2(ds.points.rows, ds.points.cols - m1);
    std::size_t j1 = 0, j2 = 0;
    for (std::size_t j = 0; j < ds.points.cols; ++j) {
        matd& dst = ds.labels[j] == labels[0] ? x1 : x2;
        std::size_t& jj = ds.labels[j] == labels[0] ? j1 : j2;
        for (std::size_t r = 0; r < ds.points.rows; ++r)
            dst(r, jj) = ds.points(r, j);
        ++jj;
    }
    return make_class_pair(std::move(x1), std::move(x2));
}

// Within-class scatter M (deviations from each class mean) and total scatter
// N (deviations from the mean of all points pooled).
struct scatter_pair {
    matd m;
    matd n;
};

namespace detail {

inline vecd col_mean(const matd& x) {
    if (x.cols == 0)
        throw shape_error("col_mean: no columns");
    vecd mu(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j)
            mu[i] += x(i, j);
        mu[i] /= double(x.cols);
    }
    return mu;
}

inline double ssr_scalar(const vecd& a, const vecd& b, double eps_zero) {
    double within = sum_of_squares(a) + sum_of_squares(b);
    vecd all;
    all.reserve(a.size() + b.size());
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    double total = sum_of_squares(all);
    if (total <= eps_zero)
        throw degenerate_error("ssr: total scatter is zero");
    return within / total;
}

} // namespace detail

// Sum-of-squares ratio: within-class scatter over total scatter, in [0, 1].
inline double ssr(const class_pair& pair, double eps_zero = default_eps_zero) {
    double within = sum_of_squares(pair.x1) + sum_of_squares(pair.x2);
    double total = sum_of_squares(hcat(pair.x1, pair.x2));
    if (total <= eps_zero)
        throw degenerate_error("ssr: total scatter is zero");
    return within / total;
}

inline scatter_pair scatter_matrices(const class_pair& pair) {
    std::size_t d = pair.x1.rows;
    vecd mean1 = detail::col_mean(pair.x1);
    vecd mean2 = detail::col_mean(pair.x2);
    std::size_t m1 = pair.x1.cols, m2 = pair.x2.cols;
    vecd mean_all(d);
    for (std::size_t r = 0; r < d; ++r)
        mean_all[r] = (double(m1) * mean1[r] + double(m2) * mean2[r]) / double(m1 + m2);
    scatter_pair s;
    s.m = matd(d, d);
    s.n = matd(d, d);
    auto accumulate = [&](const matd& x, const vecd& center_within) {
        vecd dev(d);
        for (std::size_t j = 0; j < x.cols; ++j) {
            for (std::size_t r = 0; r < d; ++r)
                dev[r] = x(r, j) - center_within[r];
            add_outer(s.m, dev, dev);
            for (std::size_t r = 0; r < d; ++r)
                dev[r] = x(r, j) - mean_all[r];
            add_outer(s.n, dev, dev);
        }
    };
    accumulate(pair.x1, mean1);
    accumulate(pair.x2, mean2);
    return s;
}

// Full analysis of one pair: the ratio itself, its linear lower bound, the
// minimizing direction, and the first-order data of the one-dimensional
// curve f_ssr along that direction.
struct ssr_report {
    double ssr = 0;
    double lssr = 0;
    double lambda_star = 0;               // raw minimum eigenvalue before clamping
    vecd u_star;                          // unit minimizing direction
    std::size_t lambda_multiplicity = 1;  // eigenvalues within 1e-8 of lambda_star
    double fprime0 = 0;
    double t1 = 0;
    double t2 = 0;
    double t3 = 0;
    matd optimal_w_diagnostic;            // u_star outer product, the rank-1 optimum
};

struct derivative_stats {
    double fprime0 = 0;
    double t1 = 0;
    double t2 = 0;
    double t3 = 0;
};

// Mean, population variance, and population third central moment of a
// scalar sample.
struct moment_stats {
    double mean = 0;
    double var = 0;
    double third = 0;
};

inline moment_stats central_moments(const vecd& x) {
    moment_stats out;
    out.mean = mean(x);
    for (double v : x) {
        double d = v - out.mean;
        out.var += d * d;
        out.third += d * d * d;
    }
    out.var /= double(x.size());
    out.third /= double(x.size());
    return out;
}

inline vecd project_onto(const matd& x, const vecd& u) {
    vecd out(x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) {
        double s = 0;
        for (std::size_t r = 0; r < x.rows; ++r)
            s += u[r] * x(r, j);
        out[j] = s;
    }
    return out;
}

// First derivative of f_ssr at t = 0 along direction u, from the per-class
// mean, variance, and third central moment of the projected data. The three
// statistics come from an expansion that assumes both classes hold the same
// number of points; with unequal counts the value is only an approximation
// of the true slope.
inline derivative_stats fssr_derivative_at_zero(const class_pair& pair, const vecd& u) {
    if (u.size() != pair.x1.rows)
        throw shape_error("fssr_derivative_at_zero: direction dimension mismatch");
    vecd s1 = project_onto(pair.x1, u);
    vecd s2 = project_onto(pair.x2, u);
    moment_stats a = central_moments(s1);
    moment_stats b = central_moments(s2);
    double dm = a.mean - b.mean;
    derivative_stats out;
    out.t1 = dm * dm * (a.third + b.third);
    out.t2 = dm * (a.var - b.var) * (dm * dm - (a.var + b.var));
    double base = 2 * a.var + 2 * b.var + dm * dm;
    out.t3 = base * base;
    if (out.t3 <= 0)
        throw degenerate_error("fssr_derivative_at_zero: all projected points identical");
    out.fprime0 = -2 * (out.t1 + out.t2) / out.t3;
    return out;
}

// Minimum of SSR over all linear maps, by whitening the total scatter and
// taking the smallest eigenvalue of the whitened within-class scatter.
inline ssr_report lssr(const class_pair& pair) {
    scatter_pair s = scatter_matrices(pair);
    std::size_t d = s.n.rows;
    double tr = 0;
    for (std::size_t r = 0; r < d; ++r)
        tr += s.n(r, r);
    double eps_pd = 1e-10 * tr;
    eig_result n_eig = jacobi_eigh(s.n);
    if (tr <= 0 || n_eig.values.front() < eps_pd)
        throw singular_error("lssr: total scatter is singular (min eigenvalue " +
                             format_double(n_eig.values.front()) + ")");
    matd l = cholesky(s.n);
    eig_result eig = jacobi_eigh(whiten(s.m, l));
    double lambda = eig.values.front();

    ssr_report report;
    report.ssr = ssr(pair);
    report.lambda_star = lambda;
    report.lssr = std::clamp(lambda, 0.0, 1.0);
    report.lambda_multiplicity = 0;
    for (double v : eig.values)
        report.lambda_multiplicity += std::abs(v - lambda) < 1e-8 ? 1 : 0;

    vecd u = solve_lower_transposed(l, col(eig.vectors, 0));
    double n = norm2(u);
    if (n <= 0)
        throw singular_error("lssr: failed to recover the minimizing direction");
    for (double& v : u)
        v /= n;
    std::size_t top = 0;
    for (std::size_t r = 1; r < d; ++r)
        if (std::abs(u[r]) > std::abs(u[top]))
            top = r;
    if (u[top] < 0)
        for (double& v : u)
            v = -v;
    report.u_star = u;

    report.optimal_w_diagnostic = matd(d, d);
    add_outer(report.optimal_w_diagnostic, u, u);

    derivative_stats ds = fssr_derivative_at_zero(pair, u);
    report.fprime0 = ds.fprime0;
    report.t1 = ds.t1;
    report.t2 = ds.t2;
    report.t3 = ds.t3;
    return report;
}

// Minimum projected SSR over `trials` random unit directions; a randomized
// upper bound on the true minimum over linear maps.
inline double lssr_bruteforce(const class_pair& pair, std::size_t trials, std::uint64_t seed) {
    if (trials == 0)
        throw validation_error("lssr_bruteforce: need at least one trial");
    std::size_t d = pair.x1.rows;
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t k = 0; k < trials; ++k) {
        counter_rng rng(seed, k);
        vecd u(d);
        double n = 0;
        do {
            for (std::size_t r = 0; r < d; ++r)
                u[r] = rng.next_gaussian();
            n = norm2(u);
        } while (n <= 1e-6);
        for (double& v : u)
            v /= n;
        vecd s1 = project_onto(pair.x1, u);
        vecd s2 = project_onto(pair.x2, u);
        double within = sum_of_squares(s1) + sum_of_squares(s2);
        vecd all;
        all.insert(all.end(), s1.begin(), s1.end());
        all.insert(all.end(), s2.begin(), s2.end());
        double total = sum_of_squares(all);
        if (total <= default_eps_zero)
            continue;
        best = std::min(best, within / total);
        any = true;
    }
    if (!any)
        throw degenerate_error("lssr_bruteforce: every direction had zero scatter");
    return best;
}

// One-dimensional image of x under the scaled-shift map followed by
// spherical projection and coordinate summing: (s t + 1) / sqrt(s^2 t^2 + 1)
// with s the projection of x onto u_star.
inline double psi_bar(double t, double s) {
    return (s * t + 1.0) / std::sqrt(s * s * t * t + 1.0);
}

// SSR of the psi_bar images of both classes, as a function of t; t = 0
// reproduces the linear bound exactly.
inline double fssr(const class_pair& pair, const ssr_report& report, double t,
                   double eps_zero = default_eps_zero) {
    if (t == 0)
        return report.lssr;
    vecd s1 = project_onto(pair.x1, report.u_star);
    vecd s2 = project_onto(pair.x2, report.u_star);
    for (double& s : s1)
        s = psi_bar(t, s);
    for (double& s : s2)
        s = psi_bar(t, s);
    return detail::ssr_scalar(s1, s2, eps_zero);
}

// Affine / layer-norm / affine sandwich realizing psi_bar(t_star, u_star . x),
// plus the value of the ratio it achieves.
struct break_result {
    double t_star = 0;
    affine_map psi_in;  // input dimension -> 3
    affine_map psi_out; // 3 -> 1
    double ssr_after = 0;
};

// Line search for a t with fssr(t) strictly below the linear bound, walking
// t = sign * 0.1 * 0.5^k; the sign opposing fprime0 is tried first, the other
// sign afterwards. Each side gets `search_budget` steps.
inline break_result break_lssr(const class_pair& pair, std::size_t search_budget = 60,
                               double eps_deriv = 1e-8, double eps_margin = 1e-10) {
    ssr_report report = lssr(pair);
    if (std::abs(report.fprime0) <= eps_deriv)
        throw search_error("break_lssr: derivative at 0 is " + format_double(report.fprime0) +
                           "; no descent direction");
    if (search_budget == 0)
        throw validation_error("break_lssr: zero search budget");
    double first_sign = report.fprime0 < 0 ? 1.0 : -1.0;
    double t_star = 0;
    bool found = false;
    for (double sign : {first_sign, -first_sign}) {
        double t = sign * 0.1;
        for (std::size_t k = 0; k < search_budget && !found; ++k, t *= 0.5) {
            // Steps far down the schedule can collapse every image to the
            // same value in double precision; such a step cannot witness
            // descent, so it is skipped.
            double val;
            try {
                val = fssr(pair, report, t);
            } catch (const degenerate_error&) {
                continue;
            }
            if (val < report.lssr - eps_margin) {
                t_star = t;
                found = true;
            }
        }
        if (found)
            break;
    }
    if (!found)
        throw search_error("break_lssr: line search exhausted without descent");

    std::size_t d = pair.x1.rows;
    affine_map lift;
    lift.w = matd(2, d);
    for (std::size_t c = 0; c < d; ++c)
        lift.w(0, c) = t_star * report.u_star[c];
    lift.b = {0.0, 1.0};
    sp_embedding emb = sp_as_lnnet(2);

    break_result out;
    out.t_star = t_star;
    out.psi_in = compose(emb.pre, lift);
    affine_map sum_coords;
    sum_coords.w = matd(1, 2, {1.0, 1.0});
    sum_coords.b = {0.0};
    out.psi_out = compose(sum_coords, emb.post);
    out.ssr_after = fssr(pair, report, t_star);
    return out;
}

} // namespace lnnet
