#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lnnet/core.hpp"
#include "lnnet/dataset.hpp"
#include "lnnet/errors.hpp"
#include "lnnet/format.hpp"
#include "lnnet/net.hpp"
#include "lnnet/rng.hpp"

namespace lnnet {

struct synthesis_tolerances {
    double eps_eq = 1e-9;    // two scalars within this are the same point
    double eps_sep = 1e-6;   // relative projection separation for directions
    double eps_par = 1e-9;   // relative tolerance for equal-sum quadruples
    double eps_proto = 1e-6; // compiled net must land this close to prototypes
    std::size_t direction_budget = 1000;
};

// Indices whose positions became equal at one merge layer.
struct merge_event {
    std::vector<std::size_t> indices;
};

// One merge layer of the run: the pivot pair, the subtracted shift vector
// ((p_i + p_j)/2, (p_i - p_j)/2), the fan angles, and what merged. When the
// layer was preceded by a direction change, pba_u holds that unit direction
// and pba_positions the points right after it.
struct layer_record {
    std::size_t pivot_i = 0;
    std::size_t pivot_j = 0;
    double shift_x = 0;
    double shift_y = 0;
    vecd gammas;
    vecd positions_after;
    std::vector<merge_event> merges;
    std::optional<vecd> pba_u;
    vecd pba_positions;
};

struct synthesis_trace {
    vecd init_direction;
    vecd initial_positions;
    std::vector<layer_record> layers;
};

struct synthesis_result {
    ln_net net;
    std::vector<pipeline_stage> stages; // reference pipeline the net was compiled from
    synthesis_trace trace;
    std::vector<std::pair<double, int>> readout; // scalar prototype -> class id
    std::size_t depth = 0;                       // normalization layers in net
    double worst_forward_miss = 0; // largest |forward(net, x_k) - prototype| over training
};

namespace detail {

// Position equality is judged relative to magnitude. The merge map contracts
// absolute gaps in the far field while keeping relative gaps intact, so an
// absolute threshold would start gluing unrelated points after a few dozen
// layers at larger point counts.
inline bool same_position(double a, double b, double eps_eq) {
    return std::abs(a - b) <= eps_eq * std::max(std::abs(a), std::abs(b));
}

// Groups scalar positions into clusters of points that sit within eps_eq
// (relative) of a neighbor; cluster indices come out ascending and clusters
// are ordered left to right.
inline std::vector<std::vector<std::size_t>> position_clusters(const vecd& p, double eps_eq) {
    std::vector<std::size_t> order(p.size());
    for (std::size_t k = 0; k < p.size(); ++k)
        order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return p[a] < p[b] || (p[a] == p[b] && a < b);
    });
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t t = 0; t < order.size(); ++t) {
        if (t == 0 || !same_position(p[order[t]], p[order[t - 1]], eps_eq))
            clusters.emplace_back();
        clusters.back().push_back(order[t]);
    }
    for (auto& c : clusters)
        std::sort(c.begin(), c.end());
    return clusters;
}

struct pivot_pair {
    bool found = false;
    std::size_t ci = 0; // cluster index of the pivot
    std::size_t cj = 0; // cluster index of its merge partner
};

// The scan of the merge algorithm on position clusters (points within eps_eq
// act as one point): repeatedly take the leftmost remaining cluster; if some
// same-label cluster sits elsewhere, that pair is the pivot, otherwise
// retire the cluster and keep scanning. Cluster label and representative are
// those of its lowest member index.
inline pivot_pair find_pivot(const std::vector<std::vector<std::size_t>>& clusters,
                             const std::vector<int>& labels) {
    std::vector<bool> active(clusters.size(), true);
    std::size_t remaining = clusters.size();
    while (remaining > 0) {
        std::size_t ci = clusters.size();
        for (std::size_t t = 0; t < clusters.size(); ++t)
            if (active[t]) {
                ci = t;
                break;
            }
        for (std::size_t t = 0; t < clusters.size(); ++t)
            if (t != ci && labels[clusters[t][0]] == labels[clusters[ci][0]])
                return {true, ci, t};
        active[ci] = false;
        --remaining;
    }
    return {};
}

} // namespace detail

// Unit vector whose projections keep all distinct columns of `points` apart,
// with margin eps_sep relative to each pair's distance. Seeded rejection
// sampling; attempt a draws from stream a of the seed.
inline vecd init_direction(const matd& points, std::uint64_t seed,
                           const synthesis_tolerances& tol = {}) {
    if (points.cols == 0 || points.rows == 0)
        throw validation_error("init_direction: empty point set");
    require_finite(points, "init_direction");
    std::size_t d = points.rows, m = points.cols;
    for (std::uint64_t attempt = 0; attempt < tol.direction_budget; ++attempt) {
        counter_rng rng(seed, attempt);
        vecd u(d);
        double n = 0;
        do {
            for (std::size_t r = 0; r < d; ++r)
                u[r] = rng.next_gaussian();
            n = norm2(u);
        } while (n <= 1e-6);
        for (double& v : u)
            v /= n;
        bool ok = true;
        for (std::size_t a = 0; a < m && ok; ++a)
            for (std::size_t b = a + 1; b < m && ok; ++b) {
                double proj = 0, dist2 = 0;
                for (std::size_t r = 0; r < d; ++r) {
                    double diff = points(r, a) - points(r, b);
                    proj += u[r] * diff;
                    dist2 += diff * diff;
                }
                double dist = std::sqrt(dist2);
                if (dist > tol.eps_eq && std::abs(proj) <= tol.eps_sep * dist)
                    ok = false;
            }
        if (ok)
            return u;
    }
    throw search_error("init_direction: no separating direction in " +
                       format_size(tol.direction_budget) + " draws");
}

// Unit direction for the parallelization-breaking step: projections of the
// lifted points must stay pairwise distinct and admit no two disjoint pairs
// with equal sums. tilde is 2 x m, the points after lift-and-project.
inline vecd pba_direction(const matd& tilde, std::uint64_t seed,
                          const synthesis_tolerances& tol = {}) {
    if (tilde.rows != 2 || tilde.cols == 0)
        throw shape_error("pba_direction: expected 2 x m points");
    std::size_t m = tilde.cols;
    std::vector<std::size_t> reps;
    for (std::size_t k = 0; k < m; ++k) {
        bool dup = false;
        for (std::size_t r : reps) {
            double dx = tilde(0, k) - tilde(0, r);
            double dy = tilde(1, k) - tilde(1, r);
            dup = dup || std::sqrt(dx * dx + dy * dy) <= tol.eps_eq;
        }
        if (!dup)
            reps.push_back(k);
    }
    for (std::uint64_t attempt = 0; attempt < tol.direction_budget; ++attempt) {
        counter_rng rng(seed, attempt);
        vecd u(2);
        double n = 0;
        do {
            u[0] = rng.next_gaussian();
            u[1] = rng.next_gaussian();
            n = norm2(u);
        } while (n <= 1e-6);
        u[0] /= n;
        u[1] /= n;
        bool ok = true;
        for (std::size_t a = 0; a < m && ok; ++a)
            for (std::size_t b = a + 1; b < m && ok; ++b) {
                double dx = tilde(0, a) - tilde(0, b);
                double dy = tilde(1, a) - tilde(1, b);
                double dist = std::sqrt(dx * dx + dy * dy);
                if (dist > tol.eps_eq && std::abs(u[0] * dx + u[1] * dy) <= tol.eps_sep * dist)
                    ok = false;
            }
        if (ok) {
            vecd s(reps.size());
            double scale = 1.0;
            for (std::size_t t = 0; t < reps.size(); ++t) {
                s[t] = u[0] * tilde(0, reps[t]) + u[1] * tilde(1, reps[t]);
                scale = std::max(scale, std::abs(s[t]));
            }
            for (std::size_t a = 0; a < s.size() && ok; ++a)
                for (std::size_t b = a + 1; b < s.size() && ok; ++b)
                    for (std::size_t c = a; c < s.size() && ok; ++c)
                        for (std::size_t e = c + 1; e < s.size() && ok; ++e) {
                            if (c == a && e <= b)
                                continue;
                            if (c == a || c == b || e == a || e == b)
                                continue;
                            if (std::abs(s[a] + s[b] - s[c] - s[e]) <= tol.eps_par * scale)
                                ok = false;
                        }
        }
        if (ok)
            return u;
    }
    throw search_error("pba_direction: no parallelogram-free direction in " +
                       format_size(tol.direction_budget) + " draws");
}

// Lift on-axis scalars up by one, project onto the unit circle. Column k of
// the result is the lifted image of p[k]; norms are at least 1, so the
// projection never degenerates.
inline matd pba_lift(const vecd& p) {
    matd tilde(2, p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        double n = std::sqrt(p[k] * p[k] + 1.0);
        tilde(0, k) = p[k] / n;
        tilde(1, k) = 1.0 / n;
    }
    return tilde;
}

// Applies the breaking step with a given direction: new scalar positions are
// the projections of the lifted points onto u.
inline vecd pba(const vecd& p, const vecd& u) {
    if (u.size() != 2)
        throw shape_error("pba: direction must be 2-D");
    matd tilde = pba_lift(p);
    vecd out(p.size());
    for (std::size_t k = 0; k < p.size(); ++k)
        out[k] = u[0] * tilde(0, k) + u[1] * tilde(1, k);
    return out;
}

namespace detail {

inline void append_pba_stages(std::vector<pipeline_stage>& stages, const vecd& u) {
    stages.push_back(affine_stage{matd::identity(2), {0.0, 1.0}});
    stages.push_back(sp_stage{2});
    stages.push_back(affine_stage{matd(2, 2, {u[0], u[1], 0.0, 0.0}), {0.0, 0.0}});
}

inline void append_merge_stages(std::vector<pipeline_stage>& stages, double sx, double sy) {
    stages.push_back(affine_stage{matd::identity(2), {-sx, sy}});
    stages.push_back(sp_stage{2});
    stages.push_back(affine_stage{matd(2, 2, {0.0, 1.0, 0.0, 0.0}), {0.0, 0.0}});
}

// Shared merge loop. When pba_seed is set, every merge layer is preceded by
// a breaking step whose direction comes from stream 1000 + t of *pba_seed
// (t counts merge layers), and the pivot is re-found on the new positions.
struct merge_loop_output {
    std::vector<pipeline_stage> stages;
    std::vector<layer_record> layers;
    vecd positions;
};

inline void audit_label_purity(const std::vector<std::vector<std::size_t>>& clusters,
                               const std::vector<int>& labels, const std::string& where) {
    for (const auto& c : clusters)
        for (std::size_t t = 1; t < c.size(); ++t)
            if (labels[c[t]] != labels[c[0]])
                throw error("merge loop: points " + format_size(c[0]) + " and " +
                            format_size(c[t]) + " coincide " + where + " but differ in label");
}

inline merge_loop_output run_merge_loop(vecd p, const std::vector<int>& labels,
                                        const synthesis_tolerances& tol,
                                        std::optional<std::uint64_t> pba_seed) {
    merge_loop_output out;
    const std::size_t m = p.size();
    // Exact arithmetic puts both pivot points at 1/sqrt(2); writing that
    // value directly keeps merged clusters coincident bit for bit, so every
    // merge layer retires at least one cluster.
    const double root_half = std::sqrt(0.5);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b)
            if (labels[a] != labels[b] && same_position(p[a], p[b], tol.eps_eq))
                throw validation_error("merge loop: points " + format_size(a) + " and " +
                                       format_size(b) +
                                       " coincide but differ in label");
    std::size_t merges_done = 0;
    while (true) {
        auto before = position_clusters(p, tol.eps_eq);
        pivot_pair pv = find_pivot(before, labels);
        if (!pv.found)
            break;
        if (merges_done >= m)
            throw error("merge loop: merge count exceeded the point count");
        layer_record rec;
        if (pba_seed) {
            matd tilde = pba_lift(p);
            counter_rng seeder(*pba_seed, 1000 + merges_done);
            vecd u = pba_direction(tilde, seeder.next_u64(), tol);
            append_pba_stages(out.stages, u);
            p = pba(p, u);
            rec.pba_u = u;
            rec.pba_positions = p;
            before = position_clusters(p, tol.eps_eq);
            audit_label_purity(before, labels, "after the breaking step");
            pv = find_pivot(before, labels);
            if (!pv.found)
                throw error("merge loop: pivot vanished after the breaking step");
        }
        std::size_t i = before[pv.ci][0], j = before[pv.cj][0];
        double pi = p[i], pj = p[j];
        double sx = (pi + pj) / 2.0;
        double sy = (pj - pi) / 2.0;
        rec.pivot_i = i;
        rec.pivot_j = j;
        rec.shift_x = sx;
        rec.shift_y = (pi - pj) / 2.0;
        rec.gammas.resize(m);
        for (std::size_t k = 0; k < m; ++k) {
            double hx = p[k] - sx;
            rec.gammas[k] = std::atan(hx / sy);
            p[k] = sy / std::sqrt(hx * hx + sy * sy);
        }
        for (std::size_t k : before[pv.ci])
            p[k] = root_half;
        for (std::size_t k : before[pv.cj])
            p[k] = root_half;
        append_merge_stages(out.stages, sx, sy);
        rec.positions_after = p;
        auto after = position_clusters(p, tol.eps_eq);
        audit_label_purity(after, labels, "after merging");
        if (after.size() >= before.size())
            throw error("merge loop: distinct point count did not decrease");
        for (const auto& cluster : after) {
            std::size_t sources = 0;
            for (const auto& prev : before)
                if (std::includes(cluster.begin(), cluster.end(), prev.begin(), prev.end()))
                    ++sources;
            if (sources >= 2)
                rec.merges.push_back(merge_event{cluster});
        }
        out.layers.push_back(std::move(rec));
        ++merges_done;
    }
    out.positions = std::move(p);
    return out;
}

} // namespace detail

struct pma_result {
    std::vector<pipeline_stage> stages;
    std::vector<layer_record> layers;
    vecd final_positions;
};

// The scalar merge algorithm for two classes: repeatedly shift the pivot
// pair symmetrically around the origin height, project onto the unit circle,
// and read the vertical coordinate back as the new position.
inline pma_result pma(const vecd& p, const std::vector<int>& labels,
                      const synthesis_tolerances& tol = {}) {
    if (p.size() != labels.size())
        throw shape_error("pma: " + format_size(labels.size()) + " labels for " +
                          format_size(p.size()) + " points");
    if (p.empty())
        throw validation_error("pma: no points");
    require_finite(p, "pma");
    std::vector<int> seen;
    for (int l : labels) {
        bool s = false;
        for (int v : seen)
            s = s || v == l;
        if (!s)
            seen.push_back(l);
    }
    if (seen.size() > 2)
        throw validation_error("pma: more than 2 labels; use the multi-class path");
    if (seen.size() != 2)
        throw validation_error("pma: need exactly 2 labels");
    detail::merge_loop_output r = detail::run_merge_loop(p, labels, tol, std::nullopt);
    return {std::move(r.stages), std::move(r.layers), std::move(r.positions)};
}

namespace detail {

inline synthesis_result synthesize(const labeled_dataset& ds, std::uint64_t seed,
                                   const synthesis_tolerances& tol, bool multiclass) {
    validate_dataset(ds, tol.eps_eq);
    std::vector<int> classes = distinct_labels(ds);
    if (!multiclass && classes.size() != 2)
        throw validation_error("synthesize_binary: need exactly 2 classes, found " +
                               format_size(classes.size()) + "; use the multi-class path");
    if (multiclass && classes.size() < 2)
        throw validation_error("synthesize_multiclass: need at least 2 classes");

    std::size_t d = ds.points.rows, m = ds.points.cols;
    synthesis_result result;
    result.trace.init_direction = init_direction(ds.points, seed, tol);

    vecd p(m);
    for (std::size_t k = 0; k < m; ++k) {
        double s = 0;
        for (std::size_t r = 0; r < d; ++r)
            s += result.trace.init_direction[r] * ds.points(r, k);
        p[k] = s;
    }
    result.trace.initial_positions = p;

    matd first(2, d);
    for (std::size_t c = 0; c < d; ++c)
        first(0, c) = result.trace.init_direction[c];
    result.stages.push_back(affine_stage{first, {0.0, 0.0}});

    merge_loop_output loop = run_merge_loop(
        p, ds.labels, tol, multiclass ? std::optional<std::uint64_t>(seed) : std::nullopt);
    for (auto& st : loop.stages)
        result.stages.push_back(std::move(st));
    result.trace.layers = std::move(loop.layers);

    result.stages.push_back(affine_stage{matd(1, 2, {1.0, 0.0}), {0.0}});
    result.net = compile(result.stages);
    result.depth = count_normalization_layers(result.net);

    for (int cls : classes) {
        double proto = 0;
        bool have = false;
        for (std::size_t k = 0; k < m; ++k) {
            if (ds.labels[k] != cls)
                continue;
            if (!have) {
                proto = loop.positions[k];
                have = true;
            } else if (!detail::same_position(loop.positions[k], proto, tol.eps_eq)) {
                throw error("synthesize: class " + format_int(cls) +
                            " did not collapse to one prototype");
            }
        }
        result.readout.emplace_back(proto, cls);
    }
    for (std::size_t a = 0; a < result.readout.size(); ++a)
        for (std::size_t b = a + 1; b < result.readout.size(); ++b)
            if (detail::same_position(result.readout[a].first, result.readout[b].first,
                                      tol.eps_eq))
                throw error("synthesize: prototypes of classes " +
                            format_int(result.readout[a].second) + " and " +
                            format_int(result.readout[b].second) + " collide");

    // The compiled net accumulates round-off that the trace positions do
    // not, so record how far forward passes stray from the prototypes
    // instead of failing outright; classification tolerates small misses as
    // long as prototypes stay far apart.
    for (std::size_t k = 0; k < m; ++k) {
        vecd y = forward(result.net, col(ds.points, k));
        double proto = 0;
        for (const auto& [value, cls] : result.readout)
            if (cls == ds.labels[k])
                proto = value;
        result.worst_forward_miss = std::max(result.worst_forward_miss, std::abs(y[0] - proto));
    }
    return result;
}

} // namespace detail

inline synthesis_result synthesize_binary(const labeled_dataset& ds, std::uint64_t seed,
                                          const synthesis_tolerances& tol = {}) {
    return detail::synthesize(ds, seed, tol, false);
}

// Binary merging can be confused by parallel point pairs once several
// classes interact, so every merge layer is preceded by a seeded breaking
// step that re-spreads the points along a parallelogram-free direction.
inline synthesis_result synthesize_multiclass(const labeled_dataset& ds, std::uint64_t seed,
                                              const synthesis_tolerances& tol = {}) {
    return detail::synthesize(ds, seed, tol, true);
}

struct classification {
    int label = 0;
    double distance = 0;
};

// Nearest-prototype readout on the net's scalar output.
inline classification classify(const synthesis_result& result, const vecd& x,
                               double eps_proto = 1e-6) {
    if (result.readout.empty())
        throw validation_error("classify: empty readout table");
    double s = forward(result.net, x)[0];
    classification best{result.readout[0].second, std::abs(s - result.readout[0].first)};
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t < result.readout.size(); ++t) {
        double dist = std::abs(s - result.readout[t].first);
        if (dist < best.distance) {
            second = best.distance;
            best = {result.readout[t].second, dist};
        } else {
            second = std::min(second, dist);
        }
    }
    if (result.readout.size() > 1 && second - best.distance <= eps_proto)
        throw ambiguity_error("classify: two prototypes at distance " +
                              format_double(best.distance) + " and " + format_double(second));
    return best;
}

struct shatter_report {
    bool shattered = false;
    std::size_t labelings = 0;
    std::size_t max_depth = 0;
    std::vector<std::uint64_t> failed_masks;
};

// Runs binary synthesis for every nontrivial labeling of the given points
// and checks the depth bound. Capped at 20 points (the labeling count is
// exponential).
inline shatter_report shatter_scan(const matd& points, std::size_t max_ln_layers,
                                   std::uint64_t seed, const synthesis_tolerances& tol = {}) {
    std::size_t m = points.cols;
    if (m != max_ln_layers + 2)
        throw validation_error("shatter_scan: need exactly max_ln_layers + 2 points, got " +
                               format_size(m));
    if (m < 2 || m > 20)
        throw validation_error("shatter_scan: supported point counts are 2 to 20");
    require_finite(points, "shatter_scan");
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
            double d2 = 0;
            for (std::size_t r = 0; r < points.rows; ++r) {
                double diff = points(r, a) - points(r, b);
                d2 += diff * diff;
            }
            if (std::sqrt(d2) <= tol.eps_eq)
                throw validation_error("shatter_scan: points " + format_size(a) + " and " +
                                       format_size(b) + " coincide");
        }
    shatter_report report;
    report.shattered = true;
    std::uint64_t total = std::uint64_t(1) << m;
    for (std::uint64_t mask = 1; mask < total - 1; ++mask) {
        labeled_dataset ds;
        ds.points = points;
        ds.labels.resize(m);
        for (std::size_t k = 0; k < m; ++k)
            ds.labels[k] = int((mask >> k) & 1);
        ++report.labelings;
        bool ok = false;
        try {
            synthesis_result r = synthesize_binary(ds, seed, tol);
            report.max_depth = std::max(report.max_depth, r.depth);
            ok = r.depth <= max_ln_layers;
            if (ok)
                for (std::size_t k = 0; k < m; ++k)
                    ok = ok && classify(r, col(points, k)).label == ds.labels[k];
        } catch (const error&) {
            ok = false;
        }
        if (!ok) {
            report.shattered = false;
            report.failed_masks.push_back(mask);
        }
    }
    return report;
}

inline bool shatter_check(const matd& points, std::size_t max_ln_layers, std::uint64_t seed,
                          const synthesis_tolerances& tol = {}) {
    return shatter_scan(points, max_ln_layers, seed, tol).shattered;
}

} // namespace lnnet
