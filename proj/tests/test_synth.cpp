#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "lnnet/dataset.hpp"
#include "lnnet/errors.hpp"
#include "lnnet/rng.hpp"
#include "lnnet/synth.hpp"

using namespace lnnet;
using Catch::Approx;

namespace {

std::size_t distinct_count(const vecd& p, double eps_eq = 1e-9) {
    vecd sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = p.empty() ? 0 : 1;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        double scale = std::max(std::abs(sorted[i - 1]), std::abs(sorted[i]));
        if (std::abs(sorted[i] - sorted[i - 1]) > eps_eq * scale)
            ++n;
    }
    return n;
}

void check_trace_audits(const labeled_dataset& ds, const synthesis_result& res) {
    std::size_t previous = distinct_count(res.trace.initial_positions);
    for (const layer_record& layer : res.trace.layers) {
        for (const merge_event& ev : layer.merges) {
            REQUIRE(ev.indices.size() >= 2);
            int label = ds.labels[ev.indices[0]];
            for (std::size_t idx : ev.indices)
                CHECK(ds.labels[idx] == label);
        }
        std::size_t now = distinct_count(layer.positions_after);
        CHECK(now < previous);
        previous = now;
    }
}

std::size_t classify_correct(const labeled_dataset& ds, const synthesis_result& res) {
    std::size_t correct = 0;
    for (std::size_t k = 0; k < ds.points.cols; ++k)
        if (classify(res, col(ds.points, k)).label == ds.labels[k])
            ++correct;
    return correct;
}

void check_net_matches_stages(const synthesis_result& res, const labeled_dataset& ds,
                              std::uint64_t probe_seed) {
    REQUIRE(res.net == compile(res.stages));
    // Collapsing adjacent affine stages reorders the arithmetic, and layers
    // that normalize a nearly constant activation amplify the rounding gap.
    // The synthesis records the realized gap over the training points, so
    // the evaluation tolerance is anchored to that diagnostic.
    double margin = std::max(1e-9, 20 * res.worst_forward_miss);
    std::size_t d = ds.points.rows;
    counter_rng rng(probe_seed, 0);
    for (std::size_t k = 0; k < ds.points.cols + 100; ++k) {
        vecd x(d);
        if (k < ds.points.cols) {
            x = col(ds.points, k);
        } else {
            for (double& v : x)
                v = rng.next_gaussian();
        }
        vecd ref = eval_stages(res.stages, x);
        vecd got = forward(res.net, x);
        REQUIRE(got.size() == 1);
        CHECK(got[0] == Approx(ref[0]).margin(margin));
    }
}

} // namespace

TEST_CASE("pma merges a hand-traced line") {
    vecd p{-2.5, -1.5, 0.5, 1.5, 2.5};
    std::vector<int> labels{0, 1, 1, 0, 1};
    pma_result res = pma(p, labels);

    REQUIRE(res.layers.size() == 2);
    const layer_record& l1 = res.layers[0];
    CHECK(l1.pivot_i == 0);
    CHECK(l1.pivot_j == 3);
    CHECK(l1.shift_x == Approx(-0.5));
    CHECK(l1.shift_y == Approx(-2.0));
    CHECK(l1.gammas[0] == Approx(std::atan(-1.0)));
    CHECK(l1.positions_after[0] == std::sqrt(0.5));
    CHECK(l1.positions_after[3] == std::sqrt(0.5));
    CHECK(l1.positions_after[1] == Approx(2.0 / std::sqrt(5.0)));
    CHECK(l1.positions_after[1] == l1.positions_after[2]);
    CHECK(l1.positions_after[4] == Approx(2.0 / std::sqrt(13.0)));
    REQUIRE(l1.merges.size() == 2);
    CHECK(l1.merges[0].indices == std::vector<std::size_t>{0, 3});
    CHECK(l1.merges[1].indices == std::vector<std::size_t>{1, 2});

    const layer_record& l2 = res.layers[1];
    CHECK(l2.pivot_i == 4);
    CHECK(l2.pivot_j == 1);
    REQUIRE(l2.merges.size() == 1);
    CHECK(l2.merges[0].indices == std::vector<std::size_t>{1, 2, 4});

    CHECK(res.final_positions[1] == std::sqrt(0.5));
    CHECK(res.final_positions[2] == std::sqrt(0.5));
    CHECK(res.final_positions[4] == std::sqrt(0.5));
    CHECK(res.final_positions[0] == res.final_positions[3]);
    CHECK(res.final_positions[0] == Approx(0.9947605).epsilon(1e-6));
    CHECK(res.stages.size() == 6);
}

TEST_CASE("pma stage pipeline reproduces the trace") {
    vecd p{-2.5, -1.5, 0.5, 1.5, 2.5};
    std::vector<int> labels{0, 1, 1, 0, 1};
    pma_result res = pma(p, labels);
    for (std::size_t k = 0; k < p.size(); ++k) {
        vecd out = eval_stages(res.stages, vecd{p[k], 0.0});
        CHECK(out[0] == Approx(res.final_positions[k]).margin(1e-9));
    }
}

TEST_CASE("pma rejects bad label sets") {
    CHECK_THROWS_AS(pma(vecd{1, 2, 3}, {0, 1, 2}), validation_error);
    CHECK_THROWS_AS(pma(vecd{1, 2, 3}, {0, 0, 0}), validation_error);
    CHECK_THROWS_AS(pma(vecd{1, 2, 3}, {0, 1}), shape_error);
    CHECK_THROWS_AS(pma(vecd{}, {}), validation_error);
}

TEST_CASE("pma refuses coinciding points of different label") {
    CHECK_THROWS_AS(pma(vecd{1.0, 1.0, 2.0}, {0, 1, 0}), validation_error);
}

TEST_CASE("xor synthesis collapses in one layer") {
    labeled_dataset ds = gen_xor();
    synthesis_result res = synthesize_binary(ds, 0);

    CHECK(res.depth == 1);
    CHECK(res.trace.layers.size() == 1);
    CHECK(count_normalization_layers(res.net) == 1);
    CHECK(res.net.layers.size() == 3);
    CHECK(classify_correct(ds, res) == 4);
    CHECK(res.worst_forward_miss <= 1e-9);

    REQUIRE(res.readout.size() == 2);
    CHECK(res.readout[0].second == 0);
    CHECK(res.readout[1].second == 1);
    CHECK(res.readout[1].first == std::sqrt(0.5));
    CHECK(res.readout[0].first == Approx(0.9924886292437171).margin(1e-12));

    check_trace_audits(ds, res);
    check_net_matches_stages(res, ds, 1);
}

TEST_CASE("synthesis is deterministic") {
    labeled_dataset ds = gen_random_labels(10, 3, 2, 4);
    synthesis_result a = synthesize_binary(ds, 4);
    synthesis_result b = synthesize_binary(ds, 4);
    CHECK(a.net == b.net);
    CHECK(serialize(a.net) == serialize(b.net));
    CHECK(a.readout == b.readout);
    synthesis_result c = synthesize_binary(ds, 5);
    CHECK(serialize(c.net) != serialize(a.net));
}

TEST_CASE("binary synthesis handles random clouds") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        labeled_dataset ds = gen_random_labels(16, 3, 2, seed);
        synthesis_result res = synthesize_binary(ds, seed);
        CHECK(classify_correct(ds, res) == 16);
        CHECK(res.depth <= 14);
        CHECK(res.depth == res.trace.layers.size());
        CHECK(res.worst_forward_miss <= 1e-6);
        check_trace_audits(ds, res);
        check_net_matches_stages(res, ds, seed + 50);
    }
}

TEST_CASE("binary synthesis reproduces the published point budget") {
    labeled_dataset ds = gen_random_labels(64, 10, 2, 11);
    synthesis_result res = synthesize_binary(ds, 11);
    CHECK(classify_correct(ds, res) == 64);
    CHECK(res.depth <= 62);
}

TEST_CASE("duplicate points with matching labels are tolerated") {
    labeled_dataset ds;
    ds.points = matd(2, 5, {0, 1, 0, 1, 0, 0, 1, 1, 0, 0});
    ds.labels = {0, 0, 1, 1, 0};
    synthesis_result res = synthesize_binary(ds, 2);
    CHECK(classify_correct(ds, res) == 5);
}

TEST_CASE("multiclass synthesis separates three classes") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        labeled_dataset ds = gen_random_labels(12, 3, 3, seed);
        synthesis_result res = synthesize_multiclass(ds, seed);
        CHECK(classify_correct(ds, res) == 12);
        CHECK(res.depth <= 24);
        std::size_t expected = 0;
        for (const layer_record& layer : res.trace.layers)
            expected += 1 + (layer.pba_u ? 1 : 0);
        CHECK(res.depth == expected);
        CHECK(res.readout.size() == 3);
        check_trace_audits(ds, res);
        check_net_matches_stages(res, ds, seed + 90);
    }
}

TEST_CASE("multiclass path accepts two classes") {
    labeled_dataset ds = gen_random_labels(10, 2, 2, 9);
    synthesis_result res = synthesize_multiclass(ds, 9);
    CHECK(classify_correct(ds, res) == 10);
}

TEST_CASE("synthesis rejects wrong class counts") {
    labeled_dataset three = gen_random_labels(9, 2, 3, 1);
    CHECK_THROWS_AS(synthesize_binary(three, 1), validation_error);
    labeled_dataset one;
    one.points = matd(2, 3, {0, 1, 2, 0, 1, 2});
    one.labels = {4, 4, 4};
    CHECK_THROWS_AS(synthesize_multiclass(one, 1), validation_error);
}

TEST_CASE("synthesis rejects conflicting duplicates") {
    labeled_dataset ds;
    ds.points = matd(2, 3, {0, 0, 1, 0, 0, 1});
    ds.labels = {0, 1, 1};
    CHECK_THROWS_AS(synthesize_binary(ds, 0), validation_error);
}

TEST_CASE("init_direction separates projections of distinct points") {
    labeled_dataset ds = gen_random_labels(32, 5, 2, 3);
    synthesis_tolerances tol;
    vecd u = init_direction(ds.points, 3, tol);
    CHECK(norm2(u) == Approx(1.0).margin(1e-12));
    for (std::size_t a = 0; a < 32; ++a)
        for (std::size_t b = a + 1; b < 32; ++b) {
            vecd xa = col(ds.points, a), xb = col(ds.points, b);
            double proj = 0, dist2 = 0;
            for (std::size_t r = 0; r < 5; ++r) {
                proj += u[r] * (xa[r] - xb[r]);
                dist2 += (xa[r] - xb[r]) * (xa[r] - xb[r]);
            }
            CHECK(std::abs(proj) > tol.eps_sep * std::sqrt(dist2));
        }
}

TEST_CASE("pba keeps coinciding points together and spreads the rest") {
    vecd p{-1.0, 0.0, 0.5, 0.5};
    matd tilde = pba_lift(p);
    REQUIRE(tilde.rows == 2);
    for (std::size_t k = 0; k < p.size(); ++k) {
        CHECK(tilde(0, k) * tilde(0, k) + tilde(1, k) * tilde(1, k) == Approx(1.0));
        CHECK(tilde(1, k) > 0.0);
    }
    vecd u = pba_direction(tilde, 7);
    vecd q = pba(p, u);
    CHECK(q[2] == q[3]);
    CHECK(distinct_count(q) == 3);
}

TEST_CASE("pba_direction avoids equal-sum quadruples") {
    vecd p{-2.0, -1.0, 1.0, 2.0};
    matd tilde = pba_lift(p);
    vecd u = pba_direction(tilde, 0);
    vecd s = pba(p, u);
    synthesis_tolerances tol;
    double scale = 1.0;
    for (double v : s)
        scale = std::max(scale, std::abs(v));
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b)
            for (std::size_t c = 0; c < 4; ++c)
                for (std::size_t e = c + 1; e < 4; ++e) {
                    if (c == a || c == b || e == a || e == b)
                        continue;
                    CHECK(std::abs(s[a] + s[b] - s[c] - s[e]) > tol.eps_par * scale);
                }
}

TEST_CASE("classify picks the nearest prototype") {
    synthesis_result res;
    res.net.layers = {affine_layer{matd(1, 1, {1}), vecd{0}}};
    res.readout = {{0.0, 0}, {1.0, 1}};
    classification c = classify(res, vecd{0.9});
    CHECK(c.label == 1);
    CHECK(c.distance == Approx(0.1));
}

TEST_CASE("classify reports ambiguous readouts") {
    synthesis_result res;
    res.net.layers = {affine_layer{matd(1, 1, {1}), vecd{0}}};
    res.readout = {{0.5, 0}, {0.5 + 2e-10, 1}};
    CHECK_THROWS_AS(classify(res, vecd{0.5}), ambiguity_error);
    res.readout.clear();
    CHECK_THROWS_AS(classify(res, vecd{0.5}), validation_error);
}

TEST_CASE("shatter_scan covers every labeling of a small cloud") {
    labeled_dataset ds = gen_random_labels(6, 2, 2, 5);
    shatter_report rep = shatter_scan(ds.points, 4, 5);
    CHECK(rep.shattered);
    CHECK(rep.labelings == 62);
    CHECK(rep.max_depth <= 4);
    CHECK(rep.failed_masks.empty());
    CHECK(shatter_check(ds.points, 4, 5));
}

TEST_CASE("shatter_scan ties the point count to the layer bound") {
    labeled_dataset ds = gen_random_labels(6, 2, 2, 5);
    CHECK_THROWS_AS(shatter_scan(ds.points, 3, 5), validation_error);
    CHECK_THROWS_AS(shatter_scan(matd(2, 21), 19, 0), validation_error);
}

TEST_CASE("shatter_scan rejects coinciding points") {
    matd pts(2, 4, {0, 0, 1, 2, 0, 0, 1, 0});
    CHECK_THROWS_AS(shatter_scan(pts, 2, 0), validation_error);
}
