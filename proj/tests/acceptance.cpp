// Acceptance gate: runs the eleven acceptance checks end to end and prints
// one PASS/FAIL line per check. Exits nonzero when any check fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "lnnet/dataset.hpp"
#include "lnnet/hessian.hpp"
#include "lnnet/net.hpp"
#include "lnnet/reports.hpp"
#include "lnnet/rng.hpp"
#include "lnnet/ssr.hpp"
#include "lnnet/synth.hpp"

using namespace lnnet;
namespace fs = std::filesystem;

namespace {

struct check_report {
    bool pass = true;
    std::string headline;
    std::vector<std::string> lines;

    void fail(const std::string& why) {
        pass = false;
        lines.push_back("FAIL " + why);
    }
    void note(const std::string& what) { lines.push_back(what); }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class_pair random_pair(std::size_t d, std::size_t m1, std::size_t m2, std::uint64_t seed,
                       double shift) {
    counter_rng rng(seed, 0);
    matd x1(d, m1), x2(d, m2);
    for (std::size_t j = 0; j < m1; ++j)
        for (std::size_t i = 0; i < d; ++i)
            x1(i, j) = rng.next_gaussian();
    for (std::size_t j = 0; j < m2; ++j)
        for (std::size_t i = 0; i < d; ++i)
            x2(i, j) = rng.next_gaussian() + shift;
    return make_class_pair(std::move(x1), std::move(x2));
}

class_pair scalar_pair(const vecd& a, const vecd& b) {
    matd x1(1, a.size()), x2(1, b.size());
    for (std::size_t j = 0; j < a.size(); ++j)
        x1(0, j) = a[j];
    for (std::size_t j = 0; j < b.size(); ++j)
        x2(0, j) = b[j];
    return make_class_pair(std::move(x1), std::move(x2));
}

std::size_t classify_correct(const labeled_dataset& ds, const synthesis_result& res) {
    std::size_t correct = 0;
    for (std::size_t k = 0; k < ds.points.cols; ++k)
        try {
            if (classify(res, col(ds.points, k)).label == ds.labels[k])
                ++correct;
        } catch (const error&) {
        }
    return correct;
}

// ---------------------------------------------------------------- check 1
// Binary synthesis grid: m in {8, 32, 128}, d in {2, 10}, 20 seeds each.
// Every run must classify all m points and use at most m - 2 normalization
// layers; each configuration must finish within 10 seconds.
check_report check_binary_grid() {
    check_report rep;
    rep.headline = "binary synthesis grid, 20 seeds per configuration";
    for (std::size_t m : {8, 32, 128}) {
        for (std::size_t d : {2, 10}) {
            auto t0 = std::chrono::steady_clock::now();
            int bad = 0;
            std::size_t max_depth = 0;
            std::string first;
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                labeled_dataset ds = gen_random_labels(m, d, 2, seed);
                try {
                    synthesis_result r = synthesize_binary(ds, seed);
                    max_depth = std::max(max_depth, r.depth);
                    bool ok = classify_correct(ds, r) == m && r.depth <= m - 2;
                    if (!ok) {
                        ++bad;
                        if (first.empty())
                            first = "seed " + std::to_string(seed) + ": wrong output";
                    }
                } catch (const error& e) {
                    ++bad;
                    if (first.empty())
                        first = "seed " + std::to_string(seed) + ": " + e.what();
                }
            }
            double secs = seconds_since(t0);
            std::string tag = "m=" + std::to_string(m) + " d=" + std::to_string(d);
            if (bad == 0 && secs < 10.0) {
                rep.note(tag + ": 20/20 correct, max depth " + std::to_string(max_depth) +
                         ", " + fmt(secs) + "s");
            } else if (bad != 0) {
                rep.fail(tag + ": " + std::to_string(bad) + "/20 runs failed (" + first + ")");
            } else {
                rep.fail(tag + ": exceeded the 10s budget (" + fmt(secs) + "s)");
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------- check 2
// Multiclass synthesis: C in {3, 5}, m in {12, 40} at dimension 4, 20 seeds.
// Every run must classify all points, stay within 2m normalization layers,
// and never merge points of different classes.
check_report check_multiclass_grid() {
    check_report rep;
    rep.headline = "multiclass synthesis grid at dimension 4, 20 seeds per configuration";
    for (int classes : {3, 5}) {
        for (std::size_t m : {12, 40}) {
            auto t0 = std::chrono::steady_clock::now();
            int bad = 0;
            std::size_t max_depth = 0;
            std::string first;
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                labeled_dataset ds = gen_random_labels(m, 4, std::size_t(classes), seed);
                try {
                    synthesis_result r = synthesize_multiclass(ds, seed);
                    max_depth = std::max(max_depth, r.depth);
                    bool mixed = false;
                    for (const layer_record& l : r.trace.layers)
                        for (const merge_event& ev : l.merges)
                            for (std::size_t idx : ev.indices)
                                mixed = mixed || ds.labels[idx] != ds.labels[ev.indices[0]];
                    bool ok = classify_correct(ds, r) == m && r.depth <= 2 * m && !mixed;
                    if (!ok) {
                        ++bad;
                        if (first.empty())
                            first = "seed " + std::to_string(seed) +
                                    (mixed ? ": cross-class merge" : ": wrong output");
                    }
                } catch (const error& e) {
                    ++bad;
                    if (first.empty())
                        first = "seed " + std::to_string(seed) + ": " + e.what();
                }
            }
            double secs = seconds_since(t0);
            std::string tag = "C=" + std::to_string(classes) + " m=" + std::to_string(m);
            if (bad == 0) {
                rep.note(tag + ": 20/20 correct, max depth " + std::to_string(max_depth) +
                         ", " + fmt(secs) + "s");
            } else {
                rep.fail(tag + ": " + std::to_string(bad) + "/20 runs failed (" + first + ")");
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------- check 3
// The hand-built width-3 XOR net: rotate onto the diagonal, lift to height
// 1/2, project spherically, read the vertical coordinate. It must classify
// all four corners and the intermediate geometry must match the three
// expected distinct points (the class-0 corners share one image).
check_report check_xor_width3() {
    check_report rep;
    rep.headline = "hand-built width-3 xor net";
    const double r2 = std::sqrt(0.5);
    std::vector<pipeline_stage> stages;
    stages.push_back(affine_stage{matd(2, 2, {r2, -r2, 0, 0}), vecd{0, 0.5}});
    stages.push_back(sp_stage{2});
    stages.push_back(affine_stage{matd(1, 2, {0, 1}), vecd{0}});
    ln_net net = compile(stages);

    if (count_normalization_layers(net) != 1)
        rep.fail("expected exactly one normalization layer");
    std::size_t width = std::get<affine_layer>(net.layers[0]).w.rows;
    if (width != 3)
        rep.fail("normalized width is " + std::to_string(width) + ", expected 3");

    labeled_dataset ds = gen_xor();
    const double proto0 = 1.0, proto1 = 1.0 / std::sqrt(3.0);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < 4; ++k) {
        double y = forward(net, col(ds.points, k))[0];
        int label = std::abs(y - proto0) < std::abs(y - proto1) ? 0 : 1;
        if (label == ds.labels[k])
            ++correct;
    }
    if (correct != 4)
        rep.fail("classified " + std::to_string(correct) + "/4 corners");
    else
        rep.note("4/4 corners classified, prototypes 1 and " + fmt(proto1));

    // Images right after the projection stage: both class-0 corners land on
    // (0, 1); the class-1 corners land at (+-sqrt(2/3), 1/sqrt(3)).
    const double gx = std::sqrt(2.0 / 3.0), gy = 1.0 / std::sqrt(3.0);
    const double expected[4][2] = {{0, 1}, {0, 1}, {-gx, gy}, {gx, gy}};
    std::vector<pipeline_stage> prefix(stages.begin(), stages.begin() + 2);
    double worst = 0;
    for (std::size_t k = 0; k < 4; ++k) {
        vecd img = eval_stages(prefix, col(ds.points, k));
        worst = std::max(worst, std::abs(img[0] - expected[k][0]));
        worst = std::max(worst, std::abs(img[1] - expected[k][1]));
    }
    if (worst > 1e-9)
        rep.fail("post-projection geometry off by " + fmt(worst));
    else
        rep.note("post-projection geometry within " + fmt(worst) + " of the three points");
    return rep;
}

// ---------------------------------------------------------------- check 4
// The linear bound: on 100 random pairs of dimension <= 5 the eigenvalue
// never exceeds a 10^4-direction random search by more than 1e-9, and
// projecting onto u* reproduces it within 1e-8. Exact XOR gives 1 +- 1e-12.
check_report check_linear_bound() {
    check_report rep;
    rep.headline = "linear bound against bruteforce on 100 random pairs";
    counter_rng rng(42, 0);
    double worst_gap = -1e300, worst_proj = 0;
    for (int i = 0; i < 100; ++i) {
        std::size_t d = 2 + std::size_t(i % 4);
        std::size_t m1 = d + 3 + rng.next_below(10);
        std::size_t m2 = d + 3 + rng.next_below(10);
        double shift = rng.next_unit() * 2.0;
        class_pair pair = random_pair(d, m1, m2, 7000 + std::uint64_t(i), shift);
        ssr_report r = lssr(pair);
        double brute = lssr_bruteforce(pair, 10000, 9000 + std::uint64_t(i));
        worst_gap = std::max(worst_gap, r.lambda_star - brute);
        if (r.lambda_star > brute + 1e-9)
            rep.fail("pair " + std::to_string(i) + ": eigenvalue " + fmt(r.lambda_star) +
                     " above bruteforce " + fmt(brute));
        class_pair proj = scalar_pair(project_onto(pair.x1, r.u_star),
                                      project_onto(pair.x2, r.u_star));
        double diff = std::abs(ssr(proj) - r.lambda_star);
        worst_proj = std::max(worst_proj, diff);
        if (diff > 1e-8)
            rep.fail("pair " + std::to_string(i) + ": projected ratio off by " + fmt(diff));
    }
    rep.note("worst eigenvalue-minus-bruteforce gap " + fmt(worst_gap) +
             ", worst projection residual " + fmt(worst_proj));

    ssr_report x = lssr(split_by_label(gen_xor()));
    if (std::abs(x.lssr - 1.0) > 1e-12)
        rep.fail("xor bound is " + fmt(x.lssr) + ", expected 1 within 1e-12");
    else
        rep.note("xor bound 1 within 1e-12");
    return rep;
}

// ---------------------------------------------------------------- check 5
// Affine compositions cannot beat the bound: 100 random compositions of up
// to three affine maps never push the ratio below lssr - 1e-9.
check_report check_affine_floor() {
    check_report rep;
    rep.headline = "100 random affine compositions respect the bound";
    counter_rng rng(43, 0);
    double worst = 1e300;
    for (int i = 0; i < 100; ++i) {
        std::size_t d = 2 + std::size_t(i % 4);
        class_pair pair = random_pair(d, d + 8, d + 8, 11000 + std::uint64_t(i), 1.0);
        ssr_report r = lssr(pair);
        matd cur1 = pair.x1, cur2 = pair.x2;
        std::size_t layers = 1 + rng.next_below(3);
        std::size_t in_dim = d;
        for (std::size_t l = 0; l < layers; ++l) {
            std::size_t out_dim = 1 + rng.next_below(in_dim + 1);
            matd a(out_dim, in_dim);
            for (double& v : a.a)
                v = rng.next_gaussian();
            vecd b(out_dim);
            for (double& v : b)
                v = rng.next_gaussian();
            auto image = [&](const matd& x) {
                matd y(out_dim, x.cols);
                for (std::size_t j = 0; j < x.cols; ++j)
                    set_col(y, j, apply_affine(a, b, col(x, j)));
                return y;
            };
            cur1 = image(cur1);
            cur2 = image(cur2);
            in_dim = out_dim;
        }
        double after = ssr(make_class_pair(cur1, cur2));
        worst = std::min(worst, after - r.lssr);
        if (after < r.lssr - 1e-9)
            rep.fail("composition " + std::to_string(i) + ": ratio " + fmt(after) +
                     " fell below bound " + fmt(r.lssr));
    }
    rep.note("worst ratio-minus-bound margin " + fmt(worst));
    return rep;
}

// ---------------------------------------------------------------- check 6
// Breaking the bound: on 50 pairs with a usable slope the one-dimensional
// map lands strictly below lssr, and the closed-form slope matches a
// central difference within 1e-4 relative. The slope statistics are derived
// for classes of equal size, so the pairs use a common per-class count.
check_report check_break_and_slope() {
    check_report rep;
    rep.headline = "50 pairs with usable slope: descent and derivative";
    int tested = 0;
    double worst_rel = 0, worst_drop = 1e300;
    for (std::uint64_t seed = 0; tested < 50 && seed < 400; ++seed) {
        std::size_t d = 2 + std::size_t(seed % 4);
        class_pair pair = random_pair(d, d + 7, d + 7, 13000 + seed, 1.0);
        ssr_report r = lssr(pair);
        if (std::abs(r.fprime0) <= 1e-4)
            continue;
        ++tested;
        const double h = 1e-5;
        double fd = (fssr(pair, r, h) - fssr(pair, r, -h)) / (2 * h);
        double rel = std::abs(r.fprime0 - fd) / std::abs(r.fprime0);
        worst_rel = std::max(worst_rel, rel);
        if (rel > 1e-4)
            rep.fail("seed " + std::to_string(seed) + ": slope " + fmt(r.fprime0) +
                     " vs central difference " + fmt(fd));
        try {
            break_result br = break_lssr(pair);
            worst_drop = std::min(worst_drop, r.lssr - br.ssr_after);
            if (!(br.ssr_after < r.lssr))
                rep.fail("seed " + std::to_string(seed) + ": ratio after " +
                         fmt(br.ssr_after) + " did not drop below " + fmt(r.lssr));
        } catch (const error& e) {
            rep.fail("seed " + std::to_string(seed) + ": " + e.what());
        }
    }
    if (tested != 50)
        rep.fail("only " + std::to_string(tested) + "/50 pairs had a usable slope");
    rep.note("worst relative slope error " + fmt(worst_rel) + ", smallest drop " +
             fmt(worst_drop));
    return rep;
}

// ---------------------------------------------------------------- check 7
// The four reference distributions at 256 points per class, seed 1. Both
// ratios must land within 0.05 of the published values.
check_report check_reference_table() {
    check_report rep;
    rep.headline = "reference distributions at 256 points per class, seed 1";
    struct row {
        const char* name;
        double want_ssr, want_lssr;
        labeled_dataset data;
    };
    auto gauss = [](vecd mu0, vecd diag0, vecd mu1, vecd diag1) {
        gaussian_spec s0{std::move(mu0), matd(2, 2)}, s1{std::move(mu1), matd(2, 2)};
        for (std::size_t i = 0; i < 2; ++i) {
            s0.cov(i, i) = diag0[i];
            s1.cov(i, i) = diag1[i];
        }
        return gen_gaussian_pair(s0, s1, 256, 1);
    };
    std::vector<row> rows;
    rows.push_back({"bernoulli xor", 0.9963, 0.9929, gen_xor_bernoulli(256, 1)});
    rows.push_back({"nested gaussians", 0.9929, 0.9859,
                    gauss({0, 0}, {4, 4}, {0, 0}, {9, 9})});
    rows.push_back({"separated gaussians", 0.2304, 0.1312,
                    gauss({-3, -3}, {4, 4}, {3, 3}, {1, 1})});
    rows.push_back({"side-by-side gaussians", 0.7536, 0.2157,
                    gauss({-2, 0}, {1, 9}, {2, 0}, {1, 9})});
    for (const row& r : rows) {
        class_pair pair = split_by_label(r.data);
        ssr_report rr = lssr(pair);
        double d_ssr = std::abs(rr.ssr - r.want_ssr);
        double d_lssr = std::abs(rr.lssr - r.want_lssr);
        if (d_ssr > 0.05 || d_lssr > 0.05)
            rep.fail(std::string(r.name) + ": ssr " + fmt(rr.ssr) + " (want " +
                     fmt(r.want_ssr) + "), lssr " + fmt(rr.lssr) + " (want " +
                     fmt(r.want_lssr) + ")");
        else
            rep.note(std::string(r.name) + ": ssr " + fmt(rr.ssr) + " vs " + fmt(r.want_ssr) +
                     ", lssr " + fmt(rr.lssr) + " vs " + fmt(r.want_lssr));
    }
    return rep;
}

// ---------------------------------------------------------------- check 8
// Curvature closed form against finite differences: 100 random inputs for
// each dimension in {3, 4, 8, 16} within 1e-3 relative, and dimension 2
// exactly zero.
check_report check_curvature() {
    check_report rep;
    rep.headline = "curvature closed form vs finite differences";
    counter_rng rng(44, 0);
    for (std::size_t d : {3u, 4u, 8u, 16u}) {
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            vecd x(d);
            for (double& v : x)
                v = rng.next_gaussian();
            nonlinearity_report r = hessian_report(x, 1);
            worst = std::max(worst, r.rel_err);
        }
        if (worst > 1e-3)
            rep.fail("dimension " + std::to_string(d) + ": relative error " + fmt(worst));
        else
            rep.note("dimension " + std::to_string(d) + ": worst relative error " +
                     fmt(worst));
    }
    double at2 = hessian_measure_ln_closed(vecd{0.3, -1.7});
    if (at2 != 0.0)
        rep.fail("dimension 2 measure is " + fmt(at2) + ", expected exactly 0");
    else
        rep.note("dimension 2 measure exactly 0");
    return rep;
}

// ---------------------------------------------------------------- check 9
// Grouping amplifies curvature: over 1000 random 16-dimensional inputs the
// ratio is at least 1 for 2 groups and at least 2 for 4 groups, within 5s.
check_report check_group_amplification() {
    check_report rep;
    rep.headline = "group amplification over 1000 random 16-dimensional inputs";
    auto t0 = std::chrono::steady_clock::now();
    counter_rng rng(45, 0);
    double min2 = 1e300, min4 = 1e300;
    for (int trial = 0; trial < 1000; ++trial) {
        vecd x(16);
        for (double& v : x)
            v = rng.next_gaussian();
        min2 = std::min(min2, group_ratio(x, 2).ratio);
        min4 = std::min(min4, group_ratio(x, 4).ratio);
    }
    double secs = seconds_since(t0);
    if (min2 < 1.0)
        rep.fail("2 groups: minimum ratio " + fmt(min2) + " below 1");
    if (min4 < 2.0)
        rep.fail("4 groups: minimum ratio " + fmt(min4) + " below 2");
    if (secs >= 5.0)
        rep.fail("exceeded the 5s budget (" + fmt(secs) + "s)");
    rep.note("minimum ratios " + fmt(min2) + " (2 groups) and " + fmt(min4) +
             " (4 groups), " + fmt(secs) + "s");
    return rep;
}

// --------------------------------------------------------------- check 10
// Shattering: all 62 nontrivial labelings of 6 generic points in at most 4
// normalization layers, within 30 seconds.
check_report check_shatter() {
    check_report rep;
    rep.headline = "shatter 6 generic points with 4 layers";
    auto t0 = std::chrono::steady_clock::now();
    labeled_dataset ds = gen_random_labels(6, 2, 2, 0);
    shatter_report r = shatter_scan(ds.points, 4, 0);
    double secs = seconds_since(t0);
    if (!r.shattered)
        rep.fail(std::to_string(r.failed_masks.size()) + "/" +
                 std::to_string(r.labelings) + " labelings failed");
    if (secs >= 30.0)
        rep.fail("exceeded the 30s budget (" + fmt(secs) + "s)");
    if (r.labelings != 62)
        rep.fail("expected 62 labelings, scanned " + std::to_string(r.labelings));
    rep.note(std::to_string(r.labelings) + " labelings, max depth " +
             std::to_string(r.max_depth) + ", " + fmt(secs) + "s");
    return rep;
}

// --------------------------------------------------------------- check 11
// Determinism and round-trips: same-seed reruns are byte-identical at both
// the library and the command level, and serialized artifacts survive a
// round-trip losslessly.
check_report check_determinism() {
    check_report rep;
    rep.headline = "determinism and lossless round-trips";

    labeled_dataset ds = gen_random_labels(20, 3, 2, 6);
    if (to_csv(ds) != to_csv(gen_random_labels(20, 3, 2, 6)))
        rep.fail("dataset generation is not byte-stable");
    if (!(parse_csv(to_csv(ds)) == ds))
        rep.fail("dataset csv round-trip changed the data");

    synthesis_result a = synthesize_binary(ds, 6);
    synthesis_result b = synthesize_binary(ds, 6);
    if (serialize(a.net) != serialize(b.net))
        rep.fail("synthesis is not byte-stable");
    if (!(deserialize(serialize(a.net)) == a.net))
        rep.fail("net round-trip changed the net");
    if (synthesis_trace_json(a) != synthesis_trace_json(b))
        rep.fail("trace report is not byte-stable");

    class_pair pair = split_by_label(ds);
    if (ssr_report_json(lssr(pair)) != ssr_report_json(lssr(pair)))
        rep.fail("ssr report is not byte-stable");

#ifdef LNNET_CLI_PATH
    fs::path dir = fs::temp_directory_path() / ("lnnet_acc_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto shell = [&](const std::string& args) {
        std::string cmd = std::string(LNNET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    std::string data = (dir / "d.csv").string();
    bool cli_ok =
        shell("gen --kind random --m 14 --dim 3 --classes 2 --seed 3 --out " + data) == 0 &&
        shell("synth --input " + data + " --out " + (dir / "n1.json").string() + " --trace " +
              (dir / "t1.json").string()) == 0 &&
        shell("synth --input " + data + " --out " + (dir / "n2.json").string() + " --trace " +
              (dir / "t2.json").string()) == 0;
    if (!cli_ok) {
        rep.fail("command-level rerun did not exit cleanly");
    } else if (slurp(dir / "n1.json") != slurp(dir / "n2.json") ||
               slurp(dir / "t1.json") != slurp(dir / "t2.json")) {
        rep.fail("command-level reruns differ byte for byte");
    } else {
        rep.note("command-level reruns byte-identical");
    }
    fs::remove_all(dir);
#endif

    if (rep.pass)
        rep.note("library-level reruns byte-identical, round-trips lossless");
    return rep;
}

} // namespace

int main() {
    struct entry {
        int number;
        std::function<check_report()> fn;
    };
    std::vector<entry> checks = {
        {1, check_binary_grid},     {2, check_multiclass_grid},
        {3, check_xor_width3},      {4, check_linear_bound},
        {5, check_affine_floor},    {6, check_break_and_slope},
        {7, check_reference_table}, {8, check_curvature},
        {9, check_group_amplification}, {10, check_shatter},
        {11, check_determinism},
    };
    int failed = 0;
    for (const entry& c : checks) {
        auto t0 = std::chrono::steady_clock::now();
        check_report rep;
        try {
            rep = c.fn();
        } catch (const std::exception& e) {
            rep.pass = false;
            rep.headline = "aborted";
            rep.lines = {std::string("FAIL unexpected error: ") + e.what()};
        }
        double secs = seconds_since(t0);
        std::printf("check %2d: %s  (%.2fs)  %s\n", c.number, rep.pass ? "PASS" : "FAIL",
                    secs, rep.headline.c_str());
        for (const std::string& line : rep.lines)
            std::printf("          %s\n", line.c_str());
        if (!rep.pass)
            ++failed;
    }
    if (failed) {
        std::printf("%d of %zu checks failed\n", failed, checks.size());
        return 1;
    }
    std::printf("all %zu checks passed\n", checks.size());
    return 0;
}
