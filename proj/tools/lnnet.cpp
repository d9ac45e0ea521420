#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lnnet/dataset.hpp"
#include "lnnet/hessian.hpp"
#include "lnnet/net.hpp"
#include "lnnet/reports.hpp"
#include "lnnet/rng.hpp"
#include "lnnet/ssr.hpp"
#include "lnnet/synth.hpp"

namespace {

using namespace lnnet;

// All writers buffer the full document first so a failure never leaves a
// partial file behind; "-" or an empty path selects standard output.
void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw validation_error("cannot open " + path + " for writing");
    f << text;
    f.flush();
    if (!f)
        throw validation_error("write to " + path + " failed");
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw validation_error("cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    if (f.bad())
        throw validation_error("read from " + path + " failed");
    return buf.str();
}

synthesis_tolerances tolerances_from_env() {
    synthesis_tolerances tol;
    if (const char* raw = std::getenv("LNNET_EPS_EQ")) {
        double v = 0;
        if (!try_parse_double(raw, v) || !(v > 0))
            throw validation_error("LNNET_EPS_EQ must be a positive number, got \"" +
                                   std::string(raw) + "\"");
        tol.eps_eq = v;
    }
    return tol;
}

gaussian_spec make_gaussian_spec(std::size_t d, const std::vector<double>& mean,
                                 const std::vector<double>& cov, const char* who) {
    gaussian_spec s;
    s.mean = vecd(d, 0.0);
    s.cov = matd::identity(d);
    if (!mean.empty()) {
        if (mean.size() != d)
            throw validation_error(std::string(who) + ": mean needs " + format_size(d) +
                                   " entries, got " + format_size(mean.size()));
        s.mean = mean;
    }
    if (!cov.empty()) {
        if (cov.size() == d) {
            s.cov = matd(d, d);
            for (std::size_t i = 0; i < d; ++i)
                s.cov(i, i) = cov[i];
        } else if (cov.size() == d * d) {
            s.cov = matd(d, d);
            s.cov.a = cov;
        } else {
            throw validation_error(std::string(who) + ": covariance needs " + format_size(d) +
                                   " (diagonal) or " + format_size(d * d) +
                                   " (full) entries, got " + format_size(cov.size()));
        }
    }
    validate_gaussian_spec(s);
    return s;
}

struct gen_options {
    std::string kind;
    std::string out;
    std::size_t m = 256;
    std::size_t dim = 2;
    std::size_t classes = 2;
    std::uint64_t seed = 0;
    std::vector<double> mean0, cov0, mean1, cov1;
};

int run_gen(const gen_options& opt) {
    labeled_dataset ds;
    if (opt.kind == "xor") {
        ds = gen_xor();
    } else if (opt.kind == "xor-bernoulli") {
        ds = gen_xor_bernoulli(opt.m, opt.seed);
    } else if (opt.kind == "gauss") {
        gaussian_spec s0 = make_gaussian_spec(opt.dim, opt.mean0, opt.cov0, "gen gauss class 0");
        gaussian_spec s1 = make_gaussian_spec(opt.dim, opt.mean1, opt.cov1, "gen gauss class 1");
        ds = gen_gaussian_pair(s0, s1, opt.m, opt.seed);
    } else if (opt.kind == "random") {
        ds = gen_random_labels(opt.m, opt.dim, opt.classes, opt.seed);
    } else {
        throw validation_error("gen: unknown kind \"" + opt.kind + "\"");
    }
    write_text(opt.out, to_csv(ds));
    std::cerr << "wrote " << ds.points.cols << " points, dimension " << ds.points.rows
              << ", " << distinct_labels(ds).size() << " classes\n";
    return 0;
}

struct path_options {
    std::string input;
    std::string output;
    std::size_t budget = 60;
};

int run_ssr(const path_options& opt) {
    labeled_dataset ds = load_csv(opt.input);
    class_pair pair = split_by_label(ds);
    ssr_report report = lssr(pair);
    write_text(opt.output, ssr_report_json(report));
    std::cerr << "ssr=" << format_double(report.ssr) << " lssr=" << format_double(report.lssr)
              << " fprime0=" << format_double(report.fprime0) << '\n';
    return 0;
}

int run_break(const path_options& opt) {
    labeled_dataset ds = load_csv(opt.input);
    class_pair pair = split_by_label(ds);
    ssr_report report = lssr(pair);
    break_result br = break_lssr(pair, opt.budget);
    write_text(opt.output, break_report_json(report, br));
    std::cerr << "lssr=" << format_double(report.lssr)
              << " ssr_after=" << format_double(br.ssr_after)
              << " t_star=" << format_double(br.t_star) << '\n';
    return 0;
}

struct synth_options {
    std::string input;
    std::string out;
    std::string trace;
    std::uint64_t seed = 0;
    bool multiclass = false;
};

int run_synth(const synth_options& opt) {
    synthesis_tolerances tol = tolerances_from_env();
    labeled_dataset ds = load_csv(opt.input);
    std::size_t classes = distinct_labels(ds).size();
    synthesis_result res = (opt.multiclass || classes > 2)
                               ? synthesize_multiclass(ds, opt.seed, tol)
                               : synthesize_binary(ds, opt.seed, tol);
    write_text(opt.out, serialize(res.net));
    if (!opt.trace.empty())
        write_text(opt.trace, synthesis_trace_json(res));
    std::cerr << "synthesized " << res.net.layers.size() << " layers (" << res.depth
              << " normalizations) for " << ds.points.cols << " points, " << classes
              << " classes\n";
    return 0;
}

struct verify_options {
    std::string net;
    std::string input;
    std::string trace;
    std::string output;
    std::string format = "json";
};

std::vector<std::pair<vecd, int>> prototypes_from_trace(const std::string& path,
                                                        std::size_t out_dim) {
    if (out_dim != 1)
        throw validation_error("verify: trace readout applies to scalar-output nets only");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error("trace document: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("readout") || !j["readout"].is_array())
        throw parse_error("trace document: missing readout array");
    std::vector<std::pair<vecd, int>> protos;
    for (const auto& entry : j["readout"]) {
        if (!entry.is_object() || !entry.contains("prototype") || !entry.contains("label") ||
            !entry["prototype"].is_number() || !entry["label"].is_number_integer())
            throw parse_error("trace document: readout entries need prototype and label");
        protos.emplace_back(vecd{entry["prototype"].get<double>()}, entry["label"].get<int>());
    }
    if (protos.empty())
        throw parse_error("trace document: empty readout");
    return protos;
}

std::vector<std::pair<vecd, int>> prototypes_from_centroids(const labeled_dataset& ds,
                                                            const std::vector<vecd>& outputs) {
    std::vector<std::pair<vecd, int>> protos;
    for (int label : distinct_labels(ds)) {
        vecd sum(outputs.front().size(), 0.0);
        std::size_t count = 0;
        for (std::size_t k = 0; k < outputs.size(); ++k) {
            if (ds.labels[k] != label)
                continue;
            for (std::size_t r = 0; r < sum.size(); ++r)
                sum[r] += outputs[k][r];
            ++count;
        }
        for (double& v : sum)
            v /= double(count);
        protos.emplace_back(std::move(sum), label);
    }
    return protos;
}

int run_verify(const verify_options& opt) {
    ln_net net = deserialize(read_text(opt.net));
    labeled_dataset ds = load_csv(opt.input);
    if (ds.points.cols == 0)
        throw validation_error("verify: dataset has no points");
    if (input_dim(net) != ds.points.rows)
        throw validation_error("verify: net expects dimension " + format_size(input_dim(net)) +
                               ", dataset has " + format_size(ds.points.rows));

    std::size_t layers = net.layers.size();
    std::vector<double> layer_sum(layers, 0.0), layer_sq(layers, 0.0);
    std::vector<std::size_t> layer_n(layers, 0);
    std::vector<vecd> outputs;
    outputs.reserve(ds.points.cols);
    for (std::size_t k = 0; k < ds.points.cols; ++k) {
        std::vector<vecd> acts = forward_trace(net, col(ds.points, k));
        for (std::size_t l = 0; l < layers; ++l) {
            for (double v : acts[l + 1]) {
                layer_sum[l] += v;
                layer_sq[l] += v * v;
                ++layer_n[l];
            }
        }
        outputs.push_back(acts.back());
    }

    std::vector<std::pair<vecd, int>> protos =
        opt.trace.empty() ? prototypes_from_centroids(ds, outputs)
                          : prototypes_from_trace(opt.trace, output_dim(net));

    verify_summary summary;
    summary.total = ds.points.cols;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        prediction_row row;
        row.index = k;
        row.label = ds.labels[k];
        row.output = outputs[k].size() == 1 ? outputs[k][0] : norm2(outputs[k]);
        row.predicted = protos.front().second;
        row.distance = std::numeric_limits<double>::infinity();
        for (const auto& [proto, label] : protos) {
            double d2 = 0;
            for (std::size_t r = 0; r < proto.size(); ++r) {
                double diff = outputs[k][r] - proto[r];
                d2 += diff * diff;
            }
            double dist = std::sqrt(d2);
            if (dist < row.distance) {
                row.distance = dist;
                row.predicted = label;
            }
        }
        if (row.predicted == row.label)
            ++summary.correct;
        summary.predictions.push_back(row);
    }
    summary.accuracy = double(summary.correct) / double(summary.total);

    for (std::size_t l = 0; l < layers; ++l) {
        layer_stat st;
        st.layer = l;
        if (std::holds_alternative<affine_layer>(net.layers[l]))
            st.kind = "affine";
        else if (std::holds_alternative<ln_layer>(net.layers[l]))
            st.kind = "ln";
        else
            st.kind = "lng";
        double n = double(layer_n[l]);
        st.mean = layer_sum[l] / n;
        double var = layer_sq[l] / n - st.mean * st.mean;
        st.stddev = std::sqrt(std::max(var, 0.0));
        summary.layer_stats.push_back(st);
    }

    write_text(opt.output, opt.format == "csv" ? verify_report_csv(summary)
                                               : verify_report_json(summary));
    std::cerr << "accuracy=" << format_double(summary.accuracy) << " (" << summary.correct
              << "/" << summary.total << ")\n";
    return 0;
}

struct hessian_options {
    std::size_t dim = 0;
    std::vector<std::size_t> groups = {1};
    std::size_t samples = 100;
    std::uint64_t seed = 0;
    std::string format = "csv";
    std::string output;
};

int run_hessian(const hessian_options& opt) {
    if (opt.dim < 2)
        throw validation_error("hessian: need dimension >= 2");
    if (opt.samples == 0)
        throw validation_error("hessian: need at least one sample");
    if (opt.groups.empty())
        throw validation_error("hessian: need at least one group count");
    for (std::size_t g : opt.groups) {
        if (g == 0 || opt.dim % g != 0 || opt.dim / g < 2)
            throw validation_error("hessian: group count " + format_size(g) +
                                   " does not split dimension " + format_size(opt.dim) +
                                   " into groups of size >= 2");
        if (g > 1 && opt.dim == 2)
            throw validation_error("hessian: ratios are undefined at dimension 2");
    }

    std::vector<vecd> samples(opt.samples, vecd(opt.dim));
    for (std::size_t k = 0; k < opt.samples; ++k) {
        counter_rng rng(opt.seed, k);
        for (std::size_t r = 0; r < opt.dim; ++r)
            samples[k][r] = rng.next_gaussian();
    }

    std::vector<hessian_sweep_row> rows;
    for (std::size_t g : opt.groups) {
        hessian_sweep_row row;
        row.groups = g;
        row.group_size = opt.dim / g;
        row.min_h = std::numeric_limits<double>::infinity();
        row.min_ratio = std::numeric_limits<double>::infinity();
        double sum_h = 0, sum_ratio = 0;
        for (const vecd& x : samples) {
            double h = hessian_measure_lng_closed(x, g);
            double ratio = 1.0;
            if (opt.dim > 2)
                ratio = h / hessian_measure_ln_closed(x);
            sum_h += h;
            sum_ratio += ratio;
            row.min_h = std::min(row.min_h, h);
            row.max_h = std::max(row.max_h, h);
            row.min_ratio = std::min(row.min_ratio, ratio);
        }
        row.mean_h = sum_h / double(opt.samples);
        row.mean_ratio = sum_ratio / double(opt.samples);
        rows.push_back(row);
    }

    write_text(opt.output, opt.format == "csv"
                               ? hessian_sweep_csv(rows)
                               : hessian_sweep_json(rows, opt.dim, opt.samples, opt.seed));
    for (const hessian_sweep_row& r : rows)
        std::cerr << "groups=" << r.groups << " mean_h=" << format_double(r.mean_h)
                  << " mean_ratio=" << format_double(r.mean_ratio) << '\n';
    return 0;
}

struct shatter_options {
    std::string input;
    std::string output;
    std::size_t m = 6;
    std::size_t dim = 2;
    std::uint64_t seed = 0;
};

int run_shatter(const shatter_options& opt) {
    synthesis_tolerances tol = tolerances_from_env();
    matd points;
    if (!opt.input.empty()) {
        labeled_dataset ds = load_csv(opt.input);
        points = ds.points;
    } else {
        if (opt.m < 2)
            throw validation_error("shatter: need at least 2 points");
        points = matd(opt.dim, opt.m);
        counter_rng rng(opt.seed, 0);
        for (std::size_t k = 0; k < opt.m; ++k)
            for (std::size_t r = 0; r < opt.dim; ++r)
                points(r, k) = rng.next_gaussian();
    }
    if (points.cols < 2)
        throw validation_error("shatter: need at least 2 points");
    std::size_t max_depth = points.cols - 2;
    shatter_report report = shatter_scan(points, max_depth, opt.seed, tol);
    write_text(opt.output, shatter_report_json(report));
    std::cerr << (report.shattered ? "shattered" : "NOT shattered") << ": "
              << (report.labelings - report.failed_masks.size()) << "/" << report.labelings
              << " labelings with at most " << max_depth << " normalization layers\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LN-Net toolkit: dataset generation, separation-ratio analysis, and "
                 "constructive layer-normalization network synthesis"};
    app.require_subcommand(1);

    gen_options gen_opt;
    CLI::App* gen = app.add_subcommand("gen", "Generate a labeled dataset as CSV");
    gen->add_option("--kind", gen_opt.kind,
                    "xor | xor-bernoulli | gauss | random")
        ->required()
        ->check(CLI::IsMember({"xor", "xor-bernoulli", "gauss", "random"}));
    gen->add_option("--out", gen_opt.out, "Output CSV path (- for stdout)")->required();
    gen->add_option("--m", gen_opt.m,
                    "Points per class (xor-bernoulli, gauss) or total points (random)");
    gen->add_option("--dim", gen_opt.dim, "Dimension (gauss, random)");
    gen->add_option("--classes", gen_opt.classes, "Class count (random)");
    gen->add_option("--seed", gen_opt.seed, "Random seed (default 0)");
    gen->add_option("--mean0", gen_opt.mean0, "Class 0 mean, comma separated")->delimiter(',');
    gen->add_option("--cov0", gen_opt.cov0,
                    "Class 0 covariance: d diagonal entries or d*d row-major")
        ->delimiter(',');
    gen->add_option("--mean1", gen_opt.mean1, "Class 1 mean, comma separated")->delimiter(',');
    gen->add_option("--cov1", gen_opt.cov1,
                    "Class 1 covariance: d diagonal entries or d*d row-major")
        ->delimiter(',');

    path_options ssr_opt;
    CLI::App* ssr_cmd = app.add_subcommand(
        "ssr", "Separation-ratio report (SSR, LSSR, minimizing direction) for a two-class CSV");
    ssr_cmd->add_option("--input", ssr_opt.input, "Input CSV path")->required();
    ssr_cmd->add_option("--output", ssr_opt.output, "Output JSON path (default stdout)");

    path_options break_opt;
    CLI::App* break_cmd = app.add_subcommand(
        "break-lssr", "Find a normalization sandwich whose projected SSR beats the linear bound");
    break_cmd->add_option("--input", break_opt.input, "Input CSV path")->required();
    break_cmd->add_option("--output", break_opt.output, "Output JSON path (default stdout)");
    break_cmd->add_option("--budget", break_opt.budget, "Line-search halvings per sign");

    synth_options synth_opt;
    CLI::App* synth_cmd = app.add_subcommand(
        "synth", "Synthesize a width-3 LN-Net that classifies the dataset exactly");
    synth_cmd->add_option("--input", synth_opt.input, "Input CSV path")->required();
    synth_cmd->add_option("--out", synth_opt.out, "Output net JSON path")->required();
    synth_cmd->add_option("--trace", synth_opt.trace, "Optional construction trace JSON path");
    synth_cmd->add_option("--seed", synth_opt.seed, "Random seed (default 0)");
    synth_cmd->add_flag("--multiclass", synth_opt.multiclass,
                        "Force the multi-class construction even for 2 classes");

    verify_options verify_opt;
    CLI::App* verify_cmd = app.add_subcommand(
        "verify", "Run a net over a dataset: accuracy, predictions, per-layer statistics");
    verify_cmd->add_option("--net", verify_opt.net, "Net JSON path")->required();
    verify_cmd->add_option("--input", verify_opt.input, "Input CSV path")->required();
    verify_cmd->add_option("--trace", verify_opt.trace,
                           "Trace JSON path; its readout table replaces centroid prototypes");
    verify_cmd->add_option("--output", verify_opt.output, "Output path (default stdout)");
    verify_cmd->add_option("--format", verify_opt.format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));

    hessian_options hess_opt;
    CLI::App* hess_cmd = app.add_subcommand(
        "hessian", "Sweep the curvature measure of grouped normalization over random inputs");
    hess_cmd->add_option("--dim", hess_opt.dim, "Input dimension")->required();
    hess_cmd->add_option("--groups", hess_opt.groups, "Group counts, comma separated")
        ->delimiter(',');
    hess_cmd->add_option("--samples", hess_opt.samples, "Random inputs per group count");
    hess_cmd->add_option("--seed", hess_opt.seed, "Random seed (default 0)");
    hess_cmd->add_option("--format", hess_opt.format, "csv | json")
        ->check(CLI::IsMember({"json", "csv"}));
    hess_cmd->add_option("--output", hess_opt.output, "Output path (default stdout)");

    shatter_options shatter_opt;
    CLI::App* shatter_cmd = app.add_subcommand(
        "shatter", "Check all nontrivial binary labelings of m points with m-2 layers");
    shatter_cmd->add_option("--input", shatter_opt.input,
                            "CSV of points to shatter (labels ignored)");
    shatter_cmd->add_option("--m", shatter_opt.m, "Point count when generating (default 6)");
    shatter_cmd->add_option("--dim", shatter_opt.dim, "Dimension when generating (default 2)");
    shatter_cmd->add_option("--seed", shatter_opt.seed, "Random seed (default 0)");
    shatter_cmd->add_option("--output", shatter_opt.output, "Output JSON path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return run_gen(gen_opt);
        if (ssr_cmd->parsed())
            return run_ssr(ssr_opt);
        if (break_cmd->parsed())
            return run_break(break_opt);
        if (synth_cmd->parsed())
            return run_synth(synth_opt);
        if (verify_cmd->parsed())
            return run_verify(verify_opt);
        if (hess_cmd->parsed())
            return run_hessian(hess_opt);
        if (shatter_cmd->parsed())
            return run_shatter(shatter_opt);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const lnnet::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
