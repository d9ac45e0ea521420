#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lnnet/core.hpp"
#include "lnnet/format.hpp"
#include "lnnet/hessian.hpp"
#include "lnnet/net.hpp"
#include "lnnet/ssr.hpp"
#include "lnnet/synth.hpp"

namespace lnnet {

namespace detail {

inline void append_vec_json(std::string& out, const vecd& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += ',';
        out += format_double(v[i]);
    }
    out += ']';
}

inline void append_rows_json(std::string& out, const matd& m) {
    out += '[';
    for (std::size_t r = 0; r < m.rows; ++r) {
        if (r)
            out += ',';
        out += '[';
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c)
                out += ',';
            out += format_double(m(r, c));
        }
        out += ']';
    }
    out += ']';
}

inline void append_size_vec_json(std::string& out, const std::vector<std::size_t>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += ',';
        out += format_size(v[i]);
    }
    out += ']';
}

inline void append_affine_json(std::string& out, const affine_map& a) {
    out += "{\"rows\":" + format_size(a.w.rows);
    out += ",\"cols\":" + format_size(a.w.cols);
    out += ",\"w\":";
    out += '[';
    for (std::size_t i = 0; i < a.w.a.size(); ++i) {
        if (i)
            out += ',';
        out += format_double(a.w.a[i]);
    }
    out += ']';
    out += ",\"b\":";
    append_vec_json(out, a.b);
    out += '}';
}

} // namespace detail

inline std::string ssr_report_json(const ssr_report& r) {
    std::string out = "{";
    out += "\"ssr\":" + format_double(r.ssr);
    out += ",\"lssr\":" + format_double(r.lssr);
    out += ",\"lambda_star\":" + format_double(r.lambda_star);
    out += ",\"lambda_multiplicity\":" + format_size(r.lambda_multiplicity);
    out += ",\"u_star\":";
    detail::append_vec_json(out, r.u_star);
    out += ",\"fprime0\":" + format_double(r.fprime0);
    out += ",\"t1\":" + format_double(r.t1);
    out += ",\"t2\":" + format_double(r.t2);
    out += ",\"t3\":" + format_double(r.t3);
    out += ",\"optimal_w_diagnostic\":";
    detail::append_rows_json(out, r.optimal_w_diagnostic);
    out += "}\n";
    return out;
}

inline std::string break_report_json(const ssr_report& before, const break_result& br) {
    std::string out = "{";
    out += "\"lssr\":" + format_double(before.lssr);
    out += ",\"fprime0\":" + format_double(before.fprime0);
    out += ",\"t_star\":" + format_double(br.t_star);
    out += ",\"ssr_after\":" + format_double(br.ssr_after);
    out += ",\"psi_affine_in\":";
    detail::append_affine_json(out, br.psi_in);
    out += ",\"psi_affine_out\":";
    detail::append_affine_json(out, br.psi_out);
    out += "}\n";
    return out;
}

inline std::string synthesis_trace_json(const synthesis_result& res) {
    const synthesis_trace& tr = res.trace;
    std::string out = "{";
    out += "\"depth\":" + format_size(res.depth);
    out += ",\"init_direction\":";
    detail::append_vec_json(out, tr.init_direction);
    out += ",\"initial_positions\":";
    detail::append_vec_json(out, tr.initial_positions);
    out += ",\"layers\":[";
    for (std::size_t l = 0; l < tr.layers.size(); ++l) {
        const layer_record& rec = tr.layers[l];
        if (l)
            out += ',';
        out += "{\"pivot_i\":" + format_size(rec.pivot_i);
        out += ",\"pivot_j\":" + format_size(rec.pivot_j);
        out += ",\"shift_x\":" + format_double(rec.shift_x);
        out += ",\"shift_y\":" + format_double(rec.shift_y);
        out += ",\"gammas\":";
        detail::append_vec_json(out, rec.gammas);
        out += ",\"positions_after\":";
        detail::append_vec_json(out, rec.positions_after);
        out += ",\"merges\":[";
        for (std::size_t m = 0; m < rec.merges.size(); ++m) {
            if (m)
                out += ',';
            detail::append_size_vec_json(out, rec.merges[m].indices);
        }
        out += ']';
        out += ",\"pba_u\":";
        if (rec.pba_u)
            detail::append_vec_json(out, *rec.pba_u);
        else
            out += "null";
        out += ",\"pba_positions\":";
        if (rec.pba_u)
            detail::append_vec_json(out, rec.pba_positions);
        else
            out += "null";
        out += '}';
    }
    out += ']';
    out += ",\"readout\":[";
    for (std::size_t i = 0; i < res.readout.size(); ++i) {
        if (i)
            out += ',';
        out += "{\"prototype\":" + format_double(res.readout[i].first);
        out += ",\"label\":" + format_int(res.readout[i].second);
        out += '}';
    }
    out += "]}\n";
    return out;
}

inline std::string shatter_report_json(const shatter_report& r) {
    std::string out = "{";
    out += "\"shattered\":";
    out += r.shattered ? "true" : "false";
    out += ",\"labelings\":" + format_size(r.labelings);
    out += ",\"max_depth\":" + format_size(r.max_depth);
    out += ",\"failed_masks\":[";
    for (std::size_t i = 0; i < r.failed_masks.size(); ++i) {
        if (i)
            out += ',';
        out += format_size(r.failed_masks[i]);
    }
    out += "]}\n";
    return out;
}

struct hessian_sweep_row {
    std::size_t groups = 1;
    std::size_t group_size = 0;
    double mean_h = 0;
    double min_h = 0;
    double max_h = 0;
    double mean_ratio = 1;
    double min_ratio = 1;
};

inline std::string hessian_sweep_csv(const std::vector<hessian_sweep_row>& rows) {
    std::string out = "groups,group_size,mean_h,min_h,max_h,mean_ratio,min_ratio\n";
    for (const hessian_sweep_row& r : rows) {
        out += format_size(r.groups);
        out += ',';
        out += format_size(r.group_size);
        out += ',';
        out += format_double(r.mean_h);
        out += ',';
        out += format_double(r.min_h);
        out += ',';
        out += format_double(r.max_h);
        out += ',';
        out += format_double(r.mean_ratio);
        out += ',';
        out += format_double(r.min_ratio);
        out += '\n';
    }
    return out;
}

inline std::string hessian_sweep_json(const std::vector<hessian_sweep_row>& rows,
                                      std::size_t dim, std::size_t samples,
                                      std::uint64_t seed) {
    std::string out = "{";
    out += "\"dim\":" + format_size(dim);
    out += ",\"samples\":" + format_size(samples);
    out += ",\"seed\":" + format_size(std::size_t(seed));
    out += ",\"rows\":[";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const hessian_sweep_row& r = rows[i];
        if (i)
            out += ',';
        out += "{\"groups\":" + format_size(r.groups);
        out += ",\"group_size\":" + format_size(r.group_size);
        out += ",\"mean_h\":" + format_double(r.mean_h);
        out += ",\"min_h\":" + format_double(r.min_h);
        out += ",\"max_h\":" + format_double(r.max_h);
        out += ",\"mean_ratio\":" + format_double(r.mean_ratio);
        out += ",\"min_ratio\":" + format_double(r.min_ratio);
        out += '}';
    }
    out += "]}\n";
    return out;
}

struct prediction_row {
    std::size_t index = 0;
    int label = 0;
    int predicted = 0;
    double output = 0;
    double distance = 0;
};

struct layer_stat {
    std::size_t layer = 0;
    std::string kind;
    double mean = 0;
    double stddev = 0;
};

struct verify_summary {
    std::size_t total = 0;
    std::size_t correct = 0;
    double accuracy = 0;
    std::vector<prediction_row> predictions;
    std::vector<layer_stat> layer_stats;
};

inline std::string verify_report_json(const verify_summary& v) {
    std::string out = "{";
    out += "\"total\":" + format_size(v.total);
    out += ",\"correct\":" + format_size(v.correct);
    out += ",\"accuracy\":" + format_double(v.accuracy);
    out += ",\"predictions\":[";
    for (std::size_t i = 0; i < v.predictions.size(); ++i) {
        const prediction_row& p = v.predictions[i];
        if (i)
            out += ',';
        out += "{\"index\":" + format_size(p.index);
        out += ",\"label\":" + format_int(p.label);
        out += ",\"predicted\":" + format_int(p.predicted);
        out += ",\"output\":" + format_double(p.output);
        out += ",\"distance\":" + format_double(p.distance);
        out += '}';
    }
    out += ']';
    out += ",\"layer_stats\":[";
    for (std::size_t i = 0; i < v.layer_stats.size(); ++i) {
        const layer_stat& s = v.layer_stats[i];
        if (i)
            out += ',';
        out += "{\"layer\":" + format_size(s.layer);
        out += ",\"kind\":\"" + s.kind + "\"";
        out += ",\"mean\":" + format_double(s.mean);
        out += ",\"stddev\":" + format_double(s.stddev);
        out += '}';
    }
    out += "]}\n";
    return out;
}

inline std::string verify_report_csv(const verify_summary& v) {
    std::string out = "index,label,predicted,output,distance\n";
    for (const prediction_row& p : v.predictions) {
        out += format_size(p.index);
        out += ',';
        out += format_int(p.label);
        out += ',';
        out += format_int(p.predicted);
        out += ',';
        out += format_double(p.output);
        out += ',';
        out += format_double(p.distance);
        out += '\n';
    }
    return out;
}

} // namespace lnnet
