#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lnnet/core.hpp"
#include "lnnet/errors.hpp"
#include "lnnet/format.hpp"

namespace lnnet {

// y = w x + b.
struct affine_map {
    matd w;
    vecd b;

    bool operator==(const affine_map&) const = default;
};

inline vecd apply(const affine_map& a, const vecd& x) { return apply_affine(a.w, a.b, x); }

// Composition in data-flow order: apply `first`, then `second`.
inline affine_map compose(const affine_map& second, const affine_map& first) {
    affine_map out;
    out.w = mat_mul(second.w, first.w);
    out.b = apply_affine(second.w, second.b, first.b);
    return out;
}

struct affine_layer {
    matd w;
    vecd b;

    bool operator==(const affine_layer&) const = default;
};

struct ln_layer {
    bool operator==(const ln_layer&) const = default;
};

struct lng_layer {
    std::size_t groups = 1;

    bool operator==(const lng_layer&) const = default;
};

using net_layer = std::variant<affine_layer, ln_layer, lng_layer>;

// Feed-forward stack applied input-to-output: layers[0] first.
struct ln_net {
    std::vector<net_layer> layers;

    bool operator==(const ln_net&) const = default;
};

inline bool is_normalization(const net_layer& l) {
    return !std::holds_alternative<affine_layer>(l);
}

// Enforces the structural invariants: non-empty, affine first and last, no
// adjacent normalization layers, shapes chain, every normalized span has at
// least 2 entries. Returns nothing; throws validation_error on violation.
inline void validate_net(const ln_net& net) {
    if (net.layers.empty())
        throw validation_error("net: empty layer list");
    if (!std::holds_alternative<affine_layer>(net.layers.front()))
        throw validation_error("net: first layer must be affine");
    if (!std::holds_alternative<affine_layer>(net.layers.back()))
        throw validation_error("net: last layer must be affine");
    std::size_t dim = std::get<affine_layer>(net.layers.front()).w.cols;
    if (dim == 0)
        throw validation_error("net: first layer has 0 input columns");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const std::string at = "net layer " + format_size(i);
        if (i > 0 && is_normalization(net.layers[i]) && is_normalization(net.layers[i - 1]))
            throw validation_error(at + ": adjacent normalization layers");
        if (const auto* a = std::get_if<affine_layer>(&net.layers[i])) {
            if (a->w.rows == 0)
                throw validation_error(at + ": affine with 0 output rows");
            if (a->w.cols != dim)
                throw validation_error(at + ": affine expects " + format_size(a->w.cols) +
                                       " inputs, gets " + format_size(dim));
            if (a->b.size() != a->w.rows)
                throw validation_error(at + ": bias length " + format_size(a->b.size()) +
                                       " does not match " + format_size(a->w.rows) + " rows");
            require_finite(a->w, at);
            require_finite(a->b, at);
            dim = a->w.rows;
        } else if (std::holds_alternative<ln_layer>(net.layers[i])) {
            if (dim < 2)
                throw validation_error(at + ": layer norm needs dimension >= 2, gets " +
                                       format_size(dim));
        } else {
            std::size_t g = std::get<lng_layer>(net.layers[i]).groups;
            if (g == 0 || dim % g != 0)
                throw validation_error(at + ": " + format_size(g) +
                                       " groups do not divide dimension " + format_size(dim));
            if (dim / g < 2)
                throw validation_error(at + ": group size " + format_size(dim / g) +
                                       " is too small to normalize");
        }
    }
}

inline std::size_t input_dim(const ln_net& net) {
    if (net.layers.empty() || !std::holds_alternative<affine_layer>(net.layers.front()))
        throw validation_error("net: no leading affine layer");
    return std::get<affine_layer>(net.layers.front()).w.cols;
}

inline std::size_t output_dim(const ln_net& net) {
    if (net.layers.empty() || !std::holds_alternative<affine_layer>(net.layers.back()))
        throw validation_error("net: no trailing affine layer");
    return std::get<affine_layer>(net.layers.back()).w.rows;
}

inline std::size_t count_normalization_layers(const ln_net& net) {
    std::size_t n = 0;
    for (const auto& l : net.layers)
        n += is_normalization(l) ? 1 : 0;
    return n;
}

// Evaluates the net, returning the activation after every layer; out[0] is
// the input itself. Degenerate normalization inputs rethrow with the layer
// index attached.
inline std::vector<vecd> forward_trace(const ln_net& net, const vecd& x,
                                       double eps_zero = default_eps_zero) {
    validate_net(net);
    if (x.size() != input_dim(net))
        throw shape_error("forward: input size " + format_size(x.size()) +
                          " does not match net input " + format_size(input_dim(net)));
    std::vector<vecd> acts;
    acts.reserve(net.layers.size() + 1);
    acts.push_back(x);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        try {
            const vecd& cur = acts.back();
            if (const auto* a = std::get_if<affine_layer>(&net.layers[i]))
                acts.push_back(apply_affine(a->w, a->b, cur));
            else if (std::holds_alternative<ln_layer>(net.layers[i]))
                acts.push_back(layer_norm(cur, eps_zero));
            else
                acts.push_back(group_layer_norm(cur, std::get<lng_layer>(net.layers[i]).groups,
                                                eps_zero));
        } catch (const degenerate_error& e) {
            throw degenerate_error("net layer " + format_size(i) + ": " + e.what());
        }
    }
    return acts;
}

inline vecd forward(const ln_net& net, const vecd& x, double eps_zero = default_eps_zero) {
    return forward_trace(net, x, eps_zero).back();
}

// Orthogonal d x d matrix whose last column is (1/sqrt(d)) * ones; the other
// columns come from modified Gram-Schmidt on e_1, ..., e_{d-1} in that order,
// with a second orthogonalization pass for stability.
inline matd build_orthogonal_q(std::size_t d) {
    if (d < 2)
        throw shape_error("build_orthogonal_q: need dimension >= 2");
    matd q(d, d);
    vecd last(d, 1.0 / std::sqrt(double(d)));
    set_col(q, d - 1, last);
    for (std::size_t k = 0; k + 1 < d; ++k) {
        vecd v(d, 0.0);
        v[k] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            double proj = dot(v, last);
            for (std::size_t r = 0; r < d; ++r)
                v[r] -= proj * last[r];
            for (std::size_t c = 0; c < k; ++c) {
                double p = 0;
                for (std::size_t r = 0; r < d; ++r)
                    p += v[r] * q(r, c);
                for (std::size_t r = 0; r < d; ++r)
                    v[r] -= p * q(r, c);
            }
        }
        double n = norm2(v);
        if (n <= 1e-12)
            throw error("build_orthogonal_q: basis collapse");
        for (std::size_t r = 0; r < d; ++r)
            q(r, k) = v[r] / n;
    }
    return q;
}

// The affine sandwich that realizes spherical projection on dim inputs with a
// layer norm on dim+1 coordinates: post(LN(pre(x))) = x / |x|.
struct sp_embedding {
    affine_map pre;  // lifts dim -> dim+1 into the zero-sum subspace
    affine_map post; // projects dim+1 -> dim with the 1/sqrt(dim+1) factor
    matd q;
};

inline sp_embedding sp_as_lnnet(std::size_t dim) {
    if (dim < 2)
        throw shape_error("sp_as_lnnet: need dimension >= 2");
    std::size_t n = dim + 1;
    sp_embedding emb;
    emb.q = build_orthogonal_q(n);
    emb.pre.w = matd(n, dim);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c)
            emb.pre.w(r, c) = emb.q(r, c);
    emb.pre.b = vecd(n, 0.0);
    double scale = 1.0 / std::sqrt(double(n));
    emb.post.w = matd(dim, n);
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < n; ++c)
            emb.post.w(r, c) = scale * emb.q(c, r);
    emb.post.b = vecd(dim, 0.0);
    return emb;
}

// Pipeline stages: plain affine maps interleaved with spherical projections.
struct affine_stage {
    matd w;
    vecd b;

    bool operator==(const affine_stage&) const = default;
};

struct sp_stage {
    std::size_t dim = 0;

    bool operator==(const sp_stage&) const = default;
};

using pipeline_stage = std::variant<affine_stage, sp_stage>;

// Reference evaluation of a stage list, applying spherical projection
// directly (no layer-norm embedding).
inline vecd eval_stages(const std::vector<pipeline_stage>& stages, vecd x,
                        double eps_zero = default_eps_zero) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (const auto* a = std::get_if<affine_stage>(&stages[i])) {
            if (a->w.cols != x.size())
                throw shape_error("stage " + format_size(i) + ": affine expects " +
                                  format_size(a->w.cols) + " inputs, gets " +
                                  format_size(x.size()));
            x = apply_affine(a->w, a->b, x);
        } else {
            std::size_t d = std::get<sp_stage>(stages[i]).dim;
            if (d != x.size())
                throw shape_error("stage " + format_size(i) + ": projection expects " +
                                  format_size(d) + " inputs, gets " + format_size(x.size()));
            x = spherical_project(x, eps_zero);
        }
    }
    return x;
}

// Lowers a stage list to a pure LN-Net: every spherical projection becomes
// its lift / layer-norm / project sandwich, and runs of adjacent affine maps
// collapse into one layer.
inline ln_net compile(const std::vector<pipeline_stage>& stages) {
    if (stages.empty())
        throw validation_error("compile: empty stage list");
    ln_net net;
    std::optional<affine_map> pending;
    std::optional<std::size_t> dim;
    auto push_affine = [&](const affine_map& a, std::size_t at) {
        if (dim && a.w.cols != *dim)
            throw shape_error("stage " + format_size(at) + ": affine expects " +
                              format_size(a.w.cols) + " inputs, gets " + format_size(*dim));
        pending = pending ? compose(a, *pending) : a;
        dim = a.w.rows;
    };
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (const auto* a = std::get_if<affine_stage>(&stages[i])) {
            if (a->b.size() != a->w.rows)
                throw shape_error("stage " + format_size(i) + ": bias length mismatch");
            push_affine({a->w, a->b}, i);
        } else {
            std::size_t d = std::get<sp_stage>(stages[i]).dim;
            if (dim && d != *dim)
                throw shape_error("stage " + format_size(i) + ": projection expects " +
                                  format_size(d) + " inputs, gets " + format_size(*dim));
            sp_embedding emb = sp_as_lnnet(d);
            push_affine(emb.pre, i);
            net.layers.push_back(affine_layer{pending->w, pending->b});
            pending.reset();
            net.layers.push_back(ln_layer{});
            pending = emb.post;
            dim = d;
        }
    }
    net.layers.push_back(affine_layer{pending->w, pending->b});
    validate_net(net);
    return net;
}

namespace detail {

inline void append_number_array(std::string& out, const std::vector<double>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += ',';
        out += format_double(v[i]);
    }
    out += ']';
}

} // namespace detail

// Compact one-line document; numbers use shortest round-trip decimals, so
// deserialize(serialize(net)) restores every entry bit-exactly.
inline std::string serialize(const ln_net& net) {
    validate_net(net);
    std::string out = "{\"version\":1,\"layers\":[";
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (i)
            out += ',';
        if (const auto* a = std::get_if<affine_layer>(&net.layers[i])) {
            out += "{\"kind\":\"affine\",\"rows\":" + format_size(a->w.rows) +
                   ",\"cols\":" + format_size(a->w.cols) + ",\"w\":";
            detail::append_number_array(out, a->w.a);
            out += ",\"b\":";
            detail::append_number_array(out, a->b);
            out += '}';
        } else if (std::holds_alternative<ln_layer>(net.layers[i])) {
            out += "{\"kind\":\"ln\"}";
        } else {
            out += "{\"kind\":\"lng\",\"groups\":" +
                   format_size(std::get<lng_layer>(net.layers[i]).groups) + '}';
        }
    }
    out += "]}";
    return out;
}

namespace detail {

inline std::vector<double> read_number_array(const nlohmann::json& j, const std::string& at,
                                             std::size_t expected) {
    if (!j.is_array())
        throw parse_error(at + ": expected an array of numbers");
    if (j.size() != expected)
        throw parse_error(at + ": expected " + format_size(expected) + " numbers, found " +
                          format_size(j.size()));
    std::vector<double> out(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw parse_error(at + "[" + format_size(i) + "]: not a number");
        out[i] = j[i].get<double>();
        if (!std::isfinite(out[i]))
            throw parse_error(at + "[" + format_size(i) + "]: not finite");
    }
    return out;
}

inline std::size_t read_count(const nlohmann::json& j, const std::string& at) {
    if (!j.is_number_unsigned() || j.get<std::uint64_t>() == 0)
        throw parse_error(at + ": expected a positive integer");
    return std::size_t(j.get<std::uint64_t>());
}

} // namespace detail

// Parses the net document format; `where` names the source in error messages.
inline ln_net deserialize(const std::string& text, const std::string& where = "net document") {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(where + " byte " + format_size(e.byte) + ": malformed document");
    }
    if (!doc.is_object())
        throw parse_error(where + ": top level must be an object");
    if (!doc.contains("version") || !doc["version"].is_number_integer() ||
        doc["version"].get<int>() != 1)
        throw parse_error(where + ": missing or unsupported version (want 1)");
    if (!doc.contains("layers") || !doc["layers"].is_array())
        throw parse_error(where + ": missing layers array");
    ln_net net;
    const auto& layers = doc["layers"];
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string at = where + " layer " + format_size(i);
        const auto& l = layers[i];
        if (!l.is_object() || !l.contains("kind") || !l["kind"].is_string())
            throw parse_error(at + ": expected an object with a kind field");
        std::string kind = l["kind"].get<std::string>();
        if (kind == "affine") {
            if (!l.contains("rows") || !l.contains("cols") || !l.contains("w") ||
                !l.contains("b"))
                throw parse_error(at + ": affine needs rows, cols, w, b");
            affine_layer a;
            std::size_t rows = detail::read_count(l["rows"], at + ".rows");
            std::size_t cols = detail::read_count(l["cols"], at + ".cols");
            a.w = matd(rows, cols);
            a.w.a = detail::read_number_array(l["w"], at + ".w", rows * cols);
            a.b = detail::read_number_array(l["b"], at + ".b", rows);
            net.layers.push_back(std::move(a));
        } else if (kind == "ln") {
            net.layers.push_back(ln_layer{});
        } else if (kind == "lng") {
            if (!l.contains("groups"))
                throw parse_error(at + ": lng needs groups");
            net.layers.push_back(lng_layer{detail::read_count(l["groups"], at + ".groups")});
        } else {
            throw parse_error(at + ": unknown kind '" + kind + "'");
        }
    }
    validate_net(net);
    return net;
}

} // namespace lnnet
