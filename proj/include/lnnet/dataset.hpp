#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lnnet/core.hpp"
#include "lnnet/errors.hpp"
#include "lnnet/format.hpp"
#include "lnnet/linalg.hpp"
#include "lnnet/rng.hpp"

namespace lnnet {

// Point set with one class id per column.
struct labeled_dataset {
    matd points;             // d x m
    std::vector<int> labels; // m entries, non-negative

    bool operator==(const labeled_dataset&) const = default;
};

// Checks shape agreement, finiteness, non-negative labels, and that no two
// coincident points (within eps_eq in Euclidean norm) carry different labels.
inline void validate_dataset(const labeled_dataset& ds, double eps_eq = 1e-9) {
    if (ds.points.cols == 0)
        throw validation_error("dataset: no points");
    if (ds.points.rows == 0)
        throw validation_error("dataset: points have dimension 0");
    if (ds.labels.size() != ds.points.cols)
        throw validation_error("dataset: " + format_size(ds.labels.size()) + " labels for " +
                               format_size(ds.points.cols) + " points");
    require_finite(ds.points, "dataset");
    for (int l : ds.labels)
        if (l < 0)
            throw validation_error("dataset: negative class id");
    std::size_t m = ds.points.cols;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            if (ds.labels[i] == ds.labels[j])
                continue;
            double d2 = 0;
            for (std::size_t r = 0; r < ds.points.rows; ++r) {
                double d = ds.points(r, i) - ds.points(r, j);
                d2 += d * d;
            }
            if (std::sqrt(d2) <= eps_eq)
                throw validation_error("dataset: points " + format_size(i) + " and " +
                                       format_size(j) + " coincide but differ in label");
        }
}

inline std::vector<int> distinct_labels(const labeled_dataset& ds) {
    std::vector<int> out;
    for (int l : ds.labels) {
        bool seen = false;
        for (int s : out)
            seen = seen || s == l;
        if (!seen)
            out.push_back(l);
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct gaussian_spec {
    vecd mean;
    matd cov; // symmetric positive semi-definite, matching mean's dimension
};

inline void validate_gaussian_spec(const gaussian_spec& s) {
    if (s.mean.empty())
        throw validation_error("gaussian_spec: empty mean");
    if (s.cov.rows != s.mean.size() || s.cov.cols != s.mean.size())
        throw validation_error("gaussian_spec: covariance shape does not match mean");
    require_finite(s.mean, "gaussian_spec");
    require_finite(s.cov, "gaussian_spec");
    if (!is_symmetric(s.cov, 1e-12))
        throw validation_error("gaussian_spec: covariance not symmetric");
}

// The four exact points of the parity problem: (0,0) and (1,1) against
// (0,1) and (1,0).
inline labeled_dataset gen_xor() {
    labeled_dataset ds;
    ds.points = matd(2, 4, {0, 1, 0, 1, 0, 1, 1, 0});
    ds.labels = {0, 0, 1, 1};
    return ds;
}

// Random draws from the XOR distribution: class 0 samples (b, b) and class 1
// samples (b, 1-b) with b fair Bernoulli. Columns are class 0 then class 1.
inline labeled_dataset gen_xor_bernoulli(std::size_t per_class, std::uint64_t seed) {
    if (per_class == 0)
        throw validation_error("gen_xor_bernoulli: need at least one point per class");
    labeled_dataset ds;
    ds.points = matd(2, 2 * per_class);
    ds.labels.assign(2 * per_class, 0);
    for (int cls = 0; cls < 2; ++cls) {
        counter_rng rng(seed, std::uint64_t(cls));
        for (std::size_t k = 0; k < per_class; ++k) {
            double b = rng.next_u64() & 1 ? 1.0 : 0.0;
            std::size_t j = cls * per_class + k;
            ds.points(0, j) = b;
            ds.points(1, j) = cls == 0 ? b : 1.0 - b;
            ds.labels[j] = cls;
        }
    }
    return ds;
}

// Two Gaussian classes, `per_class` points each, sampled as mean + L z with
// L the semi-definite Cholesky factor of the covariance. Class c draws from
// stream c of the seed, so the classes are independent and reproducible.
inline labeled_dataset gen_gaussian_pair(const gaussian_spec& s0, const gaussian_spec& s1,
                                         std::size_t per_class, std::uint64_t seed) {
    validate_gaussian_spec(s0);
    validate_gaussian_spec(s1);
    if (s0.mean.size() != s1.mean.size())
        throw validation_error("gen_gaussian_pair: class dimensions differ");
    if (per_class == 0)
        throw validation_error("gen_gaussian_pair: need at least one point per class");
    std::size_t d = s0.mean.size();
    labeled_dataset ds;
    ds.points = matd(d, 2 * per_class);
    ds.labels.assign(2 * per_class, 0);
    const gaussian_spec* specs[2] = {&s0, &s1};
    for (int cls = 0; cls < 2; ++cls) {
        double scale = 0;
        for (std::size_t i = 0; i < d; ++i)
            scale = std::max(scale, std::abs(specs[cls]->cov(i, i)));
        matd l = cholesky_psd(specs[cls]->cov, 1e-12 * std::max(1.0, scale));
        counter_rng rng(seed, std::uint64_t(cls));
        for (std::size_t k = 0; k < per_class; ++k) {
            vecd z(d);
            for (std::size_t i = 0; i < d; ++i)
                z[i] = rng.next_gaussian();
            vecd x = mat_vec(l, z);
            std::size_t j = cls * per_class + k;
            for (std::size_t i = 0; i < d; ++i)
                ds.points(i, j) = specs[cls]->mean[i] + x[i];
            ds.labels[j] = cls;
        }
    }
    return ds;
}

// Standard-normal cloud in d dimensions with uniform random labels; the label
// vector is redrawn (from successive streams) until every class appears.
inline labeled_dataset gen_random_labels(std::size_t m, std::size_t d, std::size_t classes,
                                         std::uint64_t seed) {
    if (classes < 2)
        throw validation_error("gen_random_labels: need at least 2 classes");
    if (m < classes)
        throw validation_error("gen_random_labels: need at least one point per class");
    if (d == 0)
        throw validation_error("gen_random_labels: dimension must be positive");
    labeled_dataset ds;
    ds.points = matd(d, m);
    counter_rng rng(seed, 0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < d; ++i)
            ds.points(i, j) = rng.next_gaussian();
    for (std::uint64_t attempt = 1; attempt <= 1000; ++attempt) {
        counter_rng lrng(seed, attempt);
        std::vector<int> labels(m);
        std::vector<bool> present(classes, false);
        for (std::size_t j = 0; j < m; ++j) {
            labels[j] = int(lrng.next_below(classes));
            present[std::size_t(labels[j])] = true;
        }
        bool all = true;
        for (bool p : present)
            all = all && p;
        if (all) {
            ds.labels = std::move(labels);
            return ds;
        }
    }
    throw search_error("gen_random_labels: no labeling with every class present in 1000 draws");
}

inline std::string to_csv(const labeled_dataset& ds) {
    validate_dataset(ds);
    std::string out;
    for (std::size_t i = 0; i < ds.points.rows; ++i) {
        out += "x" + format_size(i + 1);
        out += ',';
    }
    out += "label\n";
    for (std::size_t j = 0; j < ds.points.cols; ++j) {
        for (std::size_t i = 0; i < ds.points.rows; ++i) {
            out += format_double(ds.points(i, j));
            out += ',';
        }
        out += format_int(ds.labels[j]);
        out += '\n';
    }
    return out;
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

} // namespace detail

// Parses the dataset CSV format: header "x1,...,xd,label", one point per row.
// `where` names the source in error messages.
inline labeled_dataset parse_csv(std::string_view text, const std::string& where = "csv") {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            std::string_view line = text.substr(start, i - start);
            if (!line.empty() && line.back() == '\r')
                line.remove_suffix(1);
            lines.push_back(line);
            start = i + 1;
        }
    }
    while (!lines.empty() && lines.back().empty())
        lines.pop_back();
    if (lines.empty())
        throw parse_error(where + ": empty file");

    auto header = detail::split_fields(lines[0]);
    if (header.size() < 2 || header.back() != "label")
        throw parse_error(where + " line 1: header must be x1,...,xd,label");
    std::size_t d = header.size() - 1;
    for (std::size_t i = 0; i < d; ++i)
        if (header[i] != "x" + format_size(i + 1))
            throw parse_error(where + " line 1: header must be x1,...,xd,label");
    if (lines.size() == 1)
        throw parse_error(where + ": no data rows");

    labeled_dataset ds;
    std::size_t m = lines.size() - 1;
    ds.points = matd(d, m);
    ds.labels.assign(m, 0);
    for (std::size_t r = 0; r < m; ++r) {
        std::string ln = where + " line " + format_size(r + 2);
        auto fields = detail::split_fields(lines[r + 1]);
        if (fields.size() != d + 1)
            throw parse_error(ln + ": expected " + format_size(d + 1) + " fields, found " +
                              format_size(fields.size()));
        for (std::size_t i = 0; i < d; ++i) {
            double v;
            if (!try_parse_double(fields[i], v) || !std::isfinite(v))
                throw parse_error(ln + ": bad coordinate '" + std::string(fields[i]) + "'");
            ds.points(i, r) = v;
        }
        long long label;
        if (!try_parse_long(fields[d], label) || label < 0)
            throw parse_error(ln + ": bad label '" + std::string(fields[d]) + "'");
        ds.labels[r] = int(label);
    }
    validate_dataset(ds);
    return ds;
}

inline labeled_dataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw parse_error(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

inline void save_csv(const labeled_dataset& ds, const std::string& path) {
    std::string body = to_csv(ds);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw validation_error(path + ": cannot open file for writing");
    out << body;
    if (!out)
        throw validation_error(path + ": write failed");
}

} // namespace lnnet
