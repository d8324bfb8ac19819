#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nmfk/clustering.hpp"
#include "nmfk/data.hpp"
#include "nmfk/errors.hpp"
#include "nmfk/matrix.hpp"
#include "nmfk/selection.hpp"

namespace nmfk {

/// Fixed 12-significant-digit rendering used in every CSV.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string signature_label(std::size_t c) { return "S" + std::to_string(c); }

/// CSV field, quoted when it contains a delimiter, quote or line break.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

struct LocationAssignment {
    std::string location_id;
    std::vector<double> weights;  // sums to 1
    std::size_t dominant_signature = 0;
    double dominance = 0.0;
};

/**
 * Per-location signature weights from the location-side factor H (k x m):
 * column j normalized to sum 1. A location with an all-zero column gets
 * uniform weights. The dominant signature is the argmax, lowest id on ties.
 */
inline std::vector<LocationAssignment> location_assignments(const Matrix& h, const std::vector<std::string>& ids) {
    if (h.cols() != ids.size()) throw ShapeError("one location id per column of H required");
    const std::size_t k = h.rows();
    std::vector<LocationAssignment> out;
    out.reserve(ids.size());
    for (std::size_t j = 0; j < h.cols(); ++j) {
        LocationAssignment a;
        a.location_id = ids[j];
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) total += h(c, j);
        a.weights.resize(k);
        for (std::size_t c = 0; c < k; ++c) a.weights[c] = total > 0.0 ? h(c, j) / total : 1.0 / static_cast<double>(k);
        a.dominant_signature = static_cast<std::size_t>(std::max_element(a.weights.begin(), a.weights.end()) - a.weights.begin());
        a.dominance = a.weights[a.dominant_signature];
        out.push_back(std::move(a));
    }
    return out;
}

struct RankedAttribute {
    std::size_t signature = 0;
    std::size_t rank = 0;  // 1 = most dominant
    std::string attribute;
    double weight = 0.0;
    double weight_original = 0.0;
};

/// Attributes of each signature sorted by W weight, descending; ties by attribute name.
inline std::vector<RankedAttribute> rank_attributes(const Matrix& w, const Matrix& w_original,
                                                    const std::vector<std::string>& names) {
    if (w.rows() != names.size()) throw ShapeError("one attribute name per row of W required");
    std::vector<RankedAttribute> out;
    for (std::size_t c = 0; c < w.cols(); ++c) {
        std::vector<std::size_t> order(w.rows());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (w(a, c) != w(b, c)) return w(a, c) > w(b, c);
            return names[a] < names[b];
        });
        for (std::size_t r = 0; r < order.size(); ++r)
            out.push_back({c, r + 1, names[order[r]], w(order[r], c), w_original(order[r], c)});
    }
    return out;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace detail

inline void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<KDiagnostics>& diags) {
    auto out = detail::open_output(path);
    out << "k,best_loss,normalized_loss,mean_silhouette,min_cluster_silhouette,dropped_restarts,status\n";
    for (const auto& d : diags) {
        out << d.k << ',' << format_number(d.best_loss) << ',' << format_number(d.normalized_loss) << ','
            << format_number(d.mean_silhouette) << ',' << format_number(d.min_cluster_silhouette) << ','
            << d.dropped_restarts << ',' << (d.failed ? csv_field("failed: " + d.error) : std::string("ok")) << '\n';
    }
    detail::finish(out, path);
}

struct SelectionRecord {
    Selection selection;
    SelectionRule rule;
    std::size_t k_max = 0;
    std::size_t restarts = 0;
    std::uint64_t seed = 0;
};

inline void write_selection_txt(const std::filesystem::path& path, const SelectionRecord& rec) {
    auto out = detail::open_output(path);
    out << "k_star = " << rec.selection.k << '\n'
        << "confidence = " << (rec.selection.low_confidence ? "low" : "high") << '\n'
        << "silhouette_threshold = " << format_number(rec.rule.silhouette_threshold) << '\n'
        << "silhouette_statistic = " << to_string(rec.rule.statistic) << '\n'
        << "k_min = " << rec.rule.k_min << '\n'
        << "k_max = " << rec.k_max << '\n'
        << "restarts = " << rec.restarts << '\n'
        << "seed = " << rec.seed << '\n';
    detail::finish(out, path);
}

/// Attributes x k: scaled weights, then the same weights mapped back to file units.
inline void write_w_csv(const std::filesystem::path& path, const Matrix& w, const Matrix& w_original,
                        const std::vector<std::string>& names) {
    auto out = detail::open_output(path);
    const std::size_t k = w.cols();
    out << "attribute";
    for (std::size_t c = 0; c < k; ++c) out << ',' << signature_label(c);
    for (std::size_t c = 0; c < k; ++c) out << ',' << signature_label(c) << "_original";
    out << '\n';
    for (std::size_t i = 0; i < w.rows(); ++i) {
        out << csv_field(names[i]);
        for (std::size_t c = 0; c < k; ++c) out << ',' << format_number(w(i, c));
        for (std::size_t c = 0; c < k; ++c) out << ',' << format_number(w_original(i, c));
        out << '\n';
    }
    detail::finish(out, path);
}

/// k x locations.
inline void write_h_csv(const std::filesystem::path& path, const Matrix& h, const std::vector<std::string>& ids) {
    auto out = detail::open_output(path);
    out << "signature";
    for (const auto& id : ids) out << ',' << csv_field(id);
    out << '\n';
    for (std::size_t c = 0; c < h.rows(); ++c) {
        out << signature_label(c);
        for (std::size_t j = 0; j < h.cols(); ++j) out << ',' << format_number(h(c, j));
        out << '\n';
    }
    detail::finish(out, path);
}

inline void write_assignments_csv(const std::filesystem::path& path, const std::vector<LocationAssignment>& rows,
                                  std::size_t k) {
    auto out = detail::open_output(path);
    out << "location_id";
    for (std::size_t c = 0; c < k; ++c) out << ',' << signature_label(c);
    out << ",dominant_signature,dominance\n";
    for (const auto& a : rows) {
        out << csv_field(a.location_id);
        for (double v : a.weights) out << ',' << format_number(v);
        out << ',' << a.dominant_signature << ',' << format_number(a.dominance) << '\n';
    }
    detail::finish(out, path);
}

inline void write_attributes_ranked_csv(const std::filesystem::path& path, const std::vector<RankedAttribute>& rows) {
    auto out = detail::open_output(path);
    out << "signature,rank,attribute,weight,weight_original\n";
    for (const auto& r : rows)
        out << signature_label(r.signature) << ',' << r.rank << ',' << csv_field(r.attribute) << ','
            << format_number(r.weight) << ',' << format_number(r.weight_original) << '\n';
    detail::finish(out, path);
}

inline void write_preprocess_csv(const std::filesystem::path& path, const PreprocessReport& rep) {
    auto out = detail::open_output(path);
    out << "kind,name,missing_count,min,max,log_applied,skewness,dropped_reason\n";
    for (const auto& a : rep.attributes)
        out << "attribute," << csv_field(a.name) << ',' << a.missing_count << ',' << format_number(a.min) << ','
            << format_number(a.max) << ',' << (a.log_applied ? 1 : 0) << ',' << format_number(a.skewness) << ",\n";
    for (const auto& l : rep.locations) out << "location," << csv_field(l.id) << ',' << l.missing_count << ",,,,,\n";
    for (const auto& d : rep.dropped) out << csv_field(d.kind) << ',' << csv_field(d.name) << ",,,,,," << csv_field(d.reason) << '\n';
    detail::finish(out, path);
}

/// Rows of assignments.csv as read back for map export.
inline std::vector<LocationAssignment> read_assignments_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open assignments file '" + path.string() + "'");
    TableOptions opts;
    opts.missing_sentinels.clear();
    RawTable t = parse_table(in, opts);
    const auto& names = t.attribute_names;
    const auto dom = std::find(names.begin(), names.end(), "dominant_signature");
    const auto dmc = std::find(names.begin(), names.end(), "dominance");
    if (dom == names.end() || dmc == names.end()) throw IngestError("assignments file lacks dominant_signature/dominance columns");
    const std::size_t dom_col = static_cast<std::size_t>(dom - names.begin());
    const std::size_t dmc_col = static_cast<std::size_t>(dmc - names.begin());
    std::vector<std::size_t> weight_cols;
    for (std::size_t c = 0; c < names.size(); ++c)
        if (names[c] == signature_label(weight_cols.size())) weight_cols.push_back(c);
    if (weight_cols.empty()) throw IngestError("assignments file has no signature weight columns");

    std::vector<LocationAssignment> rows;
    for (std::size_t r = 0; r < t.location_ids.size(); ++r) {
        LocationAssignment a;
        a.location_id = t.location_ids[r];
        for (std::size_t c : weight_cols) {
            if (!t.cells[r][c]) throw IngestError("missing weight in assignments file", r + 2, c + 2);
            a.weights.push_back(*t.cells[r][c]);
        }
        if (!t.cells[r][dom_col] || !t.cells[r][dmc_col]) throw IngestError("missing dominance in assignments file", r + 2, 0);
        a.dominant_signature = static_cast<std::size_t>(*t.cells[r][dom_col]);
        a.dominance = *t.cells[r][dmc_col];
        rows.push_back(std::move(a));
    }
    return rows;
}

struct GeoJsonResult {
    nlohmann::ordered_json document;
    std::size_t emitted = 0;
    std::size_t skipped = 0;  // assignments without coordinates
};

/**
 * FeatureCollection of Point features ([lon, lat], WGS84) for every assigned
 * location that has coordinates.
 */
inline GeoJsonResult make_geojson(const std::vector<LocationAssignment>& rows,
                                  const std::map<std::string, LonLat>& coordinates) {
    if (coordinates.empty()) throw IngestError("no location coordinates available (need lon and lat columns)");
    GeoJsonResult r;
    r.document["type"] = "FeatureCollection";
    r.document["features"] = nlohmann::ordered_json::array();
    for (const auto& a : rows) {
        const auto it = coordinates.find(a.location_id);
        if (it == coordinates.end()) {
            ++r.skipped;
            continue;
        }
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", {it->second.lon, it->second.lat}}};
        nlohmann::ordered_json props;
        props["location_id"] = a.location_id;
        props["dominant_signature"] = a.dominant_signature;
        props["dominance"] = a.dominance;
        for (std::size_t c = 0; c < a.weights.size(); ++c) props[signature_label(c)] = a.weights[c];
        f["properties"] = std::move(props);
        r.document["features"].push_back(std::move(f));
        ++r.emitted;
    }
    return r;
}

}  // namespace nmfk
