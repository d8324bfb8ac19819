#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nmfk/errors.hpp"
#include "nmfk/matrix.hpp"

namespace nmfk {

/**
 * Per-attribute forward transform:
 *   v = log_applied ? log10(x - log_offset + log_shift) : x
 *   s = (v - min) / (max - min)
 * min and max are taken over the observed values of v.
 */
struct AttributeTransform {
    bool log_applied = false;
    double log_offset = 0.0;
    double log_shift = 0.0;
    double min = 0.0;
    double max = 1.0;

    double forward(double x) const {
        const double v = log_applied ? std::log10(x - log_offset + log_shift) : x;
        return (v - min) / (max - min);
    }

    double inverse(double s) const {
        const double v = s * (max - min) + min;
        return log_applied ? std::pow(10.0, v) + log_offset - log_shift : v;
    }
};

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
};

struct DroppedEntry {
    std::string kind;  // "attribute" or "location"
    std::string name;
    std::string reason;
};

struct AttributeReport {
    std::string name;
    std::size_t missing_count = 0;
    double min = 0.0;  // raw units
    double max = 0.0;
    bool log_applied = false;
    double skewness = 0.0;
};

struct LocationReport {
    std::string id;
    std::size_t missing_count = 0;
};

struct PreprocessReport {
    std::vector<AttributeReport> attributes;
    std::vector<LocationReport> locations;
    std::vector<DroppedEntry> dropped;
};

/**
 * Attribute-by-location table (n attributes x m locations).
 *
 * `raw` holds values in file units and `values` the preprocessed ones; both
 * store 0 where `observed` is false.
 */
struct Dataset {
    std::vector<std::string> attribute_names;
    std::vector<std::string> location_ids;
    std::optional<std::vector<std::optional<LonLat>>> coordinates;
    Matrix raw{1, 1};
    Matrix values{1, 1};
    Mask observed{1, 1};
    std::vector<AttributeTransform> transforms;
    bool preprocessed = false;
    PreprocessReport report;

    std::size_t attributes() const noexcept { return attribute_names.size(); }
    std::size_t locations() const noexcept { return location_ids.size(); }
};

struct TableOptions {
    char delimiter = ',';
    /// Cell texts (compared case-insensitively, after trimming) meaning "missing"; empty cells always are.
    std::vector<std::string> missing_sentinels{"NaN"};
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// Splits one delimited record; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_record(const std::string& line, char delimiter, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw IngestError("unterminated quoted field", line_no, fields.size() + 1);
    fields.push_back(std::move(field));
    return fields;
}

inline std::optional<double> parse_number(const std::string& text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
    return value;
}

inline bool is_missing(const std::string& cell, const TableOptions& opts) {
    if (cell.empty()) return true;
    const std::string l = lower(cell);
    return std::any_of(opts.missing_sentinels.begin(), opts.missing_sentinels.end(),
                       [&](const std::string& s) { return lower(trim(s)) == l; });
}

/// Population skewness m3 / m2^1.5; 0 for fewer than 3 values or zero variance.
inline double skewness(const std::vector<double>& v) {
    if (v.size() < 3) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(v.size());
    m3 /= static_cast<double>(v.size());
    if (!(m2 > 0.0)) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

}  // namespace detail

using detail::skewness;

/// Cells of a table in file order, before any column or row is dropped.
struct RawTable {
    std::vector<std::string> attribute_names;
    std::vector<std::string> location_ids;
    std::vector<std::vector<std::optional<double>>> cells;  // [location][attribute]
    bool has_coordinates = false;
    std::vector<std::optional<LonLat>> coordinates;
};

/**
 * Parses delimited text: header row, location id in the first column, then
 * attribute columns. Columns named lon and lat (any case) are read as
 * coordinates rather than attributes.
 */
inline RawTable parse_table(std::istream& in, const TableOptions& opts = {}) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (!detail::trim(line).empty()) return true;
        }
        return false;
    };
    if (!next_line()) throw IngestError("input table is empty");
    std::vector<std::string> header = detail::split_record(line, opts.delimiter, line_no);
    for (auto& h : header) h = detail::trim(h);
    if (header.size() < 2) throw IngestError("header needs a location id column and at least one attribute", line_no, 0);

    RawTable t;
    std::optional<std::size_t> lon_col, lat_col;
    std::vector<std::size_t> attr_cols;
    std::set<std::string> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string l = detail::lower(header[c]);
        if (l == "lon" && !lon_col) {
            lon_col = c;
        } else if (l == "lat" && !lat_col) {
            lat_col = c;
        } else {
            if (header[c].empty()) throw IngestError("empty attribute name in header", line_no, c + 1);
            if (!seen.insert(header[c]).second)
                throw IngestError("duplicate attribute name '" + header[c] + "'", line_no, c + 1);
            attr_cols.push_back(c);
            t.attribute_names.push_back(header[c]);
        }
    }
    if (attr_cols.empty()) throw IngestError("no attribute columns in header", line_no, 0);
    t.has_coordinates = lon_col.has_value() && lat_col.has_value();

    std::set<std::string> ids;
    while (next_line()) {
        std::vector<std::string> fields = detail::split_record(line, opts.delimiter, line_no);
        if (fields.size() != header.size())
            throw IngestError("expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()),
                              line_no, 0);
        for (auto& f : fields) f = detail::trim(f);
        if (fields[0].empty()) throw IngestError("empty location id", line_no, 1);
        if (!ids.insert(fields[0]).second) throw IngestError("duplicate location id '" + fields[0] + "'", line_no, 1);
        t.location_ids.push_back(fields[0]);

        std::vector<std::optional<double>> row;
        row.reserve(attr_cols.size());
        for (std::size_t c : attr_cols) {
            if (detail::is_missing(fields[c], opts)) {
                row.emplace_back();
                continue;
            }
            const auto v = detail::parse_number(fields[c]);
            if (!v) throw IngestError("unparseable numeric cell '" + fields[c] + "'", line_no, c + 1);
            row.push_back(*v);
        }
        t.cells.push_back(std::move(row));

        if (t.has_coordinates) {
            const std::string& lon_text = fields[*lon_col];
            const std::string& lat_text = fields[*lat_col];
            if (detail::is_missing(lon_text, opts) || detail::is_missing(lat_text, opts)) {
                t.coordinates.emplace_back();
            } else {
                const auto lon = detail::parse_number(lon_text);
                if (!lon) throw IngestError("unparseable longitude '" + lon_text + "'", line_no, *lon_col + 1);
                const auto lat = detail::parse_number(lat_text);
                if (!lat) throw IngestError("unparseable latitude '" + lat_text + "'", line_no, *lat_col + 1);
                t.coordinates.push_back(LonLat{*lon, *lat});
            }
        }
    }
    if (t.location_ids.empty()) throw IngestError("input table has no data rows");
    return t;
}

namespace detail {

/// Rebuilds the dataset keeping only the listed attributes and locations.
inline Dataset build_dataset(const std::vector<std::string>& names, const std::vector<std::string>& ids,
                             const std::vector<std::vector<std::optional<double>>>& cells,  // [attribute][location]
                             const std::optional<std::vector<std::optional<LonLat>>>& coords,
                             const std::vector<std::size_t>& keep_attr, const std::vector<std::size_t>& keep_loc) {
    Dataset ds;
    const std::size_t n = keep_attr.size(), m = keep_loc.size();
    for (std::size_t a : keep_attr) ds.attribute_names.push_back(names[a]);
    for (std::size_t l : keep_loc) ds.location_ids.push_back(ids[l]);
    if (coords) {
        std::vector<std::optional<LonLat>> kept;
        for (std::size_t l : keep_loc) kept.push_back((*coords)[l]);
        ds.coordinates = std::move(kept);
    }
    ds.raw = Matrix(n, m);
    std::vector<bool> obs(n * m, false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const auto& v = cells[keep_attr[i]][keep_loc[j]];
            if (v) {
                ds.raw(i, j) = *v;
                obs[i * m + j] = true;
            }
        }
    ds.observed = Mask(n, m, std::move(obs));
    ds.values = ds.raw;
    ds.transforms.assign(n, AttributeTransform{});
    return ds;
}

inline std::vector<double> observed_row(const Matrix& x, const Mask& mask, std::size_t i) {
    std::vector<double> out;
    for (std::size_t j = 0; j < x.cols(); ++j)
        if (mask(i, j)) out.push_back(x(i, j));
    return out;
}

inline void refresh_report(Dataset& ds) {
    auto& rep = ds.report;
    rep.attributes.clear();
    rep.locations.clear();
    for (std::size_t i = 0; i < ds.attributes(); ++i) {
        const auto vals = observed_row(ds.raw, ds.observed, i);
        AttributeReport a;
        a.name = ds.attribute_names[i];
        a.missing_count = ds.locations() - vals.size();
        a.min = *std::min_element(vals.begin(), vals.end());
        a.max = *std::max_element(vals.begin(), vals.end());
        a.log_applied = ds.transforms[i].log_applied;
        a.skewness = skewness(vals);
        rep.attributes.push_back(a);
    }
    for (std::size_t j = 0; j < ds.locations(); ++j) {
        LocationReport l;
        l.id = ds.location_ids[j];
        for (std::size_t i = 0; i < ds.attributes(); ++i)
            if (!ds.observed(i, j)) ++l.missing_count;
        rep.locations.push_back(l);
    }
}

/**
 * Drops attributes (rows) flagged in `drop_attr`, then any location left
 * with no observations, then any attribute left with none, until stable.
 */
inline Dataset prune(const Dataset& ds, std::vector<std::pair<std::size_t, std::string>> drop_attr) {
    const std::size_t n = ds.attributes(), m = ds.locations();
    std::vector<char> attr_alive(n, 1), loc_alive(m, 1);
    std::vector<DroppedEntry> dropped = ds.report.dropped;
    for (const auto& [i, reason] : drop_attr) {
        attr_alive[i] = 0;
        dropped.push_back({"attribute", ds.attribute_names[i], reason});
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t j = 0; j < m; ++j) {
            if (!loc_alive[j]) continue;
            bool any = false;
            for (std::size_t i = 0; i < n && !any; ++i) any = attr_alive[i] && ds.observed(i, j);
            if (!any) {
                loc_alive[j] = 0;
                dropped.push_back({"location", ds.location_ids[j], "no observed attribute values"});
                changed = true;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!attr_alive[i]) continue;
            bool any = false;
            for (std::size_t j = 0; j < m && !any; ++j) any = loc_alive[j] && ds.observed(i, j);
            if (!any) {
                attr_alive[i] = 0;
                dropped.push_back({"attribute", ds.attribute_names[i], "no observed values"});
                changed = true;
            }
        }
    }
    std::vector<std::size_t> keep_attr, keep_loc;
    for (std::size_t i = 0; i < n; ++i)
        if (attr_alive[i]) keep_attr.push_back(i);
    for (std::size_t j = 0; j < m; ++j)
        if (loc_alive[j]) keep_loc.push_back(j);
    if (keep_attr.empty() || keep_loc.empty()) throw IngestError("no data left after dropping empty attributes and locations");

    std::vector<std::vector<std::optional<double>>> cells(n, std::vector<std::optional<double>>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (ds.observed(i, j)) cells[i][j] = ds.raw(i, j);
    Dataset out = build_dataset(ds.attribute_names, ds.location_ids, cells, ds.coordinates, keep_attr, keep_loc);
    for (std::size_t a = 0; a < keep_attr.size(); ++a) {
        out.transforms[a] = ds.transforms[keep_attr[a]];
        for (std::size_t l = 0; l < keep_loc.size(); ++l) out.values(a, l) = ds.values(keep_attr[a], keep_loc[l]);
    }
    out.preprocessed = ds.preprocessed;
    out.report.dropped = std::move(dropped);
    refresh_report(out);
    return out;
}

}  // namespace detail

/**
 * Turns a parsed table into a Dataset (attributes x locations) with its
 * observation mask. Attributes with no values and locations with no values
 * are dropped and listed in the report.
 */
inline Dataset to_dataset(const RawTable& t) {
    const std::size_t n = t.attribute_names.size(), m = t.location_ids.size();
    std::vector<std::vector<std::optional<double>>> cells(n, std::vector<std::optional<double>>(m));
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) cells[i][j] = t.cells[j][i];
    std::optional<std::vector<std::optional<LonLat>>> coords;
    if (t.has_coordinates) coords = t.coordinates;

    // Build with everything kept, then prune; build_dataset needs at least one observation overall.
    std::vector<std::size_t> all_attr(n), all_loc(m);
    for (std::size_t i = 0; i < n; ++i) all_attr[i] = i;
    for (std::size_t j = 0; j < m; ++j) all_loc[j] = j;
    Dataset full = detail::build_dataset(t.attribute_names, t.location_ids, cells, coords, all_attr, all_loc);
    if (full.observed.observed_count() == 0) throw IngestError("input table has no observed values");

    std::vector<std::pair<std::size_t, std::string>> empty_attr;
    for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        for (std::size_t j = 0; j < m && !any; ++j) any = full.observed(i, j);
        if (!any) empty_attr.emplace_back(i, "no observed values");
    }
    return detail::prune(full, std::move(empty_attr));
}

inline Dataset load_table(const std::string& path, const TableOptions& opts = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open input file '" + path + "'");
    return to_dataset(parse_table(in, opts));
}

struct UnitRangeResult {
    std::vector<double> scaled;
    double min = 0.0;
    double max = 0.0;
};

/// x -> (x - min) / (max - min) over the given observed values.
inline UnitRangeResult unit_range(std::span<const double> values) {
    if (values.empty()) throw DegenerateInputError("unit_range: no values");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    UnitRangeResult r{{}, *lo, *hi};
    if (!(r.max > r.min)) throw DegenerateInputError("unit_range: constant attribute");
    r.scaled.reserve(values.size());
    for (double v : values) r.scaled.push_back((v - r.min) / (r.max - r.min));
    return r;
}

struct LogTransformResult {
    std::vector<double> values;
    bool applied = false;
    double offset = 0.0;
    double shift = 0.0;
    double skewness = 0.0;
};

/// Skewness above which auto mode log-transforms an attribute.
inline constexpr double kAutoLogSkewness = 2.0;

/**
 * log10 transform of one attribute's observed values.
 *
 * Strictly positive attributes are logged directly. Otherwise values are
 * first moved to start at `shift` = max(1e-6, 1e-3 * (max - min)):
 * log10(x - min + shift). With `automatic`, the transform is applied only
 * when the skewness exceeds kAutoLogSkewness.
 */
inline LogTransformResult log_transform(std::span<const double> values, bool automatic) {
    LogTransformResult r;
    r.values.assign(values.begin(), values.end());
    if (values.empty()) return r;
    r.skewness = skewness(r.values);
    if (automatic && !(r.skewness > kAutoLogSkewness)) return r;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo <= 0.0) {
        r.offset = *lo;
        r.shift = std::max(1e-6, 1e-3 * (*hi - *lo));
    }
    for (double& v : r.values) v = std::log10(v - r.offset + r.shift);
    r.applied = true;
    return r;
}

enum class LogMode { none, automatic, listed };

struct PreprocessOptions {
    LogMode log_mode = LogMode::automatic;
    std::vector<std::string> log_attributes;  // for LogMode::listed
};

/**
 * Optional log transform then unit-range scaling, per attribute, on observed
 * values. Attributes that are constant (before or after the log) are dropped,
 * as are locations left without observations.
 */
inline Dataset preprocess(const Dataset& input, const PreprocessOptions& opts = {}) {
    if (input.preprocessed) throw ParameterError("dataset is already preprocessed");
    if (opts.log_mode == LogMode::listed) {
        for (const auto& name : opts.log_attributes)
            if (std::find(input.attribute_names.begin(), input.attribute_names.end(), name) == input.attribute_names.end())
                throw ConfigError("log-transform attribute '" + name + "' is not in the table");
    }
    Dataset ds = input;
    std::vector<std::pair<std::size_t, std::string>> drop;
    for (std::size_t i = 0; i < ds.attributes(); ++i) {
        const auto vals = detail::observed_row(ds.raw, ds.observed, i);
        const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
        if (!(*hi > *lo)) {
            drop.emplace_back(i, "constant attribute");
            continue;
        }
        bool want_log = false, automatic = false;
        if (opts.log_mode == LogMode::automatic) {
            want_log = automatic = true;
        } else if (opts.log_mode == LogMode::listed) {
            want_log = std::find(opts.log_attributes.begin(), opts.log_attributes.end(), ds.attribute_names[i]) !=
                       opts.log_attributes.end();
        }
        AttributeTransform tr;
        std::vector<double> v = vals;
        if (want_log) {
            auto lr = log_transform(vals, automatic);
            tr.log_applied = lr.applied;
            tr.log_offset = lr.offset;
            tr.log_shift = lr.shift;
            v = std::move(lr.values);
        }
        const auto [vlo, vhi] = std::minmax_element(v.begin(), v.end());
        if (!(*vhi > *vlo)) {
            drop.emplace_back(i, "constant attribute after log transform");
            continue;
        }
        tr.min = *vlo;
        tr.max = *vhi;
        ds.transforms[i] = tr;
        for (std::size_t j = 0; j < ds.locations(); ++j)
            ds.values(i, j) = ds.observed(i, j) ? std::clamp(tr.forward(ds.raw(i, j)), 0.0, 1.0) : 0.0;
    }
    ds.preprocessed = true;
    return detail::prune(ds, std::move(drop));
}

/// Preprocessed matrix X (attributes x locations, unobserved cells 0) and its mask.
inline std::pair<Matrix, Mask> to_matrix(const Dataset& ds) {
    if (!ds.preprocessed) throw ParameterError("to_matrix: dataset has not been preprocessed");
    if (ds.attributes() == 0 || ds.locations() == 0) throw DegenerateInputError("to_matrix: empty dataset");
    return {ds.values, ds.observed};
}

/// Maps an attribute-side matrix (rows = attributes, in scaled units) back to file units.
inline Matrix invert_transforms(const Matrix& scaled, std::span<const AttributeTransform> transforms) {
    if (scaled.rows() != transforms.size()) throw ShapeError("one transform per attribute row required");
    Matrix out(scaled.rows(), scaled.cols());
    for (std::size_t i = 0; i < scaled.rows(); ++i)
        for (std::size_t j = 0; j < scaled.cols(); ++j) out(i, j) = transforms[i].inverse(scaled(i, j));
    if (!out.all_finite()) throw NumericalFailure("inverse transform overflowed", 0);
    return out;
}

}  // namespace nmfk
