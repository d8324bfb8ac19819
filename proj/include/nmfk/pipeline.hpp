#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nmfk/clustering.hpp"
#include "nmfk/data.hpp"
#include "nmfk/errors.hpp"
#include "nmfk/parallel.hpp"
#include "nmfk/report.hpp"
#include "nmfk/selection.hpp"

namespace nmfk {

/// Everything a CLI invocation needs; validated before any computation.
struct RunConfig {
    std::string input;
    std::string output_dir = ".";
    char delimiter = ',';
    std::string missing = "NaN";
    std::size_t k_min = 2;
    std::size_t k_max = 0;  // 0 = min(min(n, m) - 1, 10)
    std::optional<std::size_t> k;  // fixed rank for `run`
    std::size_t restarts = 1000;
    std::uint64_t seed = 0;
    double silhouette_threshold = 0.25;
    SilhouetteStatistic silhouette_statistic = SilhouetteStatistic::min_cluster;
    SolveOptions solver;
    std::string log_transform = "auto";  // auto | none | comma-separated attribute names
    std::size_t threads = 0;             // 0 = hardware concurrency

    void validate() const {
        if (input.empty()) throw ConfigError("--input is required");
        if (output_dir.empty()) throw ConfigError("--output-dir must not be empty");
        if (restarts < 2) throw ConfigError("--restarts must be at least 2");
        if (k_min < 2) throw ConfigError("--k-min must be at least 2");
        if (k_max != 0 && k_max < k_min) throw ConfigError("--k-max must not be below --k-min");
        if (k && *k < 1) throw ConfigError("--k must be at least 1");
        if (!(silhouette_threshold >= -1.0 && silhouette_threshold <= 1.0))
            throw ConfigError("--silhouette-threshold must lie in [-1, 1]");
        if (log_transform.empty()) throw ConfigError("--log-transform must be auto, none, or a list of attributes");
        try {
            solver.validate();
        } catch (const ParameterError& e) {
            throw ConfigError(e.what());
        }
    }

    TableOptions table_options() const {
        TableOptions t;
        t.delimiter = delimiter;
        t.missing_sentinels = {missing};
        return t;
    }

    PreprocessOptions preprocess_options() const {
        PreprocessOptions p;
        if (log_transform == "auto") {
            p.log_mode = LogMode::automatic;
        } else if (log_transform == "none") {
            p.log_mode = LogMode::none;
        } else {
            p.log_mode = LogMode::listed;
            std::string item;
            for (char c : log_transform + ",") {
                if (c == ',') {
                    const std::string name = detail::trim(item);
                    if (!name.empty()) p.log_attributes.push_back(name);
                    item.clear();
                } else {
                    item.push_back(c);
                }
            }
            if (p.log_attributes.empty()) throw ConfigError("--log-transform list is empty");
        }
        return p;
    }

    std::size_t worker_threads() const { return threads == 0 ? default_thread_count() : threads; }
};

/// Process exit status for each error category.
inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config:
    case ErrorKind::parameter: return 2;
    case ErrorKind::ingest:
    case ErrorKind::degenerate_input: return 3;
    case ErrorKind::io: return 5;
    default: return 4;
    }
}

struct PreparedInput {
    Dataset dataset;
    Matrix x{1, 1};
    Mask mask{1, 1};
};

inline PreparedInput prepare_input(const RunConfig& cfg) {
    PreprocessOptions popts = cfg.preprocess_options();
    Dataset raw = load_table(cfg.input, cfg.table_options());
    PreparedInput p{preprocess(raw, popts), Matrix(1, 1), Mask(1, 1)};
    auto [x, mask] = to_matrix(p.dataset);
    p.x = std::move(x);
    p.mask = std::move(mask);
    return p;
}

namespace detail {

inline std::filesystem::path ensure_output_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return dir;
}

inline SweepOptions sweep_options(const RunConfig& cfg) {
    SweepOptions so;
    so.restarts = cfg.restarts;
    so.master_seed = cfg.seed;
    so.solver = cfg.solver;
    so.threads = cfg.worker_threads();
    return so;
}

/// W.csv, H.csv, assignments.csv and attributes_ranked.csv for one clustered k.
inline void write_signature_artifacts(const std::filesystem::path& dir, const PreparedInput& in, const KAnalysis& a) {
    const ConsensusSignatures cs = consensus(*a.vectors, *a.clustering, in.x, in.mask);
    const Matrix w_original = invert_transforms(cs.w, in.dataset.transforms);
    write_w_csv(dir / "W.csv", cs.w, w_original, in.dataset.attribute_names);
    write_h_csv(dir / "H.csv", cs.h, in.dataset.location_ids);
    write_assignments_csv(dir / "assignments.csv", location_assignments(cs.h, in.dataset.location_ids), cs.h.rows());
    write_attributes_ranked_csv(dir / "attributes_ranked.csv", rank_attributes(cs.w, w_original, in.dataset.attribute_names));
}

inline void log_warnings(const std::vector<KAnalysis>& results, std::ostream* log) {
    if (!log) return;
    for (const auto& r : results) {
        if (r.diagnostics.failed) *log << "warning: k = " << r.diagnostics.k << " failed: " << r.diagnostics.error << '\n';
        if (r.vectors)
            for (const auto& w : r.vectors->warnings) *log << "warning: k = " << r.diagnostics.k << ": " << w << '\n';
    }
}

}  // namespace detail

/**
 * Full pipeline: sweep k, select k*, and write diagnostics.csv,
 * selection.txt, preprocess.csv and the k* signature artifacts.
 */
inline Selection cmd_sweep(const RunConfig& cfg, std::ostream* log = nullptr) {
    cfg.validate();
    const PreparedInput in = prepare_input(cfg);
    SelectionRule rule;
    rule.silhouette_threshold = cfg.silhouette_threshold;
    rule.statistic = cfg.silhouette_statistic;
    rule.k_min = cfg.k_min;
    rule.k_max = cfg.k_max;
    try {
        rule.validate(in.x.rows(), in.x.cols());
    } catch (const ParameterError& e) {
        throw ConfigError(std::string(e.what()) + " for a " + std::to_string(in.x.rows()) + " x " +
                          std::to_string(in.x.cols()) + " data matrix");
    }
    const auto dir = detail::ensure_output_dir(cfg.output_dir);

    const std::vector<KAnalysis> results = sweep(in.x, in.mask, rule, detail::sweep_options(cfg));
    detail::log_warnings(results, log);
    const auto diags = diagnostics_of(results);
    const Selection sel = select_optimal_k(diags, rule);

    write_preprocess_csv(dir / "preprocess.csv", in.dataset.report);
    write_diagnostics_csv(dir / "diagnostics.csv", diags);
    write_selection_txt(dir / "selection.txt",
                        {sel, rule, rule.resolved_k_max(in.x.rows(), in.x.cols()), cfg.restarts, cfg.seed});
    for (const auto& r : results)
        if (r.diagnostics.k == sel.k) detail::write_signature_artifacts(dir, in, r);
    return sel;
}

/// Single-k analysis: diagnostics.csv (one row), preprocess.csv and signature artifacts.
inline KDiagnostics cmd_run(const RunConfig& cfg, std::ostream* log = nullptr) {
    cfg.validate();
    if (!cfg.k) throw ConfigError("run requires --k");
    const PreparedInput in = prepare_input(cfg);
    if (*cfg.k < 2 || *cfg.k >= std::min(in.x.rows(), in.x.cols()))
        throw ParameterError("--k = " + std::to_string(*cfg.k) + " must satisfy 2 <= k < min(n, m) = " +
                             std::to_string(std::min(in.x.rows(), in.x.cols())));
    const auto dir = detail::ensure_output_dir(cfg.output_dir);
    const KAnalysis a = analyze_k(in.x, in.mask, *cfg.k, detail::sweep_options(cfg));
    detail::log_warnings({a}, log);
    write_preprocess_csv(dir / "preprocess.csv", in.dataset.report);
    write_diagnostics_csv(dir / "diagnostics.csv", {a.diagnostics});
    detail::write_signature_artifacts(dir, in, a);
    return a.diagnostics;
}

/**
 * Reads assignments.csv and the input table's lon/lat columns and writes a
 * GeoJSON point collection. Returns the number of skipped (unlocated) rows.
 */
inline GeoJsonResult cmd_geojson(const RunConfig& cfg, const std::filesystem::path& assignments,
                                 const std::filesystem::path& output) {
    if (cfg.input.empty()) throw ConfigError("--input is required");
    std::ifstream in(cfg.input, std::ios::binary);
    if (!in) throw IoError("cannot open input file '" + cfg.input + "'");
    const RawTable table = parse_table(in, cfg.table_options());
    std::map<std::string, LonLat> coords;
    if (table.has_coordinates)
        for (std::size_t j = 0; j < table.location_ids.size(); ++j)
            if (table.coordinates[j]) coords.emplace(table.location_ids[j], *table.coordinates[j]);

    GeoJsonResult r = make_geojson(read_assignments_csv(assignments), coords);
    if (output.has_parent_path()) detail::ensure_output_dir(output.parent_path().string());
    auto out = detail::open_output(output);
    out << r.document.dump(2) << '\n';
    detail::finish(out, output);
    return r;
}

}  // namespace nmfk
