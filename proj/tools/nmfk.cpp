// nmfk command-line front end: sweep | run | geojson.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nmfk/pipeline.hpp"

namespace {

void report_error(nmfk::ErrorKind kind, int code, const std::string& message) {
    nlohmann::ordered_json line;
    line["error"] = nmfk::to_string(kind);
    line["exit_code"] = code;
    line["message"] = message;
    std::cerr << line.dump() << std::endl;
}

char parse_delimiter(const std::string& text) {
    if (text == "tab" || text == "\\t" || text == "\t") return '\t';
    if (text.size() == 1) return text[0];
    throw nmfk::ConfigError("--delimiter must be a single character or 'tab'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent signature extraction with NMF restart ensembles and silhouette-based rank selection"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key = value file; keys are the long flag names");

    nmfk::RunConfig cfg;
    std::string delimiter = ",";
    std::string statistic = "min_cluster";
    std::optional<std::size_t> fixed_k;
    std::string assignments;
    std::string geojson_out;

    app.add_option("--input", cfg.input, "Delimited table: location id column, then attribute columns");
    app.add_option("--output-dir", cfg.output_dir, "Directory for output artifacts")->capture_default_str();
    app.add_option("--k-min", cfg.k_min, "Smallest rank in the sweep")->capture_default_str();
    app.add_option("--k-max", cfg.k_max, "Largest rank in the sweep (0 = min(min(n,m)-1, 10))")->capture_default_str();
    app.add_option("--k", fixed_k, "Rank for the run subcommand");
    app.add_option("--restarts", cfg.restarts, "Random restarts per rank")->capture_default_str();
    app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    app.add_option("--silhouette-threshold", cfg.silhouette_threshold, "Silhouette needed to accept a rank")
        ->capture_default_str();
    app.add_option("--silhouette-statistic", statistic, "min_cluster or mean")
        ->check(CLI::IsMember({"min_cluster", "mean"}))
        ->capture_default_str();
    app.add_option("--log-transform", cfg.log_transform, "auto, none, or comma-separated attribute names")
        ->capture_default_str();
    app.add_option("--delimiter", delimiter, "Field delimiter (single character or 'tab')")->capture_default_str();
    app.add_option("--missing", cfg.missing, "Cell text meaning missing (empty cells always are)")->capture_default_str();
    app.add_option("--threads", cfg.threads, "Worker threads for restarts (0 = all cores)")->capture_default_str();
    app.add_option("--max-iterations", cfg.solver.max_iterations, "Update cap per restart")->capture_default_str();
    app.add_option("--tolerance", cfg.solver.relative_tolerance, "Relative loss change that stops a restart")
        ->capture_default_str();
    app.add_option("--assignments", assignments, "geojson: assignments.csv (default <output-dir>/assignments.csv)");
    app.add_option("--geojson", geojson_out, "geojson: output file (default <output-dir>/signatures.geojson)");

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep k, select the number of signatures, write artifacts");
    auto* run_cmd = app.add_subcommand("run", "Analyze a single fixed k");
    auto* geojson_cmd = app.add_subcommand("geojson", "Export signature assignments as a GeoJSON point layer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error(nmfk::ErrorKind::config, 2, e.what());
        return 2;
    }

    try {
        cfg.delimiter = parse_delimiter(delimiter);
        cfg.silhouette_statistic =
            statistic == "mean" ? nmfk::SilhouetteStatistic::mean : nmfk::SilhouetteStatistic::min_cluster;
        cfg.k = fixed_k;

        if (*sweep_cmd) {
            const auto sel = nmfk::cmd_sweep(cfg, &std::cerr);
            std::cout << "k* = " << sel.k << (sel.low_confidence ? " (low confidence)" : "") << '\n';
        } else if (*run_cmd) {
            const auto d = nmfk::cmd_run(cfg, &std::cerr);
            std::cout << "k = " << d.k << ", normalized loss = " << nmfk::format_number(d.normalized_loss)
                      << ", min cluster silhouette = " << nmfk::format_number(d.min_cluster_silhouette) << '\n';
        } else if (*geojson_cmd) {
            const std::filesystem::path dir = cfg.output_dir;
            const auto src = assignments.empty() ? dir / "assignments.csv" : std::filesystem::path(assignments);
            const auto dst = geojson_out.empty() ? dir / "signatures.geojson" : std::filesystem::path(geojson_out);
            const auto r = nmfk::cmd_geojson(cfg, src, dst);
            if (r.skipped > 0) std::cerr << "skipped " << r.skipped << " locations without coordinates\n";
            std::cout << "wrote " << r.emitted << " features to " << dst.string() << '\n';
        }
    } catch (const nmfk::Error& e) {
        const int code = nmfk::exit_code(e.kind());
        report_error(e.kind(), code, e.what());
        return code;
    } catch (const std::exception& e) {
        report_error(nmfk::ErrorKind::io, 5, e.what());
        return 5;
    }
    return 0;
}
