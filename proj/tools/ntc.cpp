// Command-line front end: score matrix, TRE ablation, protocol dumps and
// gradient checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ntc/harness.hpp"

namespace {

using namespace ntc;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

// Thresholds for the analytic-vs-numeric gradient comparison.
constexpr double kSmoothTolerance = 1e-6;
constexpr double kNonlinearTolerance = 1e-4;

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& item : raw) {
        std::stringstream ss(item);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (!part.empty()) out.push_back(part);
        }
    }
    return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::vector<std::string>& raw, const char* what, Parse parse) {
    std::vector<T> out;
    for (const auto& name : split_list(raw)) {
        auto parsed = parse(name);
        if (!parsed) throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
        out.push_back(*parsed);
    }
    if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
    return out;
}

struct RunFlags {
    std::vector<std::string> protocols, metrics, compositions;
    std::optional<std::size_t> colours, shapes, seeds, threads;
    std::string out, plot, config;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_metrics) {
    cmd->add_option("--protocols", f.protocols, "Comma-separated protocol families (default: all)");
    if (with_metrics) cmd->add_option("--metrics", f.metrics, "Comma-separated metrics (default: all)");
    cmd->add_option("--compositions", f.compositions, "TRE compositions: additive, linear, nonlinear");
    cmd->add_option("--colours", f.colours, "Number of colours (default 25)");
    cmd->add_option("--shapes", f.shapes, "Number of shapes (default 25)");
    cmd->add_option("--seeds", f.seeds, "Number of seeds, run as 0..n-1 (default 5)");
    cmd->add_option("--threads", f.threads, "Worker threads (default: NTC_BENCH_THREADS or all cores)");
    cmd->add_option("--out", f.out, "CSV output path");
    cmd->add_option("--plot", f.plot, "SVG output path");
    cmd->add_option("--config", f.config, "JSON file mirroring the run configuration");
}

RunConfig resolve(const RunFlags& f) {
    RunConfig config;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw ConfigError("cannot read config file " + f.config);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
        }
        config = parse_run_config(j, config);
    }
    if (!f.protocols.empty()) config.protocols = parse_list<Family>(f.protocols, "protocol", parse_family);
    if (!f.metrics.empty()) config.metrics = parse_list<Metric>(f.metrics, "metric", parse_metric);
    if (!f.compositions.empty()) {
        config.compositions = parse_list<Composition>(f.compositions, "composition", parse_composition);
    }
    if (f.colours) config.n_colours = *f.colours;
    if (f.shapes) config.n_shapes = *f.shapes;
    if (f.seeds) config.seeds = default_seeds(*f.seeds);
    if (f.threads) config.threads = *f.threads;
    if (!f.out.empty()) config.out = f.out;
    if (!f.plot.empty()) config.plot = f.plot;
    validate(config);
    return config;
}

std::string notes_path(const std::string& out) {
    std::filesystem::path p(out);
    p.replace_extension(".notes.txt");
    return p.string();
}

void write_outputs(const ScoreTable& table, const RunConfig& config, PlotLayout layout) {
    emit_csv(table, config.out);
    emit_notes(table, notes_path(config.out));
    if (config.plot) emit_plot(table, *config.plot, layout);
    std::size_t failed = 0;
    for (const auto& row : table.rows) failed += row.error.empty() ? 0 : 1;
    std::cerr << "wrote " << table.rows.size() << " rows to " << config.out;
    if (failed) std::cerr << " (" << failed << " failed cells, see " << notes_path(config.out) << ")";
    std::cerr << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compositionality metrics on reference protocols"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "Score protocols under metrics; write CSV (and SVG)");
    add_run_flags(run, run_flags, true);

    RunFlags ablation_flags;
    auto* ablation = app.add_subcommand("tre-ablation", "TRE under each composition function");
    add_run_flags(ablation, ablation_flags, false);

    std::string dump_name;
    std::size_t dump_colours = 25, dump_shapes = 25;
    std::uint64_t dump_seed = 0;
    std::string dump_out;
    auto* dump = app.add_subcommand("dump-protocol", "Write one protocol as JSON and print its table");
    dump->add_option("protocol", dump_name, "Protocol family")->required();
    dump->add_option("--colours", dump_colours, "Number of colours");
    dump->add_option("--shapes", dump_shapes, "Number of shapes");
    dump->add_option("--seed", dump_seed, "Generator seed");
    dump->add_option("--out", dump_out, "JSON output path (default <protocol>.json)");

    std::size_t check_seeds = 5;
    auto* check = app.add_subcommand("grad-check", "Compare TRE gradients with finite differences");
    check->add_option("--seeds", check_seeds, "Number of seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) {
            const auto config = resolve(run_flags);
            write_outputs(run_matrix(config), config, PlotLayout::by_metric);
        } else if (*ablation) {
            auto config = resolve(ablation_flags);
            if (ablation_flags.compositions.empty()) {
                config.compositions.assign(std::begin(kAllCompositions), std::end(kAllCompositions));
            }
            const auto table = run_ablation(config);
            write_outputs(table, config, PlotLayout::by_composition);
        } else if (*dump) {
            const auto family = parse_family(dump_name);
            if (!family) throw ConfigError("unknown protocol '" + dump_name + "'");
            if (dump_colours == 0 || dump_shapes == 0) throw ConfigError("concept space sizes must be positive");
            std::string note;
            const auto space = space_for_family(*family, dump_colours, dump_shapes, &note);
            if (!note.empty()) std::cerr << "note: " << note << '\n';
            const auto protocol = generate(*family, space, dump_seed);
            const std::string path = dump_out.empty() ? std::string(family_name(*family)) + ".json" : dump_out;
            std::ofstream out(path);
            if (!out) throw std::runtime_error("cannot write " + path);
            out << to_json(protocol).dump(2) << '\n';
            std::cout << render_table(protocol);
        } else if (*check) {
            bool ok = true;
            for (auto kind : kAllCompositions) {
                const double tol = kind == Composition::nonlinear ? kNonlinearTolerance : kSmoothTolerance;
                double worst = 0.0;
                for (std::uint64_t s = 0; s < check_seeds; ++s) worst = std::max(worst, grad_check(kind, s));
                const bool pass = worst < tol;
                ok = ok && pass;
                std::printf("%-9s max relative error %.3e (threshold %.0e) %s\n",
                            std::string(composition_name(kind)).c_str(), worst, tol, pass ? "ok" : "FAIL");
            }
            return ok ? kOk : kRuntimeError;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}
