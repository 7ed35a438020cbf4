#pragma once

// Experiment driver: scores every (protocol, metric, composition, seed) cell
// and writes the results as CSV and SVG.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntc/metrics.hpp"
#include "ntc/protocols.hpp"
#include "ntc/receiver.hpp"
#include "ntc/tre.hpp"

namespace ntc {

/// Invalid user configuration (unknown names, bad sizes, malformed JSON).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::vector<Family> protocols{std::begin(kAllFamilies), std::end(kAllFamilies)};
    std::vector<Metric> metrics{std::begin(kAllMetrics), std::end(kAllMetrics)};
    std::size_t n_colours = 25;
    std::size_t n_shapes = 25;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<Composition> compositions{Composition::linear};
    TreConfig tre;
    ReceiverConfig receiver;
    std::string out = "scores.csv";
    std::optional<std::string> plot;
    /// Worker count; 0 reads NTC_BENCH_THREADS, then the hardware concurrency.
    std::size_t threads = 0;
};

/// Seeds 0..n-1.
std::vector<std::uint64_t> default_seeds(std::size_t n);

/// Overlays a JSON object onto `base`. Keys mirror RunConfig; "tre" and
/// "receiver" hold nested objects. Throws ConfigError on unknown keys or names.
RunConfig parse_run_config(const nlohmann::json& j, RunConfig base = {});

/// Throws ConfigError if any list is empty or a size is zero.
void validate(const RunConfig& config);

struct ScoreRow {
    Family protocol = Family::tc;
    Metric metric = Metric::topsim;
    std::optional<Composition> composition;  // TRE rows only
    std::uint64_t seed = 0;
    std::optional<double> value;
    Orientation orientation = Orientation::higher;
    std::string error;  // non-empty if the cell failed

    bool defined() const { return value.has_value(); }
};

struct ScoreTable {
    std::vector<ScoreRow> rows;  // sorted by (protocol, metric, composition, seed)
    std::vector<std::string> notes;
};

/// Scores a single cell; throws whatever the metric throws.
MetricScore score_cell(const Protocol& protocol, Metric metric, std::optional<Composition> composition,
                       std::uint64_t seed, const RunConfig& config);

/// Every requested cell, one row each; TRE gets one row per composition.
/// Failed cells become undefined rows with `error` set.
ScoreTable run_matrix(const RunConfig& config);

/// The TRE-only matrix over config.compositions.
ScoreTable run_ablation(RunConfig config);

/// Header protocol,metric,composition,seed,value,orientation,defined;
/// values with 9 significant digits, undefined values left empty.
std::string render_csv(const ScoreTable& table);
void emit_csv(const ScoreTable& table, const std::string& path);

/// Adjustment notes and cell errors, one per line.
void emit_notes(const ScoreTable& table, const std::string& path);

enum class PlotLayout { by_metric, by_composition };

/// Horizontal bars of the per-protocol mean with min/max whiskers over seeds,
/// one panel per metric (or per TRE composition). Lower-is-better scores
/// are negated so that longer bars always mean "more compositional".
std::string render_svg(const ScoreTable& table, PlotLayout layout);
void emit_plot(const ScoreTable& table, const std::string& path, PlotLayout layout);

}  // namespace ntc
