#pragma once

// Closed-form compositionality metrics, each evaluated exactly over the full
// protocol table.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntc/core.hpp"

namespace ntc {

enum class Metric {
    topsim,
    posdis,
    bosdis,
    context_independence,
    conflict_count,
    generalisation,
    tre,
};

inline constexpr Metric kAllMetrics[] = {
    Metric::topsim,         Metric::posdis, Metric::bosdis, Metric::context_independence,
    Metric::conflict_count, Metric::generalisation, Metric::tre,
};

std::string_view metric_name(Metric metric);
std::optional<Metric> parse_metric(std::string_view name);

enum class Orientation { higher, lower };

std::string_view orientation_name(Orientation o);
/// Conflict count and TRE are lower-is-better; everything else higher.
Orientation orientation_of(Metric metric);

struct MetricScore {
    Metric metric = Metric::topsim;
    std::optional<double> value;  // nullopt when undefined for the protocol
    Orientation orientation = Orientation::higher;

    bool defined() const { return value.has_value(); }
};

/// Messages right-padded to max_len with the PAD symbol, whose index is the
/// alphabet size. PAD is treated as an ordinary value by the statistics.
struct PaddedView {
    std::size_t pad = 0;
    std::size_t length = 0;
    std::vector<Message> messages;
};

PaddedView padded_view(const Protocol& protocol);

/// Spearman correlation of message Levenshtein distance and derivation
/// Hamming distance over all unordered pairs.
MetricScore topographic_similarity(const Protocol& protocol);

/// Mean over non-constant positions of (I(s_j; top slot) - I(s_j; runner-up)) / H(s_j).
MetricScore positional_disentanglement(const Protocol& protocol);

/// As posdis, but over per-symbol occurrence counts instead of positions.
MetricScore bow_disentanglement(const Protocol& protocol);

MetricScore context_independence(const Protocol& protocol);

/// Undefined unless every message has length equal to the number of concept slots.
MetricScore conflict_count(const Protocol& protocol);

/// Per-position (or per-symbol) disentanglement terms, for inspection.
struct DisentanglementTerm {
    std::size_t variable = 0;     // position or symbol index
    double entropy = 0.0;
    double top_information = 0.0;
    double second_information = 0.0;
    std::size_t top_slot = 0;
};

std::vector<DisentanglementTerm> positional_terms(const Protocol& protocol);
std::vector<DisentanglementTerm> bow_terms(const Protocol& protocol);

}  // namespace ntc
