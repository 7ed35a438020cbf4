#include "ntc/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ntc/infostats.hpp"

namespace ntc {

namespace {

struct MetricEntry {
    Metric metric;
    std::string_view name;
};

constexpr MetricEntry kMetricNames[] = {
    {Metric::topsim, "topsim"},
    {Metric::posdis, "posdis"},
    {Metric::bosdis, "bosdis"},
    {Metric::context_independence, "context_independence"},
    {Metric::conflict_count, "conflict_count"},
    {Metric::generalisation, "generalisation"},
    {Metric::tre, "tre"},
};

MetricScore score(Metric metric, std::optional<double> value) {
    return {metric, value, orientation_of(metric)};
}

bool is_constant(const std::vector<std::size_t>& values) {
    return std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end();
}

std::vector<std::size_t> slot_values(const Protocol& p, std::size_t slot) {
    std::vector<std::size_t> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p.tuple(i)[slot];
    return out;
}

// Disentanglement term of one message statistic against every concept slot.
std::optional<DisentanglementTerm> term_for(const Protocol& p, std::size_t variable,
                                            const std::vector<std::size_t>& values) {
    if (is_constant(values)) return std::nullopt;
    DisentanglementTerm t;
    t.variable = variable;
    t.entropy = entropy_of(values);
    std::vector<double> info(p.n_slots());
    for (std::size_t k = 0; k < p.n_slots(); ++k) {
        const auto slot = slot_values(p, k);
        info[k] = mutual_information(JointCounts::from_pairs(values, slot));
    }
    std::vector<std::size_t> order(info.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return info[a] > info[b]; });
    t.top_slot = order[0];
    t.top_information = info[order[0]];
    t.second_information = info[order[1]];
    return t;
}

std::optional<double> mean_gap(const std::vector<DisentanglementTerm>& terms) {
    if (terms.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& t : terms) sum += (t.top_information - t.second_information) / t.entropy;
    return sum / static_cast<double>(terms.size());
}

}  // namespace

std::string_view metric_name(Metric metric) {
    for (const auto& e : kMetricNames) {
        if (e.metric == metric) return e.name;
    }
    return "?";
}

std::optional<Metric> parse_metric(std::string_view name) {
    for (const auto& e : kMetricNames) {
        if (e.name == name) return e.metric;
    }
    return std::nullopt;
}

std::string_view orientation_name(Orientation o) {
    return o == Orientation::higher ? "higher" : "lower";
}

Orientation orientation_of(Metric metric) {
    return metric == Metric::conflict_count || metric == Metric::tre ? Orientation::lower
                                                                     : Orientation::higher;
}

PaddedView padded_view(const Protocol& protocol) {
    PaddedView view;
    view.pad = protocol.alphabet().size();
    view.length = protocol.max_len();
    view.messages = protocol.messages();
    for (auto& m : view.messages) m.resize(view.length, view.pad);
    return view;
}

MetricScore topographic_similarity(const Protocol& protocol) {
    const std::size_t n = protocol.size();
    // Spearman needs at least two pairs.
    if (n < 3) return score(Metric::topsim, std::nullopt);
    std::vector<double> message_distance;
    std::vector<double> derivation_distance;
    message_distance.reserve(n * (n - 1) / 2);
    derivation_distance.reserve(n * (n - 1) / 2);
    const auto& messages = protocol.messages();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            message_distance.push_back(static_cast<double>(levenshtein(messages[i], messages[j])));
            derivation_distance.push_back(
                static_cast<double>(hamming(protocol.tuple(i), protocol.tuple(j))));
        }
    }
    return score(Metric::topsim, spearman(message_distance, derivation_distance));
}

std::vector<DisentanglementTerm> positional_terms(const Protocol& protocol) {
    const auto view = padded_view(protocol);
    std::vector<DisentanglementTerm> terms;
    for (std::size_t j = 0; j < view.length; ++j) {
        std::vector<std::size_t> values(protocol.size());
        for (std::size_t i = 0; i < protocol.size(); ++i) values[i] = view.messages[i][j];
        if (auto t = term_for(protocol, j, values)) terms.push_back(*t);
    }
    return terms;
}

std::vector<DisentanglementTerm> bow_terms(const Protocol& protocol) {
    const auto view = padded_view(protocol);
    std::vector<DisentanglementTerm> terms;
    for (std::size_t symbol = 0; symbol <= view.pad; ++symbol) {
        std::vector<std::size_t> counts(protocol.size());
        for (std::size_t i = 0; i < protocol.size(); ++i) {
            counts[i] = static_cast<std::size_t>(
                std::count(view.messages[i].begin(), view.messages[i].end(), symbol));
        }
        if (auto t = term_for(protocol, symbol, counts)) terms.push_back(*t);
    }
    return terms;
}

MetricScore positional_disentanglement(const Protocol& protocol) {
    return score(Metric::posdis, mean_gap(positional_terms(protocol)));
}

MetricScore bow_disentanglement(const Protocol& protocol) {
    return score(Metric::bosdis, mean_gap(bow_terms(protocol)));
}

MetricScore context_independence(const Protocol& protocol) {
    const std::size_t n_concepts = protocol.space().size();
    const std::size_t n_symbols = protocol.alphabet().size();
    std::vector<std::size_t> with_concept(n_concepts, 0);
    std::vector<std::size_t> with_symbol(n_symbols, 0);
    std::vector<std::size_t> with_both(n_concepts * n_symbols, 0);

    std::vector<char> present(n_symbols);
    for (std::size_t i = 0; i < protocol.size(); ++i) {
        std::fill(present.begin(), present.end(), 0);
        for (auto s : protocol.messages()[i]) present[s] = 1;
        for (std::size_t s = 0; s < n_symbols; ++s) with_symbol[s] += present[s];
        for (auto c : protocol.concept_ids(i)) {
            ++with_concept[c];
            for (std::size_t s = 0; s < n_symbols; ++s) with_both[c * n_symbols + s] += present[s];
        }
    }

    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < n_concepts; ++c) {
        if (with_concept[c] == 0) continue;
        ++used;
        // Favourite symbol: argmax_s p(c|s), lowest index on ties.
        double best = -1.0;
        std::size_t best_symbol = 0;
        for (std::size_t s = 0; s < n_symbols; ++s) {
            if (with_symbol[s] == 0) continue;
            const double p = static_cast<double>(with_both[c * n_symbols + s]) /
                             static_cast<double>(with_symbol[s]);
            if (p > best) {
                best = p;
                best_symbol = s;
            }
        }
        const double both = static_cast<double>(with_both[c * n_symbols + best_symbol]);
        const double symbol_given_concept = both / static_cast<double>(with_concept[c]);
        const double concept_given_symbol = both / static_cast<double>(with_symbol[best_symbol]);
        sum += symbol_given_concept * concept_given_symbol;
    }
    return score(Metric::context_independence, sum / static_cast<double>(used));
}

MetricScore conflict_count(const Protocol& protocol) {
    const std::size_t k = protocol.n_slots();
    if (!protocol.fixed_length() || protocol.max_len() != k) {
        return score(Metric::conflict_count, std::nullopt);
    }
    const std::size_t n_symbols = protocol.alphabet().size();
    std::vector<std::size_t> slot_size(k);
    for (std::size_t j = 0; j < k; ++j) {
        slot_size[j] = protocol.space().category_size(protocol.slot_categories()[j]);
    }

    // violations[j][slot]: conflicts when position j is read as concept slot `slot`.
    std::vector<std::vector<std::size_t>> violations(k, std::vector<std::size_t>(k, 0));
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t slot = 0; slot < k; ++slot) {
            JointCounts joint(n_symbols, slot_size[slot]);
            for (std::size_t i = 0; i < protocol.size(); ++i) {
                joint.add(protocol.messages()[i][j], protocol.tuple(i)[slot]);
            }
            std::size_t total = 0;
            for (std::size_t s = 0; s < n_symbols; ++s) {
                std::size_t row = 0, principal = 0;
                for (std::size_t v = 0; v < slot_size[slot]; ++v) {
                    row += joint(s, v);
                    principal = std::max(principal, joint(s, v));
                }
                total += row - principal;
            }
            violations[j][slot] = total;
        }
    }

    std::vector<std::size_t> phi(k);
    std::iota(phi.begin(), phi.end(), 0);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    do {
        std::size_t total = 0;
        for (std::size_t j = 0; j < k; ++j) total += violations[j][phi[j]];
        best = std::min(best, total);
    } while (std::next_permutation(phi.begin(), phi.end()));
    return score(Metric::conflict_count, static_cast<double>(best));
}

}  // namespace ntc
