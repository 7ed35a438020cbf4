#pragma once

// The nine reference protocols: one trivially compositional, six
// non-trivially compositional and two non-compositional baselines.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ntc/core.hpp"

namespace ntc {

enum class Family {
    tc,
    holistic,
    random,
    entangled,
    rotated,
    order_sensitive,
    context_sensitive,
    negation,
    diagonal,
};

inline constexpr Family kAllFamilies[] = {
    Family::tc,       Family::holistic,          Family::random,
    Family::entangled, Family::rotated,          Family::order_sensitive,
    Family::context_sensitive, Family::negation, Family::diagonal,
};

std::string_view family_name(Family family);
std::optional<Family> parse_family(std::string_view name);

/// True for the six non-trivially compositional families.
bool is_ntc(Family family);

struct ProtocolConfig {
    ConceptSpace space;
    std::uint64_t seed = 0;
    Family family = Family::tc;
    /// Overrides the family's default alphabet size (holistic and random only).
    std::optional<std::size_t> alphabet_size;
    /// Use identity concept->symbol assignments instead of seeded permutations.
    bool identity_bijections = false;
};

/// Private random stream for one generator, keyed by (seed, family name).
std::mt19937_64 protocol_rng(std::uint64_t seed, std::string_view name);

Protocol gen_tc(const ProtocolConfig& config);
Protocol gen_holistic(const ProtocolConfig& config);
Protocol gen_random(const ProtocolConfig& config);
Protocol gen_entangled(const ProtocolConfig& config);
Protocol gen_rotated(const ProtocolConfig& config);
Protocol gen_order_sensitive(const ProtocolConfig& config);
Protocol gen_diagonal(const ProtocolConfig& config);
Protocol gen_negation(const ProtocolConfig& config);
Protocol gen_context_sensitive(const ProtocolConfig& config);

/// Dispatches on config.family.
Protocol generate(const ProtocolConfig& config);
/// Default options for `family` over `space`.
Protocol generate(Family family, const ConceptSpace& space, std::uint64_t seed);

/// Concept space a family needs, adjusted from the requested sizes:
/// negation forces two shapes, context-sensitive adds contexts, and the
/// arithmetic families use a square n_colours x n_colours grid.
/// `note` receives a human-readable description of any adjustment.
ConceptSpace space_for_family(Family family, std::size_t n_colours, std::size_t n_shapes,
                              std::string* note = nullptr);

/// Two-column plain-text rendering: derivation, then space-separated message symbols.
std::string render_table(const Protocol& protocol);

}  // namespace ntc
