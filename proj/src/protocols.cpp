#include "ntc/protocols.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ntc {

namespace {

struct FamilyEntry {
    Family family;
    std::string_view name;
};

constexpr FamilyEntry kFamilyNames[] = {
    {Family::tc, "tc"},
    {Family::holistic, "holistic"},
    {Family::random, "random"},
    {Family::entangled, "entangled"},
    {Family::rotated, "rotated"},
    {Family::order_sensitive, "order_sensitive"},
    {Family::context_sensitive, "context_sensitive"},
    {Family::negation, "negation"},
    {Family::diagonal, "diagonal"},
};

// FNV-1a; std::hash is not stable across implementations.
std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng, bool identity) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    if (!identity) std::shuffle(p.begin(), p.end(), rng);
    return p;
}

void require_square(const ConceptSpace& space, std::string_view family) {
    if (space.n_colours() != space.n_shapes()) {
        throw std::invalid_argument(std::string(family) +
                                    " protocol needs as many colours as shapes");
    }
}

template <typename Fn>
std::vector<Message> per_pair(const ConceptSpace& space, Fn&& fn) {
    std::vector<Message> out;
    out.reserve(space.n_colours() * space.n_shapes());
    for (std::size_t c = 0; c < space.n_colours(); ++c) {
        for (std::size_t s = 0; s < space.n_shapes(); ++s) out.push_back(fn(c, s));
    }
    return out;
}

}  // namespace

std::string_view family_name(Family family) {
    for (const auto& e : kFamilyNames) {
        if (e.family == family) return e.name;
    }
    return "?";
}

std::optional<Family> parse_family(std::string_view name) {
    for (const auto& e : kFamilyNames) {
        if (e.name == name) return e.family;
    }
    return std::nullopt;
}

bool is_ntc(Family family) {
    switch (family) {
    case Family::entangled:
    case Family::rotated:
    case Family::order_sensitive:
    case Family::context_sensitive:
    case Family::negation:
    case Family::diagonal:
        return true;
    default:
        return false;
    }
}

std::mt19937_64 protocol_rng(std::uint64_t seed, std::string_view name) {
    const std::uint64_t key = stable_hash(name);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    return std::mt19937_64(seq);
}

Protocol gen_tc(const ProtocolConfig& config) {
    const auto& space = config.space;
    const std::size_t nc = space.n_colours();
    auto rng = protocol_rng(config.seed, "tc");
    // symbol_of[global concept id]
    const auto symbol_of = permutation(nc + space.n_shapes(), rng, config.identity_bijections);
    auto messages = per_pair(space, [&](std::size_t c, std::size_t s) {
        return Message{symbol_of[c], symbol_of[nc + s]};
    });
    return Protocol("tc", space, DerivationShape::standard, make_alphabet(symbol_of.size()),
                    std::move(messages));
}

Protocol gen_holistic(const ProtocolConfig& config) {
    const auto& space = config.space;
    const std::size_t n_symbols =
        config.alphabet_size.value_or(std::max(space.n_colours(), space.n_shapes()));
    const std::size_t n_derivations = space.n_colours() * space.n_shapes();
    if (n_symbols * n_symbols < n_derivations) {
        throw std::invalid_argument("holistic protocol: alphabet of " + std::to_string(n_symbols) +
                                    " symbols cannot give " + std::to_string(n_derivations) +
                                    " distinct two-symbol messages");
    }
    auto rng = protocol_rng(config.seed, "holistic");
    std::vector<std::size_t> pairs(n_symbols * n_symbols);
    std::iota(pairs.begin(), pairs.end(), 0);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    std::size_t next = 0;
    auto messages = per_pair(space, [&](std::size_t, std::size_t) {
        const auto p = pairs[next++];
        return Message{p / n_symbols, p % n_symbols};
    });
    return Protocol("holistic", space, DerivationShape::standard, make_alphabet(n_symbols),
                    std::move(messages));
}

Protocol gen_random(const ProtocolConfig& config) {
    const auto& space = config.space;
    const std::size_t n_symbols =
        config.alphabet_size.value_or(std::max(space.n_colours(), space.n_shapes()));
    if (n_symbols == 0) throw std::invalid_argument("random protocol needs a non-empty alphabet");
    auto rng = protocol_rng(config.seed, "random");
    std::uniform_int_distribution<std::size_t> draw(0, n_symbols - 1);
    auto messages = per_pair(space, [&](std::size_t, std::size_t) {
        const auto first = draw(rng);
        return Message{first, draw(rng)};
    });
    return Protocol("random", space, DerivationShape::standard, make_alphabet(n_symbols),
                    std::move(messages));
}

Protocol gen_entangled(const ProtocolConfig& config) {
    const auto& space = config.space;
    require_square(space, "entangled");
    const std::size_t n = space.n_colours();
    auto messages = per_pair(space, [&](std::size_t c, std::size_t s) {
        return Message{(c + n - s) % n, (c + s) % n};
    });
    return Protocol("entangled", space, DerivationShape::standard, make_alphabet(n),
                    std::move(messages));
}

Protocol gen_rotated(const ProtocolConfig& config) {
    const auto& space = config.space;
    require_square(space, "rotated");
    const std::size_t n = space.n_colours();
    // s1 = c - s + n lies in [1, 2n-1]; s2 = c + s lies in [0, 2n-2].
    auto messages = per_pair(space, [&](std::size_t c, std::size_t s) {
        return Message{c + n - s, c + s};
    });
    return Protocol("rotated", space, DerivationShape::standard, make_alphabet(2 * n),
                    std::move(messages));
}

Protocol gen_order_sensitive(const ProtocolConfig& config) {
    const auto& space = config.space;
    require_square(space, "order_sensitive");
    const std::size_t n = space.n_colours();
    auto rng = protocol_rng(config.seed, "order_sensitive");
    const auto first = permutation(n, rng, config.identity_bijections);
    const auto second = permutation(n, rng, config.identity_bijections);
    auto messages = per_pair(space, [&](std::size_t c, std::size_t s) {
        return Message{first[c], second[s]};
    });
    return Protocol("order_sensitive", space, DerivationShape::standard, make_alphabet(n),
                    std::move(messages));
}

Protocol gen_diagonal(const ProtocolConfig& config) {
    const auto& space = config.space;
    // Concept indices run over {0..n1} and {0..n2}.
    const std::size_t n1 = space.n_colours() - 1;
    const std::size_t n2 = space.n_shapes() - 1;
    auto messages = per_pair(space, [&](std::size_t d1, std::size_t d2) {
        const std::size_t s1 = d1 + d2;
        const std::size_t s2 = s1 <= n1 ? d2 : n1 - d1;
        return Message{s1, s2};
    });
    return Protocol("diagonal", space, DerivationShape::standard, make_alphabet(n1 + n2 + 1),
                    std::move(messages));
}

Protocol gen_negation(const ProtocolConfig& config) {
    const auto& space = config.space;
    if (space.n_shapes() != 2) {
        throw std::invalid_argument("negation protocol needs exactly two shapes (box, circle)");
    }
    const std::size_t nc = space.n_colours();
    constexpr std::string_view reserved[] = {"x", "!"};
    auto alphabet = make_alphabet(nc, reserved);
    const std::size_t box_symbol = nc;
    const std::size_t not_symbol = nc + 1;
    alphabet.push_back({box_symbol, "x"});
    alphabet.push_back({not_symbol, "!"});

    auto rng = protocol_rng(config.seed, "negation");
    const auto colour_symbol = permutation(nc, rng, config.identity_bijections);
    // Shape 0 is the box, shape 1 the circle ("not box").
    auto messages = per_pair(space, [&](std::size_t c, std::size_t s) {
        if (s == 0) return Message{colour_symbol[c], box_symbol};
        return Message{colour_symbol[c], not_symbol, box_symbol};
    });
    return Protocol("negation", space, DerivationShape::standard, std::move(alphabet),
                    std::move(messages));
}

Protocol gen_context_sensitive(const ProtocolConfig& config) {
    const auto& space = config.space;
    if (!space.has_contexts()) {
        throw std::invalid_argument("context-sensitive protocol needs a space with contexts");
    }
    const std::size_t nc = space.n_colours();
    const std::size_t ns = space.n_shapes();
    auto rng = protocol_rng(config.seed, "context_sensitive");
    const auto symbol_of = permutation(nc + ns, rng, config.identity_bijections);

    std::vector<Message> messages;
    messages.reserve(3 * nc * ns);
    for (std::size_t ctx = 0; ctx < 3; ++ctx) {
        for (std::size_t c = 0; c < nc; ++c) {
            for (std::size_t s = 0; s < ns; ++s) {
                const auto colour = symbol_of[c];
                const auto shape = symbol_of[nc + s];
                switch (ctx) {
                case 0: messages.push_back({colour}); break;
                case 1: messages.push_back({shape}); break;
                default: messages.push_back({colour, shape}); break;
                }
            }
        }
    }
    return Protocol("context_sensitive", space, DerivationShape::context_sensitive,
                    make_alphabet(nc + ns), std::move(messages));
}

Protocol generate(const ProtocolConfig& config) {
    switch (config.family) {
    case Family::tc: return gen_tc(config);
    case Family::holistic: return gen_holistic(config);
    case Family::random: return gen_random(config);
    case Family::entangled: return gen_entangled(config);
    case Family::rotated: return gen_rotated(config);
    case Family::order_sensitive: return gen_order_sensitive(config);
    case Family::context_sensitive: return gen_context_sensitive(config);
    case Family::negation: return gen_negation(config);
    case Family::diagonal: return gen_diagonal(config);
    }
    throw std::invalid_argument("unknown protocol family");
}

ConceptSpace space_for_family(Family family, std::size_t n_colours, std::size_t n_shapes,
                              std::string* note) {
    std::ostringstream msg;
    std::size_t shapes = n_shapes;
    bool contexts = false;
    switch (family) {
    case Family::negation:
        shapes = 2;
        break;
    case Family::context_sensitive:
        contexts = true;
        break;
    case Family::entangled:
    case Family::rotated:
    case Family::order_sensitive:
        shapes = n_colours;
        break;
    default:
        break;
    }
    if (shapes != n_shapes) {
        msg << family_name(family) << ": using " << n_colours << " colours x " << shapes
            << " shapes (requested " << n_shapes << " shapes)";
    }
    if (contexts) {
        msg << family_name(family) << ": added contexts {colour, shape, both}";
    }
    if (note) *note = msg.str();
    return build_concept_space(n_colours, shapes, contexts);
}

Protocol generate(Family family, const ConceptSpace& space, std::uint64_t seed) {
    ProtocolConfig config;
    config.space = space;
    config.seed = seed;
    config.family = family;
    return generate(config);
}

std::string render_table(const Protocol& protocol) {
    std::ostringstream out;
    std::vector<std::string> left;
    std::size_t width = std::string_view("derivation").size();
    for (const auto& d : protocol.derivations()) {
        std::string text = "(";
        const auto concepts = flatten(d);
        if (concepts.size() == 3) {
            text += concepts[0].label + ",(" + concepts[1].label + "," + concepts[2].label + "))";
        } else {
            text += concepts[0].label + "," + concepts[1].label + ")";
        }
        width = std::max(width, text.size());
        left.push_back(std::move(text));
    }
    auto pad = [&](const std::string& s) { return s + std::string(width - s.size() + 2, ' '); };
    out << pad("derivation") << protocol.name() << '\n';
    for (std::size_t i = 0; i < protocol.size(); ++i) {
        std::string msg;
        for (auto s : protocol.messages()[i]) {
            if (!msg.empty()) msg += ' ';
            msg += protocol.alphabet()[s].label;
        }
        out << pad(left[i]) << msg << '\n';
    }
    return out.str();
}

}  // namespace ntc
