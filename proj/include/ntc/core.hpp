#pragma once

// Domain types shared by every part of the toolkit: concepts, derivation
// trees, alphabets, messages and the protocol table mapping one to the other.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ntc {

enum class Category { colour, shape, context };

std::string_view category_name(Category category);

struct Concept {
    Category category = Category::colour;
    std::size_t index = 0;
    std::string label;

    // Identity is (category, index); labels are presentation only.
    friend bool operator==(const Concept& a, const Concept& b) {
        return a.category == b.category && a.index == b.index;
    }
};

/// The primitive derivations of a game: colours, shapes and, for the
/// context-sensitive game, the three context tags {colour, shape, both}.
///
/// Every concept also has a dense global id used by the embedding tables:
/// colours first, then shapes, then contexts.
class ConceptSpace {
public:
    ConceptSpace() = default;

    const std::vector<Concept>& colours() const { return colours_; }
    const std::vector<Concept>& shapes() const { return shapes_; }
    const std::vector<Concept>& contexts() const { return contexts_; }
    bool has_contexts() const { return !contexts_.empty(); }

    std::size_t n_colours() const { return colours_.size(); }
    std::size_t n_shapes() const { return shapes_.size(); }
    std::size_t size() const { return colours_.size() + shapes_.size() + contexts_.size(); }
    std::size_t category_size(Category category) const;

    std::size_t global_id(const Concept& c) const;
    const Concept& by_global_id(std::size_t id) const;

    friend ConceptSpace build_concept_space(std::size_t n_colours, std::size_t n_shapes,
                                            bool with_contexts);

private:
    std::vector<Concept> colours_;
    std::vector<Concept> shapes_;
    std::vector<Concept> contexts_;
};

/// Labels "c0".."c{n-1}" and "s0".."s{n-1}"; contexts are {colour, shape, both}.
/// Throws std::invalid_argument on zero sizes.
ConceptSpace build_concept_space(std::size_t n_colours, std::size_t n_shapes, bool with_contexts);

enum class DerivationShape { standard, context_sensitive };

/// Immutable binary tree of concepts. Children are shared, so copies are cheap.
class Derivation {
public:
    static Derivation leaf(Concept c);
    static Derivation node(Derivation left, Derivation right);

    bool is_leaf() const { return concept_.has_value(); }
    const Concept& leaf_concept() const;
    const Derivation& left() const;
    const Derivation& right() const;
    std::size_t depth() const;

    friend bool operator==(const Derivation& a, const Derivation& b);

private:
    Derivation() = default;

    std::optional<Concept> concept_;
    std::shared_ptr<const Derivation> left_;
    std::shared_ptr<const Derivation> right_;
};

/// All derivations of the given shape, colour-major. The context-sensitive
/// enumeration is context-major, then colour, then shape.
std::vector<Derivation> enumerate_derivations(const ConceptSpace& space, DerivationShape shape);

/// Leaves left to right: (colour, shape) or (context, colour, shape).
/// Throws std::invalid_argument for a bare leaf or any other tree shape.
std::vector<Concept> flatten(const Derivation& d);

/// Shape of a legal derivation; throws std::invalid_argument otherwise.
DerivationShape shape_of(const Derivation& d);

struct Symbol {
    std::size_t index = 0;
    std::string label;
};

inline constexpr std::string_view kPadLabel = "<pad>";

/// a..z for the first 26 indices, then "a1".."z1", "a2", ...
std::string symbol_label(std::size_t index);

/// n symbols with generated labels, skipping any label listed in `reserved`.
std::vector<Symbol> make_alphabet(std::size_t n, std::span<const std::string_view> reserved = {});

/// Symbols are stored by index into the protocol alphabet.
using Message = std::vector<std::size_t>;

/// A total table from an enumerated derivation set to messages.
///
/// The constructor checks every invariant (totality over the enumeration,
/// alphabet closure, non-empty messages) and throws std::invalid_argument on
/// violation. Flattened concept tuples are cached per entry, by index within
/// each slot's category.
class Protocol {
public:
    Protocol(std::string name, ConceptSpace space, DerivationShape shape,
             std::vector<Symbol> alphabet, std::vector<Message> messages);

    const std::string& name() const { return name_; }
    const ConceptSpace& space() const { return space_; }
    DerivationShape shape() const { return shape_; }
    const std::vector<Symbol>& alphabet() const { return alphabet_; }
    const std::vector<Derivation>& derivations() const { return derivations_; }
    const std::vector<Message>& messages() const { return messages_; }

    std::size_t size() const { return messages_.size(); }
    std::size_t max_len() const { return max_len_; }
    bool fixed_length() const { return fixed_length_; }

    /// Number of concept slots in each flattened derivation: 2 or 3.
    std::size_t n_slots() const { return slot_categories_.size(); }
    const std::vector<Category>& slot_categories() const { return slot_categories_; }
    /// Per-entry concept index within each slot's category.
    const std::vector<std::size_t>& tuple(std::size_t entry) const { return tuples_[entry]; }
    /// Per-entry global concept ids (see ConceptSpace::global_id).
    const std::vector<std::size_t>& concept_ids(std::size_t entry) const { return concept_ids_[entry]; }

    /// Same protocol with every symbol index remapped through `permutation`.
    Protocol relabelled(std::span<const std::size_t> permutation) const;
    /// Same table with entries reordered; entry i of the result is entry order[i].
    Protocol reordered(std::span<const std::size_t> order) const;

private:
    Protocol(std::string name, ConceptSpace space, DerivationShape shape,
             std::vector<Symbol> alphabet, std::vector<Derivation> derivations,
             std::vector<Message> messages);
    void validate_and_index();

    std::string name_;
    ConceptSpace space_;
    DerivationShape shape_;
    std::vector<Symbol> alphabet_;
    std::vector<Derivation> derivations_;
    std::vector<Message> messages_;
    std::size_t max_len_ = 0;
    bool fixed_length_ = true;
    std::vector<Category> slot_categories_;
    std::vector<std::vector<std::size_t>> tuples_;
    std::vector<std::vector<std::size_t>> concept_ids_;
};

nlohmann::ordered_json to_json(const ConceptSpace& space);
nlohmann::ordered_json to_json(const Protocol& protocol);

}  // namespace ntc
