#include "ntc/core.hpp"

#include <algorithm>
#include <stdexcept>

namespace ntc {

std::string_view category_name(Category category) {
    switch (category) {
    case Category::colour: return "colour";
    case Category::shape: return "shape";
    case Category::context: return "context";
    }
    return "?";
}

std::size_t ConceptSpace::category_size(Category category) const {
    switch (category) {
    case Category::colour: return colours_.size();
    case Category::shape: return shapes_.size();
    case Category::context: return contexts_.size();
    }
    return 0;
}

std::size_t ConceptSpace::global_id(const Concept& c) const {
    if (c.index >= category_size(c.category)) {
        throw std::invalid_argument("concept index out of range for " +
                                    std::string(category_name(c.category)));
    }
    switch (c.category) {
    case Category::colour: return c.index;
    case Category::shape: return colours_.size() + c.index;
    case Category::context: return colours_.size() + shapes_.size() + c.index;
    }
    return 0;
}

const Concept& ConceptSpace::by_global_id(std::size_t id) const {
    if (id < colours_.size()) return colours_[id];
    id -= colours_.size();
    if (id < shapes_.size()) return shapes_[id];
    id -= shapes_.size();
    if (id < contexts_.size()) return contexts_[id];
    throw std::out_of_range("global concept id out of range");
}

ConceptSpace build_concept_space(std::size_t n_colours, std::size_t n_shapes, bool with_contexts) {
    if (n_colours == 0 || n_shapes == 0) {
        throw std::invalid_argument("concept space needs at least one colour and one shape");
    }
    ConceptSpace space;
    for (std::size_t i = 0; i < n_colours; ++i) {
        space.colours_.push_back({Category::colour, i, "c" + std::to_string(i)});
    }
    for (std::size_t i = 0; i < n_shapes; ++i) {
        space.shapes_.push_back({Category::shape, i, "s" + std::to_string(i)});
    }
    if (with_contexts) {
        const char* names[] = {"colour", "shape", "both"};
        for (std::size_t i = 0; i < 3; ++i) {
            space.contexts_.push_back({Category::context, i, names[i]});
        }
    }
    return space;
}

Derivation Derivation::leaf(Concept c) {
    Derivation d;
    d.concept_ = std::move(c);
    return d;
}

Derivation Derivation::node(Derivation left, Derivation right) {
    Derivation d;
    d.left_ = std::make_shared<const Derivation>(std::move(left));
    d.right_ = std::make_shared<const Derivation>(std::move(right));
    return d;
}

const Concept& Derivation::leaf_concept() const {
    if (!concept_) throw std::logic_error("derivation is not a leaf");
    return *concept_;
}

const Derivation& Derivation::left() const {
    if (!left_) throw std::logic_error("derivation is a leaf");
    return *left_;
}

const Derivation& Derivation::right() const {
    if (!right_) throw std::logic_error("derivation is a leaf");
    return *right_;
}

std::size_t Derivation::depth() const {
    if (is_leaf()) return 0;
    return 1 + std::max(left_->depth(), right_->depth());
}

bool operator==(const Derivation& a, const Derivation& b) {
    if (a.is_leaf() != b.is_leaf()) return false;
    if (a.is_leaf()) return *a.concept_ == *b.concept_;
    return *a.left_ == *b.left_ && *a.right_ == *b.right_;
}

std::vector<Derivation> enumerate_derivations(const ConceptSpace& space, DerivationShape shape) {
    std::vector<Derivation> out;
    if (shape == DerivationShape::standard) {
        out.reserve(space.n_colours() * space.n_shapes());
        for (const auto& colour : space.colours()) {
            for (const auto& s : space.shapes()) {
                out.push_back(Derivation::node(Derivation::leaf(colour), Derivation::leaf(s)));
            }
        }
        return out;
    }
    if (!space.has_contexts()) {
        throw std::invalid_argument("context-sensitive derivations need a space with contexts");
    }
    out.reserve(space.contexts().size() * space.n_colours() * space.n_shapes());
    for (const auto& ctx : space.contexts()) {
        for (const auto& colour : space.colours()) {
            for (const auto& s : space.shapes()) {
                out.push_back(Derivation::node(
                    Derivation::leaf(ctx),
                    Derivation::node(Derivation::leaf(colour), Derivation::leaf(s))));
            }
        }
    }
    return out;
}

namespace {

bool is_leaf_of(const Derivation& d, Category category) {
    return d.is_leaf() && d.leaf_concept().category == category;
}

bool is_standard_pair(const Derivation& d) {
    return !d.is_leaf() && is_leaf_of(d.left(), Category::colour) &&
           is_leaf_of(d.right(), Category::shape);
}

}  // namespace

DerivationShape shape_of(const Derivation& d) {
    if (is_standard_pair(d)) return DerivationShape::standard;
    if (!d.is_leaf() && is_leaf_of(d.left(), Category::context) && is_standard_pair(d.right())) {
        return DerivationShape::context_sensitive;
    }
    throw std::invalid_argument("derivation is neither (colour, shape) nor (context, (colour, shape))");
}

std::vector<Concept> flatten(const Derivation& d) {
    if (shape_of(d) == DerivationShape::standard) {
        return {d.left().leaf_concept(), d.right().leaf_concept()};
    }
    return {d.left().leaf_concept(), d.right().left().leaf_concept(), d.right().right().leaf_concept()};
}

std::string symbol_label(std::size_t index) {
    std::string label(1, static_cast<char>('a' + index % 26));
    if (index >= 26) label += std::to_string(index / 26);
    return label;
}

std::vector<Symbol> make_alphabet(std::size_t n, std::span<const std::string_view> reserved) {
    std::vector<Symbol> out;
    out.reserve(n);
    for (std::size_t raw = 0; out.size() < n; ++raw) {
        auto label = symbol_label(raw);
        if (std::find(reserved.begin(), reserved.end(), label) != reserved.end()) continue;
        out.push_back({out.size(), std::move(label)});
    }
    return out;
}

Protocol::Protocol(std::string name, ConceptSpace space, DerivationShape shape,
                   std::vector<Symbol> alphabet, std::vector<Message> messages)
    : Protocol(std::move(name), space, shape, std::move(alphabet),
               enumerate_derivations(space, shape), std::move(messages)) {}

Protocol::Protocol(std::string name, ConceptSpace space, DerivationShape shape,
                   std::vector<Symbol> alphabet, std::vector<Derivation> derivations,
                   std::vector<Message> messages)
    : name_(std::move(name)),
      space_(std::move(space)),
      shape_(shape),
      alphabet_(std::move(alphabet)),
      derivations_(std::move(derivations)),
      messages_(std::move(messages)) {
    validate_and_index();
}

void Protocol::validate_and_index() {
    if (alphabet_.empty()) throw std::invalid_argument("protocol alphabet is empty");
    for (std::size_t i = 0; i < alphabet_.size(); ++i) {
        if (alphabet_[i].index != i) throw std::invalid_argument("alphabet indices must be dense");
        if (alphabet_[i].label == kPadLabel) throw std::invalid_argument("PAD is not an alphabet symbol");
        for (std::size_t j = 0; j < i; ++j) {
            if (alphabet_[j].label == alphabet_[i].label) {
                throw std::invalid_argument("duplicate symbol label '" + alphabet_[i].label + "'");
            }
        }
    }
    if (derivations_.size() != messages_.size()) {
        throw std::invalid_argument("protocol must assign exactly one message per derivation");
    }

    slot_categories_ = shape_ == DerivationShape::standard
                           ? std::vector<Category>{Category::colour, Category::shape}
                           : std::vector<Category>{Category::context, Category::colour, Category::shape};

    // Totality: the entries must be a permutation of the enumeration.
    const std::size_t expected = shape_ == DerivationShape::standard
                                     ? space_.n_colours() * space_.n_shapes()
                                     : 3 * space_.n_colours() * space_.n_shapes();
    if (shape_ == DerivationShape::context_sensitive && !space_.has_contexts()) {
        throw std::invalid_argument("context-sensitive protocol needs contexts");
    }
    if (derivations_.size() != expected) {
        throw std::invalid_argument("protocol is not total over its derivation set");
    }
    std::vector<bool> seen(expected, false);
    tuples_.clear();
    concept_ids_.clear();
    max_len_ = 0;
    for (std::size_t i = 0; i < derivations_.size(); ++i) {
        if (shape_of(derivations_[i]) != shape_) {
            throw std::invalid_argument("derivation does not match the protocol shape");
        }
        auto concepts = flatten(derivations_[i]);
        std::vector<std::size_t> tuple;
        std::vector<std::size_t> ids;
        std::size_t position = 0;
        for (const auto& c : concepts) {
            const std::size_t n = space_.category_size(c.category);
            if (c.index >= n) throw std::invalid_argument("concept outside the concept space");
            tuple.push_back(c.index);
            ids.push_back(space_.global_id(c));
            position = position * n + c.index;
        }
        if (seen[position]) throw std::invalid_argument("derivation listed twice");
        seen[position] = true;
        tuples_.push_back(std::move(tuple));
        concept_ids_.push_back(std::move(ids));

        const auto& m = messages_[i];
        if (m.empty()) throw std::invalid_argument("messages must be non-empty");
        for (auto s : m) {
            if (s >= alphabet_.size()) throw std::invalid_argument("message symbol outside the alphabet");
        }
        max_len_ = std::max(max_len_, m.size());
    }
    fixed_length_ = std::all_of(messages_.begin(), messages_.end(),
                                [&](const Message& m) { return m.size() == max_len_; });
}

Protocol Protocol::relabelled(std::span<const std::size_t> permutation) const {
    if (permutation.size() != alphabet_.size()) {
        throw std::invalid_argument("relabelling must permute the whole alphabet");
    }
    std::vector<Message> messages = messages_;
    for (auto& m : messages) {
        for (auto& s : m) s = permutation[s];
    }
    return Protocol(name_, space_, shape_, alphabet_, derivations_, std::move(messages));
}

Protocol Protocol::reordered(std::span<const std::size_t> order) const {
    if (order.size() != size()) throw std::invalid_argument("reorder must list every entry");
    std::vector<Derivation> derivations;
    std::vector<Message> messages;
    for (auto i : order) {
        derivations.push_back(derivations_.at(i));
        messages.push_back(messages_.at(i));
    }
    return Protocol(name_, space_, shape_, alphabet_, std::move(derivations), std::move(messages));
}

nlohmann::ordered_json to_json(const ConceptSpace& space) {
    auto labels = [](const std::vector<Concept>& cs) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& c : cs) arr.push_back(c.label);
        return arr;
    };
    nlohmann::ordered_json j;
    j["colours"] = labels(space.colours());
    j["shapes"] = labels(space.shapes());
    if (space.has_contexts()) j["contexts"] = labels(space.contexts());
    return j;
}

nlohmann::ordered_json to_json(const Protocol& protocol) {
    nlohmann::ordered_json j;
    j["name"] = protocol.name();
    auto alphabet = nlohmann::ordered_json::array();
    for (const auto& s : protocol.alphabet()) alphabet.push_back(s.label);
    j["alphabet"] = std::move(alphabet);
    auto entries = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < protocol.size(); ++i) {
        nlohmann::ordered_json entry;
        auto derivation = nlohmann::ordered_json::array();
        for (const auto& c : flatten(protocol.derivations()[i])) derivation.push_back(c.label);
        auto message = nlohmann::ordered_json::array();
        for (auto s : protocol.messages()[i]) message.push_back(protocol.alphabet()[s].label);
        entry["derivation"] = std::move(derivation);
        entry["message"] = std::move(message);
        entries.push_back(std::move(entry));
    }
    j["entries"] = std::move(entries);
    return j;
}

}  // namespace ntc
