#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace labelflux::xml {

/// Element node of a parsed XML document. Text content of the element
/// (character data between child elements, entity-decoded) is concatenated
/// into `text`.
struct Element {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Element> children;
    std::string text;

    [[nodiscard]] std::optional<std::string> attribute(std::string_view key) const;

    /// First direct child whose local name (prefix stripped) matches.
    [[nodiscard]] const Element* child(std::string_view local) const;

    /// All direct children whose local name matches.
    [[nodiscard]] std::vector<const Element*> children_named(std::string_view local) const;

    /// Text of this element and all descendants, in document order.
    [[nodiscard]] std::string all_text() const;
};

/// Name without namespace prefix ("smtb:cumomer" -> "cumomer").
std::string_view local_name(std::string_view qualified);

/// Parses a document and returns its root element. Throws ParseError with a
/// line number on malformed input. Missing whitespace between attributes is
/// tolerated (hand-written SBML files contain it).
Element parse(std::string_view text);

/// Escapes &, <, >, " for use in attribute values and text.
std::string escape(std::string_view raw);

}  // namespace labelflux::xml
