#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace labelflux {

enum class SpeciesKind { intermediate, input, output };

std::string_view to_string(SpeciesKind kind);

/// One LABEL_INPUT entry: an isotopomer pattern, optionally with its fraction.
struct LabelFraction {
    std::string pattern;
    std::optional<double> fraction;

    bool operator==(const LabelFraction&) const = default;
};

struct SpeciesDef {
    std::string id;
    std::string compartment;
    int carbon_count = 0;
    SpeciesKind kind = SpeciesKind::intermediate;
    std::vector<LabelFraction> label_input;
    std::vector<std::string> label_measurement;

    bool operator==(const SpeciesDef&) const = default;
};

/// A species occurrence on one side of a reaction. Stoichiometry 2 expands to
/// two references with occurrence 1 and 2.
struct SpeciesRef {
    std::size_t species = 0;
    int occurrence = 1;

    bool operator==(const SpeciesRef&) const = default;
};

/// Where a product carbon comes from: index into reactant_refs and the
/// 1-based carbon position in that reactant.
struct CarbonSource {
    std::size_t reactant = 0;
    int position = 1;

    bool operator==(const CarbonSource&) const = default;
};

struct ReactionDef {
    std::string id;
    std::vector<SpeciesRef> reactant_refs;
    std::vector<SpeciesRef> product_refs;
    /// Carbon letters per reference as written in the notes; the leftmost
    /// letter is the highest carbon position.
    std::vector<std::string> reactant_letters;
    std::vector<std::string> product_letters;
    /// atom_map[p][pos - 1] is the source of carbon `pos` of product_refs[p].
    std::vector<std::vector<CarbonSource>> atom_map;
    bool reversible = false;

    bool operator==(const ReactionDef&) const = default;
};

/// One irreversible flux. Reversible reactions contribute a forward flux
/// followed by a backward flux using the inverse atom map.
struct FluxDef {
    std::string name;
    std::size_t reaction = 0;
    bool backward = false;

    bool operator==(const FluxDef&) const = default;
};

struct NetworkDocument {
    std::string model_id;
    std::vector<SpeciesDef> species;
    std::vector<ReactionDef> reactions;
    std::vector<FluxDef> fluxes;

    [[nodiscard]] std::optional<std::size_t> species_index(std::string_view id) const;
    [[nodiscard]] std::optional<std::size_t> flux_index(std::string_view name) const;
    [[nodiscard]] std::vector<std::string> flux_names() const;

    bool operator==(const NetworkDocument&) const = default;
};

/// A flux seen as a directed reaction: reactant and product occurrences with
/// the atom map oriented from reactants to products.
struct DirectedReaction {
    std::vector<SpeciesRef> reactants;
    std::vector<SpeciesRef> products;
    std::vector<std::vector<CarbonSource>> atom_map;
};

DirectedReaction directed(const NetworkDocument& doc, std::size_t flux);

/// Parses an SBML level 2 document with carbon-mapping and label notes.
/// Throws ParseError on malformed XML, unbalanced atom maps, pattern length
/// mismatches and duplicate ids.
NetworkDocument parse_network(std::string_view xml_text);

NetworkDocument load_network(const std::string& path);

struct ValidationReport {
    std::vector<std::string> dangling;          // species in no reaction
    std::vector<std::string> zero_outflow;      // intermediates never consumed
    std::vector<std::string> carbon_mismatch;   // "reaction: species has N letters, expected M"
    std::vector<std::string> warnings;          // non-fatal remarks

    [[nodiscard]] bool empty() const {
        return dangling.empty() && zero_outflow.empty() && carbon_mismatch.empty() && warnings.empty();
    }
    [[nodiscard]] std::vector<std::string> lines() const;
};

ValidationReport validate_network(const NetworkDocument& doc);

/// Position (1-based, counted from the rightmost character) of each letter.
int letter_position(const std::string& letters, std::size_t index);

}  // namespace labelflux
