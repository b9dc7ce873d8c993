#pragma once

#include "labelflux/cascade.hpp"
#include "labelflux/cumomer.hpp"
#include "labelflux/network.hpp"

namespace labelflux {

/// A network together with its cumomer layout and compiled cascade.
struct CompiledNetwork {
    NetworkDocument doc;
    CumomerBasis basis;
    ContributionProgram program;

    [[nodiscard]] std::size_t flux_count() const { return program.flux_count; }
    [[nodiscard]] int max_weight() const { return program.max_weight(); }
    /// Species owning row `position` (0-based) of weight k.
    [[nodiscard]] const SpeciesDef& species_of(int k, std::size_t position) const {
        return doc.species[basis.intermediates(k).at(position).species];
    }
};

inline CompiledNetwork compile_network(NetworkDocument doc) {
    CumomerBasis basis = enumerate_cumomers(doc);
    ContributionProgram program = build_program(doc, basis);
    return {std::move(doc), std::move(basis), std::move(program)};
}

}  // namespace labelflux
