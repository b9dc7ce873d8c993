#pragma once

#include <string>
#include <string_view>

#include "labelflux/cumomer.hpp"
#include "labelflux/network.hpp"

namespace labelflux {

inline constexpr std::string_view kSmtbNamespace = "http://www.utc.fr/sysmetab";

/// Re-emits the document with smtb markup: carbon mappings on each species
/// reference, per-species cumomer lists, and the global intermediate/input
/// cumomer enumerations. The output parses back to the same document.
std::string annotate_network(const NetworkDocument& doc, const CumomerBasis& basis);

}  // namespace labelflux
