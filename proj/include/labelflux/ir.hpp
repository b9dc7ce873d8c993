#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "labelflux/cascade.hpp"

namespace labelflux {

/// Line-oriented text form of a ContributionProgram:
///
///   HEADER weights=<n> fluxes=<m>
///   DIM <k> <n_k> <n_k_input>
///   M <k> <row> <col> <+|-> v<j>[+v<j>...]
///   B <k> <row> <+|-> v<j> <factor>*
///   DFDV <k> <row> <j> <+|-> <factor>*
///   DBDX <k> <l> <row> <col> <+|-> v<j> <factor>*
///
/// with factor ::= x<l>:<pos> | xin<l>:<pos>, all indices 1-based. Lines
/// starting with '#' are comments. `flux_names`, when given, are written as
/// comments after the header.
std::string emit_ir(const ContributionProgram& program, const std::vector<std::string>& flux_names = {});

/// Throws ParseError (with line number) on malformed text.
ContributionProgram parse_ir(std::string_view text);

std::vector<AssembledWeight> eval_ir(std::string_view text, const Eigen::VectorXd& v, const CumomerState& x,
                                     const CumomerState& x_input);

}  // namespace labelflux
