#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "labelflux/network.hpp"

namespace labelflux {

/// Bit (position - 1) set means carbon `position` carries a 1 in the pattern.
using Mask = std::uint32_t;

/// Per-weight cumomer vectors; element k-1 holds x_k.
using CumomerState = std::vector<Eigen::VectorXd>;

struct CumomerIndex {
    std::size_t species = 0;
    Mask mask = 0;
    int weight = 0;
    std::size_t position = 0;  // 1-based within its weight class

    bool operator==(const CumomerIndex&) const = default;
};

/// Pattern string for a cumomer mask: "x1" for mask 1 on a 2-carbon species.
std::string cumomer_pattern(Mask mask, int carbons);

/// Identifier of the form <species>_<mask>, e.g. "A_3".
std::string cumomer_id(const std::string& species, Mask mask);

struct PatternMasks {
    Mask ones = 0;
    Mask zeros = 0;
};

/// Splits a {0,1,x} pattern into its 1- and 0-position masks. The rightmost
/// character is carbon 1. Throws ParseError on bad characters.
PatternMasks pattern_masks(const std::string& pattern);

class CumomerBasis {
public:
    CumomerBasis() = default;

    [[nodiscard]] int max_weight() const { return max_weight_; }
    [[nodiscard]] std::size_t size(int weight) const { return intermediate_.at(weight - 1).size(); }
    [[nodiscard]] std::size_t input_size(int weight) const { return input_.at(weight - 1).size(); }
    [[nodiscard]] const std::vector<CumomerIndex>& intermediates(int weight) const {
        return intermediate_.at(weight - 1);
    }
    [[nodiscard]] const std::vector<CumomerIndex>& inputs(int weight) const { return input_.at(weight - 1); }
    [[nodiscard]] std::size_t total_size() const;

    /// Locates (species, mask != 0) among intermediate or input cumomers.
    [[nodiscard]] std::optional<CumomerIndex> find(std::size_t species, Mask mask) const;

    /// Zero-filled state vectors with the intermediate / input layout.
    [[nodiscard]] CumomerState zero_state() const;
    [[nodiscard]] CumomerState zero_input_state() const;

    friend CumomerBasis enumerate_cumomers(const NetworkDocument& doc);

private:
    int max_weight_ = 0;
    std::vector<std::vector<CumomerIndex>> intermediate_;
    std::vector<std::vector<CumomerIndex>> input_;
    std::unordered_map<std::uint64_t, CumomerIndex> lookup_;
};

/// Intermediate and input cumomers grouped by weight; species in document
/// order, masks ascending within a species. Output species get none.
CumomerBasis enumerate_cumomers(const NetworkDocument& doc);

/// Isotopomer (or partial isotopomer) fraction of `pattern` from the cumomer
/// values of one species. `by_mask[m]` is the cumomer with mask m and
/// by_mask[0] must be 1. Inclusion-exclusion over the pattern's 0 positions.
double isotopomer_from_cumomers(const std::string& pattern, std::span<const double> by_mask);

/// Cumomer values (indexed by mask, entry 0 = total) of a species from an
/// isotopomer distribution indexed by isotopomer bit pattern.
std::vector<double> cumomers_from_isotopomers(std::span<const double> isotopomers);

struct ObservationRow {
    std::string species;
    std::string pattern;
};

struct ObservationSpec {
    std::vector<ObservationRow> rows;
    std::vector<double> sigma;
};

/// y = offset + sum_k C[k-1] * x_k.
struct ObservationMatrices {
    std::vector<Eigen::SparseMatrix<double>> C;
    Eigen::VectorXd offset;

    [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(offset.size()); }
    [[nodiscard]] Eigen::VectorXd observe(const CumomerState& x) const;
};

/// Throws Error for unknown species, input species and bad patterns.
ObservationMatrices build_observation_matrices(const ObservationSpec& spec, const NetworkDocument& doc,
                                               const CumomerBasis& basis);

/// Cumomer values of every input species from LABEL_INPUT-style fractions.
/// `fractions[s]` lists (isotopomer pattern, fraction) for species s;
/// the remaining mass goes to the unlabeled isotopomer.
CumomerState input_cumomers(const NetworkDocument& doc, const CumomerBasis& basis,
                            const std::vector<std::vector<LabelFraction>>& fractions);

/// Isotopomer distribution (indexed by bit pattern) for one species.
std::vector<double> isotopomer_distribution(int carbons, const std::vector<LabelFraction>& fractions,
                                            const std::string& species);

}  // namespace labelflux
