#include "labelflux/cumomer.hpp"

#include <bit>

#include "labelflux/error.hpp"

namespace labelflux {

namespace {

std::uint64_t key(std::size_t species, Mask mask) {
    return (static_cast<std::uint64_t>(species) << 32) | mask;
}

}  // namespace

std::string cumomer_pattern(Mask mask, int carbons) {
    std::string p(static_cast<std::size_t>(carbons), 'x');
    for (int pos = 1; pos <= carbons; ++pos) {
        if (mask & (Mask{1} << (pos - 1))) p[static_cast<std::size_t>(carbons - pos)] = '1';
    }
    return p;
}

std::string cumomer_id(const std::string& species, Mask mask) { return species + "_" + std::to_string(mask); }

PatternMasks pattern_masks(const std::string& pattern) {
    PatternMasks m;
    const std::size_t n = pattern.size();
    if (n > 30) throw ParseError("pattern '" + pattern + "' is longer than 30 carbons");
    for (std::size_t i = 0; i < n; ++i) {
        Mask bit = Mask{1} << (n - 1 - i);
        switch (pattern[i]) {
            case '1': m.ones |= bit; break;
            case '0': m.zeros |= bit; break;
            case 'x': break;
            default: throw ParseError("invalid character in pattern '" + pattern + "'");
        }
    }
    return m;
}

std::size_t CumomerBasis::total_size() const {
    std::size_t n = 0;
    for (const auto& w : intermediate_) n += w.size();
    return n;
}

std::optional<CumomerIndex> CumomerBasis::find(std::size_t species, Mask mask) const {
    auto it = lookup_.find(key(species, mask));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

CumomerState CumomerBasis::zero_state() const {
    CumomerState x;
    for (const auto& w : intermediate_) x.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w.size())));
    return x;
}

CumomerState CumomerBasis::zero_input_state() const {
    CumomerState x;
    for (const auto& w : input_) x.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w.size())));
    return x;
}

CumomerBasis enumerate_cumomers(const NetworkDocument& doc) {
    CumomerBasis basis;
    for (const auto& s : doc.species) basis.max_weight_ = std::max(basis.max_weight_, s.carbon_count);
    const auto n = static_cast<std::size_t>(basis.max_weight_);
    basis.intermediate_.assign(n, {});
    basis.input_.assign(n, {});
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        const SpeciesDef& sp = doc.species[s];
        if (sp.kind == SpeciesKind::output) continue;
        auto& classes = sp.kind == SpeciesKind::input ? basis.input_ : basis.intermediate_;
        const Mask top = Mask{1} << sp.carbon_count;
        for (Mask m = 1; m < top; ++m) {
            int w = std::popcount(m);
            auto& cls = classes[static_cast<std::size_t>(w - 1)];
            CumomerIndex idx{s, m, w, cls.size() + 1};
            cls.push_back(idx);
            basis.lookup_.emplace(key(s, m), idx);
        }
    }
    return basis;
}

double isotopomer_from_cumomers(const std::string& pattern, std::span<const double> by_mask) {
    const std::size_t expected = std::size_t{1} << pattern.size();
    if (by_mask.size() != expected) {
        throw DimensionError("pattern '" + pattern + "' needs " + std::to_string(expected) + " cumomer values, got " +
                             std::to_string(by_mask.size()));
    }
    const PatternMasks pm = pattern_masks(pattern);
    double value = 0.0;
    // Walk all subsets of the zero positions, largest first, ending with 0.
    for (Mask sub = pm.zeros;; sub = (sub - 1) & pm.zeros) {
        const double sign = (std::popcount(sub) % 2 == 0) ? 1.0 : -1.0;
        value += sign * by_mask[pm.ones | sub];
        if (sub == 0) break;
    }
    return value;
}

std::vector<double> cumomers_from_isotopomers(std::span<const double> isotopomers) {
    const std::size_t n = isotopomers.size();
    std::vector<double> cum(n, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t iso = 0; iso < n; ++iso) {
            if ((iso & m) == m) cum[m] += isotopomers[iso];
        }
    }
    return cum;
}

Eigen::VectorXd ObservationMatrices::observe(const CumomerState& x) const {
    Eigen::VectorXd y = offset;
    for (std::size_t k = 0; k < C.size(); ++k) {
        if (C[k].cols() > 0) y += C[k] * x.at(k);
    }
    return y;
}

ObservationMatrices build_observation_matrices(const ObservationSpec& spec, const NetworkDocument& doc,
                                               const CumomerBasis& basis) {
    const auto nrows = static_cast<Eigen::Index>(spec.rows.size());
    if (!spec.sigma.empty()) {
        if (spec.sigma.size() != spec.rows.size()) throw DimensionError("one sigma per observation row required");
        for (double s : spec.sigma) {
            if (!(s > 0.0)) throw Error("observation standard deviations must be positive");
        }
    }
    const auto n = static_cast<std::size_t>(basis.max_weight());
    std::vector<std::vector<Eigen::Triplet<double>>> triplets(n);
    ObservationMatrices obs;
    obs.offset = Eigen::VectorXd::Zero(nrows);

    for (std::size_t r = 0; r < spec.rows.size(); ++r) {
        const ObservationRow& row = spec.rows[r];
        auto s = doc.species_index(row.species);
        if (!s) throw Error("observation row " + std::to_string(r + 1) + ": unknown species '" + row.species + "'");
        const SpeciesDef& sp = doc.species[*s];
        if (sp.kind == SpeciesKind::input) {
            throw Error("observation row " + std::to_string(r + 1) + ": pattern references input species '" +
                        sp.id + "'");
        }
        if (sp.kind == SpeciesKind::output) {
            throw Error("observation row " + std::to_string(r + 1) + ": output species '" + sp.id +
                        "' has no cumomer variables");
        }
        if (row.pattern.size() != static_cast<std::size_t>(sp.carbon_count)) {
            throw Error("observation row " + std::to_string(r + 1) + ": pattern length mismatch for species " + sp.id);
        }
        const PatternMasks pm = pattern_masks(row.pattern);
        for (Mask sub = pm.zeros;; sub = (sub - 1) & pm.zeros) {
            const double sign = (std::popcount(sub) % 2 == 0) ? 1.0 : -1.0;
            const Mask m = pm.ones | sub;
            if (m == 0) {
                obs.offset[static_cast<Eigen::Index>(r)] += sign;
            } else {
                auto idx = basis.find(*s, m);
                triplets[static_cast<std::size_t>(idx->weight - 1)].emplace_back(
                    static_cast<int>(r), static_cast<int>(idx->position - 1), sign);
            }
            if (sub == 0) break;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        Eigen::SparseMatrix<double> C(nrows, static_cast<Eigen::Index>(basis.size(static_cast<int>(k + 1))));
        C.setFromTriplets(triplets[k].begin(), triplets[k].end());
        obs.C.push_back(std::move(C));
    }
    return obs;
}

std::vector<double> isotopomer_distribution(int carbons, const std::vector<LabelFraction>& fractions,
                                            const std::string& species) {
    std::vector<double> p(std::size_t{1} << carbons, 0.0);
    double total = 0.0;
    for (const auto& lf : fractions) {
        if (lf.pattern.size() != static_cast<std::size_t>(carbons)) {
            throw Error("species " + species + ": label pattern '" + lf.pattern + "' has wrong length");
        }
        if (!lf.fraction) throw Error("species " + species + ": no fraction given for label pattern '" + lf.pattern + "'");
        const PatternMasks pm = pattern_masks(lf.pattern);
        if ((pm.ones | pm.zeros) != (Mask{1} << carbons) - 1) {
            throw Error("species " + species + ": input label '" + lf.pattern + "' must be a full isotopomer (0/1 only)");
        }
        if (*lf.fraction < 0.0) throw Error("species " + species + ": negative label fraction");
        p[pm.ones] += *lf.fraction;
        total += *lf.fraction;
    }
    if (total > 1.0 + 1e-12) throw Error("species " + species + ": label fractions sum to more than 1");
    p[0] += std::max(0.0, 1.0 - total);
    return p;
}

CumomerState input_cumomers(const NetworkDocument& doc, const CumomerBasis& basis,
                            const std::vector<std::vector<LabelFraction>>& fractions) {
    if (fractions.size() != doc.species.size()) throw DimensionError("one label list per species required");
    CumomerState x = basis.zero_input_state();
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        const SpeciesDef& sp = doc.species[s];
        if (sp.kind != SpeciesKind::input || sp.carbon_count == 0) continue;
        auto cum = cumomers_from_isotopomers(isotopomer_distribution(sp.carbon_count, fractions[s], sp.id));
        for (Mask m = 1; m < cum.size(); ++m) {
            auto idx = basis.find(s, m);
            x[static_cast<std::size_t>(idx->weight - 1)][static_cast<Eigen::Index>(idx->position - 1)] = cum[m];
        }
    }
    return x;
}

}  // namespace labelflux
