#include "labelflux/cascade.hpp"

#include <bit>

#include "labelflux/error.hpp"

namespace labelflux {

namespace {

const Eigen::VectorXd& operand_vector(const Factor& f, const CumomerState& x, const CumomerState& x_input) {
    return (f.input ? x_input : x).at(static_cast<std::size_t>(f.weight - 1));
}

void check_compilable(const NetworkDocument& doc) {
    ValidationReport report = validate_network(doc);
    if (!report.carbon_mismatch.empty()) {
        throw NetworkError("carbon-count inconsistency: " + report.carbon_mismatch.front());
    }
    for (const auto& id : report.zero_outflow) {
        if (doc.species[*doc.species_index(id)].carbon_count > 0) {
            throw NetworkError("intermediate " + id + " has zero outflow; its cumomer balances would be singular");
        }
    }
}

}  // namespace

ContributionProgram build_program(const NetworkDocument& doc, const CumomerBasis& basis) {
    check_compilable(doc);

    std::vector<DirectedReaction> reactions;
    reactions.reserve(doc.fluxes.size());
    for (std::size_t j = 0; j < doc.fluxes.size(); ++j) reactions.push_back(directed(doc, j));

    ContributionProgram program;
    program.flux_count = doc.fluxes.size();
    const int n = basis.max_weight();
    program.weights.resize(static_cast<std::size_t>(n));

    for (int k = 1; k <= n; ++k) {
        WeightProgram& wp = program.weights[static_cast<std::size_t>(k - 1)];
        wp.size = basis.size(k);
        wp.input_size = basis.input_size(k);

        for (const CumomerIndex& cum : basis.intermediates(k)) {
            const std::size_t row = cum.position - 1;
            const int carbons = doc.species[cum.species].carbon_count;

            // Inflow: pull the mask back through each producing occurrence.
            for (std::size_t j = 0; j < reactions.size(); ++j) {
                const DirectedReaction& d = reactions[j];
                for (std::size_t p = 0; p < d.products.size(); ++p) {
                    if (d.products[p].species != cum.species) continue;
                    std::vector<Mask> pulled(d.reactants.size(), 0);
                    for (int pos = 1; pos <= carbons; ++pos) {
                        if (!(cum.mask & (Mask{1} << (pos - 1)))) continue;
                        const CarbonSource& src = d.atom_map[p][static_cast<std::size_t>(pos - 1)];
                        pulled[src.reactant] |= Mask{1} << (src.position - 1);
                    }
                    std::vector<Factor> factors;
                    for (std::size_t r = 0; r < d.reactants.size(); ++r) {
                        if (pulled[r] == 0) continue;
                        auto idx = basis.find(d.reactants[r].species, pulled[r]);
                        if (!idx) {
                            throw NetworkError("no cumomer for reactant " + doc.species[d.reactants[r].species].id +
                                               " of flux " + doc.fluxes[j].name);
                        }
                        const bool input = doc.species[idx->species].kind == SpeciesKind::input;
                        factors.push_back(Factor{input, idx->weight, idx->position - 1});
                    }
                    if (factors.size() == 1 && !factors[0].input && factors[0].weight == k) {
                        wp.matrix.push_back(MatrixTerm{row, factors[0].position, +1, {j}});
                    } else {
                        wp.rhs.push_back(RhsTerm{row, +1, j, factors});
                    }
                    wp.flux_deriv.push_back(FluxDerivTerm{row, j, +1, factors});
                }
            }

            // Outflow: one diagonal coefficient per consumed occurrence.
            MatrixTerm diagonal{row, row, -1, {}};
            for (std::size_t j = 0; j < reactions.size(); ++j) {
                for (const SpeciesRef& ref : reactions[j].reactants) {
                    if (ref.species != cum.species) continue;
                    diagonal.fluxes.push_back(j);
                    wp.flux_deriv.push_back(FluxDerivTerm{row, j, -1, {Factor{false, k, row}}});
                }
            }
            if (!diagonal.fluxes.empty()) wp.matrix.push_back(std::move(diagonal));
        }

        wp.state_deriv.resize(static_cast<std::size_t>(k - 1));
        for (int l = 1; l < k; ++l) {
            auto& terms = wp.state_deriv[static_cast<std::size_t>(l - 1)];
            for (const RhsTerm& t : wp.rhs) {
                for (std::size_t i = 0; i < t.factors.size(); ++i) {
                    const Factor& f = t.factors[i];
                    if (f.input || f.weight != l) continue;
                    std::vector<Factor> rest;
                    for (std::size_t o = 0; o < t.factors.size(); ++o) {
                        if (o != i) rest.push_back(t.factors[o]);
                    }
                    terms.push_back(StateDerivTerm{t.row, f.position, t.sign, t.flux, std::move(rest)});
                }
            }
        }
    }
    return program;
}

double factor_product(std::span<const Factor> factors, const CumomerState& x, const CumomerState& x_input) {
    double value = 1.0;
    for (const Factor& f : factors) value *= operand_vector(f, x, x_input)[static_cast<Eigen::Index>(f.position)];
    return value;
}

Eigen::SparseMatrix<double> assemble_matrix(const WeightProgram& wp, const Eigen::VectorXd& v) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(wp.matrix.size());
    for (const MatrixTerm& t : wp.matrix) {
        double sum = 0.0;
        for (std::size_t j : t.fluxes) sum += v[static_cast<Eigen::Index>(j)];
        triplets.emplace_back(static_cast<int>(t.row), static_cast<int>(t.col), t.sign * sum);
    }
    const auto n = static_cast<Eigen::Index>(wp.size);
    Eigen::SparseMatrix<double> M(n, n);
    M.setFromTriplets(triplets.begin(), triplets.end());
    return M;
}

Eigen::VectorXd assemble_rhs(const WeightProgram& wp, const Eigen::VectorXd& v, const CumomerState& x,
                             const CumomerState& x_input) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(wp.size));
    for (const RhsTerm& t : wp.rhs) {
        b[static_cast<Eigen::Index>(t.row)] +=
            t.sign * v[static_cast<Eigen::Index>(t.flux)] * factor_product(t.factors, x, x_input);
    }
    return b;
}

Eigen::MatrixXd assemble_flux_jacobian(const WeightProgram& wp, std::size_t flux_count, const CumomerState& x,
                                       const CumomerState& x_input) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(wp.size), static_cast<Eigen::Index>(flux_count));
    for (const FluxDerivTerm& t : wp.flux_deriv) {
        J(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.flux)) +=
            t.sign * factor_product(t.factors, x, x_input);
    }
    return J;
}

Eigen::SparseMatrix<double> assemble_state_jacobian(const WeightProgram& wp, int l, std::size_t n_l,
                                                    const Eigen::VectorXd& v, const CumomerState& x,
                                                    const CumomerState& x_input) {
    const auto& terms = wp.state_deriv.at(static_cast<std::size_t>(l - 1));
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(terms.size());
    for (const StateDerivTerm& t : terms) {
        triplets.emplace_back(static_cast<int>(t.row), static_cast<int>(t.col),
                              t.sign * v[static_cast<Eigen::Index>(t.flux)] * factor_product(t.factors, x, x_input));
    }
    Eigen::SparseMatrix<double> D(static_cast<Eigen::Index>(wp.size), static_cast<Eigen::Index>(n_l));
    D.setFromTriplets(triplets.begin(), triplets.end());
    return D;
}

void accumulate_flux_jacobian_transpose(const WeightProgram& wp, const CumomerState& x, const CumomerState& x_input,
                                        const Eigen::VectorXd& p, double scale, Eigen::VectorXd& grad) {
    for (const FluxDerivTerm& t : wp.flux_deriv) {
        grad[static_cast<Eigen::Index>(t.flux)] +=
            scale * t.sign * p[static_cast<Eigen::Index>(t.row)] * factor_product(t.factors, x, x_input);
    }
}

void accumulate_state_jacobian_transpose(const WeightProgram& wp, int l, const Eigen::VectorXd& v,
                                         const CumomerState& x, const CumomerState& x_input,
                                         const Eigen::VectorXd& p, double scale, Eigen::VectorXd& out) {
    for (const StateDerivTerm& t : wp.state_deriv.at(static_cast<std::size_t>(l - 1))) {
        out[static_cast<Eigen::Index>(t.col)] += scale * t.sign * v[static_cast<Eigen::Index>(t.flux)] *
                                                 p[static_cast<Eigen::Index>(t.row)] *
                                                 factor_product(t.factors, x, x_input);
    }
}

std::vector<AssembledWeight> assemble(const ContributionProgram& program, const Eigen::VectorXd& v,
                                      const CumomerState& x, const CumomerState& x_input) {
    if (static_cast<std::size_t>(v.size()) != program.flux_count) {
        throw DimensionError("flux vector has " + std::to_string(v.size()) + " entries, program expects " +
                             std::to_string(program.flux_count));
    }
    if (x.size() != program.weights.size() || x_input.size() != program.weights.size()) {
        throw DimensionError("state vectors must have one block per weight");
    }
    for (std::size_t k = 0; k < program.weights.size(); ++k) {
        if (static_cast<std::size_t>(x[k].size()) != program.weights[k].size ||
            static_cast<std::size_t>(x_input[k].size()) != program.weights[k].input_size) {
            throw DimensionError("state block of weight " + std::to_string(k + 1) + " has wrong size");
        }
    }
    std::vector<AssembledWeight> out;
    out.reserve(program.weights.size());
    for (std::size_t k = 0; k < program.weights.size(); ++k) {
        const WeightProgram& wp = program.weights[k];
        AssembledWeight a;
        a.M = assemble_matrix(wp, v);
        a.b = assemble_rhs(wp, v, x, x_input);
        a.dfdv = assemble_flux_jacobian(wp, program.flux_count, x, x_input);
        for (std::size_t l = 1; l <= k; ++l) {
            a.dbdx.push_back(assemble_state_jacobian(wp, static_cast<int>(l), program.weights[l - 1].size, v, x, x_input));
        }
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace labelflux
