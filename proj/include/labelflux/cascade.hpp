#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <span>
#include <vector>

#include "labelflux/cumomer.hpp"
#include "labelflux/network.hpp"

namespace labelflux {

/// Operand of a product term: an intermediate state entry x_l(pos) or an
/// input entry xin_l(pos). Positions are 0-based here and 1-based in the IR.
struct Factor {
    bool input = false;
    int weight = 1;
    std::size_t position = 0;

    bool operator==(const Factor&) const = default;
};

/// sign * (v_j1 + v_j2 + ...) at (row, col) of M_k.
struct MatrixTerm {
    std::size_t row = 0;
    std::size_t col = 0;
    int sign = 1;
    std::vector<std::size_t> fluxes;

    bool operator==(const MatrixTerm&) const = default;
};

/// sign * v_flux * prod(factors) added to b_k(row).
struct RhsTerm {
    std::size_t row = 0;
    int sign = 1;
    std::size_t flux = 0;
    std::vector<Factor> factors;

    bool operator==(const RhsTerm&) const = default;
};

/// sign * prod(factors) added to (df_k/dv)(row, flux).
struct FluxDerivTerm {
    std::size_t row = 0;
    std::size_t flux = 0;
    int sign = 1;
    std::vector<Factor> factors;

    bool operator==(const FluxDerivTerm&) const = default;
};

/// sign * v_flux * prod(factors) added to (db_k/dx_l)(row, col).
struct StateDerivTerm {
    std::size_t row = 0;
    std::size_t col = 0;
    int sign = 1;
    std::size_t flux = 0;
    std::vector<Factor> factors;

    bool operator==(const StateDerivTerm&) const = default;
};

struct WeightProgram {
    std::size_t size = 0;        // n_k
    std::size_t input_size = 0;  // n_k^input
    std::vector<MatrixTerm> matrix;
    std::vector<RhsTerm> rhs;
    std::vector<FluxDerivTerm> flux_deriv;
    std::vector<std::vector<StateDerivTerm>> state_deriv;  // [l-1] for l < k

    bool operator==(const WeightProgram&) const = default;
};

struct ContributionProgram {
    std::size_t flux_count = 0;
    std::vector<WeightProgram> weights;  // [k-1]

    [[nodiscard]] int max_weight() const { return static_cast<int>(weights.size()); }
    [[nodiscard]] const WeightProgram& weight(int k) const { return weights.at(static_cast<std::size_t>(k - 1)); }

    bool operator==(const ContributionProgram&) const = default;
};

/// Compiles the cascade. Throws NetworkError for zero-outflow intermediates
/// that carry cumomers and for carbon-count inconsistencies.
ContributionProgram build_program(const NetworkDocument& doc, const CumomerBasis& basis);

double factor_product(std::span<const Factor> factors, const CumomerState& x, const CumomerState& x_input);

/// M_k(v).
Eigen::SparseMatrix<double> assemble_matrix(const WeightProgram& wp, const Eigen::VectorXd& v);

/// b_k(v, x_{<k}, x_input).
Eigen::VectorXd assemble_rhs(const WeightProgram& wp, const Eigen::VectorXd& v, const CumomerState& x,
                             const CumomerState& x_input);

/// df_k/dv, n_k x m, at (x_{<=k}, x_input).
Eigen::MatrixXd assemble_flux_jacobian(const WeightProgram& wp, std::size_t flux_count, const CumomerState& x,
                                       const CumomerState& x_input);

/// db_k/dx_l, n_k x n_l.
Eigen::SparseMatrix<double> assemble_state_jacobian(const WeightProgram& wp, int l, std::size_t n_l,
                                                    const Eigen::VectorXd& v, const CumomerState& x,
                                                    const CumomerState& x_input);

/// grad += scale * (df_k/dv)^T p without forming the matrix.
void accumulate_flux_jacobian_transpose(const WeightProgram& wp, const CumomerState& x, const CumomerState& x_input,
                                        const Eigen::VectorXd& p, double scale, Eigen::VectorXd& grad);

/// out += scale * (db_k/dx_l)^T p without forming the matrix.
void accumulate_state_jacobian_transpose(const WeightProgram& wp, int l, const Eigen::VectorXd& v,
                                         const CumomerState& x, const CumomerState& x_input,
                                         const Eigen::VectorXd& p, double scale, Eigen::VectorXd& out);

/// Numeric form of one weight of the program.
struct AssembledWeight {
    Eigen::SparseMatrix<double> M;
    Eigen::VectorXd b;
    Eigen::MatrixXd dfdv;
    std::vector<Eigen::SparseMatrix<double>> dbdx;  // [l-1] for l < k
};

/// Evaluates every weight at the given (v, x, x_input); x supplies all
/// states used by lower-weight factors and by df/dv.
std::vector<AssembledWeight> assemble(const ContributionProgram& program, const Eigen::VectorXd& v,
                                      const CumomerState& x, const CumomerState& x_input);

}  // namespace labelflux
