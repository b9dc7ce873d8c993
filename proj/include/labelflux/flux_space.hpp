#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "labelflux/network.hpp"

namespace labelflux {

/// Affine flux constraints A v = w. The first `balance_rows` rows are the
/// stoichiometric balances of the intermediates (inflow - outflow = 0).
struct ConstraintSet {
    Eigen::MatrixXd A;
    Eigen::VectorXd w;
    std::vector<std::string> row_labels;
    std::size_t balance_rows = 0;

    [[nodiscard]] std::size_t flux_count() const { return static_cast<std::size_t>(A.cols()); }
    void add_row(const Eigen::VectorXd& coefficients, double rhs, std::string label);
};

/// One balance row per intermediate species, in document order.
ConstraintSet balance_constraints(const NetworkDocument& doc);

enum class Infeasibility { none, outside_range, empty_polytope };

struct Admissibility {
    bool feasible = false;
    Infeasibility reason = Infeasibility::none;
    Eigen::VectorXd witness;  // v >= 0 with Av = w when feasible
    std::string message;
};

/// Decides whether {Av = w, v >= 0} is nonempty: a least-squares range test
/// followed by a phase-one linear program.
Admissibility check_admissible(const Eigen::MatrixXd& A, const Eigen::VectorXd& w);

/// A point of {Av = w, v >= 0} maximizing min_i v_i over `indices`, with that
/// minimum capped at `cap`; nullopt if the polytope is empty.
std::optional<Eigen::VectorXd> centered_flux(const Eigen::MatrixXd& A, const Eigen::VectorXd& w,
                                             const std::vector<std::size_t>& indices, double cap = 1.0);

enum class ParamKind { freeflux, orthonormal };

std::string_view to_string(ParamKind kind);

/// v = V q + v0 over the solution set of A v = w.
struct Parametrization {
    ParamKind kind = ParamKind::freeflux;
    Eigen::MatrixXd V;
    Eigen::VectorXd v0;
    std::size_t rank = 0;
    std::vector<std::size_t> free_idx;  // freeflux: q_i is flux free_idx[i]
    std::vector<std::size_t> dep_idx;   // freeflux: the pivot (dependent) fluxes
    std::vector<std::size_t> varying;   // fluxes with a nonzero row of V
    std::vector<std::size_t> blocked;   // fluxes fixed at v0

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(V.cols()); }
    [[nodiscard]] Eigen::VectorXd flux(const Eigen::VectorXd& q) const { return V * q + v0; }
    /// q with V q + v0 closest to v (exact when v satisfies the constraints).
    [[nodiscard]] Eigen::VectorXd coordinates(const Eigen::VectorXd& v) const;
};

/// Throws Error when w is outside the range of A.
Parametrization parametrize(const Eigen::MatrixXd& A, const Eigen::VectorXd& w, ParamKind kind);

struct CompactMap {
    double beta = 1.0;
    double delta = 1e-6;
};

/// r = q / (beta + q); q >= 0.
Eigen::VectorXd compactify(const Eigen::VectorXd& q, const CompactMap& map);
/// q = beta r / (1 - r); 0 <= r < 1.
Eigen::VectorXd decompactify(const Eigen::VectorXd& r, const CompactMap& map);
/// Diagonal of dq/dr: beta / (1 - r)^2.
Eigen::VectorXd compact_jacobian(const Eigen::VectorXd& r, const CompactMap& map);

/// V' grad_v, further multiplied by dq/dr when r is given.
Eigen::VectorXd chain_gradient(const Parametrization& param, const Eigen::VectorXd& grad_v,
                               const std::optional<Eigen::VectorXd>& r = std::nullopt, const CompactMap& map = {});

}  // namespace labelflux
