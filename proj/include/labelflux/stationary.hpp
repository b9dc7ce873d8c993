#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <memory>
#include <string>
#include <vector>

#include "labelflux/model.hpp"

namespace labelflux {

using SparseLUFactor = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;

/// One labeling experiment at isotopic steady state.
struct Experiment {
    std::string id;
    CumomerState input;               // x_k^input
    ObservationMatrices observation;  // y = offset + sum C_k x_k
    Eigen::VectorXd y_meas;
    Eigen::VectorXd sigma;
    Eigen::VectorXd flux_meas;   // observed E v; empty when not measured
    Eigen::VectorXd flux_alpha;  // per-experiment override of the shared alpha
};

/// Measured flux combinations E v with standard deviations alpha.
struct FluxObservation {
    Eigen::MatrixXd E;
    Eigen::VectorXd alpha;

    [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(E.rows()); }
};

struct StationaryResult {
    CumomerState x;
    /// Factorization of M_k(v), kept for the sensitivity solves.
    std::vector<std::shared_ptr<SparseLUFactor>> lu;
    std::vector<std::string> warnings;
};

/// Solves M_k x_k = -b_k for k = 1..n in order. Throws SingularSystemError
/// naming the weight and the species of the weakest row.
StationaryResult solve_stationary(const CompiledNetwork& net, const Eigen::VectorXd& v, const CumomerState& x_input);

/// dx_k/dv (n_k x m) for every weight, reusing the factorizations in `result`.
std::vector<Eigen::MatrixXd> solve_sensitivities(const CompiledNetwork& net, const Eigen::VectorXd& v,
                                                 const CumomerState& x_input, const StationaryResult& result);

struct CostGradient {
    double J = 0.0;
    Eigen::VectorXd grad;
};

/// J = 1/2 sum_i (|sigma^-1 (y_i - y_meas_i)|^2 + |alpha^-1 (E v - v_obs_i)|^2) + eps/2 |v|^2
/// and its gradient through the flux sensitivities.
CostGradient cost_and_grad(const CompiledNetwork& net, const Eigen::VectorXd& v, const std::vector<Experiment>& experiments,
                           const FluxObservation& flux_obs, double epsilon, bool want_gradient = true);

/// alpha used for one experiment.
const Eigen::VectorXd& flux_weights(const Experiment& e, const FluxObservation& obs);

}  // namespace labelflux
