#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <memory>
#include <string>
#include <vector>

#include "labelflux/model.hpp"
#include "labelflux/stationary.hpp"

namespace labelflux {

/// Pool sizes per intermediate species carrying carbons; owner[k-1][row] is
/// the pool of the species owning cumomer `row` of weight k.
struct PoolMap {
    std::vector<std::size_t> species;
    std::vector<std::vector<std::size_t>> owner;

    [[nodiscard]] std::size_t size() const { return species.size(); }
    [[nodiscard]] Eigen::VectorXd diagonal(int k, const Eigen::VectorXd& pools) const;
    [[nodiscard]] std::vector<std::string> names(const NetworkDocument& doc) const;
};

PoolMap make_pool_map(const CompiledNetwork& net);

/// Uniform grid t_i = i h, i = 0..N-1, h = T / (N - 1).
struct TimeGrid {
    double T = 1.0;
    int N = 2;

    [[nodiscard]] double h() const { return T / (N - 1); }
    [[nodiscard]] double time(int i) const { return i * h(); }
    /// Grid node of time t; throws Error when t is more than h/100 from a node.
    [[nodiscard]] int node(double t) const;
};

TimeGrid make_grid(double T, int N);

/// Grid nodes of measurement times; throws when two times share a node.
std::vector<int> measurement_nodes(const TimeGrid& grid, const std::vector<double>& times);

struct InstationaryExperiment {
    std::string id;
    CumomerState input;
    CumomerState initial;  // empty: unlabeled start
    ObservationMatrices observation;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> y_meas;  // one vector per time
    Eigen::VectorXd sigma;
    Eigen::VectorXd flux_meas;
    Eigen::VectorXd flux_alpha;
};

/// Counts cascade sweeps and per-column linear solves.
struct SolveCounter {
    std::size_t forward_sweeps = 0;
    std::size_t backward_sweeps = 0;
    std::size_t solves = 0;
};

struct Trajectory {
    TimeGrid grid;
    std::vector<CumomerState> x;  // per node
    CumomerState input;
    std::vector<Eigen::SparseMatrix<double>> M;  // M_k(v)
    std::vector<Eigen::VectorXd> D;              // diagonal of X_k(m)
    /// Factorization of X_k - (h/2) M_k, shared by all steps and reused
    /// transposed by the adjoint sweep.
    std::vector<std::shared_ptr<SparseLUFactor>> step;
};

/// Implicit trapezoidal integration of X_k x_k' = M_k x_k + b_k.
Trajectory integrate(const CompiledNetwork& net, const Eigen::VectorXd& v, const Eigen::VectorXd& pools,
                     const PoolMap& pool_map, const CumomerState& input, const CumomerState& initial,
                     const TimeGrid& grid, SolveCounter* counter = nullptr);

/// 1/2 sum_j |sigma^-1 (y(t_j) - y_meas_j)|^2 on the grid nodes of the measurement times.
double cost_instationary(const Trajectory& traj, const InstationaryExperiment& exp);

struct InstationaryGradient {
    Eigen::VectorXd dv;
    Eigen::VectorXd dm;
};

/// Exact gradient of the discrete cost by one backward adjoint sweep.
InstationaryGradient adjoint_gradient(const CompiledNetwork& net, const Trajectory& traj, const Eigen::VectorXd& v,
                                      const PoolMap& pool_map, const InstationaryExperiment& exp,
                                      SolveCounter* counter = nullptr);

/// dy(T)/dv (rows: observations, columns: fluxes) by a matrix adjoint sweep.
Eigen::MatrixXd output_sensitivity(const CompiledNetwork& net, const Trajectory& traj, const Eigen::VectorXd& v,
                                   const PoolMap& pool_map, const ObservationMatrices& observation,
                                   SolveCounter* counter = nullptr);

/// Same gradient as adjoint_gradient from forward sensitivity recursions
/// (one column per flux and per pool).
InstationaryGradient forward_sensitivity_gradient(const CompiledNetwork& net, const Trajectory& traj,
                                                  const Eigen::VectorXd& v, const PoolMap& pool_map,
                                                  const InstationaryExperiment& exp, SolveCounter* counter = nullptr);

}  // namespace labelflux
