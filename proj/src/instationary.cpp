#include "labelflux/instationary.hpp"

#include <cmath>
#include <functional>
#include <set>

#include "labelflux/error.hpp"

namespace labelflux {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::VectorXd PoolMap::diagonal(int k, const VectorXd& pools) const {
    const auto& own = owner.at(static_cast<std::size_t>(k - 1));
    VectorXd d(static_cast<Index>(own.size()));
    for (std::size_t r = 0; r < own.size(); ++r) d[Index(r)] = pools[Index(own[r])];
    return d;
}

std::vector<std::string> PoolMap::names(const NetworkDocument& doc) const {
    std::vector<std::string> out;
    for (std::size_t s : species) out.push_back(doc.species[s].id);
    return out;
}

PoolMap make_pool_map(const CompiledNetwork& net) {
    PoolMap pm;
    std::vector<long> pool_of(net.doc.species.size(), -1);
    for (std::size_t s = 0; s < net.doc.species.size(); ++s) {
        const SpeciesDef& sp = net.doc.species[s];
        if (sp.kind == SpeciesKind::intermediate && sp.carbon_count > 0) {
            pool_of[s] = static_cast<long>(pm.species.size());
            pm.species.push_back(s);
        }
    }
    for (int k = 1; k <= net.max_weight(); ++k) {
        std::vector<std::size_t> own;
        for (const CumomerIndex& c : net.basis.intermediates(k)) own.push_back(static_cast<std::size_t>(pool_of[c.species]));
        pm.owner.push_back(std::move(own));
    }
    return pm;
}

int TimeGrid::node(double t) const {
    const double h = this->h();
    const long i = std::lround(t / h);
    if (i < 0 || i >= N || std::abs(t - static_cast<double>(i) * h) > h / 100.0) {
        // Smallest node count above the current one for which t falls on the grid.
        std::string hint;
        if (t > 0 && t <= T) {
            for (int n = N; n < N + 100000; ++n) {
                const double hn = T / (n - 1);
                if (std::abs(t - std::round(t / hn) * hn) <= hn / 100.0) {
                    hint = "; try N = " + std::to_string(n);
                    break;
                }
            }
        }
        throw Error("measurement time " + std::to_string(t) + " is not on the time grid (T = " + std::to_string(T) +
                    ", N = " + std::to_string(N) + ")" + hint);
    }
    return static_cast<int>(i);
}

TimeGrid make_grid(double T, int N) {
    if (!(T > 0.0)) throw Error("final time must be positive");
    if (N < 2) throw Error("time grid needs at least 2 nodes");
    return {T, N};
}

std::vector<int> measurement_nodes(const TimeGrid& grid, const std::vector<double>& times) {
    std::vector<int> nodes;
    std::set<int> seen;
    for (double t : times) {
        const int n = grid.node(t);
        if (!seen.insert(n).second) throw Error("two measurement times fall on grid node " + std::to_string(n));
        nodes.push_back(n);
    }
    return nodes;
}

Trajectory integrate(const CompiledNetwork& net, const VectorXd& v, const VectorXd& pools, const PoolMap& pool_map,
                     const CumomerState& input, const CumomerState& initial, const TimeGrid& grid,
                     SolveCounter* counter) {
    if (static_cast<std::size_t>(v.size()) != net.flux_count()) throw DimensionError("flux vector has the wrong length");
    if (static_cast<std::size_t>(pools.size()) != pool_map.size()) throw DimensionError("pool vector has the wrong length");
    if (pools.size() && !(pools.minCoeff() > 0.0)) throw Error("pool sizes must be positive");
    const int n = net.max_weight();
    const double h = grid.h();

    Trajectory traj;
    traj.grid = grid;
    traj.input = input;
    CumomerState x0 = initial.empty() ? net.basis.zero_state() : initial;
    if (x0.size() != static_cast<std::size_t>(n)) throw DimensionError("initial state has the wrong number of weights");
    for (int k = 1; k <= n; ++k) {
        if (x0[std::size_t(k - 1)].size() != Index(net.basis.size(k))) throw DimensionError("initial state has the wrong size");
        Eigen::SparseMatrix<double> M = assemble_matrix(net.program.weight(k), v);
        VectorXd D = pool_map.diagonal(k, pools);
        Eigen::SparseMatrix<double> S = -0.5 * h * M;
        for (Index r = 0; r < D.size(); ++r) S.coeffRef(r, r) += D[r];
        S.makeCompressed();
        auto lu = std::make_shared<SparseLUFactor>();
        if (S.rows() > 0) {
            lu->compute(S);
            if (lu->info() != Eigen::Success) {
                throw SingularSystemError("weight " + std::to_string(k) + " step matrix is singular for h = " +
                                              std::to_string(h),
                                          k);
            }
        }
        traj.M.push_back(std::move(M));
        traj.D.push_back(std::move(D));
        traj.step.push_back(std::move(lu));
    }

    traj.x.reserve(static_cast<std::size_t>(grid.N));
    traj.x.push_back(std::move(x0));
    for (int i = 0; i + 1 < grid.N; ++i) {
        const CumomerState& cur = traj.x.back();
        CumomerState next = net.basis.zero_state();
        for (int k = 1; k <= n; ++k) {
            const auto kk = std::size_t(k - 1);
            if (next[kk].size() == 0) continue;
            const WeightProgram& wp = net.program.weight(k);
            VectorXd rhs = traj.D[kk].cwiseProduct(cur[kk]) + 0.5 * h * (traj.M[kk] * cur[kk]);
            rhs += 0.5 * h * (assemble_rhs(wp, v, cur, input) + assemble_rhs(wp, v, next, input));
            next[kk] = traj.step[kk]->solve(rhs);
            if (counter) ++counter->solves;
        }
        traj.x.push_back(std::move(next));
    }
    if (counter) ++counter->forward_sweeps;
    return traj;
}

namespace {

const VectorXd& at_time(const InstationaryExperiment& exp, std::size_t j) {
    if (j >= exp.y_meas.size()) throw DimensionError("experiment " + exp.id + ": missing measurement vector");
    return exp.y_meas[j];
}

VectorXd residual(const Trajectory& traj, const InstationaryExperiment& exp, std::size_t j, int node) {
    const VectorXd& y = at_time(exp, j);
    const VectorXd yhat = exp.observation.observe(traj.x[std::size_t(node)]);
    if (y.size() != yhat.size() || exp.sigma.size() != y.size()) {
        throw DimensionError("experiment " + exp.id + ": measurement vector does not match observation rows");
    }
    return yhat - y;
}

// Backward sweep for adjoint states with `cols` columns. `inject(node, k)`
// returns -dI/dx_k at that node (or an empty matrix). Returns dJ/dv and
// dJ/dm with one column per adjoint column.
std::pair<MatrixXd, MatrixXd> backward_sweep(const CompiledNetwork& net, const Trajectory& traj, const VectorXd& v,
                                             const PoolMap& pool_map, Index cols,
                                             const std::function<MatrixXd(int, int)>& inject, SolveCounter* counter) {
    const int n = net.max_weight();
    const int N = traj.grid.N;
    const double h = traj.grid.h();
    const auto m = static_cast<Index>(net.flux_count());
    MatrixXd dv = MatrixXd::Zero(m, cols);
    MatrixXd dm = MatrixXd::Zero(static_cast<Index>(pool_map.size()), cols);

    std::vector<MatrixXd> later(static_cast<std::size_t>(n));  // p^{i+1}
    std::vector<MatrixXd> now(static_cast<std::size_t>(n));    // p^i
    VectorXd col_in, col_out;
    for (int i = N - 2; i >= 0; --i) {
        const int node = i + 1;
        const CumomerState& xn = traj.x[std::size_t(node)];
        const bool final_step = i == N - 2;
        for (int k = n; k >= 1; --k) {
            const auto kk = std::size_t(k - 1);
            const auto nk = static_cast<Index>(net.basis.size(k));
            MatrixXd rhs = MatrixXd::Zero(nk, cols);
            if (nk == 0) {
                now[kk] = rhs;
                continue;
            }
            MatrixXd injected = inject(node, k);
            if (injected.size()) rhs += injected;
            if (!final_step) {
                rhs += traj.D[kk].asDiagonal() * later[kk];
                rhs += 0.5 * h * (traj.M[kk].transpose() * later[kk]);
            }
            for (int l = k + 1; l <= n; ++l) {
                const auto ll = std::size_t(l - 1);
                if (now[ll].rows() == 0) continue;
                const WeightProgram& wl = net.program.weight(l);
                for (Index c = 0; c < cols; ++c) {
                    col_out = VectorXd::Zero(nk);
                    col_in = now[ll].col(c);
                    if (!final_step) col_in += later[ll].col(c);
                    accumulate_state_jacobian_transpose(wl, k, v, xn, traj.input, col_in, 0.5 * h, col_out);
                    rhs.col(c) += col_out;
                }
            }
            now[kk] = traj.step[kk]->transpose().solve(rhs);
            if (counter) counter->solves += static_cast<std::size_t>(cols);
        }
        // Gradient contributions of step i.
        const CumomerState& xi = traj.x[std::size_t(i)];
        for (int k = 1; k <= n; ++k) {
            const auto kk = std::size_t(k - 1);
            if (now[kk].rows() == 0) continue;
            const WeightProgram& wp = net.program.weight(k);
            const VectorXd dx = xn[kk] - xi[kk];
            for (Index c = 0; c < cols; ++c) {
                col_in = now[kk].col(c);
                VectorXd g = dv.col(c);
                accumulate_flux_jacobian_transpose(wp, xn, traj.input, col_in, -0.5 * h, g);
                accumulate_flux_jacobian_transpose(wp, xi, traj.input, col_in, -0.5 * h, g);
                dv.col(c) = g;
                for (Index r = 0; r < dx.size(); ++r) dm(Index(pool_map.owner[kk][std::size_t(r)]), c) += dx[r] * col_in[r];
            }
        }
        std::swap(later, now);
    }
    if (counter) ++counter->backward_sweeps;
    return {dv, dm};
}

}  // namespace

double cost_instationary(const Trajectory& traj, const InstationaryExperiment& exp) {
    const std::vector<int> nodes = measurement_nodes(traj.grid, exp.times);
    double J = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        J += 0.5 * residual(traj, exp, j, nodes[j]).cwiseQuotient(exp.sigma).squaredNorm();
    }
    return J;
}

InstationaryGradient adjoint_gradient(const CompiledNetwork& net, const Trajectory& traj, const VectorXd& v,
                                      const PoolMap& pool_map, const InstationaryExperiment& exp,
                                      SolveCounter* counter) {
    const std::vector<int> nodes = measurement_nodes(traj.grid, exp.times);
    std::vector<long> meas_at(static_cast<std::size_t>(traj.grid.N), -1);
    for (std::size_t j = 0; j < nodes.size(); ++j) meas_at[std::size_t(nodes[j])] = static_cast<long>(j);
    std::vector<VectorXd> weighted(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        weighted[j] = residual(traj, exp, j, nodes[j]).cwiseQuotient(exp.sigma.cwiseAbs2());
    }
    auto inject = [&](int node, int k) -> MatrixXd {
        const long j = meas_at[std::size_t(node)];
        if (j < 0) return {};
        return -(exp.observation.C[std::size_t(k - 1)].transpose() * weighted[std::size_t(j)]);
    };
    auto [dv, dm] = backward_sweep(net, traj, v, pool_map, 1, inject, counter);
    return {dv.col(0), dm.col(0)};
}

MatrixXd output_sensitivity(const CompiledNetwork& net, const Trajectory& traj, const VectorXd& v,
                            const PoolMap& pool_map, const ObservationMatrices& observation, SolveCounter* counter) {
    const auto rows = static_cast<Index>(observation.rows());
    const int last = traj.grid.N - 1;
    auto inject = [&](int node, int k) -> MatrixXd {
        if (node != last) return {};
        return -MatrixXd(observation.C[std::size_t(k - 1)].transpose());
    };
    if (rows == 0) return MatrixXd::Zero(0, static_cast<Index>(net.flux_count()));
    return backward_sweep(net, traj, v, pool_map, rows, inject, counter).first.transpose();
}

InstationaryGradient forward_sensitivity_gradient(const CompiledNetwork& net, const Trajectory& traj,
                                                  const VectorXd& v, const PoolMap& pool_map,
                                                  const InstationaryExperiment& exp, SolveCounter* counter) {
    const int n = net.max_weight();
    const double h = traj.grid.h();
    const auto m = static_cast<Index>(net.flux_count());
    const auto np = static_cast<Index>(pool_map.size());
    const Index cols = m + np;
    const std::vector<int> nodes = measurement_nodes(traj.grid, exp.times);
    std::vector<long> meas_at(static_cast<std::size_t>(traj.grid.N), -1);
    for (std::size_t j = 0; j < nodes.size(); ++j) meas_at[std::size_t(nodes[j])] = static_cast<long>(j);

    VectorXd grad = VectorXd::Zero(cols);
    auto observe_gradient = [&](int node, const std::vector<MatrixXd>& S) {
        const long j = meas_at[std::size_t(node)];
        if (j < 0) return;
        const VectorXd w = residual(traj, exp, std::size_t(j), node).cwiseQuotient(exp.sigma.cwiseAbs2());
        for (int k = 1; k <= n; ++k) {
            const auto kk = std::size_t(k - 1);
            if (S[kk].rows()) grad += S[kk].transpose() * (exp.observation.C[kk].transpose() * w);
        }
    };

    std::vector<MatrixXd> S(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) S[std::size_t(k - 1)] = MatrixXd::Zero(Index(net.basis.size(k)), cols);
    observe_gradient(0, S);
    for (int i = 0; i + 1 < traj.grid.N; ++i) {
        const CumomerState& xi = traj.x[std::size_t(i)];
        const CumomerState& xn = traj.x[std::size_t(i + 1)];
        std::vector<MatrixXd> next(static_cast<std::size_t>(n));
        for (int k = 1; k <= n; ++k) {
            const auto kk = std::size_t(k - 1);
            const auto nk = static_cast<Index>(net.basis.size(k));
            if (nk == 0) {
                next[kk] = MatrixXd::Zero(0, cols);
                continue;
            }
            const WeightProgram& wp = net.program.weight(k);
            MatrixXd rhs = traj.D[kk].asDiagonal() * S[kk] + 0.5 * h * (traj.M[kk] * S[kk]);
            rhs.leftCols(m) += 0.5 * h *
                               (assemble_flux_jacobian(wp, net.flux_count(), xn, traj.input) +
                                assemble_flux_jacobian(wp, net.flux_count(), xi, traj.input));
            for (int l = 1; l < k; ++l) {
                const auto ll = std::size_t(l - 1);
                const auto nl = net.basis.size(l);
                rhs += 0.5 * h * (assemble_state_jacobian(wp, l, nl, v, xn, traj.input) * next[ll] +
                                  assemble_state_jacobian(wp, l, nl, v, xi, traj.input) * S[ll]);
            }
            const VectorXd dx = xn[kk] - xi[kk];
            for (Index r = 0; r < nk; ++r) rhs(r, m + Index(pool_map.owner[kk][std::size_t(r)])) -= dx[r];
            next[kk] = traj.step[kk]->solve(rhs);
            if (counter) counter->solves += static_cast<std::size_t>(cols);
        }
        S = std::move(next);
        observe_gradient(i + 1, S);
    }
    if (counter) ++counter->forward_sweeps;
    return {grad.head(m), grad.tail(np)};
}

}  // namespace labelflux
