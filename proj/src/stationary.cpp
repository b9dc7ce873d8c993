#include "labelflux/stationary.hpp"

#include <cmath>

#include "labelflux/error.hpp"

namespace labelflux {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string weakest_species(const CompiledNetwork& net, int k, const Eigen::SparseMatrix<double>& M) {
    const VectorXd diag = M.diagonal();
    if (diag.size() == 0) return "?";
    Index row = 0;
    diag.cwiseAbs().minCoeff(&row);
    return net.species_of(k, static_cast<std::size_t>(row)).id;
}

void check_input(const CompiledNetwork& net, const VectorXd& v, const CumomerState& x_input) {
    if (static_cast<std::size_t>(v.size()) != net.flux_count()) throw DimensionError("flux vector has the wrong length");
    if (x_input.size() != static_cast<std::size_t>(net.max_weight())) throw DimensionError("input state has the wrong number of weights");
}

}  // namespace

StationaryResult solve_stationary(const CompiledNetwork& net, const VectorXd& v, const CumomerState& x_input) {
    check_input(net, v, x_input);
    StationaryResult res;
    res.x = net.basis.zero_state();
    if (v.size() && v.minCoeff() < 0.0) res.warnings.push_back("negative flux component in stationary solve");
    for (int k = 1; k <= net.max_weight(); ++k) {
        const WeightProgram& wp = net.program.weight(k);
        Eigen::SparseMatrix<double> M = assemble_matrix(wp, v);
        const VectorXd b = assemble_rhs(wp, v, res.x, x_input);
        auto lu = std::make_shared<SparseLUFactor>();
        if (wp.size > 0) {
            M.makeCompressed();
            lu->compute(M);
            if (lu->info() != Eigen::Success) {
                throw SingularSystemError("weight " + std::to_string(k) + " cumomer matrix is singular (check outflow of species " +
                                              weakest_species(net, k, M) + ")",
                                          k);
            }
            VectorXd x = lu->solve(-b);
            const double resid = (M * x + b).lpNorm<Eigen::Infinity>();
            if (!x.allFinite()) {
                throw SingularSystemError("weight " + std::to_string(k) + " cumomer matrix is numerically singular (species " +
                                              weakest_species(net, k, M) + ")",
                                          k);
            }
            if (resid > 1e-10 * (1.0 + b.lpNorm<Eigen::Infinity>())) {
                res.warnings.push_back("weight " + std::to_string(k) + " residual " + std::to_string(resid) +
                                       " above tolerance");
            }
            res.x[std::size_t(k - 1)] = std::move(x);
        }
        res.lu.push_back(std::move(lu));
    }
    return res;
}

std::vector<MatrixXd> solve_sensitivities(const CompiledNetwork& net, const VectorXd& v, const CumomerState& x_input,
                                          const StationaryResult& result) {
    check_input(net, v, x_input);
    const auto m = static_cast<Index>(net.flux_count());
    std::vector<MatrixXd> dx;
    for (int k = 1; k <= net.max_weight(); ++k) {
        const WeightProgram& wp = net.program.weight(k);
        MatrixXd rhs = assemble_flux_jacobian(wp, net.flux_count(), result.x, x_input);
        for (int l = 1; l < k; ++l) {
            rhs += assemble_state_jacobian(wp, l, net.basis.size(l), v, result.x, x_input) * dx[std::size_t(l - 1)];
        }
        if (wp.size == 0) {
            dx.emplace_back(0, m);
        } else {
            dx.push_back(-result.lu[std::size_t(k - 1)]->solve(rhs));
        }
    }
    return dx;
}

const VectorXd& flux_weights(const Experiment& e, const FluxObservation& obs) {
    return e.flux_alpha.size() ? e.flux_alpha : obs.alpha;
}

CostGradient cost_and_grad(const CompiledNetwork& net, const VectorXd& v, const std::vector<Experiment>& experiments,
                           const FluxObservation& flux_obs, double epsilon, bool want_gradient) {
    CostGradient out;
    out.grad = VectorXd::Zero(v.size());
    for (const Experiment& e : experiments) {
        try {
            StationaryResult sol = solve_stationary(net, v, e.input);
            const VectorXd y = e.observation.observe(sol.x);
            if (y.size() != e.y_meas.size() || e.sigma.size() != e.y_meas.size()) {
                throw DimensionError("experiment " + e.id + ": measurement vector does not match observation rows");
            }
            const VectorXd wres = (y - e.y_meas).cwiseQuotient(e.sigma);
            out.J += 0.5 * wres.squaredNorm();
            if (e.flux_meas.size()) {
                const VectorXd& alpha = flux_weights(e, flux_obs);
                if (e.flux_meas.size() != flux_obs.E.rows() || alpha.size() != flux_obs.E.rows()) {
                    throw DimensionError("experiment " + e.id + ": flux observation size mismatch");
                }
                const VectorXd fres = (flux_obs.E * v - e.flux_meas).cwiseQuotient(alpha);
                out.J += 0.5 * fres.squaredNorm();
                if (want_gradient) out.grad += flux_obs.E.transpose() * fres.cwiseQuotient(alpha);
            }
            if (want_gradient && y.size()) {
                const std::vector<MatrixXd> dx = solve_sensitivities(net, v, e.input, sol);
                const VectorXd weighted = wres.cwiseQuotient(e.sigma);
                for (std::size_t k = 0; k < dx.size(); ++k) {
                    if (dx[k].rows() == 0) continue;
                    out.grad += dx[k].transpose() * (e.observation.C[k].transpose() * weighted);
                }
            }
        } catch (const SingularSystemError& err) {
            throw SingularSystemError("experiment " + e.id + ": " + err.what(), err.weight());
        }
    }
    out.J += 0.5 * epsilon * v.squaredNorm();
    if (want_gradient) out.grad += epsilon * v;
    return out;
}

}  // namespace labelflux
