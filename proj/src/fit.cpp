#include "labelflux/fit.hpp"

#include <cmath>
#include <future>
#include <limits>

#include "labelflux/error.hpp"

namespace labelflux {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

// 1/2 |alpha^-1 (E v - meas)|^2, gradient added to dv.
double flux_term(const FluxObservation& obs, const VectorXd& meas, const VectorXd& alpha, const std::string& id,
                 const VectorXd& v, VectorXd* dv) {
    if (meas.size() == 0) return 0.0;
    if (meas.size() != obs.E.rows() || alpha.size() != obs.E.rows()) {
        throw DimensionError("experiment " + id + ": flux observation size mismatch");
    }
    const VectorXd res = (obs.E * v - meas).cwiseQuotient(alpha);
    if (dv) *dv += obs.E.transpose() * res.cwiseQuotient(alpha);
    return 0.5 * res.squaredNorm();
}

void flux_rows(std::vector<ResidualRow>& out, const FluxObservation& obs, const VectorXd& meas, const VectorXd& alpha,
               const std::string& id, const VectorXd& v) {
    if (meas.size() == 0) return;
    const VectorXd sim = obs.E * v;
    for (Index r = 0; r < meas.size(); ++r) out.push_back({id, "flux", std::size_t(r), 0.0, meas[r], sim[r], alpha[r]});
}

}  // namespace

StationaryCost::StationaryCost(const CompiledNetwork& net, std::vector<Experiment> experiments,
                               FluxObservation flux_obs, double epsilon)
    : net_(net), experiments_(std::move(experiments)), flux_obs_(std::move(flux_obs)), epsilon_(epsilon) {}

double StationaryCost::evaluate(const VectorXd& v, const VectorXd&, VectorXd* dv, VectorXd* dm) const {
    CostGradient cg = cost_and_grad(net_, v, experiments_, flux_obs_, epsilon_, dv != nullptr);
    if (dv) *dv = std::move(cg.grad);
    if (dm) dm->resize(0);
    return cg.J;
}

std::vector<ResidualRow> StationaryCost::residuals(const VectorXd& v, const VectorXd&) const {
    std::vector<ResidualRow> out;
    for (const Experiment& e : experiments_) {
        const VectorXd sim = e.observation.observe(solve_stationary(net_, v, e.input).x);
        for (Index r = 0; r < sim.size(); ++r) {
            out.push_back({e.id, "label", std::size_t(r), 0.0, e.y_meas[r], sim[r], e.sigma[r]});
        }
        flux_rows(out, flux_obs_, e.flux_meas, flux_weights(e, flux_obs_), e.id, v);
    }
    return out;
}

InstationaryCost::InstationaryCost(const CompiledNetwork& net, std::vector<InstationaryExperiment> experiments,
                                   TimeGrid grid, FluxObservation flux_obs, double epsilon)
    : net_(net),
      pools_(make_pool_map(net)),
      experiments_(std::move(experiments)),
      grid_(grid),
      flux_obs_(std::move(flux_obs)),
      epsilon_(epsilon) {
    for (const auto& e : experiments_) (void)measurement_nodes(grid_, e.times);
}

double InstationaryCost::evaluate(const VectorXd& v, const VectorXd& pools, VectorXd* dv, VectorXd* dm) const {
    struct Part {
        double J;
        InstationaryGradient g;
    };
    auto one = [&](const InstationaryExperiment& e) {
        Trajectory tr = integrate(net_, v, pools, pools_, e.input, e.initial, grid_);
        Part p{cost_instationary(tr, e), {}};
        if (dv || dm) p.g = adjoint_gradient(net_, tr, v, pools_, e);
        return p;
    };
    std::vector<Part> parts;
    if (experiments_.size() > 1) {
        std::vector<std::future<Part>> jobs;
        for (const auto& e : experiments_) jobs.push_back(std::async(std::launch::async, one, std::cref(e)));
        for (auto& j : jobs) parts.push_back(j.get());
    } else {
        for (const auto& e : experiments_) parts.push_back(one(e));
    }

    const auto m = static_cast<Index>(net_.flux_count());
    if (dv) *dv = epsilon_ * v;
    if (dm) *dm = VectorXd::Zero(static_cast<Index>(pools_.size()));
    double J = 0.5 * epsilon_ * v.squaredNorm();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        J += parts[i].J;
        if (dv) *dv += parts[i].g.dv.head(m);
        if (dm) *dm += parts[i].g.dm;
        const InstationaryExperiment& e = experiments_[i];
        J += flux_term(flux_obs_, e.flux_meas, e.flux_alpha.size() ? e.flux_alpha : flux_obs_.alpha, e.id, v, dv);
    }
    return J;
}

std::vector<ResidualRow> InstationaryCost::residuals(const VectorXd& v, const VectorXd& pools) const {
    std::vector<ResidualRow> out;
    for (const InstationaryExperiment& e : experiments_) {
        Trajectory tr = integrate(net_, v, pools, pools_, e.input, e.initial, grid_);
        const std::vector<int> nodes = measurement_nodes(grid_, e.times);
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const VectorXd sim = e.observation.observe(tr.x[std::size_t(nodes[j])]);
            for (Index r = 0; r < sim.size(); ++r) {
                out.push_back({e.id, "label", std::size_t(r), e.times[j], e.y_meas[j][r], sim[r], e.sigma[r]});
            }
        }
        flux_rows(out, flux_obs_, e.flux_meas, e.flux_alpha.size() ? e.flux_alpha : flux_obs_.alpha, e.id, v);
    }
    return out;
}

ParametrizedCost::ParametrizedCost(const FitProblem& problem)
    : problem_(problem), model_(problem.model ? *problem.model : throw Error("fit problem has no cost model")) {
    if (problem.constraints.flux_count() != model_.flux_count()) {
        throw DimensionError("constraint columns do not match the flux count");
    }
    if (!(problem.pool_min > 0.0) || !(problem.pool_max > problem.pool_min)) throw Error("invalid pool bounds");
    param_ = parametrize(problem.constraints.A, problem.constraints.w, problem.kind);
    if (problem.kind == ParamKind::freeflux) compact_ = problem.compact;

    const auto d = static_cast<Index>(param_.dim());
    const auto np = static_cast<Index>(model_.pool_count());
    constexpr double inf = std::numeric_limits<double>::infinity();
    lower_.resize(d + np);
    upper_.resize(d + np);
    if (problem.kind == ParamKind::freeflux) {
        lower_.head(d).setZero();
        upper_.head(d).setConstant(compact_ ? 1.0 - compact_->delta : inf);
    } else {
        lower_.head(d).setConstant(-inf);
        upper_.head(d).setConstant(inf);
    }
    lower_.tail(np).setConstant(std::log(problem.pool_min));
    upper_.tail(np).setConstant(std::log(problem.pool_max));

    for (std::size_t i : param_.varying) {
        bool free = false;
        if (problem.kind == ParamKind::freeflux) {
            for (std::size_t f : param_.free_idx) free = free || f == i;
        }
        if (!free) penalized_.push_back(i);
    }
}

VectorXd ParametrizedCost::q_of(const VectorXd& z) const {
    const auto d = static_cast<Index>(param_.dim());
    return compact_ ? decompactify(z.head(d), *compact_) : VectorXd(z.head(d));
}

VectorXd ParametrizedCost::pools(const VectorXd& z) const {
    return z.tail(static_cast<Index>(model_.pool_count())).array().exp();
}

VectorXd ParametrizedCost::start_point() const {
    VectorXd v;
    if (problem_.v_start) {
        v = *problem_.v_start;
    } else {
        auto c = centered_flux(problem_.constraints.A, problem_.constraints.w, param_.varying, 1.0);
        if (!c) throw Error("constraints admit no nonnegative flux");
        v = *c;
    }
    VectorXd q = param_.coordinates(v);
    if (problem_.kind == ParamKind::freeflux) q = q.cwiseMax(0.0);
    if (compact_) q = compactify(q, *compact_).cwiseMin(1.0 - 2.0 * compact_->delta);

    const auto np = static_cast<Index>(model_.pool_count());
    VectorXd z(q.size() + np);
    z.head(q.size()) = q;
    VectorXd guess = problem_.pool_guess.size() ? problem_.pool_guess : VectorXd::Ones(np);
    if (guess.size() != np) throw DimensionError("pool guess has the wrong length");
    if (np) z.tail(np) = guess.array().log().max(lower_.tail(np).array()).min(upper_.tail(np).array());
    return z;
}

Evaluation ParametrizedCost::evaluate(const VectorXd& z, double penalty) const {
    const VectorXd q = q_of(z);
    const VectorXd v = param_.flux(q);
    const VectorXd m = pools(z);
    VectorXd dv, dm;
    Evaluation out;
    out.f = model_.evaluate(v, m, &dv, &dm);
    for (std::size_t i : penalized_) {
        const double vi = v[Index(i)];
        if (vi < 0.0) {
            out.f += 0.5 * penalty * vi * vi;
            dv[Index(i)] += penalty * vi;
        }
    }
    const auto d = static_cast<Index>(param_.dim());
    out.g.resize(z.size());
    if (compact_) {
        out.g.head(d) = chain_gradient(param_, dv, VectorXd(z.head(d)), *compact_);
    } else {
        out.g.head(d) = chain_gradient(param_, dv);
    }
    if (m.size()) out.g.tail(m.size()) = dm.cwiseProduct(m);
    return out;
}

std::vector<Violation> ParametrizedCost::violations(const VectorXd& v, double tol) const {
    std::vector<Violation> out;
    tol *= 1.0 + (v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0);
    for (std::size_t i : penalized_) {
        if (v[Index(i)] < -tol) out.push_back({i, v[Index(i)]});
    }
    return out;
}

FitResult fit(const FitProblem& problem) {
    const Admissibility adm = check_admissible(problem.constraints.A, problem.constraints.w);
    if (!adm.feasible) throw Error("infeasible flux constraints: " + adm.message);
    ParametrizedCost cost(problem);
    VectorXd z = cost.start_point();

    FitResult res;
    double penalty = problem.penalty_start;
    for (int round = 1; round <= std::max(1, problem.penalty_rounds); ++round) {
        OptimizeResult opt = minimize_box([&](const VectorXd& x) { return cost.evaluate(x, penalty); }, z,
                                          cost.lower(), cost.upper(), problem.optimizer);
        res.trace.insert(res.trace.end(), opt.trace.begin(), opt.trace.end());
        res.iterations += opt.iterations;
        res.rounds = round;
        res.penalty = penalty;
        res.status = opt.status;
        res.message = opt.message;
        z = opt.x;
        if (opt.status == OptimizerStatus::evaluation_failed) break;
        if (cost.violations(cost.flux(z), problem.feasibility_tolerance).empty()) break;
        penalty *= problem.penalty_factor;
    }

    res.q_hat = cost.q_of(z);
    if (cost.compacted()) res.r_hat = z.head(static_cast<Index>(cost.flux_dim()));
    res.v_hat = cost.parametrization().flux(res.q_hat);
    res.m_hat = cost.pools(z);
    if (res.status != OptimizerStatus::evaluation_failed) {
        res.J = problem.model->evaluate(res.v_hat, res.m_hat, nullptr, nullptr);
        res.residuals = problem.model->residuals(res.v_hat, res.m_hat);
    } else {
        res.J = std::numeric_limits<double>::infinity();
    }
    res.violations = cost.violations(res.v_hat, problem.feasibility_tolerance);
    for (std::size_t i : cost.penalized()) res.max_violation = std::max(res.max_violation, -res.v_hat[Index(i)]);
    if (!res.violations.empty() && res.message.empty()) res.message = "dependent flux inequalities remain violated";
    return res;
}

GradientCheck gradient_check(const ParametrizedCost& cost, const VectorXd& z, double h_fd, double penalty) {
    GradientCheck out;
    out.analytic = cost.evaluate(z, penalty).g;
    out.numeric.resize(z.size());
    for (Index i = 0; i < z.size(); ++i) {
        const double h = h_fd * std::max(1.0, std::abs(z[i]));
        if (z[i] - h < cost.lower()[i] || z[i] + h > cost.upper()[i]) {
            throw Error("gradient check point is within the difference step of a bound (coordinate " +
                        std::to_string(i) + ")");
        }
        VectorXd zp = z, zm = z;
        zp[i] += h;
        zm[i] -= h;
        out.numeric[i] = (cost.evaluate(zp, penalty).f - cost.evaluate(zm, penalty).f) / (2 * h);
    }
    out.abs_error = (out.analytic - out.numeric).cwiseAbs();
    // Relative to the gradient scale so that near-zero coordinates stay meaningful.
    const double scale = std::max({out.analytic.lpNorm<Eigen::Infinity>(), out.numeric.lpNorm<Eigen::Infinity>(), 1e-300});
    out.rel_error = out.abs_error / scale;
    if (z.size()) {
        out.max_abs_error = out.abs_error.maxCoeff();
        out.max_rel_error = out.rel_error.maxCoeff();
    }
    return out;
}

}  // namespace labelflux
