#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "labelflux/error.hpp"
#include "labelflux/fit.hpp"
#include "support/fixtures.hpp"

using namespace labelflux;
using namespace labelflux::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ConstraintSet branching_constraints(const NetworkDocument& doc, double total) {
    ConstraintSet cs = balance_constraints(doc);
    VectorXd e = VectorXd::Zero(6);
    e[5] = 1.0;
    cs.add_row(e, total, "fixed v6");
    return cs;
}

std::vector<Experiment> branching_data(const CompiledNetwork& net, const VectorXd& v_true, std::mt19937_64& rng) {
    Experiment e;
    e.id = "mix";
    e.input = input_cumomers(net.doc, net.basis, random_inputs(net.doc, rng));
    ObservationSpec spec{{{"F", "1x"}, {"F", "x1"}, {"F", "11"}, {"A", "10"}, {"A", "01"}, {"D", "1"}}, {}};
    e.observation = build_observation_matrices(spec, net.doc, net.basis);
    e.y_meas = e.observation.observe(solve_stationary(net, v_true, e.input).x);
    e.sigma = VectorXd::Constant(e.y_meas.size(), 0.01);
    return {e};
}

// Free-flux directions seen by the measurements at v: rank of dy/dq.
Eigen::Index identifiable_rank(const CompiledNetwork& net, const Experiment& e, const Parametrization& p,
                               const VectorXd& v) {
    StationaryResult sol = solve_stationary(net, v, e.input);
    std::vector<MatrixXd> dx = solve_sensitivities(net, v, e.input, sol);
    MatrixXd dy = MatrixXd::Zero(Eigen::Index(e.observation.rows()), v.size());
    for (std::size_t k = 0; k < dx.size(); ++k) dy += e.observation.C[k] * dx[k];
    Eigen::ColPivHouseholderQR<MatrixXd> qr(dy * p.V);
    qr.setThreshold(1e-8);
    return qr.rank();
}

/// 1/2 |v - target|^2, a pure-flux cost.
class QuadraticFluxCost final : public CostModel {
public:
    explicit QuadraticFluxCost(VectorXd target) : target_(std::move(target)) {}
    std::size_t flux_count() const override { return std::size_t(target_.size()); }
    std::size_t pool_count() const override { return 0; }
    double evaluate(const VectorXd& v, const VectorXd&, VectorXd* dv, VectorXd* dm) const override {
        if (dv) *dv = v - target_;
        if (dm) dm->resize(0);
        return 0.5 * (v - target_).squaredNorm();
    }
    std::vector<ResidualRow> residuals(const VectorXd&, const VectorXd&) const override { return {}; }

private:
    VectorXd target_;
};

struct ScalarCase {
    CompiledNetwork net = compile_network(scalar());
    TimeGrid grid = make_grid(6.0, 61);
};

InstationaryCost scalar_model(const ScalarCase& sc, double v_true, double m_true, double flux_sigma) {
    PoolMap pm = make_pool_map(sc.net);
    InstationaryExperiment e;
    e.id = "pulse";
    e.input = input_cumomers(sc.net.doc, sc.net.basis, document_labels(sc.net.doc));
    e.observation = build_observation_matrices({{{"B", "1"}}, {}}, sc.net.doc, sc.net.basis);
    e.times = {0.5, 1.0, 2.0, 3.0, 6.0};
    Trajectory tr = integrate(sc.net, VectorXd::Constant(2, v_true), VectorXd::Constant(1, m_true), pm, e.input, {},
                              sc.grid);
    for (int node : measurement_nodes(sc.grid, e.times)) e.y_meas.push_back(e.observation.observe(tr.x[std::size_t(node)]));
    e.sigma = VectorXd::Constant(1, 0.01);
    FluxObservation fo{(MatrixXd(1, 2) << 1, 0).finished(), VectorXd::Constant(1, flux_sigma)};
    e.flux_meas = VectorXd::Constant(1, v_true);
    return InstationaryCost(sc.net, {e}, sc.grid, fo, 0.0);
}

}  // namespace

TEST_CASE("stationary fit recovers the generating fluxes") {
    std::mt19937_64 rng(21);
    CompiledNetwork net = compile_network(branching());
    for (int trial = 0; trial < 3; ++trial) {
        const VectorXd v_true = branching_random_fluxes(rng, 3.0);
        const std::vector<Experiment> data = branching_data(net, v_true, rng);
        StationaryCost model(net, data, {}, 0.0);
        FitProblem prob;
        prob.model = &model;
        prob.constraints = branching_constraints(net.doc, 3.0);
        FitResult res = fit(prob);
        ParametrizedCost pc(prob);
        const Parametrization& p = pc.parametrization();
        REQUIRE(identifiable_rank(net, data[0], p, v_true) == Eigen::Index(p.dim()));

        CHECK(res.status == OptimizerStatus::converged);
        CHECK(res.J <= 1e-10);
        for (std::size_t i : p.free_idx) {
            CHECK(std::abs(res.v_hat[Eigen::Index(i)] - v_true[Eigen::Index(i)]) <= 1e-3 * std::abs(v_true[Eigen::Index(i)]));
        }
        CHECK((res.v_hat - v_true).lpNorm<Eigen::Infinity>() <= 1e-3 * v_true.lpNorm<Eigen::Infinity>());
        // reported fluxes are exactly the parametrization image
        CHECK((res.v_hat.array() == p.flux(decompactify(res.r_hat, CompactMap{})).array()).all());
        CHECK((res.r_hat.array() >= 0.0).all());
        CHECK((res.r_hat.array() <= 1.0 - 1e-6).all());
        CHECK(res.violations.empty());
        REQUIRE(res.residuals.size() == data[0].observation.rows());
        for (const auto& row : res.residuals) CHECK(std::abs(row.weighted()) <= 1e-4);
    }
}

TEST_CASE("gradient check on the parametrized stationary cost") {
    std::mt19937_64 rng(22);
    CompiledNetwork net = compile_network(branching());
    const VectorXd v_true = branching_random_fluxes(rng, 3.0);
    StationaryCost model(net, branching_data(net, v_true, rng), {}, 0.1);
    FitProblem prob;
    prob.model = &model;
    prob.constraints = branching_constraints(net.doc, 3.0);
    for (ParamKind kind : {ParamKind::freeflux, ParamKind::orthonormal}) {
        prob.kind = kind;
        ParametrizedCost pc(prob);
        for (int t = 0; t < 3; ++t) {
            prob.v_start = branching_random_fluxes(rng, 3.0);
            ParametrizedCost at(prob);
            GradientCheck gc = gradient_check(at, at.start_point(), 1e-6);
            CHECK(gc.max_rel_error <= 1e-6);
        }
    }

    // Perfect fit without regularization: a zero gradient.
    StationaryCost exact(net, branching_data(net, v_true, rng), {}, 0.0);
    FitProblem zero;
    zero.model = &exact;
    zero.constraints = branching_constraints(net.doc, 3.0);
    zero.v_start = v_true;
    ParametrizedCost pz(zero);
    GradientCheck gz = gradient_check(pz, pz.start_point(), 1e-6);
    CHECK(gz.max_abs_error <= 1e-8);
    CHECK(gz.analytic.lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("gradient check including pool coordinates") {
    ScalarCase sc;
    InstationaryCost model = scalar_model(sc, 1.0, 2.0, 0.05);
    FitProblem prob;
    prob.model = &model;
    prob.constraints = balance_constraints(sc.net.doc);
    prob.v_start = VectorXd::Constant(2, 1.4);
    prob.pool_guess = VectorXd::Constant(1, 1.3);
    ParametrizedCost pc(prob);
    REQUIRE(pc.size() == 2);
    GradientCheck gc = gradient_check(pc, pc.start_point(), 1e-6);
    CHECK(gc.max_rel_error <= 1e-6);

    std::mt19937_64 rng(23);
    CompiledNetwork net = compile_network(branching());
    PoolMap pm = make_pool_map(net);
    InstationaryExperiment e;
    e.id = "b";
    e.input = input_cumomers(net.doc, net.basis, random_inputs(net.doc, rng));
    e.observation = build_observation_matrices({{{"F", "1x"}, {"F", "11"}, {"D", "1"}}, {}}, net.doc, net.basis);
    e.times = {1.0, 2.0};
    TimeGrid g = make_grid(2.0, 41);
    Trajectory tr = integrate(net, branching_random_fluxes(rng, 3.0), VectorXd::Constant(pm.size(), 1.5), pm, e.input,
                              {}, g);
    for (int node : measurement_nodes(g, e.times)) e.y_meas.push_back(e.observation.observe(tr.x[std::size_t(node)]));
    e.sigma = VectorXd::Constant(3, 0.02);
    InstationaryCost bmodel(net, {e, e}, g, {}, 0.01);
    FitProblem bp;
    bp.model = &bmodel;
    bp.constraints = branching_constraints(net.doc, 3.0);
    bp.v_start = branching_random_fluxes(rng, 3.0);
    bp.pool_guess = VectorXd::LinSpaced(pm.size(), 0.7, 1.9);
    ParametrizedCost bc(bp);
    GradientCheck bg = gradient_check(bc, bc.start_point(), 1e-6);
    CHECK(bg.max_rel_error <= 1e-6);
}

TEST_CASE("instationary fit recovers flux and pool size") {
    ScalarCase sc;
    const double v_true = 1.3, m_true = 2.2;
    InstationaryCost model = scalar_model(sc, v_true, m_true, 0.01);
    FitProblem prob;
    prob.model = &model;
    prob.constraints = balance_constraints(sc.net.doc);
    prob.v_start = VectorXd::Constant(2, 0.6);
    prob.pool_guess = VectorXd::Constant(1, 0.8);
    FitResult res = fit(prob);
    CHECK(res.status == OptimizerStatus::converged);
    CHECK(std::abs(res.v_hat[0] - v_true) <= 1e-2 * v_true);
    CHECK(std::abs(res.v_hat[1] - v_true) <= 1e-2 * v_true);
    CHECK(std::abs(res.m_hat[0] - m_true) <= 1e-2 * m_true);
    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);
    CHECK(res.residuals.size() == 6);
}

TEST_CASE("regularization alone gives the smallest admissible flux") {
    CompiledNetwork net = compile_network(branching());
    StationaryCost model(net, {}, {}, 1.0);
    FitProblem prob;
    prob.model = &model;
    prob.constraints = branching_constraints(net.doc, 3.0);
    FitResult res = fit(prob);
    // minimum-norm solution of the equality constraints, which here is nonnegative
    const MatrixXd& A = prob.constraints.A;
    VectorXd v_min = A.transpose() * (A * A.transpose()).ldlt().solve(prob.constraints.w);
    REQUIRE(v_min.minCoeff() > 0.0);
    CHECK((res.v_hat - v_min).lpNorm<Eigen::Infinity>() <= 1e-5);
    CHECK(res.J == doctest::Approx(0.5 * v_min.squaredNorm()).epsilon(1e-9));
    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);
}

TEST_CASE("optimizing in r and directly in q reach the same cost") {
    std::mt19937_64 rng(24);
    CompiledNetwork net = compile_network(branching());
    const VectorXd v_true = branching_random_fluxes(rng, 3.0);
    std::vector<Experiment> data = branching_data(net, v_true, rng);
    // Noisy data so the optimum is not a zero-cost point.
    std::normal_distribution<double> n01;
    for (auto& y : data[0].y_meas) y += 0.01 * n01(rng);
    StationaryCost model(net, data, {}, 0.0);
    FitProblem prob;
    prob.model = &model;
    prob.constraints = branching_constraints(net.doc, 3.0);
    FitResult in_r = fit(prob);
    prob.compact.reset();
    FitResult in_q = fit(prob);
    CHECK(in_q.r_hat.size() == 0);
    CHECK(in_r.status == OptimizerStatus::converged);
    CHECK(in_q.status == OptimizerStatus::converged);
    CHECK(std::abs(in_r.J - in_q.J) <= 1e-6 * std::max(1.0, in_r.J));
    prob.kind = ParamKind::orthonormal;
    FitResult in_o = fit(prob);
    CHECK(std::abs(in_o.J - in_r.J) <= 1e-6 * std::max(1.0, in_r.J));
}

TEST_CASE("dependent flux inequalities are penalized and reported") {
    // The target sits outside the flux cone, so the unpenalized optimum has a negative dependent flux.
    CompiledNetwork net = compile_network(branching());
    ConstraintSet cs = branching_constraints(net.doc, 3.0);
    VectorXd target = (VectorXd(6) << 4.0, 0.0, 0.0, 0.0, 3.0, 3.0).finished();
    QuadraticFluxCost model(target);
    FitProblem prob;
    prob.model = &model;
    prob.constraints = cs;
    FitResult res = fit(prob);
    ParametrizedCost pc(prob);
    double min_dep = 0.0;
    for (std::size_t i : pc.penalized()) min_dep = std::min(min_dep, res.v_hat[Eigen::Index(i)]);
    CHECK(res.max_violation == doctest::Approx(-min_dep));
    CHECK(res.max_violation <= 1e-4);
    // A quadratic penalty leaves an O(1/weight) violation, which is reported.
    CHECK(res.max_violation > prob.feasibility_tolerance);
    CHECK(res.rounds == prob.penalty_rounds);
    CHECK_FALSE(res.violations.empty());
    CHECK(res.penalty >= prob.penalty_start);
}

TEST_CASE("infeasible constraints are rejected before optimizing") {
    CompiledNetwork net = compile_network(branching());
    StationaryCost model(net, {}, {}, 1.0);
    FitProblem prob;
    prob.model = &model;
    prob.constraints = branching_constraints(net.doc, 3.0);
    VectorXd e = VectorXd::Zero(6);
    e[4] = 1.0;
    prob.constraints.add_row(e, -1.0, "negative inflow");
    CHECK_THROWS_AS(fit(prob), Error);
}
