// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "labelflux/annotate.hpp"
#include "labelflux/error.hpp"
#include "labelflux/fit.hpp"
#include "labelflux/ir.hpp"
#include "labelflux/xml.hpp"
#include "support/fixtures.hpp"
#include "support/isotopomer_oracle.hpp"
#include "support/random_network.hpp"
#include "support/symbolic.hpp"

using namespace labelflux;
using namespace labelflux::testing;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

namespace {

struct Failed {
    std::string what;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failed{what};
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", x);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ConstraintSet branching_fixed(const NetworkDocument& doc, double total) {
    ConstraintSet cs = balance_constraints(doc);
    VectorXd e = VectorXd::Zero(6);
    e[5] = 1.0;
    cs.add_row(e, total, "fixed v6");
    return cs;
}

VectorXd random_pools(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.5, 2.0);
    VectorXd m(static_cast<Index>(n));
    for (auto& x : m) x = u(rng);
    return m;
}

// Another balanced nonnegative flux: move from v along a random kernel
// direction of the balances, staying inside v >= 0.
VectorXd perturb_balanced(const NetworkDocument& doc, const VectorXd& v, std::mt19937_64& rng) {
    ConstraintSet cs = balance_constraints(doc);
    Parametrization p = parametrize(cs.A, cs.w, ParamKind::orthonormal);
    if (p.dim() == 0) return v;
    std::normal_distribution<double> n01;
    VectorXd q(static_cast<Index>(p.dim()));
    for (auto& x : q) x = n01(rng);
    const VectorXd d = p.V * q;
    double t_max = 1e300;
    for (Index i = 0; i < d.size(); ++i) {
        if (d[i] < 0) t_max = std::min(t_max, -v[i] / d[i]);
    }
    if (t_max > 1e10) t_max = 1.0;
    return v + std::uniform_real_distribution<double>(0.0, 0.9)(rng) * t_max * d;
}

// --- criteria --------------------------------------------------------------

std::string assembly_oracle() {
    const auto t0 = Clock::now();
    CompiledNetwork net = compile_network(branching());
    const WeightProgram& w1 = net.program.weight(1);
    const WeightProgram& w2 = net.program.weight(2);
    require(matrix_terms(w1) == sorted({"1,1,-(v(1)+v(2)+v(3))", "2,2,-(v(1)+v(2)+v(3))", "3,2,v(2)", "3,1,v(2)",
                                        "3,3,-(v(4)+v(4))", "4,1,v(1)", "4,2,v(3)", "4,3,v(4)", "4,4,-v(5)", "5,2,v(1)",
                                        "5,1,v(3)", "5,3,v(4)", "5,5,-v(5)"}),
            "M_1 terms differ");
    require(rhs_terms(w1) == sorted({"1,1,v(6).*x1_input(1,:)", "2,1,v(6).*x1_input(2,:)"}), "b_1 terms differ");
    require(flux_deriv_terms(w1) ==
                sorted({"1,6,x1_input(1,:)", "1,1,-x1(1,:)", "1,2,-x1(1,:)", "1,3,-x1(1,:)", "2,6,x1_input(2,:)",
                        "2,1,-x1(2,:)", "2,2,-x1(2,:)", "2,3,-x1(2,:)", "3,2,x1(2,:)", "3,2,x1(1,:)", "3,4,-x1(3,:)",
                        "3,4,-x1(3,:)", "4,1,x1(1,:)", "4,3,x1(2,:)", "4,4,x1(3,:)", "4,5,-x1(4,:)", "5,1,x1(2,:)",
                        "5,3,x1(1,:)", "5,4,x1(3,:)", "5,5,-x1(5,:)"}),
            "df_1/dv terms differ");
    require(matrix_terms(w2) == sorted({"1,1,-(v(1)+v(2)+v(3))", "2,1,v(1)", "2,1,v(3)", "2,2,-v(5)"}), "M_2 terms differ");
    require(rhs_terms(w2) == sorted({"1,1,v(6).*x2_input(1,:)", "2,1,v(4).*x1(3,:).*x1(3,:)"}), "b_2 terms differ");
    require(flux_deriv_terms(w2) == sorted({"1,6,x2_input(1,:)", "1,1,-x2(1,:)", "1,2,-x2(1,:)", "1,3,-x2(1,:)",
                                            "2,1,x2(1,:)", "2,3,x2(1,:)", "2,4,x1(3,:).*x1(3,:)", "2,5,-x2(2,:)"}),
            "df_2/dv terms differ");
    require(state_deriv_terms(w2, 1) == sorted({"2,3,x1(3,:).*v(4)", "2,3,x1(3,:).*v(4)"}), "db_2/dx_1 terms differ");
    const double t = seconds_since(t0);
    require(t < 1.0, "took " + fmt(t) + " s");
    return "exact symbolic match, " + fmt(t) + " s";
}

std::string all_ones() {
    std::mt19937_64 rng(2);
    double worst = 0.0;
    std::size_t cases = 0;
    auto check = [&](const CompiledNetwork& net, const VectorXd& v) {
        require(v.minCoeff() >= 0.0, "negative flux in sample");
        CumomerState ones = net.basis.zero_state(), xin = net.basis.zero_input_state();
        for (auto& b : ones) b.setOnes();
        for (auto& b : xin) b.setOnes();
        for (int k = 1; k <= net.max_weight(); ++k) {
            const WeightProgram& wp = net.program.weight(k);
            VectorXd r = assemble_matrix(wp, v) * ones[std::size_t(k - 1)] + assemble_rhs(wp, v, ones, xin);
            if (r.size()) worst = std::max(worst, r.lpNorm<Eigen::Infinity>());
        }
        StationaryResult sol = solve_stationary(net, v, input_cumomers(net.doc, net.basis, fully_labeled_inputs(net.doc)));
        for (const auto& x : sol.x) {
            if (x.size()) worst = std::max(worst, (x.array() - 1.0).abs().maxCoeff());
        }
        ++cases;
    };
    CompiledNetwork br = compile_network(branching());
    for (int i = 0; i < 50; ++i) check(br, branching_random_fluxes(rng));
    for (int n = 0; n < 10; ++n) {
        GeneratedNetwork g = random_acyclic_network(rng, 6, 3);
        CompiledNetwork net = compile_network(parse_network(g.xml));
        check(net, g.fluxes);
        for (int i = 0; i < 4; ++i) check(net, perturb_balanced(net.doc, g.fluxes, rng));
    }
    require(worst <= 1e-12, "residual " + fmt(worst));
    return std::to_string(cases) + " flux vectors, max residual " + fmt(worst);
}

std::string isotopomer_oracle() {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    auto check = [&](const CompiledNetwork& net, const VectorXd& v, const std::vector<std::vector<LabelFraction>>& labels) {
        StationaryResult sol = solve_stationary(net, v, input_cumomers(net.doc, net.basis, labels));
        IsotopomerState oracle = isotopomer_steady_state(net.doc, v, labels);
        IsotopomerState mine = isotopomers_from_state(net.doc, net.basis, sol.x);
        for (std::size_t s = 0; s < oracle.size(); ++s) {
            if (net.doc.species[s].kind != SpeciesKind::intermediate) continue;
            for (std::size_t i = 0; i < oracle[s].size(); ++i) worst = std::max(worst, std::abs(mine[s][i] - oracle[s][i]));
        }
    };
    CompiledNetwork br = compile_network(branching());
    for (int i = 0; i < 3; ++i) check(br, branching_random_fluxes(rng), random_inputs(br.doc, rng));
    for (int n = 0; n < 5; ++n) {
        GeneratedNetwork g = random_acyclic_network(rng);
        CompiledNetwork net = compile_network(parse_network(g.xml));
        check(net, g.fluxes, document_labels(net.doc));
    }
    require(worst <= 1e-9, "max deviation " + fmt(worst));
    return "branching + 5 random networks, max deviation " + fmt(worst);
}

Experiment branching_experiment(const CompiledNetwork& net, const std::string& id,
                                const std::vector<std::vector<LabelFraction>>& labels, const VectorXd& v,
                                std::mt19937_64& rng, double noise) {
    Experiment e;
    e.id = id;
    e.input = input_cumomers(net.doc, net.basis, labels);
    ObservationSpec spec{{{"F", "1x"}, {"F", "x1"}, {"F", "11"}, {"A", "10"}, {"A", "01"}, {"D", "1"}}, {}};
    e.observation = build_observation_matrices(spec, net.doc, net.basis);
    e.y_meas = e.observation.observe(solve_stationary(net, v, e.input).x);
    std::normal_distribution<double> n01;
    for (auto& y : e.y_meas) y += noise * n01(rng);
    e.sigma = VectorXd::Constant(e.y_meas.size(), 0.02);
    return e;
}

std::string stationary_gradient() {
    std::mt19937_64 rng(4);
    CompiledNetwork net = compile_network(branching());
    const VectorXd v_true = branching_random_fluxes(rng);
    std::vector<Experiment> exps{branching_experiment(net, "e1", random_inputs(net.doc, rng), v_true, rng, 0.01),
                                 branching_experiment(net, "e2", random_inputs(net.doc, rng), v_true, rng, 0.01)};
    const double eps = 1e-4;
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const VectorXd v = branching_random_fluxes(rng);
        CostGradient cg = cost_and_grad(net, v, exps, {}, eps);
        VectorXd fd(v.size());
        for (Index j = 0; j < v.size(); ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(v[j]));
            VectorXd vp = v, vm = v;
            vp[j] += h;
            vm[j] -= h;
            fd[j] = (cost_and_grad(net, vp, exps, {}, eps, false).J - cost_and_grad(net, vm, exps, {}, eps, false).J) / (2 * h);
        }
        worst = std::max(worst, relative_error(cg.grad, fd));
    }
    require(worst <= 1e-6, "max relative error " + fmt(worst));
    return "10 points, max relative error " + fmt(worst);
}

struct InstSetup {
    CompiledNetwork net;
    PoolMap pools;
    CumomerState input;
};

InstationaryExperiment inst_experiment(const InstSetup& s, const VectorXd& v, const VectorXd& m, const TimeGrid& g,
                                       const ObservationMatrices& obs, const std::vector<double>& times,
                                       std::mt19937_64& rng, double noise) {
    InstationaryExperiment e;
    e.id = "e";
    e.input = s.input;
    e.observation = obs;
    e.times = times;
    Trajectory tr = integrate(s.net, v, m, s.pools, s.input, {}, g);
    std::normal_distribution<double> n01;
    for (int node : measurement_nodes(g, times)) {
        VectorXd y = obs.observe(tr.x[std::size_t(node)]);
        for (auto& yi : y) yi += noise * n01(rng);
        e.y_meas.push_back(y);
    }
    e.sigma = VectorXd::Constant(Index(obs.rows()), 0.05);
    return e;
}

// max(relative error in dJ/dv, relative error in dJ/dm) against central differences.
double adjoint_vs_fd(const InstSetup& s, const VectorXd& v, const VectorXd& m, const TimeGrid& g,
                     const InstationaryExperiment& e, double rel_step) {
    auto J = [&](const VectorXd& vv, const VectorXd& mm) {
        return cost_instationary(integrate(s.net, vv, mm, s.pools, s.input, {}, g), e);
    };
    Trajectory tr = integrate(s.net, v, m, s.pools, s.input, {}, g);
    InstationaryGradient adj = adjoint_gradient(s.net, tr, v, s.pools, e);
    VectorXd fv(v.size()), fm(m.size());
    for (Index j = 0; j < v.size(); ++j) {
        const double h = rel_step * std::max(1.0, std::abs(v[j]));
        VectorXd vp = v, vm = v;
        vp[j] += h;
        vm[j] -= h;
        fv[j] = (J(vp, m) - J(vm, m)) / (2 * h);
    }
    for (Index j = 0; j < m.size(); ++j) {
        const double h = rel_step * m[j];
        VectorXd mp = m, mm = m;
        mp[j] += h;
        mm[j] -= h;
        fm[j] = (J(v, mp) - J(v, mm)) / (2 * h);
    }
    return std::max(relative_error(adj.dv, fv), relative_error(adj.dm, fm));
}

InstSetup scalar_setup() {
    CompiledNetwork net = compile_network(scalar());
    PoolMap pm = make_pool_map(net);
    CumomerState xin = input_cumomers(net.doc, net.basis, document_labels(net.doc));
    return {std::move(net), std::move(pm), std::move(xin)};
}

InstSetup branching_setup(std::mt19937_64& rng) {
    CompiledNetwork net = compile_network(branching());
    PoolMap pm = make_pool_map(net);
    CumomerState xin = input_cumomers(net.doc, net.basis, random_inputs(net.doc, rng));
    return {std::move(net), std::move(pm), std::move(xin)};
}

ObservationMatrices branching_observation(const CompiledNetwork& net) {
    return build_observation_matrices({{{"F", "1x"}, {"F", "x1"}, {"F", "11"}, {"A", "10"}, {"D", "1"}}, {}}, net.doc,
                                      net.basis);
}

std::string discrete_adjoint() {
    std::mt19937_64 rng(5);
    std::ostringstream detail;
    InstSetup sc = scalar_setup();
    ObservationMatrices sobs = build_observation_matrices({{{"B", "1"}}, {}}, sc.net.doc, sc.net.basis);
    std::vector<double> scalar_err;
    for (int N : {51, 101}) {
        TimeGrid g = make_grid(5.0, N);
        InstationaryExperiment e = inst_experiment(sc, VectorXd::Constant(2, 1.0), VectorXd::Constant(1, 1.5), g, sobs,
                                                   {1.0, 2.5, 5.0}, rng, 0.0);
        scalar_err.push_back(adjoint_vs_fd(sc, (VectorXd(2) << 1.2, 0.8).finished(), VectorXd::Constant(1, 1.1), g, e, 1e-5));
        require(scalar_err.back() <= 1e-8, "scalar N=" + std::to_string(N) + ": " + fmt(scalar_err.back()));
    }
    InstSetup br = branching_setup(rng);
    ObservationMatrices bobs = branching_observation(br.net);
    std::vector<double> br_err;
    const VectorXd v_true = branching_random_fluxes(rng), v = branching_random_fluxes(rng);
    const VectorXd m_true = random_pools(br.pools.size(), rng), m = random_pools(br.pools.size(), rng);
    for (int N : {51, 101}) {
        TimeGrid g = make_grid(4.0, N);
        InstationaryExperiment e = inst_experiment(br, v_true, m_true, g, bobs, {0.8, 2.0, 4.0}, rng, 0.01);
        br_err.push_back(adjoint_vs_fd(br, v, m, g, e, 1e-6));
        require(br_err.back() <= 1e-6, "branching N=" + std::to_string(N) + ": " + fmt(br_err.back()));
    }
    // no degradation as h shrinks (within the finite-difference noise floor)
    require(scalar_err[1] <= std::max(10 * scalar_err[0], 1e-9), "scalar agreement degrades with N");
    require(br_err[1] <= std::max(10 * br_err[0], 1e-7), "branching agreement degrades with N");
    detail << "scalar " << fmt(scalar_err[0]) << "/" << fmt(scalar_err[1]) << ", branching " << fmt(br_err[0]) << "/"
           << fmt(br_err[1]) << " (N=51/101)";
    return detail.str();
}

std::string order_two() {
    InstSetup sc = scalar_setup();
    const double v = 1.3, m = 2.0, T = 4.0;
    std::vector<double> err;
    for (int N : {11, 21, 41, 81}) {
        Trajectory tr = integrate(sc.net, VectorXd::Constant(2, v), VectorXd::Constant(1, m), sc.pools, sc.input, {},
                                  make_grid(T, N));
        err.push_back(std::abs(tr.x.back()[0][0] - (1.0 - std::exp(-v * T / m))));
    }
    std::ostringstream detail;
    detail << "log2 ratios";
    for (std::size_t i = 0; i + 1 < err.size(); ++i) {
        const double r = std::log2(err[i] / err[i + 1]);
        require(r >= 1.8 && r <= 2.2, "ratio " + fmt(r));
        char buf[16];
        std::snprintf(buf, sizeof buf, " %.4f", r);
        detail << buf;
    }
    return detail.str();
}

std::string economics() {
    std::mt19937_64 rng(7);
    GeneratedNetwork gen = chain_network(16, rng);
    CompiledNetwork net = compile_network(parse_network(gen.xml));
    const std::size_t m = net.flux_count();
    require(m >= 30, "chain has only " + std::to_string(m) + " fluxes");
    InstSetup s{net, make_pool_map(net), input_cumomers(net.doc, net.basis, document_labels(net.doc))};
    const VectorXd pools = random_pools(s.pools.size(), rng);
    TimeGrid g = make_grid(4.0, 201);
    ObservationMatrices obs =
        build_observation_matrices({{{"A16", "1xx"}, {"A8", "x1x"}, {"A1", "11x"}}, {}}, net.doc, net.basis);
    InstationaryExperiment e = inst_experiment(s, gen.fluxes, pools, g, obs, {1.0, 2.0, 4.0}, rng, 0.02);

    SolveCounter count;
    Trajectory tr0 = integrate(net, gen.fluxes, pools, s.pools, s.input, {}, g, &count);
    InstationaryGradient a0 = adjoint_gradient(net, tr0, gen.fluxes, s.pools, e, &count);
    require(count.forward_sweeps + count.backward_sweeps == 2, "adjoint gradient used " +
                                                                   std::to_string(count.forward_sweeps + count.backward_sweeps) +
                                                                   " sweeps");
    const std::size_t per_sweep = std::size_t(g.N - 1) * std::size_t(net.max_weight());
    require(count.solves == 2 * per_sweep, "adjoint gradient solve count " + std::to_string(count.solves));
    SolveCounter fcount;
    InstationaryGradient f0 = forward_sensitivity_gradient(net, tr0, gen.fluxes, s.pools, e, &fcount);
    require(fcount.solves >= m * per_sweep, "forward sensitivities used fewer than m column solves");
    require(relative_error(a0.dv, f0.dv) <= 1e-9 && relative_error(a0.dm, f0.dm) <= 1e-9, "gradients disagree");

    double t_adj = 0.0, t_fwd = 0.0, sink = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        auto t0 = Clock::now();
        Trajectory tr = integrate(net, gen.fluxes, pools, s.pools, s.input, {}, g);
        sink += adjoint_gradient(net, tr, gen.fluxes, s.pools, e).dv[0];
        t_adj += seconds_since(t0);
        t0 = Clock::now();
        Trajectory tf = integrate(net, gen.fluxes, pools, s.pools, s.input, {}, g);
        sink += forward_sensitivity_gradient(net, tf, gen.fluxes, s.pools, e).dv[0];
        t_fwd += seconds_since(t0);
    }
    const double ratio = t_adj / t_fwd;
    require(std::isfinite(sink), "non-finite gradient");
    require(ratio <= 0.25, "adjoint/forward time ratio " + fmt(ratio));
    return std::to_string(m) + " fluxes, 2 sweeps, time ratio " + fmt(ratio) + " over 20 repetitions";
}

std::string output_sensitivity_check() {
    std::mt19937_64 rng(8);
    InstSetup s = branching_setup(rng);
    const VectorXd v = branching_random_fluxes(rng);
    const VectorXd m = random_pools(s.pools.size(), rng);
    TimeGrid g = make_grid(2.5, 51);
    ObservationMatrices obs = branching_observation(s.net);
    Trajectory tr = integrate(s.net, v, m, s.pools, s.input, {}, g);
    MatrixXd S = output_sensitivity(s.net, tr, v, s.pools, obs);
    MatrixXd fd(S.rows(), S.cols());
    const double h = 1e-6;
    for (Index j = 0; j < v.size(); ++j) {
        VectorXd vp = v, vm = v;
        vp[j] += h;
        vm[j] -= h;
        fd.col(j) = (obs.observe(integrate(s.net, vp, m, s.pools, s.input, {}, g).x.back()) -
                     obs.observe(integrate(s.net, vm, m, s.pools, s.input, {}, g).x.back())) /
                    (2 * h);
    }
    const double err = (S - fd).lpNorm<Eigen::Infinity>() / std::max(S.lpNorm<Eigen::Infinity>(), fd.lpNorm<Eigen::Infinity>());
    require(err <= 1e-6, "relative error " + fmt(err));
    return "relative error " + fmt(err);
}

std::string parametrization_check() {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    std::vector<ConstraintSet> systems{branching_fixed(branching(), 3.0)};
    for (int t = 0; t < 3; ++t) {
        GeneratedNetwork gen = random_acyclic_network(rng);
        NetworkDocument doc = parse_network(gen.xml);
        ConstraintSet cs = balance_constraints(doc);
        cs.add_row(VectorXd::Unit(Index(doc.fluxes.size()), 0), gen.fluxes[0], "uptake");
        systems.push_back(cs);
    }
    double worst_res = 0.0, worst_orth = 0.0;
    for (const ConstraintSet& cs : systems) {
        const double tol = 1e-12 * (1 + cs.w.lpNorm<Eigen::Infinity>());
        for (ParamKind kind : {ParamKind::freeflux, ParamKind::orthonormal}) {
            Parametrization p = parametrize(cs.A, cs.w, kind);
            for (int t = 0; t < 100; ++t) {
                VectorXd q(Index(p.dim()));
                for (auto& x : q) x = n01(rng);
                const VectorXd v = p.flux(q);
                const double res = (cs.A * v - cs.w).lpNorm<Eigen::Infinity>();
                worst_res = std::max(worst_res, res);
                require(res <= tol, "residual " + fmt(res));
                if (kind == ParamKind::freeflux) {
                    for (std::size_t i = 0; i < p.free_idx.size(); ++i) {
                        require(v[Index(p.free_idx[i])] == q[Index(i)], "free flux does not reproduce q");
                    }
                }
            }
            if (kind == ParamKind::orthonormal) {
                const double o = (p.V.transpose() * p.V - MatrixXd::Identity(Index(p.dim()), Index(p.dim())))
                                     .lpNorm<Eigen::Infinity>();
                worst_orth = std::max(worst_orth, o);
                require(o <= 1e-12, "V'V - I = " + fmt(o));
            }
        }
    }
    return "max residual " + fmt(worst_res) + ", max |V'V-I| " + fmt(worst_orth);
}

std::string fit_recovery() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(10);
    CompiledNetwork net = compile_network(branching());
    double worst_v = 0.0, worst_J = 0.0;
    int iterations = 0;
    for (int trial = 0; trial < 3; ++trial) {
        const VectorXd v_true = branching_random_fluxes(rng, 3.0);
        StationaryCost model(net, {branching_experiment(net, "mix", random_inputs(net.doc, rng), v_true, rng, 0.0)}, {},
                             0.0);
        FitProblem prob;
        prob.model = &model;
        prob.constraints = branching_fixed(net.doc, 3.0);
        FitResult res = fit(prob);
        ParametrizedCost pc(prob);
        for (std::size_t i : pc.parametrization().free_idx) {
            worst_v = std::max(worst_v, std::abs(res.v_hat[Index(i)] - v_true[Index(i)]) / std::abs(v_true[Index(i)]));
        }
        worst_J = std::max(worst_J, res.J);
        iterations += res.iterations;
    }
    require(worst_v <= 1e-3, "stationary free flux error " + fmt(worst_v));
    require(worst_J <= 1e-10, "stationary final J " + fmt(worst_J));

    CompiledNetwork sc = compile_network(scalar());
    PoolMap pm = make_pool_map(sc);
    TimeGrid g = make_grid(6.0, 61);
    const double v_star = 1.3, m_star = 2.2;
    InstationaryExperiment e;
    e.id = "pulse";
    e.input = input_cumomers(sc.doc, sc.basis, document_labels(sc.doc));
    e.observation = build_observation_matrices({{{"B", "1"}}, {}}, sc.doc, sc.basis);
    e.times = {0.5, 1.0, 2.0, 3.0, 6.0};
    Trajectory tr = integrate(sc, VectorXd::Constant(2, v_star), VectorXd::Constant(1, m_star), pm, e.input, {}, g);
    for (int node : measurement_nodes(g, e.times)) e.y_meas.push_back(e.observation.observe(tr.x[std::size_t(node)]));
    e.sigma = VectorXd::Constant(1, 0.01);
    e.flux_meas = VectorXd::Constant(1, v_star);
    InstationaryCost model(sc, {e}, g, {(MatrixXd(1, 2) << 1, 0).finished(), VectorXd::Constant(1, 0.01)}, 0.0);
    FitProblem prob;
    prob.model = &model;
    prob.constraints = balance_constraints(sc.doc);
    prob.v_start = VectorXd::Constant(2, 0.6);
    prob.pool_guess = VectorXd::Constant(1, 0.8);
    FitResult res = fit(prob);
    iterations += res.iterations;
    const double ev = std::abs(res.v_hat[0] - v_star) / v_star, em = std::abs(res.m_hat[0] - m_star) / m_star;
    require(ev <= 1e-2 && em <= 1e-2, "instationary errors v " + fmt(ev) + ", m " + fmt(em));
    const double t = seconds_since(t0);
    require(t < 30.0, "took " + fmt(t) + " s");
    return "stationary flux err " + fmt(worst_v) + ", J " + fmt(worst_J) + "; instationary v err " + fmt(ev) + ", m err " +
           fmt(em) + "; " + std::to_string(iterations) + " iterations, " + fmt(t) + " s";
}

bool identical(const Eigen::SparseMatrix<double>& a, const Eigen::SparseMatrix<double>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    MatrixXd da = a, db = b;
    return (da.array() == db.array()).all();
}

std::string ir_round_trip() {
    std::mt19937_64 rng(11);
    std::vector<std::string> xmls{branching_xml(), read_file(data_path("scalar.xml"))};
    for (int i = 0; i < 5; ++i) xmls.push_back(random_acyclic_network(rng).xml);
    xmls.push_back(chain_network(4, rng).xml);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::size_t draws = 0;
    for (const auto& xml : xmls) {
        CompiledNetwork net = compile_network(parse_network(xml));
        const std::string ir = emit_ir(net.program, net.doc.flux_names());
        for (int d = 0; d < 10; ++d, ++draws) {
            VectorXd v(Index(net.flux_count()));
            for (auto& x : v) x = u(rng);
            CumomerState x = random_state(net.basis, rng, false), xin = random_state(net.basis, rng, true);
            auto a = eval_ir(ir, v, x, xin), b = assemble(net.program, v, x, xin);
            require(a.size() == b.size(), "weight count differs");
            for (std::size_t k = 0; k < a.size(); ++k) {
                require(identical(a[k].M, b[k].M), "M differs");
                require((a[k].b.array() == b[k].b.array()).all(), "b differs");
                require((a[k].dfdv.array() == b[k].dfdv.array()).all(), "df/dv differs");
                for (std::size_t l = 0; l < a[k].dbdx.size(); ++l) require(identical(a[k].dbdx[l], b[k].dbdx[l]), "db/dx differs");
            }
        }
    }
    return std::to_string(xmls.size()) + " networks, " + std::to_string(draws) + " draws, bitwise equal";
}

std::string parser_fidelity() {
    NetworkDocument doc = branching();
    const char* ids[] = {"A", "D", "F", "G", "A_out"};
    const SpeciesKind kinds[] = {SpeciesKind::intermediate, SpeciesKind::intermediate, SpeciesKind::intermediate,
                                 SpeciesKind::output, SpeciesKind::input};
    const int carbons[] = {2, 1, 2, 2, 2};
    require(doc.species.size() == 5, "species count");
    for (std::size_t s = 0; s < 5; ++s) {
        require(doc.species[s].id == ids[s] && doc.species[s].kind == kinds[s] && doc.species[s].carbon_count == carbons[s],
                "species " + std::string(ids[s]));
    }
    require(doc.flux_names() == std::vector<std::string>{"v1", "v2", "v3", "v4", "v5", "v6"}, "flux names");
    require(doc.species[4].label_input.size() == 3 && doc.species[4].label_input[0].pattern == "01" &&
                doc.species[4].label_input[1].pattern == "10" && doc.species[4].label_input[2].pattern == "11",
            "A_out LABEL_INPUT");
    require(doc.species[2].label_measurement == std::vector<std::string>{"1x", "x1", "11"}, "F LABEL_MEASUREMENT");
    require(validate_network(doc).empty(), "validation reports problems");

    const std::string out = annotate_network(doc, enumerate_cumomers(doc));
    for (const char* frag : {"<smtb:cumomer id=\"A_1\" species=\"A\" weight=\"1\" pattern=\"x1\">",
                             "<smtb:cumomer id=\"A_2\" species=\"A\" weight=\"1\" pattern=\"1x\">",
                             "<smtb:cumomer id=\"A_3\" species=\"A\" weight=\"2\" pattern=\"11\">",
                             "<smtb:carbon position=\"2\" destination=\"1\" occurence=\"1\" species=\"D\"/>"}) {
        require(out.find(frag) != std::string::npos, std::string("missing fragment ") + frag);
    }
    xml::Element root = xml::parse(out);
    const xml::Element* inter = root.child("model")->child("listOfIntermediateCumomers");
    require(inter != nullptr, "no intermediate cumomer list");
    auto lists = inter->children_named("listOfCumomers");
    require(lists.size() == 2 && lists[0]->attribute("weight") == "1", "weight lists");
    auto cums = lists[0]->children_named("cumomer");
    const char* order[] = {"A_1", "A_2", "D_1", "F_1", "F_2"};
    require(cums.size() == 5, "weight-1 list size");
    for (std::size_t i = 0; i < 5; ++i) {
        require(cums[i]->attribute("id") == order[i] && cums[i]->attribute("position") == std::to_string(i + 1),
                "weight-1 position " + std::to_string(i + 1));
    }
    require(parse_network(out) == doc, "annotated document does not parse back");
    return "structure, labels, cumomer ids and positions 1-5 match";
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<std::string()>>> criteria{
        {"assembly oracle", assembly_oracle},
        {"all-ones fixed point", all_ones},
        {"isotopomer oracle equivalence", isotopomer_oracle},
        {"stationary gradient", stationary_gradient},
        {"discrete-adjoint exactness", discrete_adjoint},
        {"order-2 convergence", order_two},
        {"adjoint vs sensitivity economics", economics},
        {"output-sensitivity consistency", output_sensitivity_check},
        {"parametrization correctness", parametrization_check},
        {"fit recovery", fit_recovery},
        {"IR round trip", ir_round_trip},
        {"parser fidelity", parser_fidelity},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string status = "PASS", detail;
        try {
            detail = criteria[i].second();
        } catch (const Failed& f) {
            status = "FAIL";
            detail = f.what;
        } catch (const std::exception& e) {
            status = "FAIL";
            detail = std::string("exception: ") + e.what();
        }
        if (status == "FAIL") ++failures;
        std::printf("%s criterion %2zu  %-34s %s\n", status.c_str(), i + 1, criteria[i].first, detail.c_str());
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
