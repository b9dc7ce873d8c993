#include <CLI11.hpp>
#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "labelflux/annotate.hpp"
#include "labelflux/config.hpp"
#include "labelflux/error.hpp"
#include "labelflux/ir.hpp"

using namespace labelflux;
using Eigen::Index;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

struct Options {
    std::string network;
    std::string config;
    std::string output;
    std::string mode;
    std::string param;
    std::optional<double> epsilon, beta, delta;
    bool no_compact = false;
    std::string fill_config;
    double fd_step = 1e-6;
};

json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const Options& o, const std::string& text) {
    if (o.output.empty() || o.output == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(o.output);
    if (!out) throw Error("cannot write " + o.output);
    out << text;
}

void write_report(const Options& o, const json& report) {
    if (o.output.empty()) return;
    write_output(o, report.dump(2) + "\n");
}

RunConfig config_of(const Options& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.mode == "stationary") cfg.mode = FitMode::stationary;
    if (o.mode == "instationary") cfg.mode = FitMode::instationary;
    if (o.param == "freeflux") cfg.kind = ParamKind::freeflux;
    if (o.param == "orthonormal") cfg.kind = ParamKind::orthonormal;
    if (o.epsilon) cfg.epsilon = *o.epsilon;
    if (o.no_compact) cfg.compact.reset();
    if ((o.beta || o.delta) && !cfg.compact) cfg.compact = CompactMap{};
    if (o.beta) cfg.compact->beta = *o.beta;
    if (o.delta) cfg.compact->delta = *o.delta;
    return cfg;
}

void require_config(const Options& o) {
    if (o.config.empty()) throw Error("this command needs --config");
}

VectorXd fluxes_or_centered(const RunConfig& cfg, const NetworkDocument& doc) {
    if (auto v = build_fluxes(cfg, doc)) return *v;
    const ConstraintSet cs = build_constraints(cfg, doc);
    std::vector<std::size_t> all(doc.fluxes.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto v = centered_flux(cs.A, cs.w, all);
    if (!v) throw Error("constraints admit no nonnegative flux");
    return *v;
}

std::string row_name(const MeasurementConfig& m) { return m.species + "#" + m.pattern; }

// --- subcommands -----------------------------------------------------------

int cmd_validate(const Options& o) {
    NetworkDocument doc = load_network(o.network);
    ValidationReport rep = validate_network(doc);
    json report{{"model", doc.model_id},
                {"species", doc.species.size()},
                {"reactions", doc.reactions.size()},
                {"fluxes", doc.flux_names()},
                {"problems", rep.lines()}};
    std::cout << "model " << doc.model_id << ": " << doc.species.size() << " species, " << doc.reactions.size()
              << " reactions, " << doc.fluxes.size() << " fluxes\n";
    for (const auto& s : doc.species) std::cout << "  " << std::setw(10) << std::left << s.id << to_string(s.kind) << ", " << s.carbon_count << " C\n";
    for (const auto& line : rep.lines()) std::cout << "  ! " << line << "\n";
    bool ok = rep.carbon_mismatch.empty();
    if (!o.config.empty()) {
        RunConfig cfg = config_of(o);
        CompiledNetwork net = compile_network(doc);
        ConstraintSet cs = build_constraints(cfg, doc);
        Admissibility adm = check_admissible(cs.A, cs.w);
        if (cfg.mode == FitMode::stationary) {
            (void)build_stationary(cfg, net);
        } else {
            for (const auto& e : build_instationary(cfg, net)) (void)measurement_nodes(build_grid(cfg), e.times);
        }
        report["config"] = {{"mode", to_string(cfg.mode)},
                            {"experiments", cfg.experiments.size()},
                            {"admissible", adm.feasible},
                            {"admissibility", adm.message}};
        std::cout << "config: " << to_string(cfg.mode) << ", " << cfg.experiments.size() << " experiment(s), constraints "
                  << (adm.feasible ? "admissible" : "infeasible: " + adm.message) << "\n";
        ok = ok && adm.feasible;
    }
    write_report(o, report);
    return ok ? 0 : 1;
}

int cmd_enumerate(const Options& o) {
    CompiledNetwork net = compile_network(load_network(o.network));
    json report = json::object();
    auto list = [&](bool input) {
        json out = json::array();
        for (int k = 1; k <= net.basis.max_weight(); ++k) {
            const auto& cls = input ? net.basis.inputs(k) : net.basis.intermediates(k);
            for (const auto& c : cls) {
                const SpeciesDef& sp = net.doc.species[c.species];
                const std::string id = cumomer_id(sp.id, c.mask);
                const std::string pattern = cumomer_pattern(c.mask, sp.carbon_count);
                out.push_back({{"id", id}, {"species", sp.id}, {"weight", k}, {"position", c.position}, {"pattern", pattern}});
                std::cout << (input ? "input " : "      ") << "w" << k << " " << std::setw(4) << std::right << c.position << "  "
                          << std::setw(12) << std::left << id << pattern << "\n";
            }
        }
        return out;
    };
    report["intermediate"] = list(false);
    report["input"] = list(true);
    write_report(o, report);
    return 0;
}

int cmd_emit_ir(const Options& o) {
    CompiledNetwork net = compile_network(load_network(o.network));
    write_output(o, emit_ir(net.program, net.doc.flux_names()));
    return 0;
}

int cmd_annotate(const Options& o) {
    CompiledNetwork net = compile_network(load_network(o.network));
    write_output(o, annotate_network(net.doc, net.basis));
    return 0;
}

int cmd_assemble(const Options& o) {
    CompiledNetwork net = compile_network(load_network(o.network));
    RunConfig cfg = config_of(o);
    const VectorXd v = fluxes_or_centered(cfg, net.doc);
    CumomerState xin = cfg.experiments.empty()
                           ? input_cumomers(net.doc, net.basis, std::vector<std::vector<LabelFraction>>(net.doc.species.size()))
                           : build_stationary(cfg, net).front().input;
    StationaryResult sol = solve_stationary(net, v, xin);
    json report{{"fluxes", to_json(v)}, {"weights", json::array()}};
    for (int k = 1; k <= net.max_weight(); ++k) {
        const WeightProgram& wp = net.program.weight(k);
        Eigen::SparseMatrix<double> M = assemble_matrix(wp, v);
        VectorXd b = assemble_rhs(wp, v, sol.x, xin);
        json trip = json::array();
        std::cout << "weight " << k << ": M " << M.rows() << "x" << M.cols() << ", " << M.nonZeros() << " nonzeros\n";
        for (Index c = 0; c < M.outerSize(); ++c) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(M, c); it; ++it) {
                trip.push_back({it.row() + 1, it.col() + 1, it.value()});
                std::cout << "  M(" << it.row() + 1 << "," << it.col() + 1 << ") = " << it.value() << "\n";
            }
        }
        for (Index r = 0; r < b.size(); ++r) std::cout << "  b(" << r + 1 << ") = " << b[r] << "\n";
        report["weights"].push_back({{"weight", k}, {"M", trip}, {"b", to_json(b)}, {"x", to_json(sol.x[std::size_t(k - 1)])}});
    }
    write_report(o, report);
    return 0;
}

// Simulated measurement values per experiment; also copies them into a config.
int cmd_simulate(const Options& o) {
    require_config(o);
    CompiledNetwork net = compile_network(load_network(o.network));
    RunConfig cfg = config_of(o);
    const VectorXd v = fluxes_or_centered(cfg, net.doc);
    json report{{"mode", to_string(cfg.mode)}, {"fluxes", to_json(v)}, {"experiments", json::array()}};
    json filled = json::parse(read_text(o.config));

    for (std::size_t i = 0; i < cfg.experiments.size(); ++i) {
        const ExperimentConfig& ec = cfg.experiments[i];
        json rows = json::array();
        std::cout << "experiment " << ec.id << "\n";
        if (cfg.mode == FitMode::stationary) {
            const Experiment e = build_stationary(cfg, net)[i];
            StationaryResult sol = solve_stationary(net, v, e.input);
            for (const auto& w : sol.warnings) std::cout << "  ! " << w << "\n";
            const VectorXd y = e.observation.observe(sol.x);
            for (std::size_t r = 0; r < ec.measurements.size(); ++r) {
                rows.push_back({{"species", ec.measurements[r].species}, {"pattern", ec.measurements[r].pattern}, {"value", y[Index(r)]}});
                filled["experiments"][i]["measurements"][r]["value"] = y[Index(r)];
                std::cout << "  " << std::setw(12) << std::left << row_name(ec.measurements[r]) << std::setprecision(10) << y[Index(r)] << "\n";
            }
        } else {
            const TimeGrid grid = build_grid(cfg);
            PoolMap pm = make_pool_map(net);
            const VectorXd m = build_pools(cfg, net.doc, pm);
            const InstationaryExperiment e = build_instationary(cfg, net)[i];
            Trajectory tr = integrate(net, v, m, pm, e.input, e.initial, grid);
            const std::vector<int> nodes = measurement_nodes(grid, e.times);
            for (std::size_t r = 0; r < ec.measurements.size(); ++r) {
                std::vector<double> values;
                for (int node : nodes) values.push_back(e.observation.observe(tr.x[std::size_t(node)])[Index(r)]);
                rows.push_back({{"species", ec.measurements[r].species}, {"pattern", ec.measurements[r].pattern}, {"values", values}});
                filled["experiments"][i]["measurements"][r].erase("value");
                filled["experiments"][i]["measurements"][r]["values"] = values;
                std::cout << "  " << std::setw(12) << std::left << row_name(ec.measurements[r]);
                for (double x : values) std::cout << " " << std::setprecision(8) << x;
                std::cout << "\n";
            }
            report["pools"] = to_json(m);
            report["times"] = e.times;
        }
        const FluxObservation fo = build_flux_observation(cfg, net.doc);
        if (fo.rows()) filled["experiments"][i]["flux_values"] = to_json(fo.E * v);
        report["experiments"].push_back({{"id", ec.id}, {"measurements", rows}});
    }
    if (!o.fill_config.empty()) {
        std::ofstream out(o.fill_config);
        if (!out) throw Error("cannot write " + o.fill_config);
        out << std::setprecision(17) << filled.dump(2) << "\n";
    }
    write_report(o, report);
    return 0;
}

struct Model {
    CompiledNetwork net;
    RunConfig cfg;
    std::unique_ptr<CostModel> cost;
    PoolMap pools;
};

std::unique_ptr<Model> make_model(const Options& o) {
    require_config(o);
    auto m = std::make_unique<Model>();
    m->net = compile_network(load_network(o.network));
    m->cfg = config_of(o);
    const FluxObservation fo = build_flux_observation(m->cfg, m->net.doc);
    if (m->cfg.mode == FitMode::stationary) {
        m->cost = std::make_unique<StationaryCost>(m->net, build_stationary(m->cfg, m->net), fo, m->cfg.epsilon);
    } else {
        m->pools = make_pool_map(m->net);
        m->cost = std::make_unique<InstationaryCost>(m->net, build_instationary(m->cfg, m->net), build_grid(m->cfg), fo,
                                                     m->cfg.epsilon);
    }
    return m;
}

FitProblem problem_of(const Model& m) {
    FitProblem p;
    p.model = m.cost.get();
    p.constraints = build_constraints(m.cfg, m.net.doc);
    p.kind = m.cfg.kind;
    p.compact = m.cfg.compact;
    p.v_start = build_fluxes(m.cfg, m.net.doc);
    if (m.cfg.mode == FitMode::instationary) p.pool_guess = build_pools(m.cfg, m.net.doc, m.pools);
    p.pool_min = m.cfg.pool_min;
    p.pool_max = m.cfg.pool_max;
    p.optimizer = m.cfg.optimizer;
    return p;
}

int cmd_fit(const Options& o) {
    auto m = make_model(o);
    FitProblem prob = problem_of(*m);
    FitResult res = fit(prob);
    const auto names = m->net.doc.flux_names();
    json report{{"status", to_string(res.status)},
                {"message", res.message},
                {"J", res.J},
                {"iterations", res.iterations},
                {"penalty_rounds", res.rounds},
                {"trace", res.trace},
                {"q", to_json(res.q_hat)},
                {"r", to_json(res.r_hat)},
                {"max_violation", res.max_violation}};
    std::cout << "status " << to_string(res.status) << " after " << res.iterations << " iterations, J = " << std::setprecision(6)
              << res.J << "\n\nflux            value\n";
    json fluxes = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) {
        fluxes[names[i]] = res.v_hat[Index(i)];
        std::cout << std::setw(12) << std::left << names[i] << std::setw(14) << std::right << std::setprecision(8)
                  << res.v_hat[Index(i)] << "\n";
    }
    report["fluxes"] = fluxes;
    if (res.m_hat.size()) {
        json pools = json::object();
        std::cout << "\npool            size\n";
        const auto pn = m->pools.names(m->net.doc);
        for (std::size_t i = 0; i < pn.size(); ++i) {
            pools[pn[i]] = res.m_hat[Index(i)];
            std::cout << std::setw(12) << std::left << pn[i] << std::setw(14) << std::right << res.m_hat[Index(i)] << "\n";
        }
        report["pools"] = pools;
    }
    json residuals = json::array();
    std::cout << "\nexperiment  kind   row      time      measured     simulated   weighted\n";
    for (const auto& r : res.residuals) {
        residuals.push_back({{"experiment", r.experiment}, {"kind", r.kind}, {"row", r.row + 1}, {"time", r.time},
                             {"measured", r.measured}, {"simulated", r.simulated}, {"sigma", r.sigma}, {"weighted", r.weighted()}});
        std::cout << std::setw(12) << std::left << r.experiment << std::setw(7) << r.kind << std::setw(5) << r.row + 1
                  << std::setw(9) << std::right << std::setprecision(4) << r.time << std::setw(14) << std::setprecision(8)
                  << r.measured << std::setw(14) << r.simulated << std::setw(11) << std::setprecision(3) << r.weighted() << "\n";
    }
    report["residuals"] = residuals;
    json viol = json::array();
    for (const auto& v : res.violations) {
        viol.push_back({{"flux", names[v.flux]}, {"value", v.value}});
        std::cout << "! inequality violated: " << names[v.flux] << " = " << v.value << "\n";
    }
    report["violations"] = viol;
    write_report(o, report);
    return res.status == OptimizerStatus::evaluation_failed ? 1 : 0;
}

int cmd_gradcheck(const Options& o) {
    auto m = make_model(o);
    FitProblem prob = problem_of(*m);
    ParametrizedCost pc(prob);
    const VectorXd z = pc.start_point();
    GradientCheck gc = gradient_check(pc, z, o.fd_step);
    std::cout << "coord      analytic       numeric     rel.err\n";
    for (Index i = 0; i < z.size(); ++i) {
        const bool pool = i >= Index(pc.flux_dim());
        std::cout << (pool ? "logm" : (pc.compacted() ? "r" : "q")) << std::setw(4) << std::left
                  << (pool ? i - Index(pc.flux_dim()) : i) + 1 << std::setw(14) << std::right << std::setprecision(6)
                  << gc.analytic[i] << std::setw(14) << gc.numeric[i] << std::setw(12) << std::setprecision(2)
                  << gc.rel_error[i] << "\n";
    }
    std::cout << "max relative error " << gc.max_rel_error << ", max absolute error " << gc.max_abs_error << "\n";
    write_report(o, {{"point", to_json(z)},
                     {"analytic", to_json(gc.analytic)},
                     {"numeric", to_json(gc.numeric)},
                     {"rel_error", to_json(gc.rel_error)},
                     {"max_rel_error", gc.max_rel_error},
                     {"max_abs_error", gc.max_abs_error}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"13C cumomer cascade compiler, simulator and flux fitter"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool config_used) {
        sub->add_option("--network,-n", o.network, "network SBML file")->required()->check(CLI::ExistingFile);
        if (config_used) sub->add_option("--config,-c", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--output,-o", o.output, "report / output file");
    };
    auto modes = [&](CLI::App* sub) {
        sub->add_option("--mode", o.mode, "override the config mode")->check(CLI::IsMember({"stationary", "instationary"}));
        sub->add_option("--param", o.param, "parametrization kind")->check(CLI::IsMember({"freeflux", "orthonormal"}));
        sub->add_option("--epsilon", o.epsilon, "regularization weight");
        sub->add_option("--beta", o.beta, "compactification scale");
        sub->add_option("--delta", o.delta, "compactification margin");
        sub->add_flag("--no-compact", o.no_compact, "optimize free fluxes directly");
    };

    auto* validate = app.add_subcommand("validate", "parse and check a network (and config)");
    common(validate, true);
    modes(validate);
    auto* enumerate = app.add_subcommand("enumerate", "list cumomers by weight");
    common(enumerate, true);
    auto* assemble = app.add_subcommand("assemble", "evaluate M_k and b_k at the config fluxes");
    common(assemble, true);
    auto* emit = app.add_subcommand("emit-ir", "write the cascade program");
    common(emit, true);
    auto* annotate = app.add_subcommand("annotate", "write the annotated network");
    common(annotate, true);
    auto* simulate = app.add_subcommand("simulate", "simulate the configured measurements");
    common(simulate, true);
    modes(simulate);
    simulate->add_option("--fill-config", o.fill_config, "write the config with simulated values");
    auto* fitcmd = app.add_subcommand("fit", "estimate fluxes (and pool sizes)");
    common(fitcmd, true);
    modes(fitcmd);
    auto* grad = app.add_subcommand("gradcheck", "compare the gradient with finite differences");
    common(grad, true);
    modes(grad);
    grad->add_option("--step", o.fd_step, "finite-difference step");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*validate) return cmd_validate(o);
        if (*enumerate) return cmd_enumerate(o);
        if (*assemble) return cmd_assemble(o);
        if (*emit) return cmd_emit_ir(o);
        if (*annotate) return cmd_annotate(o);
        if (*simulate) return cmd_simulate(o);
        if (*fitcmd) return cmd_fit(o);
        if (*grad) return cmd_gradcheck(o);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
