#include "labelflux/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "labelflux/error.hpp"

namespace labelflux {

using Eigen::Index;
using Eigen::VectorXd;
using nlohmann::json;

std::string_view to_string(FitMode mode) { return mode == FitMode::stationary ? "stationary" : "instationary"; }

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw ParseError("config " + where + ": " + what);
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) bad(where, "expected an object");
    for (const auto& [k, _] : j.items()) {
        bool ok = false;
        for (const char* key : keys) ok = ok || k == key;
        if (!ok) bad(where, "unknown key '" + k + "'");
    }
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) bad(where, "expected a number");
    return j.get<double>();
}

std::string text(const json& j, const std::string& where) {
    if (!j.is_string()) bad(where, "expected a string");
    return j.get<std::string>();
}

std::vector<LabelFraction> fractions(const json& j, const std::string& where) {
    if (!j.is_object()) bad(where, "expected {pattern: fraction}");
    std::vector<LabelFraction> out;
    for (const auto& [pattern, f] : j.items()) out.push_back({pattern, number(f, where + "." + pattern)});
    return out;
}

std::map<std::string, std::vector<LabelFraction>> species_fractions(const json& j, const std::string& where) {
    if (!j.is_object()) bad(where, "expected {species: {pattern: fraction}}");
    std::map<std::string, std::vector<LabelFraction>> out;
    for (const auto& [sp, f] : j.items()) out[sp] = fractions(f, where + "." + sp);
    return out;
}

LinearRow linear_row(const json& j, const std::string& where, const char* value_key) {
    allow_keys(j, where, {"coefficients", value_key, "label"});
    LinearRow r;
    if (!j.contains("coefficients") || !j["coefficients"].is_object()) bad(where, "missing coefficients object");
    for (const auto& [name, c] : j["coefficients"].items()) r.coefficients[name] = number(c, where + ".coefficients");
    if (!j.contains(value_key)) bad(where, std::string("missing ") + value_key);
    r.value = number(j[value_key], where + "." + value_key);
    if (j.contains("label")) r.label = text(j["label"], where + ".label");
    return r;
}

std::map<std::string, double> named_numbers(const json& j, const std::string& where) {
    if (!j.is_object()) bad(where, "expected {name: number}");
    std::map<std::string, double> out;
    for (const auto& [k, v] : j.items()) out[k] = number(v, where + "." + k);
    return out;
}

ExperimentConfig experiment(const json& j, std::size_t index) {
    const std::string where = "experiments[" + std::to_string(index) + "]";
    allow_keys(j, where, {"id", "inputs", "initial", "times", "measurements", "flux_values"});
    ExperimentConfig e;
    e.id = j.contains("id") ? text(j["id"], where + ".id") : "experiment" + std::to_string(index + 1);
    if (j.contains("inputs")) e.inputs = species_fractions(j["inputs"], where + ".inputs");
    if (j.contains("initial")) e.initial = species_fractions(j["initial"], where + ".initial");
    if (j.contains("times")) {
        if (!j["times"].is_array()) bad(where + ".times", "expected an array");
        for (const auto& t : j["times"]) e.times.push_back(number(t, where + ".times"));
    }
    if (j.contains("measurements")) {
        if (!j["measurements"].is_array()) bad(where + ".measurements", "expected an array");
        for (std::size_t r = 0; r < j["measurements"].size(); ++r) {
            const json& m = j["measurements"][r];
            const std::string w = where + ".measurements[" + std::to_string(r) + "]";
            allow_keys(m, w, {"species", "pattern", "value", "values", "sigma"});
            MeasurementConfig mc;
            if (!m.contains("species") || !m.contains("pattern")) bad(w, "species and pattern are required");
            mc.species = text(m["species"], w + ".species");
            mc.pattern = text(m["pattern"], w + ".pattern");
            if (m.contains("value")) mc.values.push_back(number(m["value"], w + ".value"));
            if (m.contains("values")) {
                if (!m["values"].is_array()) bad(w + ".values", "expected an array");
                for (const auto& x : m["values"]) mc.values.push_back(number(x, w + ".values"));
            }
            if (m.contains("sigma")) mc.sigma = number(m["sigma"], w + ".sigma");
            if (!(mc.sigma > 0.0)) bad(w + ".sigma", "must be positive");
            e.measurements.push_back(std::move(mc));
        }
    }
    if (j.contains("flux_values")) {
        if (!j["flux_values"].is_array()) bad(where + ".flux_values", "expected an array");
        for (const auto& x : j["flux_values"]) e.flux_values.push_back(number(x, where + ".flux_values"));
    }
    return e;
}

std::size_t flux_of(const NetworkDocument& doc, const std::string& name, const std::string& where) {
    auto i = doc.flux_index(name);
    if (!i) throw Error(where + ": unknown flux '" + name + "'");
    return *i;
}

VectorXd coefficient_row(const NetworkDocument& doc, const LinearRow& r, const std::string& where) {
    VectorXd row = VectorXd::Zero(static_cast<Index>(doc.fluxes.size()));
    for (const auto& [name, c] : r.coefficients) row[Index(flux_of(doc, name, where))] += c;
    return row;
}

std::vector<std::vector<LabelFraction>> input_labels(const ExperimentConfig& e, const NetworkDocument& doc) {
    std::vector<std::vector<LabelFraction>> out(doc.species.size());
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        if (doc.species[s].kind == SpeciesKind::input) out[s] = doc.species[s].label_input;
    }
    for (const auto& [id, fr] : e.inputs) {
        auto s = doc.species_index(id);
        if (!s) throw Error("experiment " + e.id + ": unknown input species '" + id + "'");
        if (doc.species[*s].kind != SpeciesKind::input) throw Error("experiment " + e.id + ": '" + id + "' is not an input");
        out[*s] = fr;
    }
    return out;
}

CumomerState initial_state(const ExperimentConfig& e, const CompiledNetwork& net) {
    if (e.initial.empty()) return {};
    CumomerState x = net.basis.zero_state();
    for (const auto& [id, fr] : e.initial) {
        auto s = net.doc.species_index(id);
        if (!s || net.doc.species[*s].kind != SpeciesKind::intermediate) {
            throw Error("experiment " + e.id + ": initial labeling needs an intermediate species, got '" + id + "'");
        }
        const SpeciesDef& sp = net.doc.species[*s];
        std::vector<double> cum = cumomers_from_isotopomers(isotopomer_distribution(sp.carbon_count, fr, sp.id));
        for (Mask m = 1; m < (Mask{1} << sp.carbon_count); ++m) {
            const CumomerIndex c = *net.basis.find(*s, m);
            x[std::size_t(c.weight - 1)][Index(c.position - 1)] = cum[m];
        }
    }
    return x;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    allow_keys(j, "root",
               {"mode", "parametrization", "epsilon", "compact", "constraints", "flux_observations", "grid", "fluxes",
                "pools", "pool_bounds", "optimizer", "experiments"});
    RunConfig cfg;
    if (j.contains("mode")) {
        const std::string m = text(j["mode"], "mode");
        if (m == "stationary") cfg.mode = FitMode::stationary;
        else if (m == "instationary") cfg.mode = FitMode::instationary;
        else bad("mode", "expected stationary or instationary");
    }
    if (j.contains("parametrization")) {
        const std::string k = text(j["parametrization"], "parametrization");
        if (k == "freeflux") cfg.kind = ParamKind::freeflux;
        else if (k == "orthonormal") cfg.kind = ParamKind::orthonormal;
        else bad("parametrization", "expected freeflux or orthonormal");
    }
    if (j.contains("epsilon")) cfg.epsilon = number(j["epsilon"], "epsilon");
    if (cfg.epsilon < 0) bad("epsilon", "must be nonnegative");
    if (j.contains("compact")) {
        const json& c = j["compact"];
        if (c.is_boolean()) {
            if (!c.get<bool>()) cfg.compact.reset();
        } else {
            allow_keys(c, "compact", {"beta", "delta"});
            if (c.contains("beta")) cfg.compact->beta = number(c["beta"], "compact.beta");
            if (c.contains("delta")) cfg.compact->delta = number(c["delta"], "compact.delta");
            if (!(cfg.compact->beta > 0) || !(cfg.compact->delta > 0) || !(cfg.compact->delta < 0.5)) {
                bad("compact", "need beta > 0 and 0 < delta < 0.5");
            }
        }
    }
    auto rows = [&](const char* key, const char* value_key, std::vector<LinearRow>& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_array()) bad(key, "expected an array");
        for (std::size_t i = 0; i < j[key].size(); ++i) {
            out.push_back(linear_row(j[key][i], std::string(key) + "[" + std::to_string(i) + "]", value_key));
        }
    };
    rows("constraints", "rhs", cfg.constraints);
    rows("flux_observations", "alpha", cfg.flux_observations);
    for (const auto& r : cfg.flux_observations) {
        if (!(r.value > 0)) bad("flux_observations", "alpha must be positive");
    }
    if (j.contains("grid")) {
        allow_keys(j["grid"], "grid", {"T", "N"});
        if (j["grid"].contains("T")) cfg.T = number(j["grid"]["T"], "grid.T");
        if (j["grid"].contains("N")) {
            if (!j["grid"]["N"].is_number_integer()) bad("grid.N", "expected an integer");
            cfg.N = j["grid"]["N"].get<int>();
        }
    }
    if (j.contains("fluxes")) cfg.fluxes = named_numbers(j["fluxes"], "fluxes");
    if (j.contains("pools")) cfg.pools = named_numbers(j["pools"], "pools");
    if (j.contains("pool_bounds")) {
        const json& b = j["pool_bounds"];
        if (!b.is_array() || b.size() != 2) bad("pool_bounds", "expected [min, max]");
        cfg.pool_min = number(b[0], "pool_bounds");
        cfg.pool_max = number(b[1], "pool_bounds");
    }
    if (j.contains("optimizer")) {
        const json& o = j["optimizer"];
        allow_keys(o, "optimizer", {"max_iterations", "gradient_tolerance"});
        if (o.contains("max_iterations")) cfg.optimizer.max_iterations = o["max_iterations"].get<int>();
        if (o.contains("gradient_tolerance")) {
            cfg.optimizer.gradient_tolerance = number(o["gradient_tolerance"], "optimizer.gradient_tolerance");
        }
    }
    if (j.contains("experiments")) {
        if (!j["experiments"].is_array()) bad("experiments", "expected an array");
        for (std::size_t i = 0; i < j["experiments"].size(); ++i) cfg.experiments.push_back(experiment(j["experiments"][i], i));
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

ConstraintSet build_constraints(const RunConfig& cfg, const NetworkDocument& doc) {
    ConstraintSet cs = balance_constraints(doc);
    for (std::size_t i = 0; i < cfg.constraints.size(); ++i) {
        const LinearRow& r = cfg.constraints[i];
        cs.add_row(coefficient_row(doc, r, "constraint " + std::to_string(i + 1)), r.value,
                   r.label.empty() ? "constraint " + std::to_string(i + 1) : r.label);
    }
    return cs;
}

FluxObservation build_flux_observation(const RunConfig& cfg, const NetworkDocument& doc) {
    FluxObservation fo;
    const auto rows = static_cast<Index>(cfg.flux_observations.size());
    fo.E = Eigen::MatrixXd::Zero(rows, static_cast<Index>(doc.fluxes.size()));
    fo.alpha.resize(rows);
    for (Index i = 0; i < rows; ++i) {
        const LinearRow& r = cfg.flux_observations[std::size_t(i)];
        fo.E.row(i) = coefficient_row(doc, r, "flux observation " + std::to_string(i + 1)).transpose();
        fo.alpha[i] = r.value;
    }
    return fo;
}

ObservationSpec observation_spec(const ExperimentConfig& e) {
    ObservationSpec spec;
    for (const auto& m : e.measurements) {
        spec.rows.push_back({m.species, m.pattern});
        spec.sigma.push_back(m.sigma);
    }
    return spec;
}

namespace {

VectorXd flux_values(const RunConfig& cfg, const ExperimentConfig& e) {
    if (e.flux_values.empty()) return {};
    if (e.flux_values.size() != cfg.flux_observations.size()) {
        throw DimensionError("experiment " + e.id + ": flux_values needs one entry per flux observation row");
    }
    return Eigen::Map<const VectorXd>(e.flux_values.data(), static_cast<Index>(e.flux_values.size()));
}

}  // namespace

std::vector<Experiment> build_stationary(const RunConfig& cfg, const CompiledNetwork& net) {
    std::vector<Experiment> out;
    for (const ExperimentConfig& ec : cfg.experiments) {
        Experiment e;
        e.id = ec.id;
        e.input = input_cumomers(net.doc, net.basis, input_labels(ec, net.doc));
        const ObservationSpec spec = observation_spec(ec);
        e.observation = build_observation_matrices(spec, net.doc, net.basis);
        e.y_meas.resize(static_cast<Index>(ec.measurements.size()));
        e.sigma.resize(e.y_meas.size());
        for (std::size_t r = 0; r < ec.measurements.size(); ++r) {
            const MeasurementConfig& m = ec.measurements[r];
            if (m.values.size() > 1) throw Error("experiment " + ec.id + ": stationary measurements take one value");
            e.y_meas[Index(r)] = m.values.empty() ? 0.0 : m.values[0];
            e.sigma[Index(r)] = m.sigma;
        }
        e.flux_meas = flux_values(cfg, ec);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<InstationaryExperiment> build_instationary(const RunConfig& cfg, const CompiledNetwork& net) {
    std::vector<InstationaryExperiment> out;
    for (const ExperimentConfig& ec : cfg.experiments) {
        InstationaryExperiment e;
        e.id = ec.id;
        e.input = input_cumomers(net.doc, net.basis, input_labels(ec, net.doc));
        e.initial = initial_state(ec, net);
        const ObservationSpec spec = observation_spec(ec);
        e.observation = build_observation_matrices(spec, net.doc, net.basis);
        e.times = ec.times;
        e.sigma.resize(static_cast<Index>(ec.measurements.size()));
        for (std::size_t j = 0; j < ec.times.size(); ++j) e.y_meas.push_back(VectorXd::Zero(e.sigma.size()));
        for (std::size_t r = 0; r < ec.measurements.size(); ++r) {
            const MeasurementConfig& m = ec.measurements[r];
            if (!m.values.empty() && m.values.size() != ec.times.size()) {
                throw DimensionError("experiment " + ec.id + ": measurement " + m.species + " " + m.pattern +
                                     " needs one value per time");
            }
            for (std::size_t j = 0; j < m.values.size(); ++j) e.y_meas[j][Index(r)] = m.values[j];
            e.sigma[Index(r)] = m.sigma;
        }
        e.flux_meas = flux_values(cfg, ec);
        out.push_back(std::move(e));
    }
    return out;
}

TimeGrid build_grid(const RunConfig& cfg) {
    double T = cfg.T.value_or(0.0);
    if (!cfg.T) {
        for (const auto& e : cfg.experiments) {
            for (double t : e.times) T = std::max(T, t);
        }
    }
    return make_grid(T, cfg.N);
}

std::optional<VectorXd> build_fluxes(const RunConfig& cfg, const NetworkDocument& doc) {
    if (cfg.fluxes.empty()) return std::nullopt;
    VectorXd v(static_cast<Index>(doc.fluxes.size()));
    for (std::size_t i = 0; i < doc.fluxes.size(); ++i) {
        auto it = cfg.fluxes.find(doc.fluxes[i].name);
        if (it == cfg.fluxes.end()) throw Error("fluxes: no value for flux '" + doc.fluxes[i].name + "'");
        v[Index(i)] = it->second;
    }
    for (const auto& [name, _] : cfg.fluxes) (void)flux_of(doc, name, "fluxes");
    return v;
}

VectorXd build_pools(const RunConfig& cfg, const NetworkDocument& doc, const PoolMap& pools) {
    VectorXd m = VectorXd::Ones(static_cast<Index>(pools.size()));
    const std::vector<std::string> names = pools.names(doc);
    for (const auto& [id, value] : cfg.pools) {
        auto it = std::find(names.begin(), names.end(), id);
        if (it == names.end()) throw Error("pools: '" + id + "' is not a pool species");
        if (!(value > 0)) throw Error("pools: size of '" + id + "' must be positive");
        m[it - names.begin()] = value;
    }
    return m;
}

}  // namespace labelflux
