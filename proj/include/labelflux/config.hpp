#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labelflux/fit.hpp"

namespace labelflux {

enum class FitMode { stationary, instationary };

std::string_view to_string(FitMode mode);

struct MeasurementConfig {
    std::string species;
    std::string pattern;
    std::vector<double> values;  // one per experiment time; one value when stationary
    double sigma = 1.0;
};

struct ExperimentConfig {
    std::string id;
    /// Input labeling per species id; species not listed use the fractions
    /// written in the network file.
    std::map<std::string, std::vector<LabelFraction>> inputs;
    /// Labeling of intermediates at t = 0 (instationary); unlisted pools start unlabeled.
    std::map<std::string, std::vector<LabelFraction>> initial;
    std::vector<double> times;
    std::vector<MeasurementConfig> measurements;
    std::vector<double> flux_values;  // one per flux observation row
};

struct LinearRow {
    std::map<std::string, double> coefficients;  // flux name -> coefficient
    double value = 0.0;                          // rhs, or alpha for flux observations
    std::string label;
};

/// Experiment configuration, read from JSON. See README for the schema.
struct RunConfig {
    FitMode mode = FitMode::stationary;
    ParamKind kind = ParamKind::freeflux;
    double epsilon = 0.0;
    std::optional<CompactMap> compact = CompactMap{};
    std::vector<LinearRow> constraints;
    std::vector<LinearRow> flux_observations;
    std::optional<double> T;
    int N = 101;
    std::map<std::string, double> fluxes;  // evaluation / start point
    std::map<std::string, double> pools;
    double pool_min = 1e-3;
    double pool_max = 1e3;
    OptimizerOptions optimizer;
    std::vector<ExperimentConfig> experiments;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Balances plus the user equality rows.
ConstraintSet build_constraints(const RunConfig& cfg, const NetworkDocument& doc);
FluxObservation build_flux_observation(const RunConfig& cfg, const NetworkDocument& doc);
std::vector<Experiment> build_stationary(const RunConfig& cfg, const CompiledNetwork& net);
std::vector<InstationaryExperiment> build_instationary(const RunConfig& cfg, const CompiledNetwork& net);
/// T defaults to the latest measurement time.
TimeGrid build_grid(const RunConfig& cfg);
/// Flux vector from `fluxes`; nullopt when not given. Throws for missing entries.
std::optional<Eigen::VectorXd> build_fluxes(const RunConfig& cfg, const NetworkDocument& doc);
/// Pool sizes in pool-map order; unlisted pools default to 1.
Eigen::VectorXd build_pools(const RunConfig& cfg, const NetworkDocument& doc, const PoolMap& pools);
ObservationSpec observation_spec(const ExperimentConfig& e);

}  // namespace labelflux
