#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "labelflux/flux_space.hpp"
#include "labelflux/instationary.hpp"
#include "labelflux/optimizer.hpp"
#include "labelflux/stationary.hpp"

namespace labelflux {

struct ResidualRow {
    std::string experiment;
    std::string kind;  // "label" or "flux"
    std::size_t row = 0;
    double time = 0.0;  // 0 for stationary rows
    double measured = 0.0;
    double simulated = 0.0;
    double sigma = 1.0;

    [[nodiscard]] double weighted() const { return (simulated - measured) / sigma; }
};

/// What the fit driver needs from an engine: a cost with its gradient in
/// fluxes and pool sizes.
class CostModel {
public:
    virtual ~CostModel() = default;
    [[nodiscard]] virtual std::size_t flux_count() const = 0;
    [[nodiscard]] virtual std::size_t pool_count() const = 0;
    /// Gradient blocks are filled when the pointers are non-null.
    virtual double evaluate(const Eigen::VectorXd& v, const Eigen::VectorXd& pools, Eigen::VectorXd* dv,
                            Eigen::VectorXd* dm) const = 0;
    [[nodiscard]] virtual std::vector<ResidualRow> residuals(const Eigen::VectorXd& v,
                                                             const Eigen::VectorXd& pools) const = 0;
};

class StationaryCost final : public CostModel {
public:
    StationaryCost(const CompiledNetwork& net, std::vector<Experiment> experiments, FluxObservation flux_obs,
                   double epsilon);
    [[nodiscard]] std::size_t flux_count() const override { return net_.flux_count(); }
    [[nodiscard]] std::size_t pool_count() const override { return 0; }
    double evaluate(const Eigen::VectorXd& v, const Eigen::VectorXd& pools, Eigen::VectorXd* dv,
                    Eigen::VectorXd* dm) const override;
    [[nodiscard]] std::vector<ResidualRow> residuals(const Eigen::VectorXd& v, const Eigen::VectorXd& pools) const override;

private:
    const CompiledNetwork& net_;
    std::vector<Experiment> experiments_;
    FluxObservation flux_obs_;
    double epsilon_;
};

/// Sum of the instationary experiment costs plus flux observations and
/// eps/2 |v|^2. Experiments are integrated concurrently.
class InstationaryCost final : public CostModel {
public:
    InstationaryCost(const CompiledNetwork& net, std::vector<InstationaryExperiment> experiments, TimeGrid grid,
                     FluxObservation flux_obs, double epsilon);
    [[nodiscard]] std::size_t flux_count() const override { return net_.flux_count(); }
    [[nodiscard]] std::size_t pool_count() const override { return pools_.size(); }
    double evaluate(const Eigen::VectorXd& v, const Eigen::VectorXd& pools, Eigen::VectorXd* dv,
                    Eigen::VectorXd* dm) const override;
    [[nodiscard]] std::vector<ResidualRow> residuals(const Eigen::VectorXd& v, const Eigen::VectorXd& pools) const override;
    [[nodiscard]] const PoolMap& pool_map() const { return pools_; }
    [[nodiscard]] const TimeGrid& grid() const { return grid_; }

private:
    const CompiledNetwork& net_;
    PoolMap pools_;
    std::vector<InstationaryExperiment> experiments_;
    TimeGrid grid_;
    FluxObservation flux_obs_;
    double epsilon_;
};

struct FitProblem {
    const CostModel* model = nullptr;
    ConstraintSet constraints;
    ParamKind kind = ParamKind::freeflux;
    /// Free fluxes are optimized as r in [0, 1 - delta]; without a map they
    /// are optimized directly as q >= 0. Ignored for the orthonormal kind.
    std::optional<CompactMap> compact = CompactMap{};
    Eigen::VectorXd pool_guess;  // empty: all ones
    double pool_min = 1e-3;
    double pool_max = 1e3;
    std::optional<Eigen::VectorXd> v_start;  // default: centered admissible flux
    OptimizerOptions optimizer;
    double penalty_start = 10.0;
    double penalty_factor = 10.0;
    int penalty_rounds = 5;
    double feasibility_tolerance = 1e-9;  // scaled by 1 + |v|inf
};

struct Violation {
    std::size_t flux = 0;
    double value = 0.0;
};

struct FitResult {
    Eigen::VectorXd v_hat, m_hat, q_hat, r_hat;  // r_hat empty without compactification
    double J = 0.0;                              // model cost at the solution, no penalty
    std::vector<double> trace;                   // optimized objective per iteration
    std::vector<ResidualRow> residuals;
    std::vector<Violation> violations;  // below -feasibility_tolerance (1 + |v|inf)
    double max_violation = 0.0;
    int iterations = 0;
    int rounds = 0;
    double penalty = 0.0;
    OptimizerStatus status = OptimizerStatus::max_iterations;
    std::string message;
};

/// The cost in optimizer coordinates z = (r or q, log pools).
class ParametrizedCost {
public:
    explicit ParametrizedCost(const FitProblem& problem);

    [[nodiscard]] const Parametrization& parametrization() const { return param_; }
    [[nodiscard]] std::size_t flux_dim() const { return param_.dim(); }
    [[nodiscard]] std::size_t size() const { return param_.dim() + model_.pool_count(); }
    [[nodiscard]] bool compacted() const { return compact_.has_value(); }
    [[nodiscard]] const Eigen::VectorXd& lower() const { return lower_; }
    [[nodiscard]] const Eigen::VectorXd& upper() const { return upper_; }
    /// Fluxes whose nonnegativity is enforced by the penalty.
    [[nodiscard]] const std::vector<std::size_t>& penalized() const { return penalized_; }

    [[nodiscard]] Eigen::VectorXd q_of(const Eigen::VectorXd& z) const;
    [[nodiscard]] Eigen::VectorXd flux(const Eigen::VectorXd& z) const { return param_.flux(q_of(z)); }
    [[nodiscard]] Eigen::VectorXd pools(const Eigen::VectorXd& z) const;
    [[nodiscard]] Eigen::VectorXd start_point() const;

    /// Model cost plus penalty/2 sum min(0, v_i)^2 over penalized fluxes.
    [[nodiscard]] Evaluation evaluate(const Eigen::VectorXd& z, double penalty) const;
    [[nodiscard]] std::vector<Violation> violations(const Eigen::VectorXd& v, double tol) const;

private:
    const FitProblem& problem_;
    const CostModel& model_;
    Parametrization param_;
    std::optional<CompactMap> compact_;
    Eigen::VectorXd lower_, upper_;
    std::vector<std::size_t> penalized_;
};

/// Throws Error when the constraints admit no nonnegative flux.
FitResult fit(const FitProblem& problem);

struct GradientCheck {
    Eigen::VectorXd analytic, numeric, abs_error, rel_error;
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
};

/// Engine gradient against central differences of the parametrized cost
/// (penalty weight `penalty`) at z, which must lie strictly inside the box.
GradientCheck gradient_check(const ParametrizedCost& cost, const Eigen::VectorXd& z, double h_fd = 1e-6,
                             double penalty = 0.0);

}  // namespace labelflux
