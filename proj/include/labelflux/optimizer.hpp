#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace labelflux {

struct Evaluation {
    double f = 0.0;
    Eigen::VectorXd g;
};

/// Cost and gradient at a point. Throwing labelflux::Error marks the point
/// as unusable; the line search then backs off.
using Objective = std::function<Evaluation(const Eigen::VectorXd&)>;

struct OptimizerOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-7;  // on the projected gradient, infinity norm
    int memory = 10;
    double armijo = 1e-4;
    int max_backtracks = 60;
};

enum class OptimizerStatus { converged, max_iterations, line_search_failed, evaluation_failed };

std::string_view to_string(OptimizerStatus status);

struct OptimizeResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd g;
    double projected_gradient = 0.0;
    int iterations = 0;
    int evaluations = 0;
    std::vector<double> trace;  // f at the start point and after every iteration
    OptimizerStatus status = OptimizerStatus::max_iterations;
    std::string message;
};

/// Projected (limited-memory) quasi-Newton descent on lower <= x <= upper.
/// Every iterate lies in the box; infinite bounds are allowed.
OptimizeResult minimize_box(const Objective& fn, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, const OptimizerOptions& options = {});

}  // namespace labelflux
