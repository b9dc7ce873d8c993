#pragma once

#include <Eigen/Core>

namespace labelflux::lp {

enum class Status { optimal, infeasible, unbounded };

struct Result {
    Status status = Status::infeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    /// Phase-one optimum: sum of artificial variables (0 when feasible).
    double infeasibility = 0.0;
};

/// min c'x subject to Ax = b, x >= 0. Dense two-phase tableau simplex with
/// Bland's rule, meant for the small systems of flux balances.
Result solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c, double tol = 1e-9);

}  // namespace labelflux::lp
