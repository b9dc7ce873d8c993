#include "labelflux/lp.hpp"

#include <limits>
#include <vector>

#include "labelflux/error.hpp"

namespace labelflux::lp {

namespace {

using Eigen::Index;

class Tableau {
public:
    // Rows 0..m-1 are constraints, row m the objective; column n the rhs.
    Eigen::MatrixXd T;
    std::vector<Index> basis;

    void pivot(Index row, Index col) {
        T.row(row) /= T(row, col);
        for (Index i = 0; i < T.rows(); ++i) {
            if (i != row && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(row);
        }
        basis[static_cast<std::size_t>(row)] = col;
    }

    // Minimizes the objective row over columns [0, ncols). Returns false if unbounded.
    bool optimize(Index ncols, double tol) {
        const Index m = T.rows() - 1, rhs = T.cols() - 1;
        for (int iter = 0; iter < 100000; ++iter) {
            Index enter = -1;
            for (Index j = 0; j < ncols; ++j) {
                if (T(m, j) < -tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;
            Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < m; ++i) {
                if (T(i, enter) > tol) {
                    const double ratio = T(i, rhs) / T(i, enter);
                    if (ratio < best - tol ||
                        (ratio <= best + tol && leave >= 0 && basis[std::size_t(i)] < basis[std::size_t(leave)])) {
                        best = std::min(best, ratio);
                        leave = i;
                    }
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        throw Error("simplex iteration limit reached");
    }
};

}  // namespace

Result solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c, double tol) {
    const Index m = A.rows(), n = A.cols();
    if (b.size() != m || c.size() != n) throw DimensionError("lp: inconsistent dimensions");

    Tableau tab;
    tab.T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
    tab.basis.resize(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        const double s = b[i] < 0 ? -1.0 : 1.0;
        tab.T.row(i).head(n) = s * A.row(i);
        tab.T(i, n + i) = 1.0;
        tab.T(i, n + m) = s * b[i];
        tab.basis[std::size_t(i)] = n + i;
    }
    // Phase one: minimize the sum of artificials, expressed in nonbasic terms.
    for (Index i = 0; i < m; ++i) tab.T.row(m) -= tab.T.row(i);
    for (Index i = 0; i < m; ++i) tab.T(m, n + i) = 0.0;
    tab.optimize(n + m, tol);

    Result res;
    res.infeasibility = -tab.T(m, n + m);
    const double scale = 1.0 + b.cwiseAbs().maxCoeff() * (m > 0 ? 1.0 : 0.0);
    if (res.infeasibility > tol * scale * std::max<Index>(1, m)) {
        res.status = Status::infeasible;
        return res;
    }

    // Drive remaining artificials out of the basis; drop redundant rows.
    std::vector<Index> keep;
    for (Index i = 0; i < m; ++i) {
        if (tab.basis[std::size_t(i)] < n) {
            keep.push_back(i);
            continue;
        }
        Index col = -1;
        for (Index j = 0; j < n; ++j) {
            if (std::abs(tab.T(i, j)) > tol) {
                col = j;
                break;
            }
        }
        if (col >= 0) {
            tab.pivot(i, col);
            keep.push_back(i);
        }
    }
    Tableau two;
    const Index mk = static_cast<Index>(keep.size());
    two.T = Eigen::MatrixXd::Zero(mk + 1, n + 1);
    for (Index r = 0; r < mk; ++r) {
        two.T.row(r).head(n) = tab.T.row(keep[std::size_t(r)]).head(n);
        two.T(r, n) = tab.T(keep[std::size_t(r)], n + m);
        two.basis.push_back(tab.basis[std::size_t(keep[std::size_t(r)])]);
    }
    two.T.row(mk).head(n) = c.transpose();
    for (Index r = 0; r < mk; ++r) {
        const Index j = two.basis[std::size_t(r)];
        if (two.T(mk, j) != 0.0) two.T.row(mk) -= two.T(mk, j) * two.T.row(r);
    }
    const bool bounded = two.optimize(n, tol);

    res.x = Eigen::VectorXd::Zero(n);
    for (Index r = 0; r < mk; ++r) res.x[two.basis[std::size_t(r)]] = std::max(0.0, two.T(r, n));
    res.objective = c.dot(res.x);
    res.status = bounded ? Status::optimal : Status::unbounded;
    return res;
}

}  // namespace labelflux::lp
