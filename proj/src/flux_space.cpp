#include "labelflux/flux_space.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "labelflux/error.hpp"
#include "labelflux/lp.hpp"

namespace labelflux {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void ConstraintSet::add_row(const VectorXd& coefficients, double rhs, std::string label) {
    if (coefficients.size() != A.cols()) throw DimensionError("constraint row has the wrong number of fluxes");
    A.conservativeResize(A.rows() + 1, Eigen::NoChange);
    A.row(A.rows() - 1) = coefficients.transpose();
    w.conservativeResize(w.size() + 1);
    w[w.size() - 1] = rhs;
    row_labels.push_back(std::move(label));
}

ConstraintSet balance_constraints(const NetworkDocument& doc) {
    ConstraintSet cs;
    const auto m = static_cast<Index>(doc.fluxes.size());
    std::vector<std::size_t> rows;
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        if (doc.species[s].kind == SpeciesKind::intermediate) rows.push_back(s);
    }
    cs.A = MatrixXd::Zero(static_cast<Index>(rows.size()), m);
    cs.w = VectorXd::Zero(static_cast<Index>(rows.size()));
    for (std::size_t j = 0; j < doc.fluxes.size(); ++j) {
        const DirectedReaction r = directed(doc, j);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (const auto& ref : r.products) cs.A(Index(i), Index(j)) += ref.species == rows[i] ? 1.0 : 0.0;
            for (const auto& ref : r.reactants) cs.A(Index(i), Index(j)) -= ref.species == rows[i] ? 1.0 : 0.0;
        }
    }
    for (std::size_t s : rows) cs.row_labels.push_back("balance " + doc.species[s].id);
    cs.balance_rows = rows.size();
    return cs;
}

namespace {

bool in_range(const MatrixXd& A, const VectorXd& w) {
    if (A.rows() == 0) return true;
    if (A.cols() == 0) return w.isZero();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    const VectorXd x = qr.solve(w);
    return (A * x - w).lpNorm<Eigen::Infinity>() <= 1e-10 * (1.0 + w.lpNorm<Eigen::Infinity>());
}

std::size_t numeric_rank(const MatrixXd& R, std::size_t m) {
    const Index d = std::min(R.rows(), R.cols());
    if (d == 0) return 0;
    const double top = std::abs(R(0, 0));
    const double tol = static_cast<double>(m) * std::numeric_limits<double>::epsilon() * top;
    std::size_t p = 0;
    for (Index i = 0; i < d; ++i) {
        if (std::abs(R(i, i)) > tol && top > 0.0) ++p;
    }
    return p;
}

void classify_rows(Parametrization& p) {
    const double vmax = p.V.size() ? p.V.cwiseAbs().maxCoeff() : 0.0;
    for (Index i = 0; i < p.V.rows(); ++i) {
        const double row = p.V.cols() ? p.V.row(i).cwiseAbs().maxCoeff() : 0.0;
        if (vmax == 0.0 || row <= 1e-12 * vmax) {
            p.blocked.push_back(static_cast<std::size_t>(i));
        } else {
            p.varying.push_back(static_cast<std::size_t>(i));
        }
    }
}

}  // namespace

Admissibility check_admissible(const MatrixXd& A, const VectorXd& w) {
    if (A.rows() != w.size()) throw DimensionError("A and w have different row counts");
    Admissibility out;
    if (!in_range(A, w)) {
        out.reason = Infeasibility::outside_range;
        out.message = "right-hand side is not in the range of the constraint matrix (inconsistent equalities)";
        return out;
    }
    lp::Result r = lp::solve(A, w, VectorXd::Zero(A.cols()));
    if (r.status == lp::Status::infeasible) {
        out.reason = Infeasibility::empty_polytope;
        out.message = "equalities are consistent but admit no nonnegative flux vector";
        return out;
    }
    out.feasible = true;
    out.witness = r.x;
    return out;
}

std::optional<VectorXd> centered_flux(const MatrixXd& A, const VectorXd& w, const std::vector<std::size_t>& indices,
                                      double cap) {
    // Variables (v, t, s, u): A v = w, v_i - t - s_i = 0, t + u = cap.
    const Index m = A.rows(), n = A.cols(), k = static_cast<Index>(indices.size());
    const Index cols = n + 1 + k + 1;
    MatrixXd B = MatrixXd::Zero(m + k + 1, cols);
    VectorXd rhs = VectorXd::Zero(m + k + 1);
    B.topLeftCorner(m, n) = A;
    rhs.head(m) = w;
    for (Index i = 0; i < k; ++i) {
        B(m + i, Index(indices[std::size_t(i)])) = 1.0;
        B(m + i, n) = -1.0;
        B(m + i, n + 1 + i) = -1.0;
    }
    B(m + k, n) = 1.0;
    B(m + k, cols - 1) = 1.0;
    rhs[m + k] = cap;
    VectorXd c = VectorXd::Zero(cols);
    c[n] = -1.0;
    lp::Result r = lp::solve(B, rhs, c);
    if (r.status != lp::Status::optimal) return std::nullopt;
    return VectorXd(r.x.head(n));
}

std::string_view to_string(ParamKind kind) { return kind == ParamKind::freeflux ? "freeflux" : "orthonormal"; }

VectorXd Parametrization::coordinates(const VectorXd& v) const {
    if (v.size() != V.rows()) throw DimensionError("flux vector has the wrong length");
    if (kind == ParamKind::freeflux) {
        VectorXd q(static_cast<Index>(free_idx.size()));
        for (std::size_t i = 0; i < free_idx.size(); ++i) q[Index(i)] = v[Index(free_idx[i])];
        return q;
    }
    return V.transpose() * (v - v0);
}

Parametrization parametrize(const MatrixXd& A, const VectorXd& w, ParamKind kind) {
    if (A.rows() != w.size()) throw DimensionError("A and w have different row counts");
    if (!in_range(A, w)) throw Error("flux constraints are inconsistent: w is not in the range of A");
    const Index m = A.cols();
    Parametrization p;
    p.kind = kind;

    if (kind == ParamKind::freeflux && A.rows() == 0) {
        p.V = MatrixXd::Identity(m, m);
        p.v0 = VectorXd::Zero(m);
        for (Index i = 0; i < m; ++i) p.free_idx.push_back(std::size_t(i));
    } else if (kind == ParamKind::freeflux) {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
        const MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
        const std::size_t rank = numeric_rank(R, std::size_t(m));
        const auto r = static_cast<Index>(rank);
        p.rank = rank;
        const auto& perm = qr.colsPermutation().indices();
        std::vector<Index> order(static_cast<std::size_t>(m));
        for (Index i = 0; i < m; ++i) order[std::size_t(i)] = perm[i];

        const VectorXd qtw = qr.householderQ().transpose() * w;
        const MatrixXd R1 = R.topLeftCorner(r, r);
        const MatrixXd R2 = R.topRightCorner(r, m - r);
        const auto R1t = R1.triangularView<Eigen::Upper>();
        const MatrixXd S = r ? MatrixXd(R1t.solve(R2)) : MatrixXd(0, m - r);
        const VectorXd z = r ? VectorXd(R1t.solve(qtw.head(r))) : VectorXd(0);

        // Free fluxes in ascending index order.
        std::vector<Index> free(order.begin() + r, order.end());
        std::vector<Index> col_of(static_cast<std::size_t>(m), -1);
        std::vector<Index> sorted_free = free;
        std::sort(sorted_free.begin(), sorted_free.end());
        for (std::size_t c = 0; c < sorted_free.size(); ++c) col_of[std::size_t(sorted_free[c])] = Index(c);

        p.V = MatrixXd::Zero(m, m - r);
        p.v0 = VectorXd::Zero(m);
        for (Index c = 0; c < m - r; ++c) {
            const Index flux = order[std::size_t(r + c)];
            const Index col = col_of[std::size_t(flux)];
            p.V(flux, col) = 1.0;
            for (Index i = 0; i < r; ++i) p.V(order[std::size_t(i)], col) = -S(i, c);
        }
        for (Index i = 0; i < r; ++i) p.v0[order[std::size_t(i)]] = z[i];
        for (Index f : sorted_free) p.free_idx.push_back(std::size_t(f));
        for (Index i = 0; i < r; ++i) p.dep_idx.push_back(std::size_t(order[std::size_t(i)]));
        std::sort(p.dep_idx.begin(), p.dep_idx.end());
    } else {
        if (A.rows() == 0) {
            p.V = MatrixXd::Identity(m, m);
            p.v0 = VectorXd::Zero(m);
        } else {
            const MatrixXd At = A.transpose();
            Eigen::ColPivHouseholderQR<MatrixXd> qr(At);
            const MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
            const std::size_t rank = numeric_rank(R, std::size_t(m));
            const auto r = static_cast<Index>(rank);
            p.rank = rank;
            const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(m, m);
            p.V = Q.rightCols(m - r);
            // A Q1 z = w reduces to R11' z = (P'w) restricted to the pivot rows.
            const VectorXd pw = qr.colsPermutation().transpose() * w;
            const VectorXd z = r ? VectorXd(R.topLeftCorner(r, r).transpose().triangularView<Eigen::Lower>().solve(pw.head(r)))
                                 : VectorXd(0);
            p.v0 = Q.leftCols(r) * z;
        }
    }
    classify_rows(p);
    return p;
}

VectorXd compactify(const VectorXd& q, const CompactMap& map) {
    if (!(map.beta > 0.0)) throw Error("compactification scale beta must be positive");
    VectorXd r(q.size());
    for (Index i = 0; i < q.size(); ++i) {
        if (q[i] < 0.0) throw Error("compactify: negative free flux " + std::to_string(q[i]));
        r[i] = q[i] / (map.beta + q[i]);
    }
    return r;
}

VectorXd decompactify(const VectorXd& r, const CompactMap& map) {
    VectorXd q(r.size());
    for (Index i = 0; i < r.size(); ++i) {
        if (r[i] >= 1.0 || r[i] < 0.0) throw Error("decompactify: r must lie in [0, 1), got " + std::to_string(r[i]));
        q[i] = map.beta * r[i] / (1.0 - r[i]);
    }
    return q;
}

VectorXd compact_jacobian(const VectorXd& r, const CompactMap& map) {
    VectorXd d(r.size());
    for (Index i = 0; i < r.size(); ++i) {
        if (r[i] >= 1.0) throw Error("compact_jacobian: r must be below 1");
        d[i] = map.beta / ((1.0 - r[i]) * (1.0 - r[i]));
    }
    return d;
}

VectorXd chain_gradient(const Parametrization& param, const VectorXd& grad_v, const std::optional<VectorXd>& r,
                        const CompactMap& map) {
    if (grad_v.size() != param.V.rows()) throw DimensionError("gradient has the wrong length");
    VectorXd g = param.V.transpose() * grad_v;
    if (r) {
        if (r->size() != g.size()) throw DimensionError("r has the wrong length");
        g = g.cwiseProduct(compact_jacobian(*r, map));
    }
    return g;
}

}  // namespace labelflux
