#include "labelflux/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "labelflux/error.hpp"

namespace labelflux {

using Eigen::Index;
using Eigen::VectorXd;

std::string_view to_string(OptimizerStatus status) {
    switch (status) {
        case OptimizerStatus::converged: return "converged";
        case OptimizerStatus::max_iterations: return "max_iterations";
        case OptimizerStatus::line_search_failed: return "line_search_failed";
        case OptimizerStatus::evaluation_failed: return "evaluation_failed";
    }
    return "unknown";
}

namespace {

VectorXd project(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

struct Pair {
    VectorXd s, y;
    double rho;
};

// Two-loop recursion restricted to the coordinates in `free`.
VectorXd lbfgs_direction(const VectorXd& g, const std::deque<Pair>& mem, const Eigen::ArrayXd& free) {
    std::vector<VectorXd> s, y;
    for (const Pair& p : mem) {
        s.push_back(p.s.array() * free);
        y.push_back(p.y.array() * free);
    }
    VectorXd q = g.array() * free;
    std::vector<double> alpha(mem.size());
    for (std::size_t i = mem.size(); i-- > 0;) {
        alpha[i] = mem[i].rho * s[i].dot(q);
        q -= alpha[i] * y[i];
    }
    double gamma = 1.0;
    if (!mem.empty()) {
        const double yy = y.back().squaredNorm();
        if (yy > 0) gamma = s.back().dot(y.back()) / yy;
        if (!(gamma > 0)) gamma = 1.0;
    }
    VectorXd r = gamma * q;
    for (std::size_t i = 0; i < mem.size(); ++i) {
        const double beta = mem[i].rho * y[i].dot(r);
        r += (alpha[i] - beta) * s[i];
    }
    return -r;
}

}  // namespace

OptimizeResult minimize_box(const Objective& fn, VectorXd x0, const VectorXd& lower, const VectorXd& upper,
                            const OptimizerOptions& options) {
    if (lower.size() != x0.size() || upper.size() != x0.size()) throw DimensionError("bounds do not match the start point");
    if ((lower.array() > upper.array()).any()) throw Error("lower bound above upper bound");

    OptimizeResult res;
    res.x = project(x0, lower, upper);
    auto evaluate = [&](const VectorXd& x, Evaluation& out) {
        ++res.evaluations;
        try {
            out = fn(x);
        } catch (const Error&) {
            return false;
        }
        return std::isfinite(out.f) && out.g.allFinite();
    };

    Evaluation cur;
    if (!evaluate(res.x, cur)) {
        res.status = OptimizerStatus::evaluation_failed;
        res.message = "cost could not be evaluated at the start point";
        return res;
    }
    res.trace.push_back(cur.f);
    std::deque<Pair> mem;
    const Index n = res.x.size();

    auto projected_gradient = [&](const VectorXd& x, const VectorXd& g) {
        return n ? (project(x - g, lower, upper) - x).lpNorm<Eigen::Infinity>() : 0.0;
    };

    for (;;) {
        res.projected_gradient = projected_gradient(res.x, cur.g);
        if (res.projected_gradient <= options.gradient_tolerance) {
            res.status = OptimizerStatus::converged;
            break;
        }
        if (res.iterations >= options.max_iterations) {
            res.status = OptimizerStatus::max_iterations;
            res.message = "iteration budget exhausted";
            break;
        }

        Eigen::ArrayXd free = Eigen::ArrayXd::Ones(n);
        for (Index i = 0; i < n; ++i) {
            if ((res.x[i] <= lower[i] && cur.g[i] > 0) || (res.x[i] >= upper[i] && cur.g[i] < 0)) free[i] = 0.0;
        }

        bool accepted = false;
        Evaluation next;
        VectorXd xn;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            VectorXd d = lbfgs_direction(cur.g, mem, free);
            if (!(cur.g.dot(d) < 0)) {
                mem.clear();
                d = -(cur.g.array() * free).matrix();
            }
            double step = mem.empty() ? std::min(1.0, 0.1 / d.lpNorm<Eigen::Infinity>()) : 1.0;
            for (int b = 0; b < options.max_backtracks; ++b, step *= 0.5) {
                xn = project(res.x + step * d, lower, upper);
                if ((xn - res.x).lpNorm<Eigen::Infinity>() == 0.0) break;
                if (!evaluate(xn, next)) continue;
                if (next.f <= cur.f + options.armijo * cur.g.dot(xn - res.x)) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (mem.empty()) break;
                mem.clear();
            }
        }
        if (!accepted) {
            res.status = OptimizerStatus::line_search_failed;
            res.message = "no decrease along the projected search path";
            break;
        }

        Pair p{xn - res.x, next.g - cur.g, 0.0};
        const double sy = p.s.dot(p.y);
        if (sy > 1e-12 * p.s.norm() * p.y.norm()) {
            p.rho = 1.0 / sy;
            mem.push_back(std::move(p));
            if (static_cast<int>(mem.size()) > options.memory) mem.pop_front();
        }
        res.x = std::move(xn);
        cur = std::move(next);
        ++res.iterations;
        res.trace.push_back(cur.f);
    }
    res.f = cur.f;
    res.g = cur.g;
    return res;
}

}  // namespace labelflux
