#pragma once

// Ground truth for the pricing problem.
//
// For a fixed multiplier l the Lagrangian separates by node and its box-
// constrained minimizer is
//
//   x_n(l) = clamp((a_n + l c_n) / h_n, x_min, x_max),
//   a_n = d_pre_n - beta_n (pi - pi0 s_n),  c_n = s_n beta_n,  h_n = kappa + 2 beta_n.
//
// phi(l) = sum_n c_n x_n(l) is nondecreasing and piecewise affine with
// breakpoints where a node hits a bound, so both the LCQP multiplier
// (phi(l) = p0_tilde) and the regularized saddle multiplier
// (eta l + phi(l) = p0_tilde) are roots of monotone piecewise-affine functions
// and can be found exactly by walking the breakpoints.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "drsim/algorithms.hpp"
#include "drsim/errors.hpp"
#include "drsim/objective.hpp"
#include "drsim/problem.hpp"
#include "drsim/vector_ops.hpp"

namespace drsim {

struct KktCertificate {
    double stationarity_residual = 0.0;
    double primal_feasibility = 0.0;
    double dual_feasibility = 0.0;
    double complementarity = 0.0;

    bool passes(double tol) const noexcept {
        return stationarity_residual <= tol && primal_feasibility <= tol && dual_feasibility <= tol &&
               complementarity <= tol;
    }
};

struct LcqpSolution {
    Vector x;
    double lambda = 0.0;
    KktCertificate certificate;
    std::size_t iterations = 0;
};

enum class LcqpMethod { breakpoint_walk, dual_projected_gradient };

struct LcqpOptions {
    LcqpMethod method = LcqpMethod::breakpoint_walk;
    double initial_lambda = 0.0;  ///< start of the dual iteration
    std::size_t max_iters = 1000000;
};

/// x.(B + kappa/2 I)x + x.(B(pi 1 - pi0 s) - d_pre), the LCQP objective without constants.
inline double lcqp_objective(ConstSpan x, const Problem& p) {
    const Vector d_pre = p.feeder.d_pre();
    double f = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double b = p.response.beta[n];
        f += x[n] * (b + 0.5 * p.params.kappa) * x[n] +
             x[n] * (b * (p.tariff.pi - p.tariff.pi0 * p.feeder.s()[n]) - d_pre[n]);
    }
    return f;
}

namespace detail {

struct SeparableModel {
    Vector a, c, h;
    double lo = 0.0, hi = 0.0;
    double p0_tilde = 0.0;

    explicit SeparableModel(const Problem& p) : lo(p.tariff.x_min), hi(p.tariff.x_max), p0_tilde(p.p0_tilde()) {
        const Vector d_pre = p.feeder.d_pre();
        const std::size_t n = p.size();
        a.resize(n);
        c.resize(n);
        h.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double b = p.response.beta[i];
            a[i] = d_pre[i] - b * (p.tariff.pi - p.tariff.pi0 * p.feeder.s()[i]);
            c[i] = p.feeder.s()[i] * b;
            h[i] = p.params.kappa + 2.0 * b;
        }
    }

    Vector x_of(double lambda) const {
        Vector x(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) x[i] = std::clamp((a[i] + lambda * c[i]) / h[i], lo, hi);
        return x;
    }

    double phi(double lambda) const { return dot(c, x_of(lambda)); }

    double max_achievable() const {
        double m = 0.0;
        for (double ci : c) m += std::max(ci * lo, ci * hi);
        return m;
    }

    /// Positive multipliers at which some node enters or leaves a bound.
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (c[i] == 0.0) continue;
            for (double bound : {lo, hi}) {
                const double l = (bound * h[i] - a[i]) / c[i];
                if (l > 0.0 && std::isfinite(l)) out.push_back(l);
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Root of the nondecreasing piecewise-affine f(l) = eta l + phi(l) - p0_tilde
    /// on [0, upper]; returns upper when f(upper) < 0 and 0 when f(0) >= 0.
    double root(double eta, double upper) const {
        auto f = [&](double l) { return eta * l + phi(l) - p0_tilde; };
        double prev = 0.0;
        double f_prev = f(prev);
        if (f_prev >= 0.0) return 0.0;
        std::vector<double> knots = breakpoints();
        knots.erase(std::remove_if(knots.begin(), knots.end(), [&](double l) { return l >= upper; }), knots.end());
        knots.push_back(upper);
        for (double knot : knots) {
            const double f_knot = f(knot);
            if (f_knot >= 0.0) {
                if (f_knot == f_prev) return knot;
                const double l = prev + (-f_prev) * (knot - prev) / (f_knot - f_prev);
                return std::clamp(l, prev, knot);
            }
            prev = knot;
            f_prev = f_knot;
        }
        return upper;
    }
};

inline double constraint_scale(const SeparableModel& m) {
    return std::max({1.0, std::abs(m.p0_tilde), std::abs(m.max_achievable())});
}

}  // namespace detail

/// KKT residuals of (x, lambda) for the LCQP, scaled by the problem's magnitudes.
inline KktCertificate lcqp_certificate(ConstSpan x, double lambda, const Problem& p) {
    const detail::SeparableModel m(p);
    const Vector grad = primal_gradient(x, lambda, p);
    const double grad_scale = std::max(1.0, max_abs(m.a));
    Vector moved(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) moved[n] = x[n] - grad[n];
    const Vector projected = project_box(moved, p.tariff.x_min, p.tariff.x_max);

    double box_violation = 0.0;
    for (double v : x) box_violation = std::max({box_violation, p.tariff.x_min - v, v - p.tariff.x_max});
    const double slack = m.p0_tilde - dot(m.c, x);  // constraint value, feasible when <= 0
    const double cscale = detail::constraint_scale(m);

    KktCertificate cert;
    cert.stationarity_residual = distance(x, projected) / grad_scale;
    cert.primal_feasibility = std::max(0.0, std::max(slack / cscale, box_violation));
    cert.dual_feasibility = std::max(0.0, -lambda);
    cert.complementarity = std::abs(lambda * slack) / cscale;
    return cert;
}

/// Minimizer of the LCQP min x.(B + kappa/2 I)x + x.(B(pi 1 - pi0 s) - d_pre)
/// s.t. s.Bx >= p0_tilde, x in the price box.
inline LcqpSolution solve_lcqp(const Problem& p, const LcqpOptions& options = {}) {
    p.validate();
    const detail::SeparableModel m(p);
    const double max_ach = m.max_achievable();
    if (m.p0_tilde > max_ach + 1e-12 * detail::constraint_scale(m)) {
        throw InfeasibleError("LCQP infeasible: the price box can lower s.p0 by at most " + std::to_string(max_ach) +
                                  " but " + std::to_string(m.p0_tilde) + " is required",
                              max_ach, m.p0_tilde);
    }

    LcqpSolution sol;
    if (options.method == LcqpMethod::breakpoint_walk) {
        const std::vector<double> knots = m.breakpoints();
        const double upper = knots.empty() ? 1.0 : knots.back();
        sol.lambda = m.root(0.0, upper);
        sol.iterations = knots.size();
    } else {
        double curvature = 0.0;
        for (std::size_t i = 0; i < m.c.size(); ++i) curvature += m.c[i] * m.c[i] / m.h[i];
        const double step = curvature > 0.0 ? 1.0 / curvature : 0.0;
        double lambda = std::max(0.0, options.initial_lambda);
        for (std::size_t k = 0; k < options.max_iters; ++k) {
            const double next = std::max(0.0, lambda + step * (m.p0_tilde - m.phi(lambda)));
            ++sol.iterations;
            const bool done = std::abs(next - lambda) <= 1e-15 * std::max(1.0, lambda);
            lambda = next;
            if (done) break;
        }
        sol.lambda = lambda;
    }
    sol.x = m.x_of(sol.lambda);
    sol.certificate = lcqp_certificate(sol.x, sol.lambda, p);
    return sol;
}

struct SaddleOptions {
    bool enforce_cap = true;   ///< throw DualCapError when lambda* >= cap_fraction * Lambda
    double cap_fraction = 0.9;
};

/// Unique saddle point of the regularized Lagrangian over X x [0, Lambda].
inline PrimalDualPoint regularized_saddle_point(const Problem& p, const SaddleOptions& options = {}) {
    p.validate();
    const detail::SeparableModel m(p);
    const double cap = p.params.lambda_cap;
    const double lambda = m.root(p.params.eta, cap);
    if (options.enforce_cap && lambda >= options.cap_fraction * cap) {
        throw DualCapError("saddle multiplier " + std::to_string(lambda) + " is too close to the dual cap " +
                               std::to_string(cap) + "; increase lambda_cap",
                           lambda, cap);
    }
    return {m.x_of(lambda), lambda};
}

/// |z - proj_Z(z - eps G(z))|.
inline double verify_fixed_point(const PrimalDualPoint& z, const Problem& p, double eps) {
    const Vector g = saddle_operator(z.x, z.lambda, p);
    PrimalDualPoint moved{Vector(z.x.size()), z.lambda - eps * g.back()};
    for (std::size_t n = 0; n < z.x.size(); ++n) moved.x[n] = z.x[n] - eps * g[n];
    return distance(z, project_feasible(moved, p));
}

struct StablePointResiduals {
    double primal = 0.0;
    double dual = 0.0;
};

/// First-order conditions of a performatively stable point: with the response
/// distribution frozen at D(x_eq), the primal gradient is kappa x - (d_pre - B x_eq),
/// which at x = x_eq reads (kappa I + B) x_eq - d_pre.
inline StablePointResiduals verify_stable_point(const PrimalDualPoint& z, const Problem& p) {
    const Vector d_pre = p.feeder.d_pre();
    Vector moved(z.x.size());
    for (std::size_t n = 0; n < z.x.size(); ++n) {
        const double grad = (p.params.kappa + p.response.beta[n]) * z.x[n] - d_pre[n];
        moved[n] = z.x[n] - grad;
    }
    StablePointResiduals r;
    r.primal = distance(z.x, project_box(moved, p.tariff.x_min, p.tariff.x_max));
    const double dual_grad = expected_regulation_error(z.x, p) - p.params.eta * z.lambda;
    r.dual = std::abs(z.lambda - project_interval(z.lambda + dual_grad, 0.0, p.params.lambda_cap));
    return r;
}

}  // namespace drsim
