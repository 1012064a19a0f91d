#pragma once

// Costs, closed-form expectations and the regularized Lagrangian
//
//   Lhat(x, l) = E c0(x, w) + kappa/2 |x|^2 + l E xi(w) - eta/2 l^2,
//
// with E xi = -s.Bx + p0_tilde and
// E c0 = x.Bx + x.(B(pi 1 - pi0 s) - d_pre) + (pi0 s - pi 1).d_pre - N omega.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "drsim/problem.hpp"
#include "drsim/vector_ops.hpp"

namespace drsim {

/// Bill of the users at one node: (pi + x_n)(d_hat_n + w_n - r_n) + omega.
inline double customer_cost(const TariffParams& tariff, double x_n, double d_hat_n, double w_n, double r_n) {
    return (tariff.pi + x_n) * (d_hat_n + w_n - r_n) + tariff.omega;
}

/// c0(x, w) = (pi0 s - pi 1 - x).(d_hat + w - r) - N omega.
inline double utility_cost(ConstSpan x, ConstSpan w, const FeederModel& feeder, const TariffParams& tariff,
                           ConstSpan d_hat_now) {
    const std::size_t n = feeder.size();
    require_same_length(n, x.size(), "utility_cost x");
    require_same_length(n, w.size(), "utility_cost w");
    require_same_length(n, d_hat_now.size(), "utility_cost d_hat");
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c += (tariff.pi0 * feeder.s()[i] - tariff.pi - x[i]) * (d_hat_now[i] + w[i] - feeder.r()[i]);
    }
    return c - static_cast<double>(n) * tariff.omega;
}

/// s.(d_pre - Bx), the mean of p0 under D(x).
inline double expected_aggregate_power(ConstSpan x, const Problem& p) {
    require_same_length(p.size(), x.size(), "expected_aggregate_power x");
    const Vector d_pre = p.feeder.d_pre();
    double acc = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        acc += p.feeder.s()[n] * (d_pre[n] - p.response.beta[n] * x[n]);
    }
    return acc;
}

/// E xi = -s.Bx + p0_tilde.
inline double expected_regulation_error(ConstSpan x, const Problem& p) {
    require_same_length(p.size(), x.size(), "expected_regulation_error x");
    double sbx = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) sbx += p.feeder.s()[n] * p.response.beta[n] * x[n];
    return -sbx + p.p0_tilde();
}

inline double expected_utility_cost(ConstSpan x, const Problem& p) {
    require_same_length(p.size(), x.size(), "expected_utility_cost x");
    const Vector d_pre = p.feeder.d_pre();
    const auto& s = p.feeder.s();
    const auto& beta = p.response.beta;
    const double pi = p.tariff.pi;
    const double pi0 = p.tariff.pi0;
    double c = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        c += x[n] * beta[n] * x[n];
        c += x[n] * (beta[n] * (pi - pi0 * s[n]) - d_pre[n]);
        c += (pi0 * s[n] - pi) * d_pre[n];
    }
    return c - static_cast<double>(x.size()) * p.tariff.omega;
}

inline double price_penalty(ConstSpan x, const ObjectiveParams& params) { return 0.5 * params.kappa * dot(x, x); }

/// Realized operating cost c0(x, w) + kappa/2 |x|^2.
inline double operating_cost(ConstSpan x, ConstSpan w, const Problem& p) {
    return utility_cost(x, w, p.feeder, p.tariff, p.feeder.d_hat()) + price_penalty(x, p.params);
}

inline double expected_operating_cost(ConstSpan x, const Problem& p) {
    return expected_utility_cost(x, p) + price_penalty(x, p.params);
}

inline double reg_lagrangian(ConstSpan x, double lambda, const Problem& p) {
    return expected_operating_cost(x, p) + lambda * expected_regulation_error(x, p) -
           0.5 * p.params.eta * lambda * lambda;
}

namespace detail {

// (2B + kappa I)x + B(pi 1 - pi0 s) - d_pre - lambda B s for a given sensitivity
// vector B = diag(sens). The exact and the estimated gradient share this code
// path so that sens == beta reproduces the exact gradient bit for bit.
inline Vector lagrangian_gradient(ConstSpan x, double lambda, ConstSpan sens, const Problem& p) {
    const std::size_t n = p.size();
    require_same_length(n, x.size(), "gradient x");
    require_same_length(n, sens.size(), "gradient sensitivities");
    const Vector d_pre = p.feeder.d_pre();
    const auto& s = p.feeder.s();
    Vector g(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = (2.0 * sens[i] + p.params.kappa) * x[i] + sens[i] * (p.tariff.pi - p.tariff.pi0 * s[i]) - d_pre[i] -
               lambda * sens[i] * s[i];
    }
    return g;
}

}  // namespace detail

/// Exact primal gradient of Lhat using the true sensitivities.
inline Vector primal_gradient(ConstSpan x, double lambda, const Problem& p) {
    return detail::lagrangian_gradient(x, lambda, p.response.beta, p);
}

/// Gradient model g(x, l) with estimated sensitivities beta_hat.
inline Vector approx_primal_gradient(ConstSpan x, double lambda, ConstSpan beta_hat, const Problem& p) {
    for (double b : beta_hat) {
        if (!(b > 0.0)) throw ValidationError("beta_hat entries must be positive");
    }
    return detail::lagrangian_gradient(x, lambda, beta_hat, p);
}

/// |beta_hat - beta| (2|x| + max_n|pi - pi0 s_n| + lambda max_n|s_n|), which bounds
/// |g - grad_x Lhat| (for s = 1 this is the familiar 2|x| + |pi - pi0| + lambda).
inline double approx_gradient_error_bound(ConstSpan x, double lambda, ConstSpan beta_hat, const Problem& p) {
    double drift = 0.0;
    for (double s : p.feeder.s()) drift = std::max(drift, std::abs(p.tariff.pi - p.tariff.pi0 * s));
    return distance(beta_hat, p.response.beta) * (2.0 * norm2(x) + drift + std::abs(lambda) * max_abs(p.feeder.s()));
}

/// G(z) = [grad_x Lhat; -grad_l Lhat], length N + 1 with the dual entry last.
inline Vector saddle_operator(ConstSpan x, double lambda, const Problem& p) {
    Vector g = primal_gradient(x, lambda, p);
    g.push_back(-expected_regulation_error(x, p) + p.params.eta * lambda);
    return g;
}

}  // namespace drsim
