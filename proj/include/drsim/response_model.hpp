#pragma once

// Price-dependent flexible-load response.
//
// Node n responds to a price adjustment x_n with w_n whose mean is
// delta_n - beta_n x_n and whose spread is sigma0_n exp(-zeta beta_n x_n).
// The zero-mean residual w_n - mu_n(x_n) is the location-scale noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

#include "drsim/errors.hpp"
#include "drsim/grid_model.hpp"
#include "drsim/random.hpp"
#include "drsim/vector_ops.hpp"

namespace drsim {

enum class ResponseFamily { gaussian, deterministic, truncated_gaussian };

inline std::string_view to_string(ResponseFamily f) {
    switch (f) {
        case ResponseFamily::gaussian: return "gaussian";
        case ResponseFamily::deterministic: return "deterministic";
        case ResponseFamily::truncated_gaussian: return "truncated_gaussian";
    }
    return "gaussian";
}

inline ResponseFamily parse_response_family(std::string_view name) {
    if (name == "gaussian") return ResponseFamily::gaussian;
    if (name == "deterministic") return ResponseFamily::deterministic;
    if (name == "truncated_gaussian") return ResponseFamily::truncated_gaussian;
    throw ConfigError("unknown response family '" + std::string(name) + "'");
}

struct ResponseModel {
    Vector beta;    ///< true sensitivities, kW per $/kWh
    Vector sigma0;  ///< spread at x = 0, kW
    double zeta = 1.0;
    ResponseFamily family = ResponseFamily::gaussian;

    void validate(std::size_t node_count) const {
        require_same_length(node_count, beta.size(), "response beta");
        require_same_length(node_count, sigma0.size(), "response sigma0");
        if (!all_finite(beta) || !all_finite(sigma0) || !std::isfinite(zeta)) {
            throw ValidationError("response: non-finite parameter");
        }
        for (std::size_t n = 0; n < node_count; ++n) {
            if (!(beta[n] > 0.0)) throw ValidationError("response: beta must be positive");
            if (sigma0[n] < 0.0) throw ValidationError("response: sigma0 must be nonnegative");
        }
        if (zeta < 0.0) throw ValidationError("response: zeta must be nonnegative");
    }
};

inline Vector mean_response(const ResponseModel& model, const FeederModel& feeder, ConstSpan x) {
    require_same_length(feeder.size(), x.size(), "mean_response x");
    Vector mu(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) mu[n] = feeder.delta()[n] - model.beta[n] * x[n];
    return mu;
}

inline Vector std_response(const ResponseModel& model, ConstSpan x) {
    require_same_length(model.beta.size(), x.size(), "std_response x");
    Vector sigma(x.size(), 0.0);
    if (model.family == ResponseFamily::deterministic) return sigma;
    for (std::size_t n = 0; n < x.size(); ++n) {
        sigma[n] = model.sigma0[n] * std::exp(-model.zeta * model.beta[n] * x[n]);
    }
    return sigma;
}

/// True when mu_n(x_n) >= 0 over the whole price box (x_max <= delta_n / beta_n).
inline bool mean_nonnegative_on_box(const ResponseModel& model, const FeederModel& feeder,
                                    const TariffParams& tariff) {
    for (std::size_t n = 0; n < feeder.size(); ++n) {
        const double worst = feeder.delta()[n] - model.beta[n] * tariff.x_max;
        if (worst < 0.0) return false;
    }
    return true;
}

namespace detail {

// Standard normal restricted to [a, b]. Plain rejection when the window holds
// reasonable mass, otherwise uniform or shifted-exponential proposals so that
// windows far in a tail still accept quickly.
inline double sample_standard_truncated(double a, double b, CounterStream& stream) {
    if (b < 0.0) return -sample_standard_truncated(-b, -a, stream);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr int kMaxAttempts = 1000000;
    if (a <= 0.0 && b >= 0.0) {
        if (b - a >= 0.5) {
            std::normal_distribution<double> normal(0.0, 1.0);
            for (int i = 0; i < kMaxAttempts; ++i) {
                const double z = normal(stream);
                if (z >= a && z <= b) return z;
            }
        } else {
            for (int i = 0; i < kMaxAttempts; ++i) {
                const double z = a + (b - a) * unit(stream);
                if (unit(stream) <= std::exp(-0.5 * z * z)) return z;
            }
        }
        return 0.0;
    }
    // Window entirely right of zero.
    if (b * b - a * a <= 2.0) {
        for (int i = 0; i < kMaxAttempts; ++i) {
            const double z = a + (b - a) * unit(stream);
            if (unit(stream) <= std::exp(0.5 * (a * a - z * z))) return z;
        }
        return a;
    }
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (int i = 0; i < kMaxAttempts; ++i) {
        const double z = a - std::log(1.0 - unit(stream)) / rate;
        if (z > b) continue;
        if (unit(stream) <= std::exp(-0.5 * (z - rate) * (z - rate))) return z;
    }
    return a;
}

inline double sample_truncated(double mean, double sd, double lo, double hi, CounterStream& stream) {
    if (hi <= lo) return lo;
    if (sd <= 0.0) return std::clamp(mean, lo, hi);
    const double z = sample_standard_truncated((lo - mean) / sd, (hi - mean) / sd, stream);
    return std::clamp(mean + sd * z, lo, hi);
}

}  // namespace detail

/// One draw of w ~ D(x). Identical stream state gives an identical draw.
inline Vector sample_response(const ResponseModel& model, const FeederModel& feeder, ConstSpan x,
                              CounterStream& stream) {
    Vector w = mean_response(model, feeder, x);
    if (model.family == ResponseFamily::deterministic) return w;
    const Vector sigma = std_response(model, x);
    if (model.family == ResponseFamily::gaussian) {
        std::normal_distribution<double> standard(0.0, 1.0);
        for (std::size_t n = 0; n < w.size(); ++n) w[n] += sigma[n] * standard(stream);
        return w;
    }
    for (std::size_t n = 0; n < w.size(); ++n) {
        w[n] = detail::sample_truncated(w[n], sigma[n], 0.0, feeder.delta()[n], stream);
    }
    return w;
}

/// Standard deviation of xi(w) = s.(d_hat + w - r) - p_ref at x (untruncated spreads).
inline double regulation_error_std(const ResponseModel& model, const FeederModel& feeder, ConstSpan x) {
    const Vector sigma = std_response(model, x);
    double var = 0.0;
    for (std::size_t n = 0; n < sigma.size(); ++n) {
        const double v = feeder.s()[n] * sigma[n];
        var += v * v;
    }
    return std::sqrt(var);
}

/// Upper bound on E|xi - E xi| over the price box.
///
/// Gaussian: xi - E xi is N(0, sigma_xi(x)^2), so the mean absolute deviation is
/// sqrt(2/pi) sigma_xi(x); sigma is non-increasing in every x_n, so the maximum
/// sits at x = x_min. Truncated: truncation to an interval never increases the
/// variance, so sigma_xi(x_min) itself bounds E|.| by Jensen.
inline double abs_deviation_bound(const ResponseModel& model, const FeederModel& feeder,
                                  const TariffParams& tariff) {
    if (model.family == ResponseFamily::deterministic) return 0.0;
    const Vector corner(feeder.size(), tariff.x_min);
    const double sigma_xi = regulation_error_std(model, feeder, corner);
    if (model.family == ResponseFamily::gaussian) return std::sqrt(2.0 / std::numbers::pi) * sigma_xi;
    return sigma_xi;
}

}  // namespace drsim
