#pragma once

// Convergence constants, error bounds, and Monte Carlo ensembles.
//
// G(z) = A z + b with
//
//   A = [ 2B + kappa I   -B s ]
//       [ (B s)^T         eta ]
//
// so nu = min(kappa + 2 min beta, eta) is its strong-monotonicity modulus and
// L = |A|_2 its Lipschitz constant. For 0 < eps < 2 nu / L^2 the projected
// step contracts with factor c(eps) = sqrt(1 - 2 eps nu + eps^2 L^2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "drsim/algorithms.hpp"
#include "drsim/errors.hpp"
#include "drsim/grid_model.hpp"
#include "drsim/objective.hpp"
#include "drsim/problem.hpp"
#include "drsim/random.hpp"
#include "drsim/response_model.hpp"
#include "drsim/vector_ops.hpp"

namespace drsim {

struct BoundParams {
    double nu = 0.0;
    double L = 0.0;
    double epsilon = 0.0;
    double c_eps = 1.0;
    double X_norm = 0.0;      ///< max |x| over the price box
    double Lambda_cap = 0.0;
    double B_const = 0.0;     ///< gradient-error constant
    double e_xi_bar = 0.0;    ///< bound on E|xi - E xi|
    double beta_err = 0.0;    ///< |beta_hat - beta|
};

inline double strong_monotonicity_modulus(const ObjectiveParams& params, const ResponseModel& response) {
    return std::min(params.kappa + 2.0 * min_element(response.beta), params.eta);
}

/// Spectral norm of A by power iteration on A^T A, stopped when the
/// eigen-residual falls below rel_tol times the estimate.
inline double lipschitz_constant(const Problem& p, double rel_tol = 1e-10, std::size_t max_iters = 1000000) {
    const std::size_t n = p.size();
    Vector diag(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
        diag[i] = 2.0 * p.response.beta[i] + p.params.kappa;
        c[i] = p.response.beta[i] * p.feeder.s()[i];
    }
    const double eta = p.params.eta;
    auto apply_a = [&](const Vector& z) {
        Vector out(n + 1);
        double last = eta * z[n];
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = diag[i] * z[i] - c[i] * z[n];
            last += c[i] * z[i];
        }
        out[n] = last;
        return out;
    };
    auto apply_at = [&](const Vector& y) {
        Vector out(n + 1);
        double last = eta * y[n];
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = diag[i] * y[i] + c[i] * y[n];
            last -= c[i] * y[i];
        }
        out[n] = last;
        return out;
    };

    Vector u(n + 1, 1.0 / std::sqrt(static_cast<double>(n + 1)));
    double estimate = 0.0;
    for (std::size_t k = 0; k < max_iters; ++k) {
        const Vector v = apply_at(apply_a(u));
        estimate = dot(u, v);  // Rayleigh quotient of A^T A
        double residual = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            const double r = v[i] - estimate * u[i];
            residual += r * r;
        }
        const double vn = norm2(v);
        if (vn == 0.0) return 0.0;
        if (std::sqrt(residual) <= rel_tol * estimate) break;
        for (std::size_t i = 0; i <= n; ++i) u[i] = v[i] / vn;
    }
    return std::sqrt(estimate);
}

inline double certified_step(double nu, double L) { return nu / (L * L); }

inline bool in_certified_regime(double epsilon, double nu, double L) {
    return epsilon > 0.0 && epsilon < 2.0 * nu / (L * L);
}

inline double contraction_factor(double epsilon, double nu, double L) {
    if (!in_certified_regime(epsilon, nu, L)) {
        throw CertifiedRegimeError("step " + std::to_string(epsilon) + " is outside the certified range (0, " +
                                   std::to_string(2.0 * nu / (L * L)) + ")");
    }
    return std::sqrt(1.0 - 2.0 * epsilon * nu + epsilon * epsilon * L * L);
}

/// max |x| over the box, attained at the corner farthest from the origin.
inline double box_radius(const TariffParams& tariff, std::size_t n) {
    return std::sqrt(static_cast<double>(n)) * std::max(std::abs(tariff.x_min), std::abs(tariff.x_max));
}

/// 2X + max_n|pi - pi0 s_n| + Lambda max_n|s_n|.
inline double gradient_error_constant(const Problem& p) {
    double drift = 0.0;
    for (double s : p.feeder.s()) drift = std::max(drift, std::abs(p.tariff.pi - p.tariff.pi0 * s));
    return 2.0 * box_radius(p.tariff, p.size()) + drift + p.params.lambda_cap * max_abs(p.feeder.s());
}

/// All constants for a run at step epsilon; throws CertifiedRegimeError outside
/// the certified range.
inline BoundParams make_bound_params(const Problem& p, ConstSpan beta_hat, double epsilon,
                                     std::optional<double> e_xi_bar = std::nullopt) {
    p.validate();
    BoundParams b;
    b.nu = strong_monotonicity_modulus(p.params, p.response);
    b.L = lipschitz_constant(p);
    b.epsilon = epsilon;
    b.c_eps = contraction_factor(epsilon, b.nu, b.L);
    b.X_norm = box_radius(p.tariff, p.size());
    b.Lambda_cap = p.params.lambda_cap;
    b.B_const = gradient_error_constant(p);
    b.e_xi_bar = e_xi_bar.value_or(abs_deviation_bound(p.response, p.feeder, p.tariff));
    b.beta_err = distance(beta_hat, p.response.beta);
    return b;
}

inline double error_floor(const BoundParams& b, double Delta = 0.0) {
    return (Delta + b.epsilon * (b.beta_err * b.B_const + b.e_xi_bar)) / (1.0 - b.c_eps);
}

/// c^t e0 + eps (|beta_hat - beta| B + e_xi) / (1 - c).
inline double static_error_bound(std::size_t t, double e0, const BoundParams& b) {
    return std::pow(b.c_eps, static_cast<double>(t)) * e0 + error_floor(b);
}

/// c^t e0 + (Delta + eps (|beta_hat - beta| B + e_xi)) / (1 - c).
inline double tracking_error_bound(std::size_t t, double e0, const BoundParams& b, double Delta) {
    if (Delta < 0.0) throw ValidationError("path variation must be nonnegative");
    return std::pow(b.c_eps, static_cast<double>(t)) * e0 + error_floor(b, Delta);
}

/// sup_t |z*(t) - z*(t-1)|.
inline double path_variation(const std::vector<PrimalDualPoint>& optima) {
    double delta = 0.0;
    for (std::size_t t = 1; t < optima.size(); ++t) delta = std::max(delta, distance(optima[t], optima[t - 1]));
    return delta;
}

class PathVariationTracker {
public:
    void push(const PrimalDualPoint& z) {
        if (last_) value_ = std::max(value_, distance(z, *last_));
        last_ = z;
    }
    double value() const noexcept { return value_; }

private:
    std::optional<PrimalDualPoint> last_;
    double value_ = 0.0;
};

/// Sampled stand-in for e_xi when no closed form applies: the largest empirical
/// mean absolute deviation of xi over uniform price levels in the box, times 1.1.
inline double sampled_abs_deviation_bound(const Problem& p, std::uint64_t seed, std::size_t grid_points = 11,
                                          std::size_t samples = 20000) {
    if (grid_points < 2 || samples < 2) throw ValidationError("sampled bound needs >= 2 grid points and samples");
    double worst = 0.0;
    for (std::size_t j = 0; j < grid_points; ++j) {
        const double level =
            p.tariff.x_min + (p.tariff.x_max - p.tariff.x_min) * static_cast<double>(j) / (grid_points - 1);
        const Vector x(p.size(), level);
        Vector xi(samples);
        CounterStream stream = CounterStream(seed).split(j);
        for (std::size_t k = 0; k < samples; ++k) {
            const Vector w = sample_response(p.response, p.feeder, x, stream);
            xi[k] = regulation_error(aggregate_power(p.feeder, p.feeder.d_hat(), w), p.target);
        }
        const double mean = sum(xi) / static_cast<double>(samples);
        double mad = 0.0;
        for (double v : xi) mad += std::abs(v - mean);
        worst = std::max(worst, mad / static_cast<double>(samples));
    }
    return 1.1 * worst;
}

// ---------------------------------------------------------------------------
// Monte Carlo ensembles

/// Per-step ensemble statistics over the completed runs.
struct TrajectoryStats {
    std::size_t runs = 0;      ///< completed runs entering the statistics
    std::size_t failures = 0;  ///< runs that stopped early (any reason)
    std::size_t diverged = 0;
    std::string first_failure;
    std::size_t steps = 0;

    Vector err_mean, err_stderr;
    Vector p0_mean, p0_stderr;
    Vector cost_mean, cost_stderr;
    Vector expected_cost_mean;
    Vector lambda_mean;
    std::vector<Vector> x_mean;

    /// Standard errors need at least two runs; with one they are reported as 0.
    bool stderr_defined() const noexcept { return runs > 1; }
};

struct EnsembleOptions {
    std::size_t runs = 300;
    std::size_t steps = 3000;
    std::uint64_t master_seed = 0;
    std::size_t threads = 0;  ///< 0: DRSIM_THREADS, else hardware concurrency
    std::optional<PrimalDualPoint> initial;
    /// When set, dispatch these prices unchanged instead of running the online loop.
    std::optional<PrimalDualPoint> fixed_prices;
};

inline std::size_t resolve_thread_count(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DRSIM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
        throw ConfigError("DRSIM_THREADS must be a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

// Welford accumulation, fed in run order so the result does not depend on
// which worker finished first.
struct RunningMoments {
    Vector mean, m2;
    std::size_t count = 0;

    explicit RunningMoments(std::size_t n = 0) : mean(n, 0.0), m2(n, 0.0) {}

    void add(ConstSpan v) {
        ++count;
        const double k = static_cast<double>(count);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = v[i] - mean[i];
            mean[i] += d / k;
            m2[i] += d * (v[i] - mean[i]);
        }
    }

    Vector stderr_of_mean() const {
        Vector out(mean.size(), 0.0);
        if (count < 2) return out;
        const double k = static_cast<double>(count);
        for (std::size_t i = 0; i < m2.size(); ++i) out[i] = std::sqrt(std::max(0.0, m2[i]) / (k - 1.0) / k);
        return out;
    }
};

struct RunSeries {
    RunStatus status = RunStatus::completed;
    std::string message;
    Vector err, p0, cost, expected_cost, lambda;
    Vector x;  ///< step-major, steps * N
};

inline RunSeries simulate_run(const ProblemSchedule& schedule, const SolverConfig& cfg,
                              const std::vector<PrimalDualPoint>& reference, const EnsembleOptions& opt,
                              std::uint64_t run) {
    SimulatedPlant plant(schedule, opt.master_seed, run);
    const OnlineResult res = opt.fixed_prices ? run_fixed_dispatch(schedule, plant, *opt.fixed_prices, opt.steps)
                                              : run_online(cfg, schedule, plant, opt.steps, opt.initial);
    RunSeries s;
    s.status = res.status;
    s.message = res.message;
    if (res.status != RunStatus::completed) return s;
    const std::size_t n = schedule.base().size();
    const std::size_t T = res.trajectory.size();
    s.err.resize(T);
    s.p0.resize(T);
    s.cost.resize(T);
    s.expected_cost.resize(T);
    s.lambda.resize(T);
    s.x.resize(T * n);
    for (std::size_t t = 0; t < T; ++t) {
        const IterationRecord& r = res.trajectory[t];
        s.err[t] = reference.empty() ? 0.0 : distance(r.z, reference[std::min(t, reference.size() - 1)]);
        s.p0[t] = r.p0_measured;
        s.cost[t] = r.realized_cost;
        s.expected_cost[t] = r.expected_cost;
        s.lambda[t] = r.z.lambda;
        std::copy(r.z.x.begin(), r.z.x.end(), s.x.begin() + static_cast<std::ptrdiff_t>(t * n));
    }
    return s;
}

}  // namespace detail

/// M independent runs on split streams. e(t) is measured against reference[t]
/// (the last entry is reused past its end). Results are identical for any
/// thread count.
inline TrajectoryStats monte_carlo_ensemble(const ProblemSchedule& schedule, const SolverConfig& cfg,
                                            const std::vector<PrimalDualPoint>& reference,
                                            const EnsembleOptions& opt) {
    if (opt.runs == 0) throw ValidationError("ensemble needs at least one run");
    cfg.validate();
    const std::size_t n = schedule.base().size();
    const std::size_t T = opt.steps;
    const std::size_t workers = resolve_thread_count(opt.threads);
    constexpr std::size_t kWave = 8;

    detail::RunningMoments err(T), p0(T), cost(T), expected(T), lambda(T), x(T * n);
    TrajectoryStats stats;
    stats.steps = T;

    std::vector<detail::RunSeries> wave;
    for (std::size_t first = 0; first < opt.runs; first += kWave) {
        const std::size_t count = std::min(kWave, opt.runs - first);
        wave.assign(count, {});
        std::vector<std::exception_ptr> errors(count);
        auto work = [&](std::size_t slot) {
            try {
                wave[slot] = detail::simulate_run(schedule, cfg, reference, opt, first + slot);
            } catch (...) {
                errors[slot] = std::current_exception();
            }
        };
        const std::size_t active = std::min(workers, count);
        if (active <= 1) {
            for (std::size_t i = 0; i < count; ++i) work(i);
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < active; ++w) {
                pool.emplace_back([&, w] {
                    for (std::size_t i = w; i < count; i += active) work(i);
                });
            }
        }
        for (std::size_t i = 0; i < count; ++i) {
            if (errors[i]) std::rethrow_exception(errors[i]);
            const detail::RunSeries& s = wave[i];
            if (s.status != RunStatus::completed) {
                ++stats.failures;
                if (s.status == RunStatus::diverged) ++stats.diverged;
                if (stats.first_failure.empty()) stats.first_failure = "run " + std::to_string(first + i) + ": " + s.message;
                continue;
            }
            err.add(s.err);
            p0.add(s.p0);
            cost.add(s.cost);
            expected.add(s.expected_cost);
            lambda.add(s.lambda);
            x.add(s.x);
        }
    }

    stats.runs = err.count;
    if (stats.runs == 0) return stats;
    stats.err_mean = err.mean;
    stats.err_stderr = err.stderr_of_mean();
    stats.p0_mean = p0.mean;
    stats.p0_stderr = p0.stderr_of_mean();
    stats.cost_mean = cost.mean;
    stats.cost_stderr = cost.stderr_of_mean();
    stats.expected_cost_mean = expected.mean;
    stats.lambda_mean = lambda.mean;
    stats.x_mean.assign(T, Vector(n));
    for (std::size_t t = 0; t < T; ++t) {
        std::copy_n(x.mean.begin() + static_cast<std::ptrdiff_t>(t * n), n, stats.x_mean[t].begin());
    }
    return stats;
}

/// First step where mean e(t) exceeds bound(t) + k stderr(t), if any.
template <class BoundFn>
std::optional<std::size_t> first_dominance_violation(const TrajectoryStats& stats, BoundFn bound, double k = 3.0) {
    for (std::size_t t = 0; t < stats.err_mean.size(); ++t) {
        if (stats.err_mean[t] > bound(t) + k * stats.err_stderr[t]) return t;
    }
    return std::nullopt;
}

}  // namespace drsim
