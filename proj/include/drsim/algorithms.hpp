#pragma once

// Pricing iterations on z = (x, lambda):
//
//   PO              exact primal-dual step on Lhat with true beta
//   InPO            PO with beta replaced by an estimate beta_hat
//   PS              performative-stable step, primal update ignores lambda
//   StochasticInPO  InPO primal step, dual step driven by a measured p0
//
// Every step is a pure function returning a point projected onto
// X = [x_min, x_max]^N times Y = [0, Lambda].

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drsim/errors.hpp"
#include "drsim/objective.hpp"
#include "drsim/problem.hpp"
#include "drsim/random.hpp"
#include "drsim/response_model.hpp"
#include "drsim/vector_ops.hpp"

namespace drsim {

enum class Variant { PO, InPO, PS, StochasticInPO };

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::PO: return "PO";
        case Variant::InPO: return "InPO";
        case Variant::PS: return "PS";
        case Variant::StochasticInPO: return "StochasticInPO";
    }
    return "PO";
}

inline Variant parse_variant(std::string_view name) {
    if (name == "PO") return Variant::PO;
    if (name == "InPO") return Variant::InPO;
    if (name == "PS") return Variant::PS;
    if (name == "StochasticInPO" || name == "SInPO") return Variant::StochasticInPO;
    throw ConfigError("unknown variant '" + std::string(name) + "'");
}

inline bool is_offline(Variant v) { return v != Variant::StochasticInPO; }

struct PrimalDualPoint {
    Vector x;
    double lambda = 0.0;

    Vector stacked() const {
        Vector z = x;
        z.push_back(lambda);
        return z;
    }
};

inline double distance(const PrimalDualPoint& a, const PrimalDualPoint& b) {
    const double dl = a.lambda - b.lambda;
    const double dx = distance(a.x, b.x);
    return std::sqrt(dx * dx + dl * dl);
}

struct SolverConfig {
    double epsilon = 0.01;
    Variant variant = Variant::StochasticInPO;
    Vector beta_hat;  ///< empty means the sign approximation beta_hat = 1
    std::size_t max_iters = 100000;
    double convergence_tol = 1e-10;
    /// Use the dual updates exactly as printed: (1 + eps eta) in the stochastic
    /// step and true B in the InPO dual step.
    bool literal_equations = false;
    /// Pre-projection iterates beyond divergence_factor * (max|x| + Lambda + 1)
    /// trip the divergence guard.
    double divergence_factor = 10.0;

    void validate() const {
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("solver: epsilon must be >= 0");
        if (!(divergence_factor > 0.0)) throw ValidationError("solver: divergence_factor must be positive");
        for (double b : beta_hat) {
            if (!(b > 0.0) || !std::isfinite(b)) throw ValidationError("solver: beta_hat entries must be positive");
        }
    }

    Vector resolved_beta_hat(std::size_t n) const {
        if (beta_hat.empty()) return Vector(n, 1.0);
        require_same_length(n, beta_hat.size(), "beta_hat");
        return beta_hat;
    }
};

struct IterationRecord {
    std::size_t t = 0;
    PrimalDualPoint z;
    double p0_measured = 0.0;
    double realized_cost = 0.0;
    double expected_cost = 0.0;
};

enum class RunStatus { converged, max_iters, completed, diverged, plant_failure };

inline std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::converged: return "converged";
        case RunStatus::max_iters: return "max_iters";
        case RunStatus::completed: return "completed";
        case RunStatus::diverged: return "diverged";
        case RunStatus::plant_failure: return "plant_failure";
    }
    return "completed";
}

inline double project_interval(double v, double lo, double hi) {
    if (lo > hi) throw ConfigError("projection: lower bound exceeds upper bound");
    return v < lo ? lo : (v > hi ? hi : v);
}

/// Elementwise clamp onto [lo, hi].
inline Vector project_box(ConstSpan v, ConstSpan lo, ConstSpan hi) {
    require_same_length(v.size(), lo.size(), "project_box lo");
    require_same_length(v.size(), hi.size(), "project_box hi");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = project_interval(v[i], lo[i], hi[i]);
    return out;
}

inline Vector project_box(ConstSpan v, double lo, double hi) {
    if (lo > hi) throw ConfigError("projection: lower bound exceeds upper bound");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = project_interval(v[i], lo, hi);
    return out;
}

inline PrimalDualPoint project_feasible(const PrimalDualPoint& z, const Problem& p) {
    return {project_box(z.x, p.tariff.x_min, p.tariff.x_max), project_interval(z.lambda, 0.0, p.params.lambda_cap)};
}

/// x(0) = 0 (clamped into the box), lambda(0) = 0.
inline PrimalDualPoint initial_point(const Problem& p) {
    return project_feasible({Vector(p.size(), 0.0), 0.0}, p);
}

namespace detail {

// Unprojected candidates. The public step functions project them; the drivers
// also inspect them for the divergence guard.

inline double dual_candidate(double lambda, double eps, double eta, double drive, bool plus_sign = false) {
    const double decay = plus_sign ? 1.0 + eps * eta : 1.0 - eps * eta;
    return decay * lambda + eps * drive;
}

inline PrimalDualPoint po_candidate(const PrimalDualPoint& z, const Problem& p, double eps) {
    const Vector g = primal_gradient(z.x, z.lambda, p);
    PrimalDualPoint out{Vector(z.x.size()), 0.0};
    for (std::size_t n = 0; n < g.size(); ++n) out.x[n] = z.x[n] - eps * g[n];
    out.lambda = dual_candidate(z.lambda, eps, p.params.eta, expected_regulation_error(z.x, p));
    return out;
}

inline PrimalDualPoint inpo_candidate(const PrimalDualPoint& z, ConstSpan beta_hat, const Problem& p, double eps,
                                      bool literal) {
    const Vector g = approx_primal_gradient(z.x, z.lambda, beta_hat, p);
    PrimalDualPoint out{Vector(z.x.size()), 0.0};
    for (std::size_t n = 0; n < g.size(); ++n) out.x[n] = z.x[n] - eps * g[n];
    double sbx = 0.0;
    for (std::size_t n = 0; n < z.x.size(); ++n) {
        const double sens = literal ? p.response.beta[n] : beta_hat[n];
        sbx += p.feeder.s()[n] * sens * z.x[n];
    }
    out.lambda = dual_candidate(z.lambda, eps, p.params.eta, -sbx + p.p0_tilde());
    return out;
}

inline PrimalDualPoint ps_candidate(const PrimalDualPoint& z, const Problem& p, double eps) {
    const Vector d_pre = p.feeder.d_pre();
    PrimalDualPoint out{Vector(z.x.size()), 0.0};
    for (std::size_t n = 0; n < z.x.size(); ++n) {
        out.x[n] = (1.0 - eps * p.params.kappa - eps * p.response.beta[n]) * z.x[n] + eps * d_pre[n];
    }
    out.lambda = dual_candidate(z.lambda, eps, p.params.eta, expected_regulation_error(z.x, p));
    return out;
}

inline PrimalDualPoint stochastic_inpo_candidate(const PrimalDualPoint& z, ConstSpan beta_hat, double p0_measured,
                                                 const Problem& p, double eps, bool literal) {
    if (!std::isfinite(p0_measured)) throw MeasurementError("non-finite p0 measurement");
    const Vector g = approx_primal_gradient(z.x, z.lambda, beta_hat, p);
    PrimalDualPoint out{Vector(z.x.size()), 0.0};
    for (std::size_t n = 0; n < g.size(); ++n) out.x[n] = z.x[n] - eps * g[n];
    out.lambda = dual_candidate(z.lambda, eps, p.params.eta, p0_measured - p.target.p_ref, literal);
    return out;
}

inline double divergence_radius(const Problem& p, double factor) {
    const double xs = std::max(std::abs(p.tariff.x_min), std::abs(p.tariff.x_max));
    return factor * (xs * std::sqrt(static_cast<double>(p.size())) + p.params.lambda_cap + 1.0);
}

inline bool tripped(const PrimalDualPoint& candidate, const Problem& p, double factor) {
    const double r2 = dot(candidate.x, candidate.x) + candidate.lambda * candidate.lambda;
    if (!std::isfinite(r2)) return true;
    const double radius = divergence_radius(p, factor);
    return r2 > radius * radius;
}

}  // namespace detail

inline PrimalDualPoint po_step(const PrimalDualPoint& z, const Problem& p, const SolverConfig& cfg) {
    return project_feasible(detail::po_candidate(z, p, cfg.epsilon), p);
}

inline PrimalDualPoint inpo_step(const PrimalDualPoint& z, ConstSpan beta_hat, const Problem& p,
                                 const SolverConfig& cfg) {
    return project_feasible(detail::inpo_candidate(z, beta_hat, p, cfg.epsilon, cfg.literal_equations), p);
}

inline PrimalDualPoint ps_step(const PrimalDualPoint& z, const Problem& p, const SolverConfig& cfg) {
    return project_feasible(detail::ps_candidate(z, p, cfg.epsilon), p);
}

inline PrimalDualPoint stochastic_inpo_step(const PrimalDualPoint& z, ConstSpan beta_hat, double p0_measured,
                                            const Problem& p, const SolverConfig& cfg) {
    return project_feasible(
        detail::stochastic_inpo_candidate(z, beta_hat, p0_measured, p, cfg.epsilon, cfg.literal_equations), p);
}

// ---------------------------------------------------------------------------
// Drivers

struct OfflineResult {
    std::vector<IterationRecord> trajectory;  ///< z(0) .. z(final)
    PrimalDualPoint final_point;
    RunStatus status = RunStatus::max_iters;
    std::size_t iterations = 0;

    bool converged() const noexcept { return status == RunStatus::converged; }
};

inline IterationRecord model_record(std::size_t t, const PrimalDualPoint& z, const Problem& p) {
    const double cost = expected_operating_cost(z.x, p);
    return {t, z, expected_aggregate_power(z.x, p), cost, cost};
}

/// Runs PO, InPO or PS on the closed-form model until |z(t+1) - z(t)| <= tol.
inline OfflineResult run_offline(const SolverConfig& cfg, const Problem& p,
                                 std::optional<PrimalDualPoint> z0 = std::nullopt) {
    cfg.validate();
    if (!is_offline(cfg.variant)) throw ConfigError("run_offline: variant must be PO, InPO or PS");
    const Vector beta_hat = cfg.resolved_beta_hat(p.size());

    OfflineResult out;
    PrimalDualPoint z = project_feasible(z0.value_or(initial_point(p)), p);
    out.trajectory.push_back(model_record(0, z, p));
    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        PrimalDualPoint candidate;
        switch (cfg.variant) {
            case Variant::PO: candidate = detail::po_candidate(z, p, cfg.epsilon); break;
            case Variant::InPO:
                candidate = detail::inpo_candidate(z, beta_hat, p, cfg.epsilon, cfg.literal_equations);
                break;
            default: candidate = detail::ps_candidate(z, p, cfg.epsilon); break;
        }
        if (detail::tripped(candidate, p, cfg.divergence_factor)) {
            out.status = RunStatus::diverged;
            break;
        }
        PrimalDualPoint next = project_feasible(candidate, p);
        const double step = distance(next, z);
        z = std::move(next);
        ++out.iterations;
        out.trajectory.push_back(model_record(out.iterations, z, p));
        if (step <= cfg.convergence_tol) {
            out.status = RunStatus::converged;
            break;
        }
    }
    out.final_point = z;
    return out;
}

struct Measurement {
    double p0 = 0.0;
    std::optional<Vector> w;  ///< realized deviations, when the plant exposes them
};

/// Anything that accepts a price vector and reports the aggregate power.
class Plant {
public:
    virtual ~Plant() = default;
    virtual Measurement dispatch(std::size_t t, ConstSpan x) = 0;
};

/// In-process plant: samples w ~ D(x) from substream (seed, run, t).
class SimulatedPlant final : public Plant {
public:
    SimulatedPlant(const ProblemSchedule& schedule, std::uint64_t master_seed, std::uint64_t run)
        : schedule_(schedule), master_seed_(master_seed), run_(run) {}

    Measurement dispatch(std::size_t t, ConstSpan x) override {
        const Problem& p = schedule_.at(t);
        CounterStream stream = substream(master_seed_, run_, t);
        Vector w = sample_response(p.response, p.feeder, x, stream);
        const double p0 = aggregate_power(p.feeder, p.feeder.d_hat(), w);
        return {p0, std::move(w)};
    }

private:
    const ProblemSchedule& schedule_;
    std::uint64_t master_seed_;
    std::uint64_t run_;
};

struct OnlineResult {
    std::vector<IterationRecord> trajectory;  ///< one record per dispatched step
    PrimalDualPoint final_point;
    RunStatus status = RunStatus::completed;
    std::string message;

    bool ok() const noexcept { return status == RunStatus::completed; }
};

namespace detail {

inline IterationRecord measured_record(std::size_t t, const PrimalDualPoint& z, const Measurement& m,
                                       const Problem& p) {
    const double expected = expected_operating_cost(z.x, p);
    const double realized = m.w ? operating_cost(z.x, *m.w, p) : expected;
    return {t, z, m.p0, realized, expected};
}

}  // namespace detail

/// Feedback loop: dispatch x(t), measure p0(t), then step to z(t + 1) using
/// the problem data of step t.
inline OnlineResult run_online(const SolverConfig& cfg, const ProblemSchedule& schedule, Plant& plant,
                               std::size_t steps, std::optional<PrimalDualPoint> z0 = std::nullopt) {
    cfg.validate();
    if (cfg.variant != Variant::StochasticInPO) throw ConfigError("run_online: variant must be StochasticInPO");
    const Vector beta_hat = cfg.resolved_beta_hat(schedule.base().size());

    OnlineResult out;
    out.trajectory.reserve(steps);
    PrimalDualPoint z = project_feasible(z0.value_or(initial_point(schedule.at(0))), schedule.at(0));
    for (std::size_t t = 0; t < steps; ++t) {
        const Problem& p = schedule.at(t);
        Measurement m;
        try {
            m = plant.dispatch(t, z.x);
            if (!std::isfinite(m.p0)) throw MeasurementError("non-finite p0 measurement");
        } catch (const std::exception& e) {
            out.status = RunStatus::plant_failure;
            out.message = "step " + std::to_string(t) + ": " + e.what();
            break;
        }
        out.trajectory.push_back(detail::measured_record(t, z, m, p));
        const PrimalDualPoint candidate =
            detail::stochastic_inpo_candidate(z, beta_hat, m.p0, p, cfg.epsilon, cfg.literal_equations);
        if (detail::tripped(candidate, p, cfg.divergence_factor)) {
            out.status = RunStatus::diverged;
            out.message = "divergence guard tripped at step " + std::to_string(t);
            break;
        }
        z = project_feasible(candidate, p);
    }
    out.final_point = z;
    return out;
}

/// Holds precomputed prices fixed for the whole event and records what the
/// plant reports. Used for the offline schemes once they have converged.
inline OnlineResult run_fixed_dispatch(const ProblemSchedule& schedule, Plant& plant, const PrimalDualPoint& z,
                                       std::size_t steps) {
    OnlineResult out;
    out.trajectory.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        Measurement m;
        try {
            m = plant.dispatch(t, z.x);
            if (!std::isfinite(m.p0)) throw MeasurementError("non-finite p0 measurement");
        } catch (const std::exception& e) {
            out.status = RunStatus::plant_failure;
            out.message = "step " + std::to_string(t) + ": " + e.what();
            break;
        }
        out.trajectory.push_back(detail::measured_record(t, z, m, schedule.at(t)));
    }
    out.final_point = z;
    return out;
}

}  // namespace drsim
