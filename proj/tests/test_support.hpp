#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <fstream>
#include <string>
#include <vector>

#include "drsim/drsim.hpp"

namespace testing_support {

using drsim::Vector;

/// s = beta = 1, kappa = 5, eta = 0.01, pi = 2, pi0 = 1, d_hat = delta = 1,
/// r = 0, p_ref = 1.5 (p0_tilde = 0.5), X = [0, 1], Lambda = 10.
inline drsim::Problem one_node() { return drsim::one_node_scenario().problem; }

inline drsim::Problem with_beta(drsim::Problem p, const Vector& beta) {
    p.response.beta = beta;
    return p;
}

/// Random N-node problem with a reachable target. s may be non-unit.
inline drsim::Problem random_problem(std::uint64_t seed, std::size_t n, bool unit_s = true) {
    drsim::CounterStream rng(seed);
    Vector s(n), d_hat(n), delta(n), r(n), beta(n), sigma0(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = unit_s ? 1.0 : drsim::uniform(rng, 0.6, 1.4);
        d_hat[i] = drsim::uniform(rng, 0.5, 2.0);
        beta[i] = drsim::uniform(rng, 0.1, 2.0);
        delta[i] = beta[i] + drsim::uniform(rng, 0.0, 1.5);
        r[i] = drsim::uniform(rng, 0.0, 0.3);
        sigma0[i] = 0.1 * delta[i];
    }
    drsim::FeederModel feeder(s, d_hat, delta, r);
    double reach = 0.0;
    for (std::size_t i = 0; i < n; ++i) reach += s[i] * beta[i];
    const double top = drsim::dot(s, feeder.d_pre());
    drsim::DreTarget target{top - drsim::uniform(rng, 0.2, 0.8) * reach, 0, 0};
    drsim::ResponseModel response{beta, sigma0, 1.0, drsim::ResponseFamily::gaussian};
    drsim::ObjectiveParams params;
    params.lambda_cap = 1000.0;
    return drsim::Problem{feeder, drsim::TariffParams{}, target, response, params};
}

inline Vector random_point(drsim::CounterStream& rng, std::size_t n, double lo, double hi) {
    Vector x(n);
    for (double& v : x) v = drsim::uniform(rng, lo, hi);
    return x;
}

struct GridOptimum {
    Vector x;
    double f = std::numeric_limits<double>::infinity();
};

/// Two-node LCQP by brute force at resolution 1e-3. One coordinate is scanned
/// on the grid and the other set to its best feasible value in closed form
/// (the unconstrained minimizer pushed up to the constraint, then clamped).
/// Both choices of scanned coordinate are tried and the better kept.
inline GridOptimum lcqp_grid_oracle(const drsim::Problem& p, int steps = 1000) {
    const double lo = p.tariff.x_min, hi = p.tariff.x_max;
    const Vector d_pre = p.feeder.d_pre();
    const auto& s = p.feeder.s();
    const auto& b = p.response.beta;
    GridOptimum best;
    for (std::size_t scan = 0; scan < 2; ++scan) {
        const std::size_t other = 1 - scan;
        const double h = p.params.kappa + 2.0 * b[other];
        const double a = d_pre[other] - b[other] * (p.tariff.pi - p.tariff.pi0 * s[other]);
        for (int i = 0; i <= steps; ++i) {
            const double xs = lo + (hi - lo) * i / steps;
            const double need = (p.p0_tilde() - s[scan] * b[scan] * xs) / (s[other] * b[other]);
            if (need > hi) continue;
            Vector x(2);
            x[scan] = xs;
            x[other] = std::clamp(std::max(a / h, need), lo, hi);
            const double f = drsim::lcqp_objective(x, p);
            if (f < best.f) best = {x, f};
        }
    }
    return best;
}

inline Vector bundled_nominal_loads() {
    static const Vector loads = [] {
        std::ifstream in(std::string(DRSIM_DATA_DIR) + "/ieee37_feeder.json");
        nlohmann::json doc;
        in >> doc;
        return drsim::load_feeder(doc).d_hat();
    }();
    return loads;
}

}  // namespace testing_support
