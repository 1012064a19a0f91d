#pragma once

#include <cmath>
#include <cstddef>
#include <algorithm>
#include <utility>
#include <vector>

#include "drsim/errors.hpp"
#include "drsim/grid_model.hpp"
#include "drsim/response_model.hpp"

namespace drsim {

struct ObjectiveParams {
    double kappa = 5.0;        ///< price-penalty weight
    double eta = 0.01;         ///< dual regularization
    double lambda_cap = 10.0;  ///< upper end of the dual interval [0, Lambda]

    void validate() const {
        if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("objective: kappa must be positive");
        if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("objective: eta must be positive");
        if (!(lambda_cap > 0.0) || !std::isfinite(lambda_cap)) {
            throw ValidationError("objective: lambda_cap must be positive");
        }
    }
};

/// Everything the pricing problem at one instant depends on.
struct Problem {
    FeederModel feeder;
    TariffParams tariff;
    DreTarget target;
    ResponseModel response;
    ObjectiveParams params;

    void validate() const {
        tariff.validate();
        response.validate(feeder.size());
        params.validate();
        if (!std::isfinite(target.p_ref)) throw ValidationError("target: p_ref must be finite");
    }

    std::size_t size() const noexcept { return feeder.size(); }
    double p0_tilde() const { return target.p0_tilde(feeder); }

    Problem with_d_hat(Vector d_hat) const {
        Problem out = *this;
        out.feeder = feeder.with_d_hat(std::move(d_hat));
        return out;
    }
};

/// The problem seen at each step of a run. Static schedules return the same
/// problem forever; time-varying ones swap in d_hat(t) and clamp past the end.
class ProblemSchedule {
public:
    explicit ProblemSchedule(Problem base) : base_(std::move(base)) { base_.validate(); }

    ProblemSchedule(Problem base, const std::vector<Vector>& d_hat_series) : base_(std::move(base)) {
        base_.validate();
        steps_.reserve(d_hat_series.size());
        for (const auto& d : d_hat_series) steps_.push_back(base_.with_d_hat(d));
    }

    const Problem& at(std::size_t t) const {
        if (steps_.empty()) return base_;
        return steps_[std::min(t, steps_.size() - 1)];
    }

    const Problem& base() const noexcept { return base_; }
    bool time_varying() const noexcept { return !steps_.empty(); }
    /// Number of distinct steps; zero for a static schedule.
    std::size_t horizon() const noexcept { return steps_.size(); }

private:
    Problem base_;
    std::vector<Problem> steps_;
};

}  // namespace drsim
