#pragma once

// Experiment drivers behind the command-line tool: single-variant runs, the
// four-way comparison, the beta_hat sweep and the bound check, plus their CSV
// tables. Numbers are written with %.17g so repeated runs compare byte for byte.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "drsim/algorithms.hpp"
#include "drsim/analysis.hpp"
#include "drsim/errors.hpp"
#include "drsim/objective.hpp"
#include "drsim/reference_solvers.hpp"
#include "drsim/scenarios.hpp"
#include "drsim/vector_ops.hpp"

namespace drsim {

struct ExperimentSettings {
    double epsilon = 0.01;
    std::size_t runs = 300;
    std::size_t steps = 0;  ///< 0: the scenario's default horizon
    std::uint64_t seed = 1;
    bool literal_equations = false;
    bool start_at_saddle = false;  ///< z(0) = z*(0) instead of (0, 0)
    std::size_t threads = 0;
    std::size_t offline_max_iters = 1000000;
};

/// Static scenarios run 3000 steps by default, time-varying ones their DRE window.
inline std::size_t default_steps(const Scenario& sc) { return sc.profiles ? sc.profiles->length() : 3000; }

inline std::size_t resolved_steps(const Scenario& sc, const ExperimentSettings& s) {
    return s.steps ? s.steps : default_steps(sc);
}

/// Ensemble streams are keyed off the seed but kept apart from the streams
/// used to draw scenario parameters.
inline std::uint64_t ensemble_seed(std::uint64_t seed) { return CounterStream(seed).split(4).key(); }

/// "ones", "true", "x<k>" (k times the true beta), a scalar, or a comma list of N values.
inline Vector resolve_beta_hat(const std::string& form, const Vector& beta) {
    const std::size_t n = beta.size();
    Vector out;
    if (form == "ones") {
        out.assign(n, 1.0);
    } else if (form == "true") {
        out = beta;
    } else {
        auto parse = [&](const std::string& text) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != text.size()) throw ConfigError("bad beta_hat value '" + text + "'");
            return v;
        };
        if (!form.empty() && form.front() == 'x') {
            out = scaled(beta, parse(form.substr(1)));
        } else {
            std::stringstream ss(form);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(parse(item));
            if (out.size() == 1) out.assign(n, out.front());
            if (out.size() != n) {
                throw ConfigError("beta_hat has " + std::to_string(out.size()) + " entries, expected 1 or " +
                                  std::to_string(n));
            }
        }
    }
    for (double b : out) {
        if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("beta_hat entries must be positive");
    }
    return out;
}

/// Optimal points along the run: z*(t) and the LCQP minimizer x*(t), cached
/// per distinct baseline.
struct Reference {
    std::vector<PrimalDualPoint> saddle;
    std::vector<Vector> lcqp_x;
    Vector lcqp_cost;  ///< expected operating cost at x*(t)
    double Delta = 0.0;

    const PrimalDualPoint& saddle_at(std::size_t t) const { return saddle[std::min(t, saddle.size() - 1)]; }
    const Vector& lcqp_at(std::size_t t) const { return lcqp_x[std::min(t, lcqp_x.size() - 1)]; }
    double lcqp_cost_at(std::size_t t) const { return lcqp_cost[std::min(t, lcqp_cost.size() - 1)]; }
};

inline Reference compute_reference(const ProblemSchedule& schedule, std::size_t steps) {
    Reference ref;
    const std::size_t count = schedule.time_varying() ? std::max<std::size_t>(steps, 1) : 1;
    std::map<Vector, std::size_t> seen;
    for (std::size_t t = 0; t < count; ++t) {
        const Problem& p = schedule.at(t);
        const auto [it, fresh] = seen.emplace(p.feeder.d_hat(), ref.saddle.size());
        if (fresh) {
            ref.saddle.push_back(regularized_saddle_point(p));
            LcqpSolution sol = solve_lcqp(p);
            ref.lcqp_cost.push_back(expected_operating_cost(sol.x, p));
            ref.lcqp_x.push_back(std::move(sol.x));
        } else {
            ref.saddle.push_back(ref.saddle[it->second]);
            ref.lcqp_x.push_back(ref.lcqp_x[it->second]);
            ref.lcqp_cost.push_back(ref.lcqp_cost[it->second]);
        }
    }
    ref.Delta = path_variation(ref.saddle);
    return ref;
}

struct FloorInfo {
    double floor = 0.0;
    bool certified = false;  ///< false: evaluated at the certified step nu / L^2 instead of the run's step
};

/// Asymptotic term of the static bound. Outside the certified range the bound
/// says nothing about the actual step, so the floor at nu / L^2 is reported.
inline FloorInfo theoretical_floor(const Problem& p, ConstSpan beta_hat, double epsilon) {
    const double nu = strong_monotonicity_modulus(p.params, p.response);
    const double L = lipschitz_constant(p);
    FloorInfo info;
    info.certified = in_certified_regime(epsilon, nu, L);
    info.floor = error_floor(make_bound_params(p, beta_hat, info.certified ? epsilon : certified_step(nu, L)));
    return info;
}

struct VariantOutcome {
    Variant variant = Variant::StochasticInPO;
    Vector beta_hat;
    TrajectoryStats stats;
    std::optional<RunStatus> offline_status;  ///< set for PO, InPO and PS
    std::size_t offline_iterations = 0;

    std::size_t last() const { return stats.steps - 1; }
};

/// Online variants run the feedback loop; offline ones are iterated on the
/// nominal model until they converge and their prices are then held fixed.
inline VariantOutcome run_variant(const Scenario& sc, const ProblemSchedule& schedule, const Reference& ref,
                                  Variant variant, const Vector& beta_hat, const ExperimentSettings& s) {
    SolverConfig cfg;
    cfg.epsilon = s.epsilon;
    cfg.variant = variant;
    cfg.beta_hat = beta_hat;
    cfg.max_iters = s.offline_max_iters;
    cfg.literal_equations = s.literal_equations;

    EnsembleOptions opt;
    opt.runs = s.runs;
    opt.steps = resolved_steps(sc, s);
    opt.master_seed = ensemble_seed(s.seed);
    opt.threads = s.threads;
    if (s.start_at_saddle) opt.initial = ref.saddle_at(0);
    if (opt.steps == 0) throw ValidationError("steps must be positive");

    VariantOutcome out;
    out.variant = variant;
    out.beta_hat = beta_hat;
    if (is_offline(variant)) {
        const OfflineResult off = run_offline(cfg, sc.problem, opt.initial);
        if (off.status == RunStatus::diverged) {
            throw DivergenceError(std::string(to_string(variant)) + ": divergence guard tripped after " +
                                  std::to_string(off.iterations) + " offline iterations");
        }
        out.offline_status = off.status;
        out.offline_iterations = off.iterations;
        opt.fixed_prices = off.final_point;
    }
    out.stats = monte_carlo_ensemble(schedule, cfg, ref.saddle, opt);
    if (out.stats.diverged > 0) throw DivergenceError(std::string(to_string(variant)) + ": " + out.stats.first_failure);
    if (out.stats.runs == 0) throw Error(std::string(to_string(variant)) + ": every run failed; " + out.stats.first_failure);
    return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string format_number(double v) {
    if (!std::isfinite(v)) throw Error("refusing to write a non-finite value");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw ConfigError("cannot write " + path.string());
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline std::filesystem::path prepare_output(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("output directory '" + dir + "' is not writable");
    return dir;
}

inline double terminal_gap(const VariantOutcome& o, const Problem& p) {
    return std::abs(o.stats.p0_mean[o.last()] - p.target.p_ref);
}

inline void write_trajectory_csv(const std::filesystem::path& path, const VariantOutcome& o, const Reference& ref) {
    const std::size_t n = o.stats.x_mean.empty() ? 0 : o.stats.x_mean.front().size();
    std::vector<std::string> header{"t"};
    for (std::size_t i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
    for (const char* h : {"lambda", "p0", "realized_cost", "expected_cost", "err_to_opt", "p0_stderr", "err_stderr",
                          "lcqp_cost"}) {
        header.emplace_back(h);
    }
    CsvFile csv(path, header);
    const TrajectoryStats& st = o.stats;
    for (std::size_t t = 0; t < st.steps; ++t) {
        std::vector<std::string> row{std::to_string(t)};
        for (double x : st.x_mean[t]) row.push_back(format_number(x));
        for (double v : {st.lambda_mean[t], st.p0_mean[t], st.cost_mean[t], st.expected_cost_mean[t], st.err_mean[t],
                         st.p0_stderr[t], st.err_stderr[t], ref.lcqp_cost_at(t)}) {
            row.push_back(format_number(v));
        }
        csv.row(row);
    }
}

/// Two-column quantity,value table describing a finished run.
inline void write_summary_csv(const std::filesystem::path& path, const Scenario& sc, const VariantOutcome& o,
                              const Reference& ref, const ExperimentSettings& s) {
    const Problem& p = sc.problem;
    const std::size_t T = o.last();
    const PrimalDualPoint& zs = ref.saddle_at(T);
    const Vector& xl = ref.lcqp_at(T);
    const FloorInfo floor = theoretical_floor(p, o.beta_hat, s.epsilon);

    CsvFile csv(path, {"quantity", "value"});
    auto put = [&](const std::string& key, double v) { csv.row({key, format_number(v)}); };
    csv.row({"scenario", sc.name});
    csv.row({"variant", std::string(to_string(o.variant))});
    csv.row({"runs", std::to_string(o.stats.runs)});
    csv.row({"failed_runs", std::to_string(o.stats.failures)});
    csv.row({"steps", std::to_string(o.stats.steps)});
    if (o.offline_status) {
        csv.row({"offline_status", std::string(to_string(*o.offline_status))});
        csv.row({"offline_iterations", std::to_string(o.offline_iterations)});
    }
    put("epsilon", s.epsilon);
    put("p_ref", p.target.p_ref);
    put("terminal_p0_mean", o.stats.p0_mean[T]);
    put("terminal_p0_stderr", o.stats.p0_stderr[T]);
    put("terminal_gap", terminal_gap(o, p));
    put("terminal_cost_mean", o.stats.cost_mean[T]);
    put("terminal_cost_stderr", o.stats.cost_stderr[T]);
    put("terminal_err_mean", o.stats.err_mean[T]);
    put("terminal_err_stderr", o.stats.err_stderr[T]);
    put("terminal_lambda_mean", o.stats.lambda_mean[T]);
    put("distance_to_lcqp", distance(o.stats.x_mean[T], xl));
    put("beta_err", distance(o.beta_hat, p.response.beta));
    put("lambda_star", zs.lambda);
    put("eta_gap", p.params.eta * zs.lambda);
    for (std::size_t i = 0; i < zs.x.size(); ++i) put("x_star_" + std::to_string(i + 1), zs.x[i]);
    for (std::size_t i = 0; i < xl.size(); ++i) put("x_lcqp_" + std::to_string(i + 1), xl[i]);
    put("lcqp_cost", ref.lcqp_cost_at(T));
    put("floor", floor.floor);
    csv.row({"floor_certified", floor.certified ? "1" : "0"});
    put("path_variation", ref.Delta);
}

// ---------------------------------------------------------------------------
// Commands

inline VariantOutcome run_experiment(const Scenario& sc, Variant variant, const Vector& beta_hat,
                                     const ExperimentSettings& s, const std::optional<std::string>& out_dir) {
    const ProblemSchedule schedule = sc.schedule();
    const Reference ref = compute_reference(schedule, resolved_steps(sc, s));
    VariantOutcome o = run_variant(sc, schedule, ref, variant, beta_hat, s);
    if (out_dir) {
        const auto dir = prepare_output(*out_dir);
        write_trajectory_csv(dir / "trajectory.csv", o, ref);
        write_summary_csv(dir / "summary.csv", sc, o, ref, s);
    }
    return o;
}

struct Comparison {
    std::vector<VariantOutcome> outcomes;  ///< PO, InPO, PS, StochasticInPO
    Reference reference;

    const VariantOutcome& of(Variant v) const {
        for (const auto& o : outcomes) {
            if (o.variant == v) return o;
        }
        throw Error("variant missing from comparison");
    }
};

/// All four schemes on the same scenario and streams. beta_hat feeds InPO and
/// StochasticInPO.
inline Comparison compare_variants(const Scenario& sc, const Vector& beta_hat, const ExperimentSettings& s,
                                   const std::optional<std::string>& out_dir) {
    const ProblemSchedule schedule = sc.schedule();
    Comparison cmp;
    cmp.reference = compute_reference(schedule, resolved_steps(sc, s));
    for (Variant v : {Variant::PO, Variant::InPO, Variant::PS, Variant::StochasticInPO}) {
        cmp.outcomes.push_back(run_variant(sc, schedule, cmp.reference, v, beta_hat, s));
    }
    if (!out_dir) return cmp;

    const auto dir = prepare_output(*out_dir);
    const std::size_t T = cmp.outcomes.front().stats.steps;
    {
        CsvFile csv(dir / "compare_p0.csv", {"t", "PO", "InPO", "PS", "StochasticInPO", "p_ref"});
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<std::string> row{std::to_string(t)};
            for (const auto& o : cmp.outcomes) row.push_back(format_number(o.stats.p0_mean[t]));
            row.push_back(format_number(sc.problem.target.p_ref));
            csv.row(row);
        }
    }
    {
        CsvFile csv(dir / "compare_cost.csv", {"t", "PO", "InPO", "PS", "StochasticInPO", "lcqp_optimum"});
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<std::string> row{std::to_string(t)};
            for (const auto& o : cmp.outcomes) row.push_back(format_number(o.stats.cost_mean[t]));
            row.push_back(format_number(cmp.reference.lcqp_cost_at(t)));
            csv.row(row);
        }
    }
    CsvFile csv(dir / "compare_summary.csv",
                {"variant", "runs", "terminal_p0_mean", "terminal_p0_stderr", "terminal_gap", "terminal_cost_mean",
                 "terminal_cost_stderr", "beta_err", "offline_status", "offline_iterations"});
    for (const auto& o : cmp.outcomes) {
        const std::size_t last = o.last();
        const bool uses_estimate = o.variant == Variant::InPO || o.variant == Variant::StochasticInPO;
        csv.row({std::string(to_string(o.variant)), std::to_string(o.stats.runs), format_number(o.stats.p0_mean[last]),
                 format_number(o.stats.p0_stderr[last]), format_number(terminal_gap(o, sc.problem)),
                 format_number(o.stats.cost_mean[last]), format_number(o.stats.cost_stderr[last]),
                 format_number(uses_estimate ? distance(o.beta_hat, sc.problem.response.beta) : 0.0),
                 o.offline_status ? std::string(to_string(*o.offline_status)) : std::string("online"),
                 std::to_string(o.offline_iterations)});
    }
    return cmp;
}

struct SweepRow {
    std::string label;
    double beta_err = 0.0;
    double distance = 0.0;  ///< |mean x(T) - x*|
    double terminal_gap = 0.0;
    double p0_stderr = 0.0;
    double eta_gap = 0.0;   ///< eta lambda*
    double lambda_mean = 0.0;
    FloorInfo floor;
};

/// StochasticInPO once per beta_hat entry, all on the same streams.
inline std::vector<SweepRow> sweep_beta_hat(const Scenario& sc, const std::vector<std::pair<std::string, Vector>>& entries,
                                            const ExperimentSettings& s, const std::optional<std::string>& out_dir) {
    if (entries.empty()) throw ConfigError("sweep needs at least one beta_hat");
    const ProblemSchedule schedule = sc.schedule();
    const Reference ref = compute_reference(schedule, resolved_steps(sc, s));
    std::vector<SweepRow> rows;
    for (const auto& [label, beta_hat] : entries) {
        const VariantOutcome o = run_variant(sc, schedule, ref, Variant::StochasticInPO, beta_hat, s);
        const std::size_t T = o.last();
        SweepRow r;
        r.label = label;
        r.beta_err = distance(beta_hat, sc.problem.response.beta);
        r.distance = distance(o.stats.x_mean[T], ref.lcqp_at(T));
        r.terminal_gap = terminal_gap(o, sc.problem);
        r.p0_stderr = o.stats.p0_stderr[T];
        r.eta_gap = sc.problem.params.eta * ref.saddle_at(T).lambda;
        r.lambda_mean = o.stats.lambda_mean[T];
        r.floor = theoretical_floor(sc.problem, beta_hat, s.epsilon);
        rows.push_back(r);
    }
    if (out_dir) {
        const auto dir = prepare_output(*out_dir);
        CsvFile csv(dir / "sweep.csv", {"beta_hat", "beta_err", "distance_to_lcqp", "terminal_gap", "terminal_p0_stderr",
                                        "eta_gap", "terminal_lambda_mean", "floor", "floor_certified"});
        for (const auto& r : rows) {
            csv.row({r.label, format_number(r.beta_err), format_number(r.distance), format_number(r.terminal_gap),
                     format_number(r.p0_stderr), format_number(r.eta_gap), format_number(r.lambda_mean),
                     format_number(r.floor.floor), r.floor.certified ? "1" : "0"});
        }
    }
    return rows;
}

struct BoundReport {
    BoundParams bounds;
    double Delta = 0.0;
    double e0 = 0.0;
    std::size_t steps = 0;
    std::size_t runs = 0;
    std::optional<std::size_t> first_violation;
    Vector err_mean, err_stderr, bound;
};

/// Runs StochasticInPO at a certified step and checks mean e(t) <= bound(t) + 3 stderr
/// at every step. floor_factor scales the asymptotic term (1 for the real bound).
/// epsilon defaults to nu / L^2.
inline BoundReport verify_bounds(const Scenario& sc, const Vector& beta_hat, ExperimentSettings s,
                                 std::optional<double> epsilon, double floor_factor,
                                 const std::optional<std::string>& out_dir) {
    const Problem& p = sc.problem;
    const double nu = strong_monotonicity_modulus(p.params, p.response);
    const double L = lipschitz_constant(p);
    s.epsilon = epsilon.value_or(certified_step(nu, L));

    BoundReport rep;
    rep.bounds = make_bound_params(p, beta_hat, s.epsilon);  // throws outside the certified range
    const ProblemSchedule schedule = sc.schedule();
    const Reference ref = compute_reference(schedule, resolved_steps(sc, s));
    rep.Delta = ref.Delta;

    const VariantOutcome o = run_variant(sc, schedule, ref, Variant::StochasticInPO, beta_hat, s);
    const TrajectoryStats& st = o.stats;
    rep.steps = st.steps;
    rep.runs = st.runs;
    rep.e0 = st.err_mean[0];
    rep.err_mean = st.err_mean;
    rep.err_stderr = st.err_stderr;
    rep.bound.resize(st.steps);
    const double c = rep.bounds.c_eps;
    const double floor = floor_factor * error_floor(rep.bounds, rep.Delta);
    for (std::size_t t = 0; t < st.steps; ++t) rep.bound[t] = std::pow(c, static_cast<double>(t)) * rep.e0 + floor;
    rep.first_violation = first_dominance_violation(st, [&](std::size_t t) { return rep.bound[t]; });

    if (out_dir) {
        const auto dir = prepare_output(*out_dir);
        CsvFile csv(dir / "bounds.csv", {"t", "err_mean", "err_stderr", "bound", "dominated"});
        for (std::size_t t = 0; t < st.steps; ++t) {
            const bool ok = st.err_mean[t] <= rep.bound[t] + 3.0 * st.err_stderr[t];
            csv.row({std::to_string(t), format_number(st.err_mean[t]), format_number(st.err_stderr[t]),
                     format_number(rep.bound[t]), ok ? "1" : "0"});
        }
    }
    return rep;
}

}  // namespace drsim
