#pragma once

// Experiment setups: a static feeder with random flexibility and sensitivities,
// and the same feeder driven by minute-level baseline profiles over a DRE window.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drsim/errors.hpp"
#include "drsim/grid_model.hpp"
#include "drsim/problem.hpp"
#include "drsim/random.hpp"
#include "drsim/reference_solvers.hpp"
#include "drsim/response_model.hpp"
#include "drsim/vector_ops.hpp"

namespace drsim {

/// Per-bus baseline series d_hat_n(t), one entry per step of the DRE window.
struct LoadProfileSet {
    std::vector<std::string> ids;
    std::vector<Vector> series;  ///< series[bus][t]
    std::size_t resolution_minutes = 1;
    std::size_t start_minute = 0;  ///< minute of day of step 0

    std::size_t bus_count() const noexcept { return series.size(); }
    std::size_t length() const noexcept { return series.empty() ? 0 : series.front().size(); }

    Vector d_hat_at(std::size_t t) const {
        Vector out(series.size());
        for (std::size_t b = 0; b < series.size(); ++b) out[b] = series[b].at(t);
        return out;
    }

    /// Step-major view for ProblemSchedule.
    std::vector<Vector> by_step() const {
        std::vector<Vector> out;
        out.reserve(length());
        for (std::size_t t = 0; t < length(); ++t) out.push_back(d_hat_at(t));
        return out;
    }

    void validate() const {
        if (series.empty() || length() == 0) throw ValidationError("profiles: empty profile set");
        if (resolution_minutes == 0) throw ValidationError("profiles: resolution must be positive");
        require_same_length(series.size(), ids.size(), "profile ids");
        for (const Vector& s : series) {
            if (s.size() != length()) throw ValidationError("profiles: all buses need the same number of steps");
            if (!all_finite(s)) throw ValidationError("profiles: non-finite value");
        }
    }
};

struct Scenario {
    std::string name;
    Problem problem;  ///< nominal (static) problem
    std::optional<LoadProfileSet> profiles;
    std::uint64_t master_seed = 0;
    std::vector<std::size_t> resampled_nodes;  ///< nodes whose (delta, beta) draw was repeated

    ProblemSchedule schedule() const {
        if (!profiles) return ProblemSchedule(problem);
        return ProblemSchedule(problem, profiles->by_step());
    }

    void validate() const {
        problem.validate();
        if (profiles) {
            profiles->validate();
            require_same_length(problem.size(), profiles->bus_count(), "profile buses");
            if (profiles->length() != problem.target.window_length()) {
                throw ValidationError("scenario: profile length must equal the DRE window length");
            }
        }
    }
};

struct ScenarioOverrides {
    TariffParams tariff;
    ObjectiveParams params;                  ///< lambda_cap ignored unless lambda_cap below is set
    std::optional<double> lambda_cap;
    std::optional<double> p_ref;
    std::optional<Vector> s;
    std::optional<Vector> r;
    double beta_max = 2.0;                   ///< beta ~ U[0, beta_max]
    double beta_floor = 0.05;
    double delta_scale = 2.0;                ///< delta ~ U[0, delta_scale d_hat]
    double sigma0_fraction = 0.1;            ///< sigma0 = fraction * delta
    double zeta = 1.0;
    ResponseFamily family = ResponseFamily::gaussian;
    std::size_t window_start = 600;          ///< 10:00
    std::size_t window_length = 300;         ///< until 15:00 at one-minute steps
    std::size_t max_draws_per_node = 100000;
};

namespace detail {

inline constexpr std::uint64_t kParameterStream = 1;
inline constexpr std::uint64_t kProfileStream = 2;
inline constexpr std::uint64_t kBetaStream = 3;

/// Interval of p_ref values the price box can actually reach without curtailing
/// inflexible load: [max(s.(d_hat - r), s.d_pre - max_x s.Bx), s.d_pre].
inline std::pair<double, double> reachable_p_ref(const FeederModel& f, ConstSpan beta, const TariffParams& tariff) {
    double lowest_possible = 0.0, reach = 0.0;
    const Vector d_pre = f.d_pre();
    for (std::size_t n = 0; n < f.size(); ++n) {
        lowest_possible += f.s()[n] * (f.d_hat()[n] - f.r()[n]);
        const double c = f.s()[n] * beta[n];
        reach += std::max(c * tariff.x_min, c * tariff.x_max);
    }
    const double hi = dot(f.s(), d_pre);
    return {std::max(lowest_possible, hi - reach), hi};
}

inline double default_lambda_cap(double p0_tilde, ConstSpan s) {
    double min_s = 0.0;
    bool any = false;
    for (double v : s) {
        if (v > 0.0) {
            min_s = any ? std::min(min_s, v) : v;
            any = true;
        }
    }
    // beta_hat = 1 at build time, so min_n s_n beta_hat_n = min_n s_n.
    if (!any || p0_tilde <= 0.0) return 10.0;
    return std::max(10.0, 10.0 * p0_tilde / min_s);
}

}  // namespace detail

/// d_hat = nominal loads; (delta_n, beta_n) drawn jointly from U[0, 2 d_hat_n] x U[0, 2]
/// and redrawn until beta_n >= beta_floor and delta_n >= beta_n x_max, which keeps
/// the mean response nonnegative on the whole price box.
inline Scenario build_static_scenario(const Vector& nominal_loads, std::uint64_t master_seed,
                                      const ScenarioOverrides& o = {}, std::vector<std::string> ids = {}) {
    if (nominal_loads.empty()) throw ValidationError("scenario: empty load set");
    for (double d : nominal_loads) {
        if (!(d > 0.0) || !std::isfinite(d)) throw ValidationError("scenario: nominal loads must be positive");
    }
    o.tariff.validate();
    if (!(o.beta_floor > 0.0) || !(o.beta_max > o.beta_floor)) {
        throw ValidationError("scenario: need 0 < beta_floor < beta_max");
    }
    const std::size_t n = nominal_loads.size();
    CounterStream stream = CounterStream(master_seed).split(detail::kParameterStream);
    Vector delta(n), beta(n);
    std::vector<std::size_t> resampled;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t draws = 0;
        for (;;) {
            if (draws++ == o.max_draws_per_node) {
                throw ValidationError("scenario: node " + std::to_string(i) +
                                      " cannot satisfy delta >= beta x_max; lower x_max");
            }
            delta[i] = uniform(stream, 0.0, o.delta_scale * nominal_loads[i]);
            beta[i] = uniform(stream, 0.0, o.beta_max);
            if (beta[i] >= o.beta_floor && delta[i] >= beta[i] * o.tariff.x_max) break;
        }
        if (draws > 1) resampled.push_back(i);
    }

    Vector s = o.s.value_or(Vector(n, 1.0));
    Vector r = o.r.value_or(Vector(n, 0.0));
    FeederModel feeder(std::move(s), nominal_loads, delta, std::move(r), std::move(ids));

    DreTarget target;
    target.window_start = o.window_start;
    target.window_end = o.window_start + o.window_length;
    if (o.p_ref) {
        const double lo = dot(feeder.s(), difference(feeder.d_hat(), feeder.r()));
        const double hi = dot(feeder.s(), feeder.d_pre());
        if (*o.p_ref < lo || *o.p_ref > hi) {
            throw ValidationError("scenario: p_ref must lie in [s.(d_hat - r), s.d_pre]");
        }
        target.p_ref = *o.p_ref;
    } else {
        const auto [lo, hi] = detail::reachable_p_ref(feeder, beta, o.tariff);
        target.p_ref = 0.5 * (lo + hi);
    }

    ResponseModel response{beta, scaled(delta, o.sigma0_fraction), o.zeta, o.family};
    ObjectiveParams params = o.params;
    params.lambda_cap = o.lambda_cap.value_or(detail::default_lambda_cap(target.p0_tilde(feeder), feeder.s()));

    Scenario sc{"static", Problem{std::move(feeder), o.tariff, target, std::move(response), params}, std::nullopt,
                master_seed, std::move(resampled)};
    sc.validate();
    if (!mean_nonnegative_on_box(sc.problem.response, sc.problem.feeder, sc.problem.tariff)) {
        throw ValidationError("scenario: mean response is negative somewhere on the price box");
    }
    regularized_saddle_point(sc.problem);  // throws DualCapError if Lambda is too small
    return sc;
}

/// Sum of `households` synthetic household traces per bus over the window,
/// scaled so each bus peaks at its nominal load within the window.
///
/// A household is a base load, morning and evening bumps, an afternoon cooling
/// bump and a handful of appliance pulses; with probability solar_fraction it
/// also subtracts a midday generation bell, which can push net load negative.
inline LoadProfileSet synth_load_profiles(const Vector& nominal_loads, std::size_t start_minute, std::size_t length,
                                          std::uint64_t seed, double solar_fraction = 0.0,
                                          std::size_t households = 25, std::vector<std::string> ids = {}) {
    if (length == 0) throw ValidationError("profiles: window must be nonempty");
    if (households == 0) throw ValidationError("profiles: need at least one household per bus");
    if (solar_fraction < 0.0 || solar_fraction > 1.0) throw ValidationError("profiles: solar_fraction must be in [0, 1]");
    for (double d : nominal_loads) {
        if (!(d > 0.0) || !std::isfinite(d)) throw ValidationError("profiles: nominal loads must be positive");
    }
    if (ids.empty()) {
        for (std::size_t b = 0; b < nominal_loads.size(); ++b) ids.push_back(std::to_string(b + 1));
    }
    require_same_length(nominal_loads.size(), ids.size(), "profile ids");

    auto bell = [](double h, double centre, double width) {
        const double z = (h - centre) / width;
        return std::exp(-0.5 * z * z);
    };

    LoadProfileSet set;
    set.ids = std::move(ids);
    set.start_minute = start_minute;
    set.series.assign(nominal_loads.size(), Vector(length, 0.0));
    const CounterStream root = CounterStream(seed).split(detail::kProfileStream);
    for (std::size_t b = 0; b < nominal_loads.size(); ++b) {
        Vector& bus = set.series[b];
        for (std::size_t k = 0; k < households; ++k) {
            CounterStream rng = root.split(b).split(k);
            const double base = uniform(rng, 0.15, 0.4);
            const double a_morning = uniform(rng, 0.2, 0.8), c_morning = uniform(rng, 6.5, 8.5),
                         w_morning = uniform(rng, 0.5, 1.2);
            const double a_evening = uniform(rng, 0.5, 1.5), c_evening = uniform(rng, 18.0, 20.5),
                         w_evening = uniform(rng, 1.0, 2.0);
            const double a_cool = uniform(rng, 0.0, 1.0), c_cool = uniform(rng, 14.0, 16.5),
                         w_cool = uniform(rng, 1.5, 3.0);
            const bool solar = uniform01(rng) < solar_fraction;
            const double a_solar = uniform(rng, 1.0, 4.0);
            const auto pulses = static_cast<std::size_t>(4.0 + 12.0 * uniform01(rng));
            std::vector<std::tuple<double, double, double>> pulse;  // start, end, kW
            for (std::size_t j = 0; j < pulses; ++j) {
                const double begin = uniform(rng, 0.0, 1440.0);
                pulse.emplace_back(begin, begin + uniform(rng, 3.0, 45.0), uniform(rng, 0.3, 2.0));
            }
            for (std::size_t t = 0; t < length; ++t) {
                const double minute = static_cast<double>(start_minute + t);
                const double h = minute / 60.0;
                double v = base + a_morning * bell(h, c_morning, w_morning) + a_evening * bell(h, c_evening, w_evening) +
                           a_cool * bell(h, c_cool, w_cool);
                for (const auto& [begin, end, kw] : pulse) {
                    if (minute >= begin && minute < end) v += kw;
                }
                if (solar) v -= a_solar * bell(h, 12.5, 2.2);
                bus[t] += v;
            }
        }
        const double peak = *std::max_element(bus.begin(), bus.end());
        if (!(peak > 0.0)) throw ValidationError("profiles: bus " + set.ids[b] + " never draws positive power");
        const double scale = nominal_loads[b] / peak;
        for (double& v : bus) v *= scale;
    }
    return set;
}

struct TimeVaryingOptions {
    double solar_fraction = 0.0;
    std::size_t households = 25;
};

/// The static scenario (same seed, same p_ref) plus profiles over the DRE window.
inline Scenario build_timevarying_scenario(const Vector& nominal_loads, std::uint64_t master_seed,
                                           const ScenarioOverrides& o = {}, std::vector<std::string> ids = {},
                                           const TimeVaryingOptions& tv = {}) {
    Scenario sc = build_static_scenario(nominal_loads, master_seed, o, ids);
    sc.name = "timevarying";
    sc.profiles = synth_load_profiles(nominal_loads, o.window_start, o.window_length, master_seed, tv.solar_fraction,
                                      tv.households, sc.problem.feeder.ids());
    sc.validate();
    return sc;
}

/// Single-node hand instance: s = beta = 1, d_hat = delta = 1, p_ref = 1.5 so
/// p0_tilde = 0.5, kappa = 5, eta = 0.01, X = [0, 1], Lambda = 10, sigma0 = 0.1.
inline Scenario one_node_scenario(std::uint64_t master_seed = 0) {
    FeederModel feeder({1.0}, {1.0}, {1.0}, {0.0}, {"1"});
    DreTarget target{1.5, 600, 900};
    ResponseModel response{{1.0}, {0.1}, 1.0, ResponseFamily::gaussian};
    Scenario sc{"one-node", Problem{std::move(feeder), TariffParams{}, target, std::move(response), ObjectiveParams{}},
                std::nullopt, master_seed, {}};
    sc.validate();
    return sc;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json scenario_to_json(const Scenario& sc) {
    const Problem& p = sc.problem;
    nlohmann::json doc;
    doc["name"] = sc.name;
    doc["master_seed"] = sc.master_seed;
    doc["feeder"] = {{"ids", p.feeder.ids()},
                     {"s", p.feeder.s()},
                     {"d_hat", p.feeder.d_hat()},
                     {"delta", p.feeder.delta()},
                     {"r", p.feeder.r()}};
    doc["tariff"] = {{"pi", p.tariff.pi},
                     {"pi0", p.tariff.pi0},
                     {"omega", p.tariff.omega},
                     {"x_min", p.tariff.x_min},
                     {"x_max", p.tariff.x_max}};
    doc["target"] = {{"p_ref", p.target.p_ref},
                     {"window_start", p.target.window_start},
                     {"window_end", p.target.window_end}};
    doc["response"] = {{"beta", p.response.beta},
                       {"sigma0", p.response.sigma0},
                       {"zeta", p.response.zeta},
                       {"family", std::string(to_string(p.response.family))}};
    doc["objective"] = {{"kappa", p.params.kappa}, {"eta", p.params.eta}, {"lambda_cap", p.params.lambda_cap}};
    doc["resampled_nodes"] = sc.resampled_nodes;
    if (sc.profiles) {
        doc["profiles"] = {{"start_minute", sc.profiles->start_minute},
                           {"resolution_minutes", sc.profiles->resolution_minutes},
                           {"ids", sc.profiles->ids},
                           {"series", sc.profiles->series}};
    }
    return doc;
}

namespace detail {

inline const nlohmann::json& section(const nlohmann::json& doc, const char* key) {
    const auto it = doc.find(key);
    if (it == doc.end() || !it->is_object()) throw SchemaError(std::string("scenario: missing object '") + key + "'");
    return *it;
}

inline double number_or(const nlohmann::json& obj, const char* key, double fallback, const std::string& where) {
    return obj.contains(key) ? number_field(obj, key, where) : fallback;
}

inline std::size_t count_or(const nlohmann::json& obj, const char* key, std::size_t fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_unsigned()) throw SchemaError(std::string("scenario: '") + key + "' must be a nonnegative integer");
    return it->get<std::size_t>();
}

/// "uniform[a,b]" -> (a, b).
inline std::optional<std::pair<double, double>> parse_uniform_range(const std::string& text) {
    double a = 0.0, b = 0.0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "uniform[%lf,%lf%c", &a, &b, &tail) == 3 && tail == ']' && a < b) {
        return std::make_pair(a, b);
    }
    return std::nullopt;
}

}  // namespace detail

/// Inverse of scenario_to_json. beta may also be given as "uniform[a,b]", drawn
/// from the master seed.
inline Scenario scenario_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaError("scenario document must be an object");
    const std::uint64_t seed = doc.value("master_seed", std::uint64_t{0});
    FeederModel feeder = load_feeder(detail::section(doc, "feeder"));
    const std::size_t n = feeder.size();

    TariffParams tariff;
    if (doc.contains("tariff")) {
        const auto& t = detail::section(doc, "tariff");
        tariff.pi = detail::number_or(t, "pi", tariff.pi, "tariff");
        tariff.pi0 = detail::number_or(t, "pi0", tariff.pi0, "tariff");
        tariff.omega = detail::number_or(t, "omega", tariff.omega, "tariff");
        tariff.x_min = detail::number_or(t, "x_min", tariff.x_min, "tariff");
        tariff.x_max = detail::number_or(t, "x_max", tariff.x_max, "tariff");
    }

    const auto& tj = detail::section(doc, "target");
    DreTarget target;
    target.p_ref = detail::number_field(tj, "p_ref", "target");
    target.window_start = detail::count_or(tj, "window_start", 0);
    target.window_end = detail::count_or(tj, "window_end", target.window_start);
    if (target.window_end < target.window_start) throw ValidationError("target: window ends before it starts");

    const auto& rj = detail::section(doc, "response");
    ResponseModel response;
    if (!rj.contains("beta")) throw SchemaError("response: missing 'beta'");
    if (rj.at("beta").is_string()) {
        const auto range = detail::parse_uniform_range(rj.at("beta").get<std::string>());
        if (!range) throw SchemaError("response: beta must be a vector or \"uniform[a,b]\"");
        CounterStream stream = CounterStream(seed).split(detail::kBetaStream);
        response.beta.resize(n);
        for (double& b : response.beta) b = uniform(stream, range->first, range->second);
    } else {
        response.beta = detail::number_array(rj.at("beta"), "response beta");
    }
    response.sigma0 = rj.contains("sigma0") ? detail::number_array(rj.at("sigma0"), "response sigma0")
                                            : scaled(feeder.delta(), 0.1);
    response.zeta = detail::number_or(rj, "zeta", 1.0, "response");
    if (rj.contains("family")) response.family = parse_response_family(rj.at("family").get<std::string>());

    ObjectiveParams params;
    if (doc.contains("objective")) {
        const auto& oj = detail::section(doc, "objective");
        params.kappa = detail::number_or(oj, "kappa", params.kappa, "objective");
        params.eta = detail::number_or(oj, "eta", params.eta, "objective");
        params.lambda_cap = detail::number_or(oj, "lambda_cap", params.lambda_cap, "objective");
    }

    Scenario sc{doc.value("name", std::string("custom")),
                Problem{std::move(feeder), tariff, target, std::move(response), params}, std::nullopt, seed, {}};
    if (doc.contains("resampled_nodes")) sc.resampled_nodes = doc.at("resampled_nodes").get<std::vector<std::size_t>>();
    if (doc.contains("profiles")) {
        const auto& pj = detail::section(doc, "profiles");
        LoadProfileSet set;
        set.start_minute = detail::count_or(pj, "start_minute", target.window_start);
        set.resolution_minutes = detail::count_or(pj, "resolution_minutes", 1);
        set.ids = pj.contains("ids") ? pj.at("ids").get<std::vector<std::string>>() : sc.problem.feeder.ids();
        if (!pj.contains("series") || !pj.at("series").is_array()) throw SchemaError("profiles: missing 'series'");
        for (const auto& row : pj.at("series")) set.series.push_back(detail::number_array(row, "profiles series"));
        sc.profiles = std::move(set);
    }
    sc.validate();
    return sc;
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << scenario_to_json(sc).dump(2) << '\n';
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return scenario_from_json(doc);
}

/// Header `bus_id,t,kw`, one row per bus per step.
inline void write_profiles_csv(std::ostream& out, const LoadProfileSet& set) {
    out << "bus_id,t,kw\n";
    char buf[64];
    for (std::size_t b = 0; b < set.series.size(); ++b) {
        for (std::size_t t = 0; t < set.series[b].size(); ++t) {
            std::snprintf(buf, sizeof buf, "%.17g", set.series[b][t]);
            out << set.ids[b] << ',' << t << ',' << buf << '\n';
        }
    }
}

/// Reads `bus_id,t,kw` rows for the given buses. Each bus needs steps 0..T-1
/// with the same T. When nominal loads are given, each bus is rescaled so its
/// peak equals its nominal load, as the synthetic generator does.
inline LoadProfileSet read_profiles_csv(std::istream& in, const std::vector<std::string>& ids,
                                        std::size_t start_minute = 0,
                                        const std::optional<Vector>& normalize_to = std::nullopt) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("profiles csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "bus_id,t,kw") throw SchemaError("profiles csv: header must be bus_id,t,kw");

    std::map<std::string, std::size_t> index;
    for (std::size_t b = 0; b < ids.size(); ++b) index[ids[b]] = b;
    std::vector<std::map<std::size_t, double>> rows(ids.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string bus, t_text, kw_text;
        if (!std::getline(ss, bus, ',') || !std::getline(ss, t_text, ',') || !std::getline(ss, kw_text)) {
            throw SchemaError("profiles csv line " + std::to_string(line_no) + ": expected 3 fields");
        }
        const auto it = index.find(bus);
        if (it == index.end()) throw SchemaError("profiles csv: unknown bus '" + bus + "'");
        std::size_t t = 0;
        double kw = 0.0;
        try {
            std::size_t used = 0;
            t = std::stoul(t_text, &used);
            if (used != t_text.size()) throw std::invalid_argument(t_text);
            kw = std::stod(kw_text, &used);
            if (used != kw_text.size()) throw std::invalid_argument(kw_text);
        } catch (const std::exception&) {
            throw SchemaError("profiles csv line " + std::to_string(line_no) + ": bad number");
        }
        if (!rows[it->second].emplace(t, kw).second) {
            throw SchemaError("profiles csv: duplicate row for bus " + bus + " t=" + std::to_string(t));
        }
    }

    LoadProfileSet set;
    set.ids = ids;
    set.start_minute = start_minute;
    for (std::size_t b = 0; b < ids.size(); ++b) {
        Vector s;
        for (const auto& [t, kw] : rows[b]) {
            if (t != s.size()) throw ValidationError("profiles csv: gap in steps for bus " + ids[b]);
            s.push_back(kw);
        }
        set.series.push_back(std::move(s));
    }
    if (normalize_to) {
        require_same_length(ids.size(), normalize_to->size(), "profile nominal loads");
        for (std::size_t b = 0; b < ids.size(); ++b) {
            auto& s = set.series[b];
            if (s.empty()) continue;
            const double peak = *std::max_element(s.begin(), s.end());
            if (!(peak > 0.0)) throw ValidationError("profiles csv: bus " + ids[b] + " never draws positive power");
            for (double& v : s) v *= (*normalize_to)[b] / peak;
        }
    }
    set.validate();
    return set;
}

}  // namespace drsim
