// drsim: build scenarios, run the pricing schemes, compare them, sweep the
// sensitivity estimate and check the convergence bounds.
//
// Exit codes: 0 success, 2 bad configuration, 3 divergence, 4 bound violation.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "drsim/drsim.hpp"

#ifndef DRSIM_DATA_DIR
#define DRSIM_DATA_DIR "data"
#endif

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitBound = 4;

struct Options {
    std::string scenario = "static";
    std::string feeder = std::string(DRSIM_DATA_DIR) + "/ieee37_feeder.json";
    std::optional<std::uint64_t> seed;
    std::string variant = "StochasticInPO";
    long long runs = 300;
    std::size_t steps = 0;
    std::optional<double> epsilon;
    std::vector<std::string> beta_hat;
    std::string out = ".";
    bool literal = false;
    std::string init = "zero";
    double corrupt_floor = 1.0;
    double solar_fraction = 0.0;
};

drsim::Scenario make_scenario(const Options& o) {
    const std::uint64_t seed = o.seed.value_or(1);
    if (o.scenario == "one-node") return drsim::one_node_scenario(seed);
    if (o.scenario == "static" || o.scenario == "timevarying") {
        std::ifstream in(o.feeder);
        if (!in) throw drsim::ConfigError("cannot read feeder file " + o.feeder);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw drsim::SchemaError(o.feeder + ": " + e.what());
        }
        const drsim::FeederModel nominal = drsim::load_feeder(doc);
        if (o.scenario == "static") return drsim::build_static_scenario(nominal.d_hat(), seed, {}, nominal.ids());
        drsim::TimeVaryingOptions tv;
        tv.solar_fraction = o.solar_fraction;
        return drsim::build_timevarying_scenario(nominal.d_hat(), seed, {}, nominal.ids(), tv);
    }
    if (!std::filesystem::exists(o.scenario)) {
        throw drsim::ConfigError("--scenario must be static, timevarying, one-node or an existing scenario file");
    }
    return drsim::load_scenario(o.scenario);
}

drsim::ExperimentSettings make_settings(const Options& o, const drsim::Scenario& sc) {
    if (o.runs < 1) throw drsim::ValidationError("--runs must be at least 1");
    if (o.init != "zero" && o.init != "saddle") throw drsim::ConfigError("--init must be zero or saddle");
    drsim::ExperimentSettings s;
    s.runs = static_cast<std::size_t>(o.runs);
    s.steps = o.steps;
    s.seed = o.seed.value_or(sc.master_seed);
    s.literal_equations = o.literal;
    s.start_at_saddle = o.init == "saddle";
    if (o.epsilon) {
        if (!(*o.epsilon > 0.0)) throw drsim::ValidationError("--epsilon must be positive");
        s.epsilon = *o.epsilon;
    }
    return s;
}

std::string single_beta_hat(const Options& o) {
    if (o.beta_hat.size() > 1) throw drsim::ConfigError("--beta-hat takes one value for this command");
    return o.beta_hat.empty() ? "ones" : o.beta_hat.front();
}

void cmd_build(const Options& o) {
    const drsim::Scenario sc = make_scenario(o);
    const auto dir = drsim::prepare_output(o.out);
    drsim::save_scenario(sc, (dir / "scenario.json").string());
    if (sc.profiles) {
        std::ofstream csv(dir / "profiles.csv");
        drsim::write_profiles_csv(csv, *sc.profiles);
    }
    std::printf("scenario %s: %zu nodes, p_ref %.6g, p0_tilde %.6g, Lambda %.6g, resampled nodes %zu\n",
                sc.name.c_str(), sc.problem.size(), sc.problem.target.p_ref, sc.problem.p0_tilde(),
                sc.problem.params.lambda_cap, sc.resampled_nodes.size());
}

void cmd_run(const Options& o) {
    const drsim::Scenario sc = make_scenario(o);
    const drsim::ExperimentSettings s = make_settings(o, sc);
    const drsim::Variant v = drsim::parse_variant(o.variant);
    const drsim::Vector beta_hat = drsim::resolve_beta_hat(single_beta_hat(o), sc.problem.response.beta);
    const auto res = drsim::run_experiment(sc, v, beta_hat, s, o.out);
    const std::size_t T = res.last();
    std::printf("%s: %zu runs, %zu steps, terminal p0 %.6g (p_ref %.6g), terminal cost %.6g\n",
                std::string(drsim::to_string(v)).c_str(), res.stats.runs, res.stats.steps, res.stats.p0_mean[T],
                sc.problem.target.p_ref, res.stats.cost_mean[T]);
}

void cmd_compare(const Options& o) {
    const drsim::Scenario sc = make_scenario(o);
    const drsim::ExperimentSettings s = make_settings(o, sc);
    const drsim::Vector beta_hat = drsim::resolve_beta_hat(single_beta_hat(o), sc.problem.response.beta);
    const auto cmp = drsim::compare_variants(sc, beta_hat, s, o.out);
    std::printf("%-15s %14s %14s\n", "variant", "|E p0 - p_ref|", "cost");
    for (const auto& r : cmp.outcomes) {
        std::printf("%-15s %14.6g %14.6g\n", std::string(drsim::to_string(r.variant)).c_str(),
                    drsim::terminal_gap(r, sc.problem), r.stats.cost_mean[r.last()]);
    }
}

void cmd_sweep(const Options& o) {
    const drsim::Scenario sc = make_scenario(o);
    const drsim::ExperimentSettings s = make_settings(o, sc);
    std::vector<std::string> forms = o.beta_hat;
    if (forms.empty()) forms = {"x0.25", "x0.5", "x1", "x2", "x4"};
    std::vector<std::pair<std::string, drsim::Vector>> entries;
    for (const auto& form : forms) entries.emplace_back(form, drsim::resolve_beta_hat(form, sc.problem.response.beta));
    const auto rows = drsim::sweep_beta_hat(sc, entries, s, o.out);
    std::printf("%-10s %12s %12s %14s\n", "beta_hat", "|bhat-beta|", "|Ex - x*|", "|E p0 - p_ref|");
    for (const auto& r : rows) {
        std::printf("%-10s %12.6g %12.6g %14.6g\n", r.label.c_str(), r.beta_err, r.distance, r.terminal_gap);
    }
}

int cmd_verify(const Options& o) {
    Options opts = o;
    const drsim::Scenario sc = make_scenario(opts);
    if (opts.steps == 0 && !sc.profiles) opts.steps = 10000;
    const drsim::ExperimentSettings s = make_settings(opts, sc);
    const drsim::Vector beta_hat = drsim::resolve_beta_hat(single_beta_hat(opts), sc.problem.response.beta);
    if (!(opts.corrupt_floor >= 0.0)) throw drsim::ValidationError("--corrupt-floor must be >= 0");
    const auto rep = drsim::verify_bounds(sc, beta_hat, s, opts.epsilon, opts.corrupt_floor, opts.out);
    const auto& b = rep.bounds;
    std::printf("nu %.10g\nL %.10g\nepsilon %.10g\nc(epsilon) %.17g\nB %.10g\ne_xi_bar %.10g\nDelta %.10g\n", b.nu,
                b.L, b.epsilon, b.c_eps, b.B_const, b.e_xi_bar, rep.Delta);
    std::printf("|beta_hat - beta| %.10g\ne0 %.10g\nruns %zu\nsteps %zu\n", b.beta_err, rep.e0, rep.runs, rep.steps);
    if (rep.first_violation) {
        const std::size_t t = *rep.first_violation;
        std::fprintf(stderr, "bound violated at step %zu: mean e %.10g > bound %.10g + 3 stderr (%.10g)\n", t,
                     rep.err_mean[t], rep.bound[t], rep.err_stderr[t]);
        return kExitBound;
    }
    std::printf("bound holds at every step\n");
    return 0;
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--scenario", o.scenario, "static, timevarying, one-node, or a scenario JSON file");
    cmd->add_option("--feeder", o.feeder, "feeder document for the built-in scenarios");
    cmd->add_option("--seed", o.seed, "seed for scenario parameters and Monte Carlo streams");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--solar-fraction", o.solar_fraction, "share of households with rooftop solar (timevarying)");
}

void add_run_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--runs", o.runs, "Monte Carlo runs");
    cmd->add_option("--steps", o.steps, "iterations per run (default: 3000 static, DRE window otherwise)");
    cmd->add_option("--epsilon", o.epsilon, "step size");
    cmd->add_option("--beta-hat", o.beta_hat, "ones | true | x<k> | scalar | comma list");
    cmd->add_flag("--literal-paper-equations", o.literal, "use the dual updates exactly as printed");
    cmd->add_option("--init", o.init, "initial point: zero or saddle");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Demand-response pricing simulator"};
    app.require_subcommand(1);
    Options o;

    auto* build = app.add_subcommand("build", "build a scenario and write scenario.json");
    add_common(build, o);

    auto* run = app.add_subcommand("run", "run one scheme over a Monte Carlo ensemble");
    add_common(run, o);
    add_run_options(run, o);
    run->add_option("--variant", o.variant, "PO, InPO, PS or StochasticInPO");

    auto* compare = app.add_subcommand("compare", "run all four schemes on the same scenario");
    add_common(compare, o);
    add_run_options(compare, o);

    auto* sweep = app.add_subcommand("sweep-beta", "StochasticInPO under several beta_hat estimates");
    add_common(sweep, o);
    add_run_options(sweep, o);

    auto* verify = app.add_subcommand("verify-bounds", "check mean error against the theoretical bound");
    add_common(verify, o);
    add_run_options(verify, o);
    verify->add_option("--corrupt-floor", o.corrupt_floor, "multiply the bound's floor (negative control)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (build->parsed()) cmd_build(o);
        if (run->parsed()) cmd_run(o);
        if (compare->parsed()) cmd_compare(o);
        if (sweep->parsed()) cmd_sweep(o);
        if (verify->parsed()) return cmd_verify(o);
    } catch (const drsim::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDivergence;
    } catch (const drsim::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const drsim::CertifiedRegimeError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const drsim::DualCapError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const drsim::InfeasibleError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
