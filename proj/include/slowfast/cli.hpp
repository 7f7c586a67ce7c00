#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "slowfast/averaging.hpp"
#include "slowfast/conditions.hpp"
#include "slowfast/config.hpp"
#include "slowfast/csv.hpp"
#include "slowfast/expression.hpp"
#include "slowfast/fast_dynamics.hpp"
#include "slowfast/mdp_rate.hpp"
#include "slowfast/rare_event.hpp"
#include "slowfast/simulate.hpp"

namespace slowfast::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitUsage = 64;

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"validate", "invariant", "poisson",     "averaged", "rate",
                                                   "action",   "minimize",  "simulate", "limit-check", "estimate"};
    return names;
}

// ============================================================================
// Run context
// ============================================================================

struct Run {
    RunConfig cfg;
    SlowFastModel model;
    std::filesystem::path dir;
    std::string status = "validated";
    std::ostream* out = &std::cout;

    void stamp(std::vector<std::pair<std::string, std::string>>& meta) const {
        std::erase_if(meta, [](const auto& kv) { return kv.first == "model"; });
        meta.insert(meta.begin(), {{"model", model.name}, {"status", status}});
    }
    void write(const std::string& name, CsvTable t) const {
        stamp(t.meta);
        t.write((dir / name).string());
    }
    void write(const std::string& name, PlotData p) const {
        stamp(p.meta);
        write_text((dir / name).string(), p.str());
    }
    void write_kv(const std::string& name, const std::vector<std::pair<std::string, std::string>>& kv) const {
        std::ostringstream os;
        os << "model = " << model.name << "\nstatus = " << status << '\n';
        for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
        write_text((dir / name).string(), os.str());
    }
};

inline PipelineOptions pipeline_options(const RunConfig& cfg) {
    PipelineOptions o;
    o.nodes = cfg.count("numerics", "nodes");
    o.density_tail = cfg.number("numerics", "density_tail");
    const auto& m = cfg.get("numerics", "poisson_method");
    if (m == "quadrature")
        o.method = PoissonMethod::Quadrature;
    else if (m == "finite_difference")
        o.method = PoissonMethod::FiniteDifference;
    else
        fail(ErrorCode::ConfigError, "numerics.poisson_method must be quadrature or finite_difference");
    o.poisson.residual_tol = cfg.number("numerics", "residual_tol");
    o.require_certified = cfg.flag("numerics", "require_certified");
    return o;
}

inline SimConfig sim_config(const RunConfig& cfg, double eps) {
    SimConfig s;
    s.epsilon = eps;
    s.path_count = cfg.count("simulation", "paths");
    s.seed = static_cast<std::uint64_t>(cfg.count("simulation", "seed"));
    s.workers = static_cast<unsigned>(cfg.count("simulation", "workers"));
    s.substeps = cfg.count("simulation", "substeps");
    s.dt_cap = cfg.number("simulation", "dt_cap");
    s.antithetic = cfg.flag("simulation", "antithetic");
    s.record_stride = cfg.count("simulation", "record_stride");
    s.delta = cfg.optional_number("simulation", "delta");
    s.h = cfg.optional_number("simulation", "h");
    return s;
}

inline ConditionReport run_conditions(const RunConfig& cfg, const SlowFastModel& model) {
    const double w = cfg.number("validation", "x_half_width");
    std::vector<std::vector<double>> probes{model.x0};
    ScanBox box;
    box.x_lo = model.x0;
    box.x_hi = model.x0;
    for (std::size_t i = 0; i < model.dims.n; ++i) {
        box.x_lo[i] -= w;
        box.x_hi[i] += w;
    }
    probes.push_back(box.x_lo);
    probes.push_back(box.x_hi);
    box.y_radius = cfg.number("validation", "growth_radius");
    const double y_radius =
        cfg.optional_number("validation", "y_radius").value_or(std::max(10.0, 2.0 * model.params.R_rec + 1.0));
    return validate_model(model, probes, y_radius, box);
}

/// "lo:hi:count" -> count equispaced points.
inline std::vector<double> parse_range(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto colon = text.find(':', start);
        parts.push_back(text.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
        if (colon == std::string::npos) break;
        start = colon + 1;
    }
    require(parts.size() == 3, ErrorCode::ConfigError, "range must be lo:hi:count, got '" + text + "'");
    const double lo = detail::parse_double("range lo", parts[0]);
    const double hi = detail::parse_double("range hi", parts[1]);
    const double cnt = detail::parse_double("range count", parts[2]);
    require(cnt >= 1 && cnt == std::floor(cnt) && hi >= lo, ErrorCode::ConfigError, "bad range '" + text + "'");
    const auto k = static_cast<std::size_t>(cnt);
    std::vector<double> xs(k);
    for (std::size_t i = 0; i < k; ++i)
        xs[i] = k == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
    return xs;
}

inline std::vector<double> query_x(const Run& run) {
    auto x = run.cfg.list("query", "x");
    require(x.size() == run.model.dims.n, ErrorCode::ConfigError, "query.x needs n components");
    return x;
}

inline VectorXd query_ell(const Run& run) {
    const auto ell = run.cfg.list("query", "ell");
    require(ell.size() == run.model.dims.n, ErrorCode::ConfigError, "query.ell needs n components");
    return Eigen::Map<const VectorXd>(ell.data(), static_cast<Eigen::Index>(ell.size()));
}

inline EventDirection query_direction(const Run& run) {
    const auto& d = run.cfg.get("query", "direction");
    if (d == "at_least") return EventDirection::AtLeast;
    if (d == "at_most") return EventDirection::AtMost;
    fail(ErrorCode::ConfigError, "query.direction must be at_least or at_most");
}

// ============================================================================
// Subcommands
// ============================================================================

inline int cmd_invariant(Run& run) {
    const auto x = query_x(run);
    DensityCache cache(run.model, pipeline_options(run.cfg));
    const auto dens = cache.get(x);
    auto t = density_csv(*dens);
    t.add_meta("x", fmt::join(x));
    const double stat = stationarity_check(*dens, run.model, x, standard_test_battery(run.model));
    t.add_meta("stationarity_residual", stat);
    run.write("density.csv", std::move(t));
    *run.out << "density nodes=" << dens->grid.size() << " mass_defect=" << fmt::num(dens->mass_defect)
             << " stationarity_residual=" << fmt::num(stat) << '\n';
    return kExitOk;
}

inline int cmd_poisson(Run& run) {
    const auto x = query_x(run);
    const RateIngredients ing(run.model, pipeline_options(run.cfg));
    const auto p = ing.at(x);
    const auto& which = run.cfg.get("query", "which");
    require(which == "chi" || which == "phi" || which == "both", ErrorCode::ConfigError,
            "query.which must be chi, phi or both");
    if (which != "phi") {
        require(p->chi.has_value() || which == "both", ErrorCode::ConfigError, "the cell problem belongs to Regime 1");
        if (p->chi) {
            auto t = corrector_csv(*p->chi);
            t.add_meta("x", fmt::join(x));
            run.write("chi.csv", std::move(t));
            *run.out << "chi residual=" << fmt::num(p->chi->residual_sup) << '\n';
        }
    }
    if (which != "chi") {
        auto t = corrector_csv(p->phi);
        t.add_meta("x", fmt::join(x));
        run.write("phi.csv", std::move(t));
        *run.out << "phi residual=" << fmt::num(p->phi.residual_sup) << '\n';
    }
    return kExitOk;
}

inline int cmd_averaged(Run& run) {
    const RateIngredients ing(run.model, pipeline_options(run.cfg));
    const auto path = solve_xbar(ing.drift(), run.model.x0, run.cfg.count("numerics", "xbar_nodes"));
    run.write("xbar.csv", averaged_path_csv(path));
    *run.out << "xbar(1)=" << fmt::join(path.values.back()) << " halving_error=" << fmt::num(path.halving_error)
             << '\n';
    return kExitOk;
}

inline int cmd_rate(Run& run) {
    require(run.model.dims.n == 1, ErrorCode::ConfigError, "rate sweeps need n = 1");
    const RateIngredients ing(run.model, pipeline_options(run.cfg));
    const auto xs = parse_range(run.cfg.get("query", "x_grid"));
    auto table = rate_csv(ing, xs);
    PlotData plot;
    for (const auto& row : table.rows) {
        plot.add("kappa_A", row[0], row[2]);
        plot.add("kappa_d", row[0], row[3]);
        plot.add("q", row[0], row[4]);
    }
    run.write("rate.csv", std::move(table));
    run.write("rate_plot.csv", std::move(plot));
    *run.out << "rate rows=" << xs.size() << '\n';
    return kExitOk;
}

namespace detail {

struct PathSetup {
    std::unique_ptr<RateIngredients> ing;
    AveragedPath xbar;
    PathCoefficients pc;
};

inline PathSetup path_setup(const Run& run) {
    PathSetup s;
    s.ing = std::make_unique<RateIngredients>(run.model, pipeline_options(run.cfg));
    s.xbar = solve_xbar(s.ing->drift(), run.model.x0, run.cfg.count("numerics", "xbar_nodes"));
    s.pc = path_coefficients(*s.ing, s.xbar, run.cfg.count("numerics", "time_steps"));
    return s;
}

inline PlotData path_plot(const DeviationPath& xi) {
    PlotData plot;
    plot.x_name = "t";
    for (Eigen::Index i = 0; i < xi.values.front().size(); ++i)
        for (std::size_t k = 0; k < xi.size(); ++k) plot.add("xi_" + std::to_string(i + 1), xi.times[k], xi.values[k][i]);
    return plot;
}

}  // namespace detail

inline int cmd_action(Run& run) {
    require(run.cfg.has("query", "path"), ErrorCode::ConfigError, "action needs query.path (components in t)");
    const auto setup = detail::path_setup(run);
    const auto parts = split_components(run.cfg.get("query", "path"));
    require(parts.size() == run.model.dims.n, ErrorCode::ConfigError, "query.path needs n components");
    std::vector<Expression> comps;
    for (const auto& p : parts) comps.push_back(Expression::parse(p, {{"t", 0}}));
    DeviationPath xi;
    xi.times = setup.pc.times;
    for (const double t : xi.times) {
        VectorXd v(static_cast<Eigen::Index>(comps.size()));
        const double arg[1] = {t};
        for (std::size_t i = 0; i < comps.size(); ++i) v[static_cast<Eigen::Index>(i)] = comps[i](arg);
        xi.values.push_back(v);
    }
    const double value = action_functional(setup.pc, xi);
    auto t = deviation_path_csv(xi, value);
    t.meta.front().first = "action";
    run.write("action.csv", std::move(t));
    *run.out << "action=" << fmt::num(value) << '\n';
    return kExitOk;
}

inline int cmd_minimize(Run& run) {
    const auto setup = detail::path_setup(run);
    MinimizerResult res;
    std::string constraint;
    if (run.cfg.has("query", "target")) {
        const auto target = run.cfg.list("query", "target");
        require(target.size() == run.model.dims.n, ErrorCode::ConfigError, "query.target needs n components");
        res = minimize_action_endpoint(setup.pc, Eigen::Map<const VectorXd>(target.data(),
                                                                            static_cast<Eigen::Index>(target.size())));
        constraint = "xi(1)=" + fmt::join(target);
    } else {
        require(run.cfg.has("query", "threshold"), ErrorCode::ConfigError,
                "minimize needs query.target or query.threshold");
        const EventSpec ev{query_ell(run), run.cfg.number("query", "threshold"), query_direction(run)};
        res = event_minimizer(setup.pc, ev);
        constraint = ev.str();
    }
    auto t = deviation_path_csv(res.path, res.value);
    t.add_meta("constraint", constraint);
    run.write("minimizer.csv", std::move(t));
    run.write("minimizer_plot.csv", detail::path_plot(res.path));
    *run.out << "S*=" << fmt::num(res.value) << '\n';
    return kExitOk;
}

namespace detail {

inline double single_eps(const Run& run) {
    const auto eps = run.cfg.list("simulation", "eps");
    require(eps.size() == 1, ErrorCode::ConfigError, "this subcommand takes a single simulation.eps");
    return eps[0];
}

inline void add_scales(CsvTable& t, const SimScales& s, const SimConfig& c) {
    t.add_meta("epsilon", s.epsilon);
    t.add_meta("delta", s.delta);
    t.add_meta("h", s.h);
    t.add_meta("dt", s.dt);
    t.add_meta("steps", static_cast<double>(s.steps));
    t.add_meta("seed", std::to_string(c.seed));
    t.add_meta("antithetic", c.antithetic ? "true" : "false");
}

}  // namespace detail

inline int cmd_simulate(Run& run) {
    const auto cfg = sim_config(run.cfg, detail::single_eps(run));
    const RateIngredients ing(run.model, pipeline_options(run.cfg));
    const auto xbar = solve_xbar(ing.drift(), run.model.x0, run.cfg.count("numerics", "xbar_nodes"));
    const auto scales = sim_scales(run.model, cfg);
    std::vector<PathSample> paths;
    if (run.cfg.has("query", "u")) {
        const auto u = run.cfg.list("query", "u");
        require(u.size() == 2 * run.model.dims.m, ErrorCode::ConfigError, "query.u needs 2m components");
        paths = simulate_controlled(run.model, cfg, xbar, constant_control(u));
    } else {
        paths = simulate_uncontrolled(run.model, cfg, &xbar);
    }
    auto t = paths_csv(paths, run.model.dims.n, run.model.dims.d);
    detail::add_scales(t, scales, cfg);
    if (!scales.stiffness_ok()) t.add_meta("warning", "fast drift is stiff for dt");
    run.write("paths.csv", std::move(t));
    std::vector<double> etas;
    for (const auto& p : paths) etas.push_back(p.final_eta(run.model.dims.n)[0]);
    const auto est = mean_estimate(etas, cfg.antithetic);
    *run.out << "paths=" << paths.size() << " steps=" << scales.steps << " mean_eta1(1)=" << fmt::num(est.mean)
             << " se=" << fmt::num(est.std_error) << '\n';
    return kExitOk;
}

inline int cmd_limit_check(Run& run) {
    require(run.cfg.has("query", "u"), ErrorCode::ConfigError, "limit-check needs query.u (2m entries)");
    const auto u = run.cfg.list("query", "u");
    const auto epsilons = run.cfg.list("query", "epsilons");
    const RateIngredients ing(run.model, pipeline_options(run.cfg));
    const auto xbar = solve_xbar(ing.drift(), run.model.x0, run.cfg.count("numerics", "xbar_nodes"));
    const auto rep = controlled_limit_check(run.model, ing, xbar, u, epsilons, sim_config(run.cfg, epsilons.front()));
    CsvTable t;
    t.add_meta("psi_final", rep.psi_final);
    t.add_meta("monotone", rep.monotone ? "true" : "false");
    t.add_meta("final_within", rep.final_within ? "true" : "false");
    t.columns = {"epsilon", "mean_eta", "std_error", "gap"};
    PlotData plot;
    plot.x_name = "eps";
    for (const auto& r : rep.rows) {
        t.add_row({r.epsilon, r.mean_eta, r.std_error, r.gap});
        plot.add("gap", r.epsilon, r.gap);
    }
    CsvTable psi;
    psi.columns = {"t", "psi_1"};
    for (std::size_t k = 0; k < rep.psi.size(); ++k) psi.add_row({rep.psi_times[k], rep.psi[k]});
    run.write("limit_check.csv", std::move(t));
    run.write("limit_check_plot.csv", std::move(plot));
    run.write("limit_path.csv", std::move(psi));
    *run.out << "psi(1)=" << fmt::num(rep.psi_final) << " monotone=" << rep.monotone
             << " final_within=" << rep.final_within << '\n';
    return kExitOk;
}

inline int cmd_estimate(Run& run) {
    const auto& method = run.cfg.get("query", "method");
    require(method == "plain" || method == "is" || method == "both", ErrorCode::ConfigError,
            "query.method must be plain, is or both");
    const auto epsilons = run.cfg.list("simulation", "eps");
    require(!epsilons.empty(), ErrorCode::ConfigError, "simulation.eps is empty");
    const auto setup = detail::path_setup(run);
    const VectorXd ell = query_ell(run);
    const MatrixXd V = lyapunov_variance(setup.pc).back();
    const double sd = std::sqrt(ell.dot(V * ell));
    const auto direction = query_direction(run);
    const auto time_steps = run.cfg.count("numerics", "time_steps");

    const std::vector<std::string> columns = {"epsilon", "h",        "threshold", "estimate",   "std_error",
                                              "ci95_lo", "ci95_hi",  "hits",      "samples",    "relative_error",
                                              "s_star",  "mdp_approx", "weight_mean", "weight_std_error"};
    CsvTable plain_t, is_t;
    plain_t.columns = is_t.columns = columns;
    PlotData plot;
    plot.x_name = "eps";
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("limit_std_dev", fmt::num(sd));
    auto row = [](const EstimatorResult& r, double a) {
        return std::vector<double>{r.epsilon,       r.h,           a,           r.estimate,
                                   r.std_error,     r.ci_lo,       r.ci_hi,     static_cast<double>(r.hits),
                                   static_cast<double>(r.sample_count), r.relative_error, r.s_star, r.mdp_approx,
                                   r.weight_mean,   r.weight_std_error};
    };
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        const auto cfg = sim_config(run.cfg, epsilons[e]);
        const auto scales = sim_scales(run.model, cfg);
        // Default threshold: the 1% Gaussian quantile of the limiting fluctuation in eta units.
        const double a = run.cfg.optional_number("query", "threshold").value_or(2.326347874040841 * sd / scales.h);
        const EventSpec ev{ell, a, direction};
        const double s_star = event_minimizer(setup.pc, ev).value;
        const std::string prefix = "eps" + std::to_string(e) + ".";
        kv.emplace_back(prefix + "threshold", fmt::num(a));
        std::optional<EstimatorResult> plain, is;
        if (method != "is") {
            plain = estimate_plain(run.model, cfg, setup.xbar, ev);
            plain->s_star = s_star;
            plain->mdp_approx = mdp_asymptote(s_star, scales.h);
            plain_t.add_row(row(*plain, a));
            for (const auto& [k, v] : plain->to_key_value()) kv.emplace_back(prefix + "plain." + k, v);
            if (plain->estimate > 0)
                plot.add("plain_neg_log_p_over_h2", epsilons[e], -std::log(plain->estimate) / (scales.h * scales.h));
            *run.out << "eps=" << fmt::num(epsilons[e]) << " plain=" << fmt::num(plain->estimate) << " +- "
                     << fmt::num(plain->std_error) << '\n';
        }
        if (method != "plain") {
            is = estimate_is(run.model, cfg, *setup.ing, setup.xbar, ev, time_steps);
            is_t.add_row(row(*is, a));
            for (const auto& [k, v] : is->to_key_value()) kv.emplace_back(prefix + "is." + k, v);
            if (is->estimate > 0)
                plot.add("is_neg_log_p_over_h2", epsilons[e], -std::log(is->estimate) / (scales.h * scales.h));
            *run.out << "eps=" << fmt::num(epsilons[e]) << " is=" << fmt::num(is->estimate) << " +- "
                     << fmt::num(is->std_error) << " weight_mean=" << fmt::num(is->weight_mean) << '\n';
        }
        plot.add("s_star", epsilons[e], s_star);
        if (plain && is) {
            const bool overlap = plain->ci_lo <= is->ci_hi && is->ci_lo <= plain->ci_hi;
            kv.emplace_back(prefix + "ci_overlap", overlap ? "true" : "false");
            *run.out << "eps=" << fmt::num(epsilons[e]) << " ci_overlap=" << (overlap ? "true" : "false") << '\n';
        }
    }
    if (method != "is") run.write("estimate_plain.csv", std::move(plain_t));
    if (method != "plain") run.write("estimate_is.csv", std::move(is_t));
    run.write("estimate_plot.csv", std::move(plot));
    run.write_kv("estimate.txt", kv);
    return kExitOk;
}

// ============================================================================
// Dispatch
// ============================================================================

/// Builds and validates the model, writes the manifest and condition report,
/// then runs the subcommand. Failed conditions stop the run unless
/// output.force is set, in which case every output is stamped "unvalidated".
inline int execute(RunConfig cfg, const std::string& sub, std::ostream& out, std::ostream& err) {
    try {
        require(std::find(subcommands().begin(), subcommands().end(), sub) != subcommands().end(),
                ErrorCode::UsageError, "unknown subcommand '" + sub + "'");
        require(cfg.get("model", "name") != "custom" || cfg.parameters().empty(), ErrorCode::ConfigError,
                "[parameters] applies to builtin models only");
        cfg.set("command", "name", sub);
        Run run;
        run.model = build_model(cfg);
        resolve_config(cfg, run.model);
        run.cfg = cfg;
        run.out = &out;
        run.dir = cfg.get("output", "dir");
        std::filesystem::create_directories(run.dir);

        const auto report = run_conditions(cfg, run.model);
        const bool force = cfg.flag("output", "force");
        if (!report.passed()) run.status = "unvalidated";
        write_text((run.dir / "manifest.ini").string(), "; status = " + run.status + "\n" + cfg.to_ini());
        {
            std::ostringstream os;
            os << "model = " << run.model.name << '\n' << report.to_key_value();
            write_text((run.dir / "conditions.txt").string(), os.str());
        }
        if (sub == "validate") {
            out << report.to_key_value();
            return report.passed() ? kExitOk : kExitValidation;
        }
        if (!report.passed() && !force) {
            err << "condition check failed (see conditions.txt); pass --force to run anyway\n";
            return kExitValidation;
        }
        if (sub == "invariant") return cmd_invariant(run);
        if (sub == "poisson") return cmd_poisson(run);
        if (sub == "averaged") return cmd_averaged(run);
        if (sub == "rate") return cmd_rate(run);
        if (sub == "action") return cmd_action(run);
        if (sub == "minimize") return cmd_minimize(run);
        if (sub == "simulate") return cmd_simulate(run);
        if (sub == "limit-check") return cmd_limit_check(run);
        return cmd_estimate(run);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::UsageError ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

struct FlagBinding {
    const char* flag;
    const char* section;
    const char* key;
    const char* help;
};

inline const std::vector<FlagBinding>& flag_bindings() {
    static const std::vector<FlagBinding> b = {
        {"--model", "model", "name", "example1, example2, example3 or custom"},
        {"--eps", "simulation", "eps", "epsilon; estimate accepts a ';'-separated list"},
        {"--paths", "simulation", "paths", "number of Monte Carlo paths"},
        {"--seed", "simulation", "seed", "Philox key"},
        {"--workers", "simulation", "workers", "worker threads (0 = all cores)"},
        {"--h-scale", "simulation", "h", "override h(eps)"},
        {"--delta", "simulation", "delta", "override delta(eps)"},
        {"--substeps", "simulation", "substeps", "steps per fast time unit"},
        {"--record-stride", "simulation", "record_stride", "record every k-th step (0 = ends only)"},
        {"--x", "query", "x", "slow state, ';'-separated"},
        {"--x-grid", "query", "x_grid", "lo:hi:count sweep for rate"},
        {"--which", "query", "which", "chi, phi or both"},
        {"--path", "query", "path", "deviation path components in t, ';'-separated"},
        {"--target", "query", "target", "fixed endpoint for minimize"},
        {"--ell", "query", "ell", "event functional"},
        {"--threshold", "query", "threshold", "event threshold a"},
        {"--direction", "query", "direction", "at_least or at_most"},
        {"--method", "query", "method", "plain, is or both"},
        {"--u", "query", "u", "constant control (u1; u2)"},
        {"--epsilons", "query", "epsilons", "limit-check epsilons, decreasing"},
        {"--r", "exponents", "r", "recurrence exponent"},
        {"--qb", "exponents", "q_b", "growth exponent of b"},
        {"--qc", "exponents", "q_c", "growth exponent of c"},
        {"--qsigma", "exponents", "q_sigma", "growth exponent of sigma"},
        {"--nodes", "numerics", "nodes", "fast grid size"},
        {"--poisson-method", "numerics", "poisson_method", "quadrature or finite_difference"},
        {"--time-steps", "numerics", "time_steps", "time grid of the action"},
        {"--out", "output", "dir", "output directory"},
    };
    return b;
}

/// Entry point. argv[0] is the program name.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Moderate-deviation tools for slow-fast diffusions", "slowfast"};
    app.fallthrough();
    app.require_subcommand(1);
    std::string config_file, manifest;
    std::vector<std::string> sets, params;
    bool force = false, antithetic = false;
    app.add_option("--config", config_file, "INI run configuration");
    app.add_option("--set", sets, "section.key=value override (repeatable)");
    app.add_option("--param", params, "builtin parameter key=value (repeatable)");
    app.add_flag("--force", force, "run despite failed conditions; outputs are stamped unvalidated");
    app.add_flag("--antithetic", antithetic, "antithetic path pairs");
    std::vector<std::string> values(flag_bindings().size());
    std::vector<CLI::Option*> opts;
    for (std::size_t i = 0; i < flag_bindings().size(); ++i)
        opts.push_back(app.add_option(flag_bindings()[i].flag, values[i], flag_bindings()[i].help));
    for (const auto& name : subcommands()) app.add_subcommand(name, "run the " + name + " pipeline");
    auto* rerun = app.add_subcommand("rerun", "repeat the run recorded in a manifest");
    rerun->add_option("manifest", manifest, "manifest.ini of an earlier run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        RunConfig cfg;
        std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "rerun") {
            require(config_file.empty(), ErrorCode::UsageError, "rerun takes a manifest, not --config");
            cfg = RunConfig::from_file(manifest);
            sub = cfg.get("command", "name");
        } else if (!config_file.empty()) {
            cfg = RunConfig::from_file(config_file);
        }
        for (const auto& s : sets) cfg.set_assignment(s);
        for (const auto& p : params) {
            const auto eq = p.find('=');
            require(eq != std::string::npos, ErrorCode::UsageError, "--param expects key=value");
            cfg.set("parameters", p.substr(0, eq), p.substr(eq + 1));
        }
        for (std::size_t i = 0; i < flag_bindings().size(); ++i)
            if (opts[i]->count() > 0) cfg.set(flag_bindings()[i].section, flag_bindings()[i].key, values[i]);
        if (force) cfg.set("output", "force", "true");
        if (antithetic) cfg.set("simulation", "antithetic", "true");
        return execute(std::move(cfg), sub, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::UsageError ? kExitUsage : kExitRuntime;
    }
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<const char*> argv{"slowfast"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace slowfast::cli
