#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "slowfast/builtin_models.hpp"
#include "slowfast/error.hpp"
#include "slowfast/expression.hpp"
#include "slowfast/format.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

struct ConfigField {
    const char* section;
    const char* key;
    const char* fallback;  // "" means unset
};

/// Every recognized key in output order. [parameters] is free-form and
/// checked by the builtin registry instead.
inline const std::vector<ConfigField>& config_schema() {
    static const std::vector<ConfigField> schema = {
        {"command", "name", ""},
        {"model", "name", "example1"},
        {"dimensions", "n", "1"},
        {"dimensions", "d", "1"},
        {"dimensions", "m", "1"},
        {"coefficients", "b", ""},
        {"coefficients", "c", ""},
        {"coefficients", "sigma", ""},
        {"coefficients", "f", ""},
        {"coefficients", "g", ""},
        {"coefficients", "tau1", ""},
        {"coefficients", "tau2", ""},
        {"coefficients", "g_bound", "0"},
        {"exponents", "q_b", ""},
        {"exponents", "q_c", ""},
        {"exponents", "q_sigma", ""},
        {"exponents", "r", ""},
        {"exponents", "Gamma", ""},
        {"exponents", "R_rec", ""},
        {"exponents", "beta1", ""},
        {"exponents", "beta2", ""},
        {"exponents", "strong_solution", ""},
        {"regime", "regime", "2"},
        {"regime", "gamma", "1"},
        {"regime", "j", "0"},
        {"regime", "c_delta", ""},
        {"regime", "p", ""},
        {"regime", "q_h", "0.25"},
        {"fast_space", "kind", "line"},
        {"fast_space", "period", "1"},
        {"fast_space", "y_min", "1e-06"},
        {"fast_space", "half_width", "0"},
        {"fast_space", "upper", "0"},
        {"fast_space", "degenerate_ok", "false"},
        {"fast_space", "positive_fast", "false"},
        {"initial", "x0", "0"},
        {"initial", "y0", "0"},
        {"numerics", "nodes", "1025"},
        {"numerics", "density_tail", "1e-24"},
        {"numerics", "poisson_method", "quadrature"},
        {"numerics", "residual_tol", "1e-05"},
        {"numerics", "require_certified", "true"},
        {"numerics", "xbar_nodes", "1025"},
        {"numerics", "time_steps", "256"},
        {"validation", "x_half_width", "1"},
        {"validation", "y_radius", ""},
        {"validation", "growth_radius", "50"},
        {"simulation", "eps", "0.05"},
        {"simulation", "paths", "10000"},
        {"simulation", "seed", "1"},
        {"simulation", "workers", "0"},
        {"simulation", "substeps", "20"},
        {"simulation", "dt_cap", "0.0009765625"},
        {"simulation", "antithetic", "false"},
        {"simulation", "record_stride", "0"},
        {"simulation", "delta", ""},
        {"simulation", "h", ""},
        {"query", "x", ""},
        {"query", "x_grid", "-2:2:41"},
        {"query", "which", "both"},
        {"query", "path", ""},
        {"query", "target", ""},
        {"query", "ell", "1"},
        {"query", "threshold", ""},
        {"query", "direction", "at_least"},
        {"query", "method", "both"},
        {"query", "u", ""},
        {"query", "epsilons", "0.01;0.003;0.001"},
        {"output", "dir", "out"},
        {"output", "force", "false"},
    };
    return schema;
}

/// Sections that describe a model only when [model] name = custom.
inline bool custom_only_section(const std::string& s) {
    return s == "dimensions" || s == "coefficients" || s == "regime" || s == "fast_space" || s == "initial";
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto first = v.data(), last = v.data() + v.size();
    const auto res = std::from_chars(first, last, out);
    require(res.ec == std::errc{} && res.ptr == last && !v.empty(), ErrorCode::ConfigError,
            key + " is not a number: '" + v + "'");
    return out;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

}  // namespace detail

/// Resolved run configuration: typed access to a fixed key schema.
class RunConfig {
public:
    RunConfig() {
        for (const auto& f : config_schema()) values_[key(f.section, f.key)] = f.fallback;
    }

    static RunConfig from_ini(std::istream& in) {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(in, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            fail(ErrorCode::ConfigError, e.what());
        }
        RunConfig cfg;
        for (const auto& [section, body] : tree) {
            require(!body.empty() || body.data().empty(), ErrorCode::ConfigError, "key outside a section: " + section);
            for (const auto& [k, v] : body) cfg.set(section, k, v.data());
        }
        return cfg;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        require(static_cast<bool>(in), ErrorCode::ConfigError, "cannot open config " + path);
        return from_ini(in);
    }

    void set(const std::string& section, const std::string& k, const std::string& value) {
        const std::string v = detail::trim(value);
        if (section == "parameters") {
            params_[k] = v;
            return;
        }
        const auto it = values_.find(key(section, k));
        require(it != values_.end(), ErrorCode::ConfigError, "unknown config key " + section + "." + k);
        it->second = v;
        explicit_.insert(it->first);
    }

    /// "section.key=value".
    void set_assignment(const std::string& text) {
        const auto eq = text.find('=');
        const auto dot = text.find('.');
        require(eq != std::string::npos && dot != std::string::npos && dot < eq, ErrorCode::ConfigError,
                "expected section.key=value, got '" + text + "'");
        set(text.substr(0, dot), text.substr(dot + 1, eq - dot - 1), text.substr(eq + 1));
    }

    [[nodiscard]] const std::string& get(const std::string& section, const std::string& k) const {
        const auto it = values_.find(key(section, k));
        require(it != values_.end(), ErrorCode::ConfigError, "unknown config key " + section + "." + k);
        return it->second;
    }
    [[nodiscard]] bool has(const std::string& section, const std::string& k) const { return !get(section, k).empty(); }
    [[nodiscard]] bool is_explicit(const std::string& section, const std::string& k) const {
        return explicit_.count(key(section, k)) > 0;
    }

    [[nodiscard]] double number(const std::string& section, const std::string& k) const {
        return detail::parse_double(section + "." + k, get(section, k));
    }
    [[nodiscard]] std::optional<double> optional_number(const std::string& section, const std::string& k) const {
        if (!has(section, k)) return std::nullopt;
        return number(section, k);
    }
    [[nodiscard]] std::size_t count(const std::string& section, const std::string& k) const {
        const double v = number(section, k);
        require(v >= 0 && v == std::floor(v) && v < 9.007199254740992e15, ErrorCode::ConfigError,
                section + "." + k + " must be a nonnegative integer");
        return static_cast<std::size_t>(v);
    }
    [[nodiscard]] bool flag(const std::string& section, const std::string& k) const {
        const auto& v = get(section, k);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        fail(ErrorCode::ConfigError, section + "." + k + " must be true or false");
    }
    /// ';'-separated numbers; empty gives an empty list.
    [[nodiscard]] std::vector<double> list(const std::string& section, const std::string& k) const {
        std::vector<double> out;
        if (!has(section, k)) return out;
        for (const auto& part : split_components(get(section, k)))
            out.push_back(detail::parse_double(section + "." + k, part));
        return out;
    }

    [[nodiscard]] const ParamMap& parameters() const noexcept { return params_; }
    void set_parameters(ParamMap p) { params_ = std::move(p); }

    [[nodiscard]] bool builtin() const { return is_builtin(get("model", "name")); }

    /// INI text in schema order. Builtin models omit the custom-only sections.
    [[nodiscard]] std::string to_ini() const {
        std::ostringstream os;
        std::string current;
        const bool skip_custom = builtin();
        for (const auto& f : config_schema()) {
            const std::string s = f.section;
            if (skip_custom && custom_only_section(s)) continue;
            if (s != current) {
                if (!current.empty()) os << '\n';
                os << '[' << s << "]\n";
                current = s;
                if (s == "model" && !params_.empty()) {
                    os << "name = " << get(s, "name") << "\n\n[parameters]\n";
                    for (const auto& [k, v] : params_) os << k << " = " << v << '\n';
                    continue;
                }
            }
            os << f.key << " = " << get(s, f.key) << '\n';
        }
        return os.str();
    }

private:
    static std::string key(const std::string& s, const std::string& k) { return s + "." + k; }

    std::map<std::string, std::string> values_;
    std::set<std::string> explicit_;
    ParamMap params_;
};

// ============================================================================
// Model construction
// ============================================================================

namespace detail {

inline void apply_exponent_overrides(const RunConfig& cfg, GrowthErgodicityParams& p) {
    auto over = [&](const char* k, double& target) {
        if (cfg.has("exponents", k)) target = cfg.number("exponents", k);
    };
    over("q_b", p.q_b);
    over("q_c", p.q_c);
    over("q_sigma", p.q_sigma);
    over("r", p.r);
    over("Gamma", p.Gamma);
    over("R_rec", p.R_rec);
    over("beta1", p.beta1);
    over("beta2", p.beta2);
    if (cfg.has("exponents", "strong_solution")) p.strong_solution_declared = cfg.flag("exponents", "strong_solution");
}

inline SlowFastModel custom_model(const RunConfig& cfg) {
    SlowFastModel m;
    m.name = "custom";
    m.dims = {cfg.count("dimensions", "n"), cfg.count("dimensions", "d"), cfg.count("dimensions", "m")};
    m.dims.validate();
    const std::size_t n = m.dims.n, d = m.dims.d, k = m.dims.m;
    auto coef = [&](const char* name, std::size_t count) {
        require(cfg.has("coefficients", name), ErrorCode::ConfigError,
                std::string("custom model needs coefficients.") + name);
        return compile_coefficient(cfg.get("coefficients", name), n, d, count);
    };
    m.coef.b = coef("b", n).fn;
    m.coef.c = coef("c", n).fn;
    m.coef.sigma = coef("sigma", n * k).fn;
    const auto f = coef("f", d), g = coef("g", d), t1 = coef("tau1", d * k), t2 = coef("tau2", d * k);
    m.coef.f = f.fn;
    m.coef.g = g.fn;
    m.coef.tau1 = t1.fn;
    m.coef.tau2 = t2.fn;
    m.fast_depends_on_x = f.uses_x || g.uses_x || t1.uses_x || t2.uses_x;
    m.coef.g_bound = cfg.number("coefficients", "g_bound");
    apply_exponent_overrides(cfg, m.params);

    const double regime = cfg.number("regime", "regime");
    require(regime == 1.0 || regime == 2.0, ErrorCode::ConfigError, "regime.regime must be 1 or 2");
    std::optional<ScalingFamily> fam;
    if (cfg.has("regime", "p") || cfg.has("regime", "c_delta")) {
        ScalingFamily sf;
        if (cfg.has("regime", "c_delta")) sf.c_delta = cfg.number("regime", "c_delta");
        if (cfg.has("regime", "p")) sf.p = cfg.number("regime", "p");
        sf.q_h = cfg.number("regime", "q_h");
        fam = sf;
    }
    m.scaling = regime == 1.0 ? RegimeScaling::regime1(cfg.number("regime", "j"), fam)
                              : RegimeScaling::regime2(cfg.number("regime", "gamma"), cfg.number("regime", "j"), fam);

    const auto& kind = cfg.get("fast_space", "kind");
    if (kind == "line")
        m.fast_space.kind = FastSpaceKind::Line;
    else if (kind == "half_line")
        m.fast_space.kind = FastSpaceKind::HalfLine;
    else if (kind == "torus")
        m.fast_space.kind = FastSpaceKind::Torus;
    else
        fail(ErrorCode::ConfigError, "fast_space.kind must be line, half_line or torus");
    m.fast_space.period = cfg.number("fast_space", "period");
    m.fast_space.y_min = cfg.number("fast_space", "y_min");
    m.fast_space.half_width = cfg.number("fast_space", "half_width");
    m.fast_space.upper = cfg.number("fast_space", "upper");
    m.degenerate_ok = cfg.flag("fast_space", "degenerate_ok");
    m.positive_fast = cfg.flag("fast_space", "positive_fast");
    m.separable_fast = d == 1;
    m.x0 = cfg.list("initial", "x0");
    m.y0 = cfg.list("initial", "y0");
    if (m.x0.size() == 1 && n > 1) m.x0.assign(n, m.x0[0]);
    if (m.y0.size() == 1 && d > 1) m.y0.assign(d, m.y0[0]);
    m.validate();
    return m;
}

}  // namespace detail

/// Builds the configured model. Builtins accept [parameters] and
/// [exponents] overrides only.
inline SlowFastModel build_model(const RunConfig& cfg) {
    const auto& name = cfg.get("model", "name");
    if (name == "custom") return detail::custom_model(cfg);
    require(is_builtin(name), ErrorCode::ConfigError,
            "model.name must be example1, example2, example3 or custom, got '" + name + "'");
    for (const auto& f : config_schema())
        require(!custom_only_section(f.section) || !cfg.is_explicit(f.section, f.key), ErrorCode::ConfigError,
                std::string(f.section) + "." + f.key + " applies to custom models only");
    auto m = builtin_model(name, cfg.parameters());
    detail::apply_exponent_overrides(cfg, m.params);
    m.params.validate();
    return m;
}

/// Writes the values actually used back into the config, so that the
/// manifest echoes a fully resolved run.
inline void resolve_config(RunConfig& cfg, const SlowFastModel& model) {
    if (cfg.builtin()) {
        auto merged = builtin_defaults(cfg.get("model", "name"));
        for (const auto& [k, v] : cfg.parameters()) merged[k] = v;
        cfg.set_parameters(std::move(merged));
    }
    const auto& p = model.params;
    cfg.set("exponents", "q_b", fmt::num(p.q_b));
    cfg.set("exponents", "q_c", fmt::num(p.q_c));
    cfg.set("exponents", "q_sigma", fmt::num(p.q_sigma));
    cfg.set("exponents", "r", fmt::num(p.r));
    cfg.set("exponents", "Gamma", fmt::num(p.Gamma));
    cfg.set("exponents", "R_rec", fmt::num(p.R_rec));
    cfg.set("exponents", "beta1", fmt::num(p.beta1));
    cfg.set("exponents", "beta2", fmt::num(p.beta2));
    cfg.set("exponents", "strong_solution", p.strong_solution_declared ? "true" : "false");
    if (!cfg.has("query", "x")) cfg.set("query", "x", fmt::join(model.x0));
}

}  // namespace slowfast
