#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>

#include "slowfast/error.hpp"
#include "slowfast/format.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

inline constexpr double kTwoPi = 6.283185307179586476925;

// ============================================================================
// Example 1: OU fast process, delta = eps (Regime 2, gamma = 1)
// ============================================================================

struct Example1Params {
    std::string b_choice = "cos";  // "cos": b = cos(x) cos(y); "zero": b = 0
    double sigma = 1.0;
    double x0 = 0.5;
    double y0 = 0.0;
    double q_h = 0.25;
};

inline SlowFastModel example1(const Example1Params& p = {}) {
    require(p.b_choice == "cos" || p.b_choice == "zero", ErrorCode::ConfigError,
            "example1 b_choice must be cos or zero");
    SlowFastModel m;
    m.name = "example1";
    m.dims = {1, 1, 1};
    const bool cosb = p.b_choice == "cos";
    m.coef.b = [cosb](auto x, auto y, auto out) { out[0] = cosb ? std::cos(x[0]) * std::cos(y[0]) : 0.0; };
    m.coef.db_dx = [cosb](auto x, auto y, auto out) { out[0] = cosb ? -std::sin(x[0]) * std::cos(y[0]) : 0.0; };
    m.coef.c = [](auto, auto, auto out) { out[0] = 0.0; };
    m.coef.dc_dx = [](auto, auto, auto out) { out[0] = 0.0; };
    const double s = p.sigma;
    m.coef.sigma = [s](auto, auto, auto out) { out[0] = s; };
    m.coef.f = [](auto, auto y, auto out) { out[0] = -0.5 * y[0]; };
    m.coef.g = [](auto, auto, auto out) { out[0] = 0.0; };
    m.coef.tau1 = [](auto, auto, auto out) { out[0] = 0.0; };
    m.coef.tau2 = [](auto, auto, auto out) { out[0] = 1.0; };
    m.coef.g_bound = 0.0;
    m.params = {.q_b = 0, .q_c = 0, .q_sigma = 0, .r = 1, .Gamma = 0.4, .R_rec = 1, .beta1 = 1, .beta2 = 1,
                .strong_solution_declared = true};
    m.scaling = RegimeScaling::regime2(1.0, 0.0, ScalingFamily{1.0, 1.0, p.q_h});
    m.fast_space.kind = FastSpaceKind::Line;
    m.x0 = {p.x0};
    m.y0 = {p.y0};
    return m;
}

// ============================================================================
// Example 2: Langevin dynamics in a periodic potential (Regime 1, torus)
// ============================================================================

/// Q(y) = amplitude * sum_i cos(2 pi y_i), V(x) = curvature |x|^2 / 2.
struct Example2Params {
    double amplitude = 1.0;
    double D = 1.0;
    double curvature = 1.0;
    std::size_t dim = 1;
    double c_delta = 1.0;
    double p = 1.25;
    double q_h = 0.25;
    double x0 = 0.5;
};

inline SlowFastModel example2(const Example2Params& p = {}) {
    require(p.D > 0 && p.dim >= 1, ErrorCode::ConfigError, "example2 needs D > 0 and dim >= 1");
    SlowFastModel m;
    m.name = "example2";
    const std::size_t k = p.dim;
    m.dims = {k, k, k};
    const double A = p.amplitude, cv = p.curvature, s = std::sqrt(2.0 * p.D);
    // -grad Q(y)
    auto minus_grad_q = [A, k](auto, auto y, auto out) {
        for (std::size_t i = 0; i < k; ++i) out[i] = A * kTwoPi * std::sin(kTwoPi * y[i]);
    };
    auto minus_grad_v = [cv, k](auto x, auto, auto out) {
        for (std::size_t i = 0; i < k; ++i) out[i] = -cv * x[i];
    };
    auto diag = [k](double v) {
        return [k, v](auto, auto, auto out) {
            for (std::size_t i = 0; i < k * k; ++i) out[i] = (i % (k + 1) == 0) ? v : 0.0;
        };
    };
    m.coef.b = minus_grad_q;
    m.coef.f = minus_grad_q;
    m.coef.c = minus_grad_v;
    m.coef.g = minus_grad_v;
    m.coef.db_dx = diag(0.0);
    m.coef.dc_dx = diag(-cv);
    m.coef.sigma = diag(s);
    m.coef.tau1 = diag(s);
    m.coef.tau2 = diag(0.0);
    m.params = {.q_b = 0, .q_c = 0, .q_sigma = 0, .r = 1, .Gamma = 1, .R_rec = 0, .beta1 = 2 * p.D,
                .beta2 = 2 * p.D, .strong_solution_declared = true};
    m.scaling = RegimeScaling::regime1(0.0, ScalingFamily{p.c_delta, p.p, p.q_h});
    m.fast_space.kind = FastSpaceKind::Torus;
    m.fast_space.period = 1.0;
    m.separable_fast = true;
    m.x0.assign(k, p.x0);
    m.y0.assign(k, 0.0);
    return m;
}

// ============================================================================
// Example 3: CIR fast process
// ============================================================================

/// c(x, y) = -x + y^c_power; the fast noise shares W with the slow noise.
struct Example3Params {
    double a = 1.0;
    double b = 1.0;
    double tau = 1.0;
    double sigma = 1.0;
    double c_power = 0.5;
    int regime = 2;
    double gamma = 1.0;
    double x0 = 0.5;
    double y0 = 1.0;
    double q_h = 0.25;
};

inline SlowFastModel example3(const Example3Params& p = {}) {
    require(p.a > 0 && p.b > 0 && p.tau > 0, ErrorCode::ConfigError, "example3 needs positive a, b, tau");
    require(p.regime == 1 || p.regime == 2, ErrorCode::ConfigError, "example3 regime must be 1 or 2");
    require(p.c_power >= 0, ErrorCode::ConfigError, "example3 c_power must be >= 0");
    SlowFastModel m;
    m.name = "example3";
    m.dims = {1, 1, 1};
    const double a = p.a, bb = p.b, tau = p.tau, s = p.sigma, cp = p.c_power;
    m.coef.b = [](auto, auto, auto out) { out[0] = 0.0; };
    m.coef.db_dx = [](auto, auto, auto out) { out[0] = 0.0; };
    m.coef.c = [cp](auto x, auto y, auto out) {
        const double yp = std::max(y[0], 0.0);
        out[0] = -x[0] + (cp == 0.0 ? 1.0 : std::pow(yp, cp));
    };
    m.coef.dc_dx = [](auto, auto, auto out) { out[0] = -1.0; };
    m.coef.sigma = [s](auto, auto, auto out) { out[0] = s; };
    m.coef.f = [a, bb](auto, auto y, auto out) { out[0] = a * (bb - y[0]); };
    m.coef.g = [](auto, auto, auto out) { out[0] = 0.0; };
    m.coef.tau1 = [tau](auto, auto y, auto out) { out[0] = tau * std::sqrt(std::max(y[0], 0.0)); };
    m.coef.tau2 = [](auto, auto, auto out) { out[0] = 0.0; };
    m.params = {.q_b = 0, .q_c = cp, .q_sigma = 0, .r = 1, .Gamma = 0.5 * a, .R_rec = 2 * bb, .beta1 = tau * tau,
                .beta2 = tau * tau, .strong_solution_declared = true};
    if (p.regime == 1)
        m.scaling = RegimeScaling::regime1(0.0, ScalingFamily{1.0, 1.25, p.q_h});
    else
        m.scaling = RegimeScaling::regime2(p.gamma, 0.0, ScalingFamily{1.0 / p.gamma, 1.0, p.q_h});
    m.fast_space.kind = FastSpaceKind::HalfLine;
    m.fast_space.y_min = 1e-6;
    m.degenerate_ok = true;
    m.positive_fast = true;
    m.x0 = {p.x0};
    m.y0 = {p.y0};
    return m;
}

// ============================================================================
// Registry
// ============================================================================

using ParamMap = std::map<std::string, std::string>;

namespace detail {

inline double param_double(const ParamMap& pm, const std::string& key, double fallback) {
    const auto it = pm.find(key);
    if (it == pm.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        require(used == it->second.size(), ErrorCode::ConfigError, "trailing text in " + key);
        return v;
    } catch (const std::logic_error&) {
        fail(ErrorCode::ConfigError, "parameter " + key + " is not a number: " + it->second);
    }
}

inline void reject_unknown(const ParamMap& pm, const std::set<std::string>& known, const std::string& model) {
    for (const auto& [k, v] : pm)
        require(known.count(k) > 0, ErrorCode::ConfigError, "unknown parameter '" + k + "' for " + model);
}

}  // namespace detail

inline bool is_builtin(const std::string& name) {
    return name == "example1" || name == "example2" || name == "example3";
}

/// Every documented parameter of a builtin with its default value.
inline ParamMap builtin_defaults(const std::string& name) {
    using fmt::num;
    if (name == "example1") {
        const Example1Params p;
        return {{"b_choice", p.b_choice}, {"sigma", num(p.sigma)}, {"x0", num(p.x0)}, {"y0", num(p.y0)},
                {"q_h", num(p.q_h)}};
    }
    if (name == "example2") {
        const Example2Params p;
        return {{"amplitude", num(p.amplitude)}, {"D", num(p.D)}, {"curvature", num(p.curvature)},
                {"dim", std::to_string(p.dim)}, {"c_delta", num(p.c_delta)}, {"p", num(p.p)},
                {"q_h", num(p.q_h)}, {"x0", num(p.x0)}};
    }
    if (name == "example3") {
        const Example3Params p;
        return {{"a", num(p.a)},         {"b", num(p.b)},         {"tau", num(p.tau)},
                {"sigma", num(p.sigma)}, {"c_power", num(p.c_power)}, {"regime", std::to_string(p.regime)},
                {"gamma", num(p.gamma)}, {"x0", num(p.x0)},       {"y0", num(p.y0)},
                {"q_h", num(p.q_h)}};
    }
    fail(ErrorCode::ConfigError, "unknown builtin model '" + name + "'");
}

/// Builds a registered model with string-valued parameter overrides.
inline SlowFastModel builtin_model(const std::string& name, const ParamMap& pm = {}) {
    using detail::param_double;
    if (name == "example1") {
        detail::reject_unknown(pm, {"b_choice", "sigma", "x0", "y0", "q_h"}, name);
        Example1Params p;
        if (pm.count("b_choice")) p.b_choice = pm.at("b_choice");
        p.sigma = param_double(pm, "sigma", p.sigma);
        p.x0 = param_double(pm, "x0", p.x0);
        p.y0 = param_double(pm, "y0", p.y0);
        p.q_h = param_double(pm, "q_h", p.q_h);
        return example1(p);
    }
    if (name == "example2") {
        detail::reject_unknown(pm, {"amplitude", "D", "curvature", "dim", "c_delta", "p", "q_h", "x0"}, name);
        Example2Params p;
        p.amplitude = param_double(pm, "amplitude", p.amplitude);
        p.D = param_double(pm, "D", p.D);
        p.curvature = param_double(pm, "curvature", p.curvature);
        p.dim = static_cast<std::size_t>(param_double(pm, "dim", static_cast<double>(p.dim)));
        p.c_delta = param_double(pm, "c_delta", p.c_delta);
        p.p = param_double(pm, "p", p.p);
        p.q_h = param_double(pm, "q_h", p.q_h);
        p.x0 = param_double(pm, "x0", p.x0);
        return example2(p);
    }
    if (name == "example3") {
        detail::reject_unknown(pm, {"a", "b", "tau", "sigma", "c_power", "regime", "gamma", "x0", "y0", "q_h"}, name);
        Example3Params p;
        p.a = param_double(pm, "a", p.a);
        p.b = param_double(pm, "b", p.b);
        p.tau = param_double(pm, "tau", p.tau);
        p.sigma = param_double(pm, "sigma", p.sigma);
        p.c_power = param_double(pm, "c_power", p.c_power);
        p.regime = static_cast<int>(param_double(pm, "regime", p.regime));
        p.gamma = param_double(pm, "gamma", p.gamma);
        p.x0 = param_double(pm, "x0", p.x0);
        p.y0 = param_double(pm, "y0", p.y0);
        p.q_h = param_double(pm, "q_h", p.q_h);
        return example3(p);
    }
    fail(ErrorCode::ConfigError, "unknown builtin model '" + name + "'");
}

}  // namespace slowfast
