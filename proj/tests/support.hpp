#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "slowfast/slowfast.hpp"

namespace slowfast::testing {

using Scalar = std::function<double(double x, double y)>;

inline Scalar constant(double v) {
    return [v](double, double) { return v; };
}

/// n = d = m = 1 model from scalar coefficient functions. Defaults give the
/// OU fast process with generator -(y/2) d/dy + (1/2) d^2/dy^2 in Regime 2.
struct ScalarSpec {
    Scalar b = constant(0.0);
    Scalar c = constant(0.0);
    Scalar sigma = constant(1.0);
    Scalar f = [](double, double y) { return -0.5 * y; };
    Scalar g = constant(0.0);
    Scalar tau1 = constant(0.0);
    Scalar tau2 = constant(1.0);
    Scalar db_dx, dc_dx;
    RegimeScaling scaling = RegimeScaling::regime2(1.0, 0.0, ScalingFamily{1.0, 1.0, 0.25});
    FastSpaceKind kind = FastSpaceKind::Line;
    double period = 1.0;
    bool fast_depends_on_x = false;
    bool degenerate_ok = false;
    bool positive_fast = false;
    double x0 = 0.0, y0 = 0.0;
};

inline CoefficientFn wrap(const Scalar& s) {
    return [s](std::span<const double> x, std::span<const double> y, std::span<double> out) { out[0] = s(x[0], y[0]); };
}

inline SlowFastModel scalar_model(const ScalarSpec& s) {
    SlowFastModel m;
    m.dims = {1, 1, 1};
    m.coef.b = wrap(s.b);
    m.coef.c = wrap(s.c);
    m.coef.sigma = wrap(s.sigma);
    m.coef.f = wrap(s.f);
    m.coef.g = wrap(s.g);
    m.coef.tau1 = wrap(s.tau1);
    m.coef.tau2 = wrap(s.tau2);
    if (s.db_dx) m.coef.db_dx = wrap(s.db_dx);
    if (s.dc_dx) m.coef.dc_dx = wrap(s.dc_dx);
    m.scaling = s.scaling;
    m.fast_space.kind = s.kind;
    m.fast_space.period = s.period;
    m.fast_depends_on_x = s.fast_depends_on_x;
    m.degenerate_ok = s.degenerate_ok;
    m.positive_fast = s.positive_fast;
    m.x0 = {s.x0};
    m.y0 = {s.y0};
    return m;
}

/// Probabilists' Hermite polynomials.
inline double hermite(int k, double y) {
    switch (k) {
    case 0: return 1.0;
    case 1: return y;
    case 2: return y * y - 1.0;
    case 3: return y * y * y - 3.0 * y;
    default: return y * hermite(k - 1, y) - (k - 1) * hermite(k - 2, y);
    }
}

inline std::vector<double> sample(const Grid1D& grid, const std::function<double(double)>& f) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.node(i));
    return v;
}

/// Modified Bessel function I_0 by its power series (accurate for moderate arguments).
inline double bessel_i0(double z) {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= (z / (2.0 * k)) * (z / (2.0 * k));
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace slowfast::testing
