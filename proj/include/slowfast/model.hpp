#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slowfast/error.hpp"

namespace slowfast {

// ============================================================================
// Dimensions and coefficient functions
// ============================================================================

struct Dimensions {
    std::size_t n = 1;  // slow
    std::size_t d = 1;  // fast
    std::size_t m = 1;  // Brownian

    void validate() const {
        require(n >= 1 && d >= 1 && m >= 1, ErrorCode::InvalidArgument, "dimensions must be >= 1");
    }
};

/// Coefficient evaluator. `out` is preallocated with the component count
/// (n or d for vectors, rows*cols row-major for matrices). Must be reentrant.
using CoefficientFn =
    std::function<void(std::span<const double> x, std::span<const double> y, std::span<double> out)>;

/// Coefficients of the slow-fast system
///   dX = [(eps/delta) b + c] dt + sqrt(eps) sigma dW
///   dY = (1/delta)[(eps/delta) f + g] dt + (sqrt(eps)/delta)[tau1 dW + tau2 dB].
struct Coefficients {
    CoefficientFn b, c;          // -> R^n
    CoefficientFn sigma;         // -> R^{n x m}
    CoefficientFn f, g;          // -> R^d
    CoefficientFn tau1, tau2;    // -> R^{d x m}
    CoefficientFn db_dx, dc_dx;  // optional, -> R^{n x n}, entry (i,j) = d(.)_i/dx_j
    double g_bound = 0.0;        // declared sup |g|
};

struct GrowthErgodicityParams {
    double q_b = 0.0;
    double q_c = 0.0;
    double q_sigma = 0.0;
    double r = 1.0;
    double Gamma = 1.0;
    double R_rec = 0.0;
    double beta1 = 1.0;
    double beta2 = 1.0;
    bool strong_solution_declared = true;

    void validate() const {
        require(q_b >= 0 && q_c >= 0 && q_sigma >= 0 && r >= 0, ErrorCode::InvalidArgument,
                "growth and recurrence exponents must be >= 0");
        require(Gamma > 0 && R_rec >= 0, ErrorCode::InvalidArgument, "recurrence constants out of range");
        require(beta1 > 0 && beta1 <= beta2, ErrorCode::InvalidArgument, "need 0 < beta1 <= beta2");
    }
};

// ============================================================================
// Regime and scaling
// ============================================================================

enum class Regime { One = 1, Two = 2 };

/// delta(eps) = c_delta * eps^p, h(eps) = eps^{-q_h}.
struct ScalingFamily {
    double c_delta = 1.0;
    double p = 1.0;
    double q_h = 0.25;

    [[nodiscard]] double delta(double eps) const { return c_delta * std::pow(eps, p); }
    [[nodiscard]] double h(double eps) const { return std::pow(eps, -q_h); }
};

struct RegimeScaling {
    Regime regime = Regime::Two;
    double gamma = 1.0;  // Regime 2 only
    double j = 0.0;      // j1 in Regime 1, j2 in Regime 2
    std::optional<ScalingFamily> family;

    static RegimeScaling regime1(double j1, std::optional<ScalingFamily> fam = std::nullopt) {
        RegimeScaling s;
        s.regime = Regime::One;
        s.gamma = 0.0;
        s.j = j1;
        s.family = fam;
        s.validate();
        return s;
    }

    static RegimeScaling regime2(double gamma, double j2, std::optional<ScalingFamily> fam = std::nullopt) {
        RegimeScaling s;
        s.regime = Regime::Two;
        s.gamma = gamma;
        s.j = j2;
        s.family = fam;
        s.validate();
        return s;
    }

    void validate() const {
        require(std::isfinite(j), ErrorCode::InvalidArgument, "limiting constant must be finite");
        if (regime == Regime::One) {
            require(j >= 0.0, ErrorCode::InvalidArgument, "j1 must be >= 0");
        } else {
            require(gamma > 0.0, ErrorCode::InvalidArgument, "gamma must be > 0");
        }
        if (family) {
            require(family->c_delta > 0 && family->p > 0, ErrorCode::InvalidArgument,
                    "scaling family needs c_delta > 0 and p > 0");
            require(family->q_h > 0 && family->q_h < 0.5, ErrorCode::InvalidArgument, "q_h must lie in (0, 1/2)");
            if (regime == Regime::One)
                require(family->p > 1.0, ErrorCode::InvalidArgument, "Regime 1 family requires p > 1");
            else
                require(family->p == 1.0, ErrorCode::InvalidArgument, "Regime 2 family requires p = 1");
        }
    }
};

// ============================================================================
// Fast state space
// ============================================================================

enum class FastSpaceKind { Line, HalfLine, Torus };

struct FastSpace {
    FastSpaceKind kind = FastSpaceKind::Line;
    double period = 1.0;        // torus
    double y_min = 1e-6;        // half-line lower end
    double half_width = 0.0;    // line: 0 means choose from the tail rule
    double upper = 0.0;         // half-line: 0 means choose from the tail rule
};

// ============================================================================
// Model
// ============================================================================

struct SlowFastModel {
    std::string name = "custom";
    Dimensions dims;
    Coefficients coef;
    GrowthErgodicityParams params;
    RegimeScaling scaling;
    FastSpace fast_space;
    bool fast_depends_on_x = false;  // f, g, tau1, tau2 depend on x
    bool degenerate_ok = false;      // fast diffusion may vanish at a half-line boundary
    bool positive_fast = false;      // fast process lives on (0, inf); simulation truncates at 0
    bool separable_fast = false;     // fast generator splits across coordinates
    std::vector<double> x0{0.0};
    std::vector<double> y0{0.0};

    void validate() const {
        dims.validate();
        params.validate();
        scaling.validate();
        require(coef.b && coef.c && coef.sigma && coef.f && coef.g && coef.tau1 && coef.tau2,
                ErrorCode::InvalidArgument, "all coefficient functions must be set");
        require(x0.size() == dims.n, ErrorCode::InvalidArgument, "x0 has wrong dimension");
        require(y0.size() == dims.d, ErrorCode::InvalidArgument, "y0 has wrong dimension");
    }

    [[nodiscard]] Regime regime() const noexcept { return scaling.regime; }

    // Small evaluation helpers returning fresh vectors.
    [[nodiscard]] std::vector<double> eval(const CoefficientFn& fn, std::span<const double> x,
                                           std::span<const double> y, std::size_t size) const {
        std::vector<double> out(size, 0.0);
        fn(x, y, out);
        return out;
    }
    [[nodiscard]] std::vector<double> b(std::span<const double> x, std::span<const double> y) const {
        return eval(coef.b, x, y, dims.n);
    }
    [[nodiscard]] std::vector<double> c(std::span<const double> x, std::span<const double> y) const {
        return eval(coef.c, x, y, dims.n);
    }
    [[nodiscard]] std::vector<double> sigma(std::span<const double> x, std::span<const double> y) const {
        return eval(coef.sigma, x, y, dims.n * dims.m);
    }
    [[nodiscard]] std::vector<double> f(std::span<const double> x, std::span<const double> y) const {
        return eval(coef.f, x, y, dims.d);
    }
    [[nodiscard]] std::vector<double> g(std::span<const double> x, std::span<const double> y) const {
        return eval(coef.g, x, y, dims.d);
    }
    [[nodiscard]] std::vector<double> tau1(std::span<const double> x, std::span<const double> y) const {
        return eval(coef.tau1, x, y, dims.d * dims.m);
    }
    [[nodiscard]] std::vector<double> tau2(std::span<const double> x, std::span<const double> y) const {
        return eval(coef.tau2, x, y, dims.d * dims.m);
    }

    /// tau1 tau1^T + tau2 tau2^T, d x d row-major.
    [[nodiscard]] std::vector<double> fast_diffusion(std::span<const double> x, std::span<const double> y) const {
        const auto t1 = tau1(x, y);
        const auto t2 = tau2(x, y);
        const std::size_t d = dims.d, m = dims.m;
        std::vector<double> a(d * d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < m; ++k) s += t1[i * m + k] * t1[j * m + k] + t2[i * m + k] * t2[j * m + k];
                a[i * d + j] = s;
            }
        return a;
    }
};

/// Drift of the regime's fast generator: f (Regime 1) or gamma f + g (Regime 2).
inline std::vector<double> effective_fast_drift(const SlowFastModel& model, std::span<const double> x,
                                                std::span<const double> y) {
    auto out = model.f(x, y);
    if (model.regime() == Regime::Two) {
        const auto gv = model.g(x, y);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.scaling.gamma * out[i] + gv[i];
    }
    return out;
}

/// Diffusion matrix of the regime's fast generator (the generator carries 1/2 of it).
inline std::vector<double> effective_fast_diffusion(const SlowFastModel& model, std::span<const double> x,
                                                    std::span<const double> y) {
    auto a = model.fast_diffusion(x, y);
    if (model.regime() == Regime::Two)
        for (double& v : a) v *= model.scaling.gamma;
    return a;
}

}  // namespace slowfast
