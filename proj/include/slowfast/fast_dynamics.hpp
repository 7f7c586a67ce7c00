#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "slowfast/csv.hpp"
#include "slowfast/error.hpp"
#include "slowfast/grid.hpp"
#include "slowfast/model.hpp"
#include "slowfast/quadrature.hpp"

namespace slowfast {

// ============================================================================
// One-dimensional fast generator with x frozen
// ============================================================================

/// Scalar view of the regime's fast generator L = drift d/dy + (1/2) a d^2/dy^2.
class FastGenerator1D {
public:
    FastGenerator1D(const SlowFastModel& model, std::vector<double> x) : model_(&model), x_(std::move(x)) {
        require(model.dims.d == 1, ErrorCode::InvalidArgument, "one-dimensional fast variable required");
    }

    [[nodiscard]] double drift(double y) const {
        const double yy[1] = {y};
        return effective_fast_drift(*model_, x_, yy)[0];
    }
    [[nodiscard]] double diffusion(double y) const {
        const double yy[1] = {y};
        return effective_fast_diffusion(*model_, x_, yy)[0];
    }
    [[nodiscard]] const std::vector<double>& x() const noexcept { return x_; }
    [[nodiscard]] const SlowFastModel& model() const noexcept { return *model_; }

private:
    const SlowFastModel* model_;
    std::vector<double> x_;
};

// ============================================================================
// Invariant density
// ============================================================================

struct InvariantDensity {
    Grid1D grid;
    std::vector<double> values;      // normalized m(y_i) >= 0
    std::vector<double> log_values;  // log m(y_i), finite
    std::vector<double> weights;     // quadrature weights on the grid
    double log_normalizer = 0.0;     // log of the normalizing constant of the unnormalized density
    double mass_defect = 0.0;        // estimated mass outside the grid
    double defect_lo = 0.0;          // share of mass_defect below the grid
    double defect_hi = 0.0;          // share of mass_defect above the grid
    double tail_slope_lo = 0.0;      // d log m / dy at the lower end
    double tail_slope_hi = 0.0;      // d log m / dy at the upper end
    bool natural_lower = false;      // lower end is a degenerate natural boundary (half-line)

    [[nodiscard]] double integrate(std::span<const double> values_on_grid) const {
        require(values_on_grid.size() == values.size(), ErrorCode::GridMismatch, "integrand length");
        long double s = 0.0L;
        for (std::size_t i = 0; i < values.size(); ++i)
            s += static_cast<long double>(weights[i]) * values[i] * values_on_grid[i];
        return static_cast<double>(s);
    }

    [[nodiscard]] double total_mass() const {
        long double s = 0.0L;
        for (std::size_t i = 0; i < values.size(); ++i) s += static_cast<long double>(weights[i]) * values[i];
        return static_cast<double>(s);
    }
};

namespace detail {

/// Bisection-adaptive 15-point Kronrod rule: a piece is accepted when the
/// whole-piece value and the two-half value agree to 1e-12 of the L1 norm.
template <class F>
double adaptive_gk(const F& f, double lo, double hi, int depth) {
    using rule = boost::math::quadrature::gauss_kronrod<double, 15>;
    const double mid = 0.5 * (lo + hi);
    double l1_left = 0.0, l1_right = 0.0, err = 0.0;
    const double whole = rule::integrate(f, lo, hi, 0, 0.0, &err);
    const double left = rule::integrate(f, lo, mid, 0, 0.0, &err, &l1_left);
    const double right = rule::integrate(f, mid, hi, 0, 0.0, &err, &l1_right);
    if (depth == 0 || std::abs(whole - (left + right)) <= 1e-12 * (l1_left + l1_right)) return left + right;
    return adaptive_gk(f, lo, mid, depth - 1) + adaptive_gk(f, mid, hi, depth - 1);
}

/// Integral of 2*drift/a over [lo, hi].
inline double log_speed_increment(const FastGenerator1D& gen, double lo, double hi) {
    auto integrand = [&](double y) { return 2.0 * gen.drift(y) / gen.diffusion(y); };
    return adaptive_gk(integrand, lo, hi, 30);
}

inline double log_density_slope(const FastGenerator1D& gen, double y) {
    const double a = gen.diffusion(y);
    const double step = 1e-5 * (1.0 + std::abs(y));
    // One-sided near the origin so a half-line diffusion is never sampled below 0.
    const double lo = (y > 0.0 && y - step <= 0.0) ? y : y - step;
    const double hi = y + step;
    const double da = (gen.diffusion(hi) - gen.diffusion(lo)) / (hi - lo);
    return 2.0 * gen.drift(y) / a - da / a;
}

struct DensityDraft {
    InvariantDensity density;
    bool ok = true;
    std::string problem;
};

inline DensityDraft build_density(const SlowFastModel& model, std::span<const double> x, const Grid1D& grid) {
    FastGenerator1D gen(model, std::vector<double>(x.begin(), x.end()));
    const std::size_t n = grid.size();
    const bool half = model.fast_space.kind == FastSpaceKind::HalfLine;
    DensityDraft draft;
    auto& dens = draft.density;
    dens.grid = grid;
    dens.natural_lower = half && model.degenerate_ok;

    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = gen.diffusion(grid.node(i));
        if (!(a[i] > 0.0)) {
            const bool boundary = i == 0 && half && model.degenerate_ok;
            require(boundary, ErrorCode::NonEllipticDiffusion,
                    "fast diffusion " + fmt::num(a[i]) + " at y=" + fmt::num(grid.node(i)));
        }
    }

    // log m(y) = int 2 drift / a - log a, accumulated cell by cell.
    std::vector<double> ell(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) acc += log_speed_increment(gen, grid.node(i - 1), grid.node(i));
        ell[i] = acc - std::log(a[i]);
    }
    if (grid.periodic()) {
        const double loop = acc + log_speed_increment(gen, grid.node(n - 1), grid.hi());
        require(std::abs(loop) <= 1e-9 * (1.0 + std::abs(acc)), ErrorCode::NonReversibleTorus,
                "drift/diffusion has no periodic potential (loop integral " + fmt::num(loop) + ")");
    }

    const double peak = *std::max_element(ell.begin(), ell.end());
    dens.weights = quad::weights(grid);
    dens.values.resize(n);
    long double z = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        dens.values[i] = std::exp(ell[i] - peak);
        z += static_cast<long double>(dens.weights[i]) * dens.values[i];
    }
    const double zd = static_cast<double>(z);
    dens.log_normalizer = std::log(zd) + peak;
    dens.log_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        dens.values[i] /= zd;
        dens.log_values[i] = ell[i] - dens.log_normalizer;
    }

    if (grid.periodic()) {
        dens.mass_defect = 0.0;
        return draft;
    }
    dens.tail_slope_hi = log_density_slope(gen, grid.hi());
    double defect_hi = std::numeric_limits<double>::infinity();
    if (dens.tail_slope_hi < 0.0) defect_hi = dens.values.back() / -dens.tail_slope_hi;
    double defect_lo = std::numeric_limits<double>::infinity();
    if (half) {
        // Near 0 the density behaves like y^{k-1} with k = 1 + y ell'(y).
        const double y = grid.lo();
        dens.tail_slope_lo = log_density_slope(gen, y);
        const double k = 1.0 + y * dens.tail_slope_lo;
        if (k > 0.0) defect_lo = dens.values.front() * y / k;
    } else {
        dens.tail_slope_lo = log_density_slope(gen, grid.lo());
        if (dens.tail_slope_lo > 0.0) defect_lo = dens.values.front() / dens.tail_slope_lo;
    }
    dens.defect_lo = defect_lo;
    dens.defect_hi = defect_hi;
    dens.mass_defect = defect_lo + defect_hi;
    return draft;
}

}  // namespace detail

/// Density m(y) proportional to (1/a) exp(int 2 drift/a) of the regime's fast
/// generator at frozen x, normalized on the grid. Fails when the estimated
/// excluded mass reaches `max_defect`.
inline InvariantDensity invariant_density_1d(const SlowFastModel& model, std::span<const double> x,
                                             const Grid1D& grid, double max_defect = 1e-8) {
    require(model.dims.d == 1, ErrorCode::InvalidArgument, "invariant_density_1d needs d = 1");
    require(grid.size() >= 8, ErrorCode::GridTooCoarse, "density grid needs at least 8 nodes");
    auto draft = detail::build_density(model, x, grid);
    require(draft.density.mass_defect < max_defect, ErrorCode::TruncationTooSmall,
            "estimated excluded mass " + fmt::num(draft.density.mass_defect));
    return std::move(draft.density);
}

/// Grid of `count` nodes for the fast space. Truncation widths not fixed by
/// the model grow geometrically until the excluded mass (upper tail only on a
/// half-line) is below `tail_tol`.
inline Grid1D fast_grid(const SlowFastModel& model, std::span<const double> x, std::size_t count = 1025,
                        double tail_tol = 1e-8) {
    const auto& fs = model.fast_space;
    if (fs.kind == FastSpaceKind::Torus) return Grid1D::torus(fs.period, count);
    if (fs.kind == FastSpaceKind::Line && fs.half_width > 0.0) return Grid1D::symmetric(fs.half_width, count);
    if (fs.kind == FastSpaceKind::HalfLine && fs.upper > 0.0) return Grid1D::squared(fs.y_min, fs.upper, count);
    double width = 2.0;
    for (int iter = 0; iter < 60; ++iter, width *= 1.2) {
        const Grid1D g = fs.kind == FastSpaceKind::Line ? Grid1D::symmetric(width, count)
                                                        : Grid1D::squared(fs.y_min, fs.y_min + width, count);
        try {
            const auto draft = detail::build_density(model, x, g);
            // On a half-line the lower cut y_min is fixed, so only the upper tail responds to the width.
            const auto& dd = draft.density;
            if (fs.kind == FastSpaceKind::HalfLine) {
                require(dd.defect_lo < 1e-8, ErrorCode::TruncationTooSmall,
                        "mass below y_min=" + fmt::num(fs.y_min) + " is " + fmt::num(dd.defect_lo));
                if (dd.defect_hi < tail_tol) return g;
            } else if (dd.mass_defect < tail_tol) {
                return g;
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonEllipticDiffusion) throw;
        }
    }
    fail(ErrorCode::TruncationTooSmall, "no truncation below width " + fmt::num(width) + " meets the tail rule");
}

// ============================================================================
// Product densities (separable fast dynamics)
// ============================================================================

struct ProductDensity {
    std::vector<InvariantDensity> factors;
    std::vector<double> values;  // tensor-product values, last coordinate fastest

    [[nodiscard]] std::size_t size() const { return values.size(); }

    [[nodiscard]] std::vector<std::size_t> unravel(std::size_t flat) const {
        std::vector<std::size_t> idx(factors.size());
        for (std::size_t k = factors.size(); k-- > 0;) {
            const std::size_t nk = factors[k].grid.size();
            idx[k] = flat % nk;
            flat /= nk;
        }
        return idx;
    }

    [[nodiscard]] double integrate(std::span<const double> g) const {
        require(g.size() == values.size(), ErrorCode::GridMismatch, "product integrand length");
        long double s = 0.0L;
        for (std::size_t flat = 0; flat < values.size(); ++flat) {
            const auto idx = unravel(flat);
            long double w = 1.0L;
            for (std::size_t k = 0; k < idx.size(); ++k) w *= factors[k].weights[idx[k]];
            s += w * values[flat] * g[flat];
        }
        return static_cast<double>(s);
    }
};

inline ProductDensity invariant_density_product(std::vector<InvariantDensity> factors) {
    require(!factors.empty(), ErrorCode::InvalidArgument, "product density needs factors");
    ProductDensity p;
    p.factors = std::move(factors);
    std::size_t total = 1;
    for (const auto& f : p.factors) total *= f.grid.size();
    p.values.assign(total, 1.0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        const auto idx = p.unravel(flat);
        double v = 1.0;
        for (std::size_t k = 0; k < idx.size(); ++k) v *= p.factors[k].values[idx[k]];
        p.values[flat] = v;
    }
    return p;
}

/// Per-coordinate factor densities of a separable model whose coordinate k
/// drift and diffusion depend only on y_k (other coordinates held at 0).
inline ProductDensity separable_density(const SlowFastModel& model, std::span<const double> x,
                                        const std::vector<Grid1D>& grids) {
    require(model.separable_fast, ErrorCode::InvalidArgument, "model is not declared separable");
    require(grids.size() == model.dims.d, ErrorCode::GridMismatch, "one grid per fast coordinate");
    std::vector<InvariantDensity> factors;
    for (std::size_t k = 0; k < model.dims.d; ++k) {
        SlowFastModel coord = model;
        coord.dims.d = 1;
        coord.y0 = {0.0};
        const std::size_t d = model.dims.d, m = model.dims.m;
        auto embed = [d, k](std::span<const double> y1) {
            std::vector<double> y(d, 0.0);
            y[k] = y1[0];
            return y;
        };
        coord.coef.f = [&model, embed, k, d](std::span<const double> xx, std::span<const double> y1, std::span<double> out) {
            std::vector<double> full(d);
            model.coef.f(xx, embed(y1), full);
            out[0] = full[k];
        };
        coord.coef.g = [&model, embed, k, d](std::span<const double> xx, std::span<const double> y1, std::span<double> out) {
            std::vector<double> full(d);
            model.coef.g(xx, embed(y1), full);
            out[0] = full[k];
        };
        auto row = [&model, embed, k, d, m](const CoefficientFn& fn) {
            return [fn, embed, k, d, m](std::span<const double> xx, std::span<const double> y1, std::span<double> out) {
                std::vector<double> full(d * m);
                fn(xx, embed(y1), full);
                for (std::size_t j = 0; j < m; ++j) out[j] = full[k * m + j];
            };
        };
        coord.coef.tau1 = row(model.coef.tau1);
        coord.coef.tau2 = row(model.coef.tau2);
        factors.push_back(invariant_density_1d(coord, x, grids[k]));
    }
    return invariant_density_product(std::move(factors));
}

// ============================================================================
// Generator on grids
// ============================================================================

struct GeneratorResult {
    std::vector<double> values;
    std::vector<bool> trusted;  // false on the two boundary cells of a truncated line
};

/// L u at every node with fourth-order differences (periodic on a torus,
/// one-sided at the ends of a truncated line).
inline GeneratorResult apply_generator(const SlowFastModel& model, std::span<const double> x, const Grid1D& grid,
                                       std::span<const double> u) {
    require(grid.size() >= 8, ErrorCode::GridTooCoarse, "generator needs at least 8 nodes");
    require(u.size() == grid.size(), ErrorCode::GridMismatch, "function length");
    FastGenerator1D gen(model, std::vector<double>(x.begin(), x.end()));
    const auto d1 = quad::derivative(grid, u, 1);
    const auto d2 = quad::derivative(grid, u, 2);
    GeneratorResult res;
    const std::size_t n = grid.size();
    res.values.resize(n);
    res.trusted.assign(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = grid.node(i);
        res.values[i] = gen.drift(y) * d1[i] + 0.5 * gen.diffusion(y) * d2[i];
    }
    if (!grid.periodic()) {
        res.trusted[0] = res.trusted[1] = false;
        res.trusted[n - 1] = res.trusted[n - 2] = false;
    }
    return res;
}

/// Separable generator on a tensor grid: sum over coordinates of the 1-D
/// operators, each acting along its own axis.
inline std::vector<double> apply_generator_product(const SlowFastModel& model, std::span<const double> x,
                                                   const ProductDensity& pd, std::span<const double> u) {
    require(model.separable_fast, ErrorCode::InvalidArgument, "model is not declared separable");
    require(u.size() == pd.size(), ErrorCode::GridMismatch, "function length");
    const std::size_t d = pd.factors.size();
    std::vector<double> out(u.size(), 0.0);
    std::vector<std::size_t> stride(d, 1);
    for (std::size_t k = d - 1; k-- > 0;) stride[k] = stride[k + 1] * pd.factors[k + 1].grid.size();
    for (std::size_t flat = 0; flat < u.size(); ++flat) {
        const auto idx = pd.unravel(flat);
        std::vector<double> y(d);
        for (std::size_t k = 0; k < d; ++k) y[k] = pd.factors[k].grid.node(idx[k]);
        const auto drift = effective_fast_drift(model, x, y);
        const auto a = effective_fast_diffusion(model, x, y);
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const auto& g = pd.factors[k].grid;
            const auto s = quad::stencil_at(g, idx[k]);
            double du = 0.0, ddu = 0.0;
            for (std::size_t j = 0; j < s.d1.size(); ++j) {
                const std::size_t ik = (s.first + j) % g.size();
                const double v = u[flat - idx[k] * stride[k] + ik * stride[k]] - u[flat];
                du += s.d1[j] * v;
                ddu += s.d2[j] * v;
            }
            acc += drift[k] * du + 0.5 * a[k * d + k] * ddu;
        }
        out[flat] = acc;
    }
    return out;
}

// ============================================================================
// Certificates and moments
// ============================================================================

using TestFunction = std::function<double(double)>;

/// max over F of |int L F dmu|.
inline double stationarity_check(const InvariantDensity& density, const SlowFastModel& model,
                                 std::span<const double> x, const std::vector<TestFunction>& tests) {
    double worst = 0.0;
    const auto nodes = density.grid.nodes();
    for (const auto& F : tests) {
        std::vector<double> u(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) u[i] = F(nodes[i]);
        const auto lu = apply_generator(model, x, density.grid, u);
        worst = std::max(worst, std::abs(density.integrate(lu.values)));
    }
    return worst;
}

/// Five smooth, rapidly decaying (or periodic) test functions suited to the fast space.
inline std::vector<TestFunction> standard_test_battery(const SlowFastModel& model) {
    constexpr double two_pi = 6.283185307179586;
    switch (model.fast_space.kind) {
    case FastSpaceKind::Torus: {
        const double k = two_pi / model.fast_space.period;
        return {[k](double y) { return std::sin(k * y); }, [k](double y) { return std::cos(k * y); },
                [k](double y) { return std::sin(2 * k * y); }, [k](double y) { return std::cos(3 * k * y); },
                [k](double y) { return std::exp(std::cos(k * y)); }};
    }
    case FastSpaceKind::HalfLine:
        return {[](double y) { return y * y * std::exp(-y); }, [](double y) { return std::exp(-(y - 1) * (y - 1)); },
                [](double y) { return y * y * y * std::exp(-2 * y); }, [](double y) { return std::sin(y) * y * std::exp(-y); },
                [](double y) { return y * y * std::exp(-0.5 * y * y); }};
    case FastSpaceKind::Line:
    default:
        return {[](double y) { return y * std::exp(-y * y); }, [](double y) { return std::exp(-0.25 * y * y); },
                [](double y) { return y * y * std::exp(-0.25 * y * y); }, [](double y) { return std::sin(y) * std::exp(-0.125 * y * y); },
                [](double y) { return y * y * y * std::exp(-0.5 * y * y); }};
    }
}

/// int |y|^k dmu. Fails when the integrand has not decayed at the truncation.
inline double density_moment(const InvariantDensity& density, double k) {
    require(k >= 0.0, ErrorCode::InvalidArgument, "moment order must be >= 0");
    const auto& g = density.grid;
    const std::size_t n = g.size();
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = k == 0.0 ? 1.0 : std::pow(std::abs(g.node(i)), k);
    const double result = density.integrate(w);
    if (!g.periodic()) {
        const double yh = g.hi();
        const double slope_hi = density.tail_slope_hi + (k > 0 && yh != 0 ? k / yh : 0.0);
        const double end_hi = w.back() * density.values.back();
        const double tail_hi = slope_hi < 0 ? end_hi / -slope_hi : std::numeric_limits<double>::infinity();
        double tail_lo = 0.0;
        if (!density.natural_lower) {
            const double yl = g.lo();
            const double slope_lo = density.tail_slope_lo + (k > 0 && yl != 0 ? k / yl : 0.0);
            const double end_lo = w.front() * density.values.front();
            tail_lo = slope_lo > 0 ? end_lo / slope_lo : (end_lo == 0 ? 0.0 : std::numeric_limits<double>::infinity());
        }
        require(tail_hi + tail_lo <= 1e-8 * std::max(1.0, std::abs(result)), ErrorCode::TailDominates,
                "moment tail estimate " + fmt::num(tail_hi + tail_lo));
    }
    return result;
}

inline CsvTable density_csv(const InvariantDensity& density) {
    CsvTable t;
    t.add_meta("log_normalizer", density.log_normalizer);
    t.add_meta("mass_defect", density.mass_defect);
    t.add_meta("total_mass", density.total_mass());
    t.columns = {"y", "m"};
    for (std::size_t i = 0; i < density.values.size(); ++i) t.add_row({density.grid.node(i), density.values[i]});
    return t;
}

}  // namespace slowfast
