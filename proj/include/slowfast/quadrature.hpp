#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "slowfast/error.hpp"
#include "slowfast/grid.hpp"

namespace slowfast::quad {

// ============================================================================
// Full-interval quadrature
// ============================================================================

// Gregory end corrections exact for polynomials of degree <= 7.
inline constexpr std::array<double, 7> kGregory7 = {
    5257.0 / 17280.0,  22081.0 / 15120.0, 54851.0 / 120960.0, 103.0 / 70.0,
    89437.0 / 120960.0, 16367.0 / 15120.0, 23917.0 / 24192.0};
inline constexpr std::array<double, 3> kGregory3 = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};

/// Quadrature weights in the physical variable (already multiplied by the
/// spacing and by dy/dz on a squared grid). Periodic grids use the plain
/// rectangle rule, which is spectrally accurate for smooth periodic integrands;
/// truncated lines use the composite trapezoid rule with Gregory end corrections.
inline std::vector<double> weights(const Grid1D& grid) {
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    std::vector<double> w(n, h);
    if (grid.periodic()) return w;
    auto apply = [&](const auto& table) {
        for (std::size_t j = 0; j < table.size(); ++j) {
            w[j] = h * table[j];
            w[n - 1 - j] = h * table[j];
        }
    };
    if (n >= 2 * kGregory7.size()) {
        apply(kGregory7);
    } else if (n >= 2 * kGregory3.size()) {
        apply(kGregory3);
    } else {
        w.front() = 0.5 * h;
        w.back() = 0.5 * h;
    }
    if (grid.squared())
        for (std::size_t i = 0; i < n; ++i) w[i] *= grid.jacobian(i);
    return w;
}

inline double integrate(const Grid1D& grid, std::span<const double> values) {
    require(values.size() == grid.size(), ErrorCode::GridMismatch, "integrand length");
    const auto w = weights(grid);
    long double s = 0.0L;
    for (std::size_t i = 0; i < values.size(); ++i) s += static_cast<long double>(w[i]) * values[i];
    return static_cast<double>(s);
}

// ============================================================================
// Cumulative integration with local interpolating polynomials
// ============================================================================

inline constexpr std::size_t kStencil = 8;

/// Weights of \int_0^1 p(t) dt where p interpolates nodes at integer offsets
/// `first, first+1, ..., first+kStencil-1` (offset 0 is the cell start).
inline std::array<double, kStencil> cell_weights(int first) {
    std::array<double, kStencil> out{};
    for (std::size_t j = 0; j < kStencil; ++j) {
        // Expand the Lagrange basis polynomial in powers of t.
        std::array<long double, kStencil> coef{};
        coef[0] = 1.0L;
        long double denom = 1.0L;
        const long double tj = first + static_cast<int>(j);
        std::size_t deg = 0;
        for (std::size_t k = 0; k < kStencil; ++k) {
            if (k == j) continue;
            const long double tk = first + static_cast<int>(k);
            for (std::size_t p = deg + 2; p-- > 0;) {
                const long double prev = p > 0 ? coef[p - 1] : 0.0L;
                coef[p] = prev - tk * coef[p];
            }
            ++deg;
            denom *= (tj - tk);
        }
        long double integral = 0.0L;
        for (std::size_t p = 0; p <= deg; ++p) integral += coef[p] / static_cast<long double>(p + 1);
        out[j] = static_cast<double>(integral / denom);
    }
    return out;
}

/// Stencil start offset for the cell [i, i+1] on a non-periodic grid of n nodes.
inline int stencil_start(std::size_t i, std::size_t n) {
    constexpr int half = static_cast<int>(kStencil) / 2 - 1;
    int start = static_cast<int>(i) - half;
    start = std::max(start, 0);
    start = std::min(start, static_cast<int>(n) - static_cast<int>(kStencil));
    return start;
}

struct CellRule {
    std::array<std::array<double, kStencil>, kStencil> table{};
    CellRule() {
        for (std::size_t s = 0; s < kStencil; ++s) table[s] = cell_weights(-static_cast<int>(s));
    }
    /// Weights for a stencil whose first node sits `back` nodes before the cell start.
    [[nodiscard]] const std::array<double, kStencil>& operator[](std::size_t back) const { return table[back]; }
};

inline const CellRule& cell_rule() {
    static const CellRule rule;
    return rule;
}

/// Returns C with C[i] = \int_{y_0}^{y_i} v dy. On a torus the result has
/// size()+1 entries, the last being the integral over a full period.
inline std::vector<double> cumulative(const Grid1D& grid, std::span<const double> v_phys) {
    const std::size_t n = grid.size();
    require(v_phys.size() == n, ErrorCode::GridMismatch, "cumulative integrand length");
    std::vector<double> v(v_phys.begin(), v_phys.end());
    if (grid.squared())
        for (std::size_t i = 0; i < n; ++i) v[i] *= grid.jacobian(i);
    const double h = grid.spacing();
    const auto& rule = cell_rule();
    if (grid.periodic()) {
        std::vector<double> c(n + 1, 0.0);
        constexpr std::size_t back = kStencil / 2 - 1;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& w = rule[back];
            double s = 0.0;
            for (std::size_t j = 0; j < kStencil; ++j) {
                const std::size_t idx = (i + n * kStencil + j - back) % n;
                s += w[j] * v[idx];
            }
            c[i + 1] = c[i] + h * s;
        }
        return c;
    }
    if (n < kStencil) {
        std::vector<double> c(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) c[i] = c[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
        return c;
    }
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const int start = stencil_start(i, n);
        const auto& w = rule[static_cast<std::size_t>(static_cast<int>(i) - start)];
        double s = 0.0;
        for (std::size_t j = 0; j < kStencil; ++j) s += w[j] * v[static_cast<std::size_t>(start) + j];
        c[i + 1] = c[i] + h * s;
    }
    return c;
}

// ============================================================================
// Finite-difference stencils
// ============================================================================

/// Fornberg's algorithm: weights for the derivatives 0..max_order at z from
/// samples at positions x.
inline std::vector<std::vector<double>> fornberg(double z, std::span<const double> x, std::size_t max_order) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(n, 0.0));
    double c1 = 1.0;
    double c4 = x[0] - z;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min(i, max_order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - z;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k)
                    c[k][i] = c1 * (static_cast<double>(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k)
                c[k][j] = (c4 * c[k][j] - static_cast<double>(k) * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

/// Fourth-order first and second derivative stencils in the computational
/// coordinate. Interior nodes use the five-point centred stencil; on a
/// truncated line the two outermost nodes at each end use six-point one-sided
/// stencils.
struct DerivativeStencil {
    std::size_t first = 0;             // index of the first stencil node (unwrapped on a torus)
    std::vector<double> d1;            // weights / h
    std::vector<double> d2;            // weights / h^2
    bool centred = true;
};

inline DerivativeStencil stencil_at(const Grid1D& grid, std::size_t i) {
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    DerivativeStencil s;
    std::vector<double> offsets;
    if (grid.periodic() || (i >= 2 && i + 2 < n)) {
        offsets = {-2, -1, 0, 1, 2};
        s.first = grid.periodic() ? (i + n - 2) % n : i - 2;
    } else {
        require(n >= 6, ErrorCode::GridTooCoarse, "one-sided stencils need 6 nodes");
        const std::size_t first = i < 2 ? 0 : n - 6;
        s.first = first;
        s.centred = false;
        for (std::size_t k = 0; k < 6; ++k)
            offsets.push_back(static_cast<double>(first + k) - static_cast<double>(i));
    }
    const auto w = fornberg(0.0, offsets, 2);
    s.d1.resize(offsets.size());
    s.d2.resize(offsets.size());
    for (std::size_t k = 0; k < offsets.size(); ++k) {
        s.d1[k] = w[1][k] / h;
        s.d2[k] = w[2][k] / (h * h);
    }
    return s;
}

/// Nodal derivative of order 1 or 2 in the computational coordinate.
inline std::vector<double> coord_derivative(const Grid1D& grid, std::span<const double> v, int order) {
    const std::size_t n = grid.size();
    require(v.size() == n, ErrorCode::GridMismatch, "derivative input length");
    require(n >= 8, ErrorCode::GridTooCoarse, "need at least 8 nodes");
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = stencil_at(grid, i);
        const auto& w = order == 1 ? s.d1 : s.d2;
        // Stencil weights sum to zero, so differencing against v[i] annihilates constants exactly.
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * (v[(s.first + k) % n] - v[i]);
        out[i] = acc;
    }
    return out;
}

/// Nodal derivative of order 1 or 2 in the physical variable:
/// u_y = v_z / y', u_yy = (v_zz - v_z y'' / y') / y'^2.
inline std::vector<double> derivative(const Grid1D& grid, std::span<const double> v, int order) {
    if (!grid.squared()) return coord_derivative(grid, v, order);
    const auto d1 = coord_derivative(grid, v, 1);
    std::vector<double> out(v.size());
    if (order == 1) {
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = d1[i] / grid.jacobian(i);
        return out;
    }
    const auto d2 = coord_derivative(grid, v, 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double j = grid.jacobian(i);
        out[i] = (d2[i] - d1[i] * grid.jacobian2() / j) / (j * j);
    }
    return out;
}

}  // namespace slowfast::quad
