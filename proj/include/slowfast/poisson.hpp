#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "slowfast/csv.hpp"
#include "slowfast/error.hpp"
#include "slowfast/fast_dynamics.hpp"
#include "slowfast/model.hpp"
#include "slowfast/quadrature.hpp"

namespace slowfast {

enum class PoissonMethod { Quadrature, FiniteDifference };

constexpr std::string_view to_string(PoissonMethod m) {
    return m == PoissonMethod::Quadrature ? "quadrature" : "finite-difference";
}

struct PoissonOptions {
    double fredholm_tol = 1e-8;   // |int F dmu| allowed before centering, relative to max(1, int |F| dmu)
    double residual_tol = 1e-5;   // certification threshold on trusted nodes
    double centering_tol = 1e-9;
    double influence_tol = 1e-9;  // boundary-influence threshold for the trusted mask
};

/// Solution of L u = -F, int u dmu = 0, one column per right-hand side.
struct CorrectorSolution {
    Grid1D grid;
    PoissonMethod method = PoissonMethod::Quadrature;
    std::vector<std::vector<double>> values;  // u per column
    std::vector<std::vector<double>> dy;      // du/dy per column
    std::vector<std::vector<double>> d2y;     // d2u/dy2 per column
    std::vector<bool> trusted;
    double centering_defect = 0.0;
    double residual_sup = 0.0;
    double residual_tol = 1e-5;

    [[nodiscard]] std::size_t columns() const { return values.size(); }
    [[nodiscard]] bool certified() const { return residual_sup < residual_tol && centering_defect < 1e-9; }

    [[nodiscard]] double value_at(std::size_t col, double y) const { return grid.interpolate(values[col], y); }
    [[nodiscard]] double dy_at(std::size_t col, double y) const { return grid.interpolate(dy[col], y); }
    [[nodiscard]] double d2y_at(std::size_t col, double y) const { return grid.interpolate(d2y[col], y); }
};

namespace detail {

struct PoissonContext {
    std::vector<double> drift, diff;
};

inline PoissonContext poisson_context(const SlowFastModel& model, std::span<const double> x,
                                      const InvariantDensity& density) {
    FastGenerator1D gen(model, std::vector<double>(x.begin(), x.end()));
    const auto& g = density.grid;
    PoissonContext ctx;
    ctx.drift.resize(g.size());
    ctx.diff.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = g.node(i);
        ctx.drift[i] = gen.drift(y);
        ctx.diff[i] = gen.diffusion(y);
        const bool boundary = i == 0 && density.natural_lower;
        require(ctx.diff[i] > 0.0 || boundary, ErrorCode::DegenerateDiffusion,
                "fast diffusion vanishes at interior node y=" + fmt::num(y));
    }
    return ctx;
}

/// Checks the solvability condition and returns F minus its mu-mean.
inline std::vector<double> centered_rhs(const InvariantDensity& density, std::span<const double> F,
                                        const PoissonOptions& opt, ErrorCode code, std::size_t column) {
    require(F.size() == density.grid.size(), ErrorCode::GridMismatch, "rhs length");
    const double mean = density.integrate(F);
    std::vector<double> absF(F.size());
    for (std::size_t i = 0; i < F.size(); ++i) absF[i] = std::abs(F[i]);
    const double scale = std::max(1.0, density.integrate(absF));
    require(std::abs(mean) < opt.fredholm_tol * scale, code,
            "component " + std::to_string(column) + " has mu-mean " + fmt::num(mean));
    std::vector<double> out(F.begin(), F.end());
    for (double& v : out) v -= mean;
    return out;
}

/// Nodes whose u' may be polluted by the truncation at either end by more
/// than influence_tol * (1 + |u'|) are untrusted, as are the two end cells.
inline std::vector<bool> trusted_mask(const InvariantDensity& density, const PoissonContext& ctx,
                                      const std::vector<std::vector<double>>& rhs,
                                      const std::vector<std::vector<double>>& dy, const PoissonOptions& opt) {
    const auto& g = density.grid;
    const std::size_t n = g.size();
    std::vector<bool> mask(n, true);
    if (g.periodic()) return mask;
    for (std::size_t col = 0; col < rhs.size(); ++col) {
        double tail = 0.0;
        if (!density.natural_lower && density.tail_slope_lo > 0)
            tail += std::abs(rhs[col].front()) * density.values.front() / density.tail_slope_lo;
        if (density.tail_slope_hi < 0)
            tail += std::abs(rhs[col].back()) * density.values.back() / -density.tail_slope_hi;
        for (std::size_t i = 0; i < n; ++i) {
            const double influence = 2.0 * tail / (ctx.diff[i] * density.values[i]);
            if (!(influence < opt.influence_tol * (1.0 + std::abs(dy[col][i])))) mask[i] = false;
        }
    }
    mask[0] = mask[1] = mask[n - 1] = mask[n - 2] = false;
    return mask;
}

inline void certify(CorrectorSolution& sol, const SlowFastModel& model, std::span<const double> x,
                    const InvariantDensity& density, const std::vector<std::vector<double>>& rhs,
                    const PoissonContext& ctx, const PoissonOptions& opt) {
    sol.trusted = trusted_mask(density, ctx, rhs, sol.dy, opt);
    sol.residual_tol = opt.residual_tol;
    sol.residual_sup = 0.0;
    sol.centering_defect = 0.0;
    for (std::size_t col = 0; col < rhs.size(); ++col) {
        const auto lu = apply_generator(model, x, density.grid, sol.values[col]);
        for (std::size_t i = 0; i < rhs[col].size(); ++i)
            if (sol.trusted[i] && lu.trusted[i])
                sol.residual_sup = std::max(sol.residual_sup, std::abs(lu.values[i] + rhs[col][i]));
        sol.centering_defect = std::max(sol.centering_defect, std::abs(density.integrate(sol.values[col])));
    }
}

inline void center_in_place(const InvariantDensity& density, std::vector<double>& u) {
    const double mean = density.integrate(u) / density.total_mass();
    for (double& v : u) v -= mean;
}

/// u' = -(2/(a m)) int_lo^y F m on a truncated line, evaluated in log space
/// in the computational coordinate: from the lower end up to the mode and from
/// the upper end down past it.
inline std::vector<double> quadrature_slope_line(const InvariantDensity& density, const PoissonContext& ctx,
                                                 const std::vector<double>& F) {
    const auto& g = density.grid;
    const std::size_t n = g.size();
    const double h = g.spacing();
    // log of the density in the computational coordinate
    std::vector<double> ell(n);
    for (std::size_t i = 0; i < n; ++i) ell[i] = density.log_values[i] + std::log(g.jacobian(i));
    const auto& rule = quad::cell_rule();
    const std::size_t mode =
        static_cast<std::size_t>(std::max_element(ell.begin(), ell.end()) - ell.begin());

    // cell integral of F e^{ell - ref} over [z_i, z_{i+1}]
    auto cell = [&](std::size_t i, double ref) {
        const int start = quad::stencil_start(i, n);
        const auto& w = rule[static_cast<std::size_t>(static_cast<int>(i) - start)];
        double s = 0.0;
        for (std::size_t j = 0; j < quad::kStencil; ++j) {
            const std::size_t k = static_cast<std::size_t>(start) + j;
            s += w[j] * F[k] * std::exp(ell[k] - ref);
        }
        return h * s;
    };

    std::vector<double> J(n, 0.0);  // J_i = int_lo^{z_i} F m_z / m_z,i (lower side), -int_{z_i}^hi F m_z / m_z,i (upper side)
    if (density.natural_lower) {
        // Mass below the cut: m ~ y^{k-1} near 0, so int_0^{y_0} F m dy ~ F_0 m_0 y_0 / k.
        const double k = 1.0 + g.lo() * density.tail_slope_lo;
        if (k > 0.0) J[0] = F[0] * g.lo() / (k * g.jacobian(0));
    }
    for (std::size_t i = 0; i < mode; ++i) J[i + 1] = J[i] * std::exp(ell[i] - ell[i + 1]) + cell(i, ell[i + 1]);
    std::vector<double> Ju(n, 0.0);
    for (std::size_t i = n - 1; i > mode; --i) Ju[i - 1] = Ju[i] * std::exp(ell[i] - ell[i - 1]) - cell(i - 1, ell[i - 1]);
    for (std::size_t i = mode + 1; i < n; ++i) J[i] = Ju[i];

    std::vector<double> slope(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (ctx.diff[i] > 0.0) slope[i] = -2.0 * g.jacobian(i) / ctx.diff[i] * J[i];
    }
    if (density.natural_lower && ctx.diff[0] <= 0.0 && n > 1) slope[0] = slope[1];
    return slope;
}

/// Periodic version: a m u' = C - 2 int_0^y F m, with C making u periodic.
inline std::vector<double> quadrature_slope_torus(const InvariantDensity& density, const PoissonContext& ctx,
                                                  const std::vector<double>& F) {
    const auto& g = density.grid;
    const std::size_t n = g.size();
    std::vector<double> Fm(n);
    for (std::size_t i = 0; i < n; ++i) Fm[i] = F[i] * density.values[i];
    const auto G = quad::cumulative(g, Fm);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double am = ctx.diff[i] * density.values[i];
        num += 2.0 * G[i] / am;
        den += 1.0 / am;
    }
    const double C = num / den;
    std::vector<double> slope(n);
    for (std::size_t i = 0; i < n; ++i) slope[i] = (C - 2.0 * G[i]) / (ctx.diff[i] * density.values[i]);
    return slope;
}

}  // namespace detail

/// Poisson solve by explicit quadrature of the one-dimensional flux identity
/// (a m u'/2)' = -F m. The slope u' is primary; u follows by integration and
/// centering, and u'' is read off the equation itself.
inline CorrectorSolution solve_poisson_quadrature_1d(const SlowFastModel& model, std::span<const double> x,
                                                     const std::vector<std::vector<double>>& F,
                                                     const InvariantDensity& density, const PoissonOptions& opt = {},
                                                     ErrorCode fredholm_code = ErrorCode::FredholmViolation) {
    const auto& g = density.grid;
    const std::size_t n = g.size();
    const auto ctx = detail::poisson_context(model, x, density);
    CorrectorSolution sol;
    sol.grid = g;
    sol.method = PoissonMethod::Quadrature;
    std::vector<std::vector<double>> rhs;
    for (std::size_t col = 0; col < F.size(); ++col) {
        auto Fc = detail::centered_rhs(density, F[col], opt, fredholm_code, col);
        auto slope = g.periodic() ? detail::quadrature_slope_torus(density, ctx, Fc)
                                  : detail::quadrature_slope_line(density, ctx, Fc);
        auto cum = quad::cumulative(g, slope);
        std::vector<double> u(cum.begin(), cum.begin() + static_cast<std::ptrdiff_t>(n));
        detail::center_in_place(density, u);
        std::vector<double> second(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            second[i] = ctx.diff[i] > 0 ? -2.0 * (Fc[i] + ctx.drift[i] * slope[i]) / ctx.diff[i] : 0.0;
        sol.values.push_back(std::move(u));
        sol.dy.push_back(std::move(slope));
        sol.d2y.push_back(std::move(second));
        rhs.push_back(std::move(Fc));
    }
    detail::certify(sol, model, x, density, rhs, ctx, opt);
    return sol;
}

namespace detail {

// Zero-flux row at truncated ends; a natural (degenerate) lower end keeps the equation.
inline bool fd_end_row(const Grid1D& g, const InvariantDensity& density, std::size_t i) {
    if (g.periodic()) return false;
    return (i == 0 && !density.natural_lower) || i + 1 == g.size();
}

}  // namespace detail

/// Poisson solve by fourth-order finite differences: L u + lambda = -F with
/// zero-flux rows at truncated ends, bordered by the centering row
/// sum_i w_i m_i u_i = 0. The multiplier lambda absorbs the discrete
/// solvability defect and is O(truncation error).
inline CorrectorSolution solve_poisson_fd_1d(const SlowFastModel& model, std::span<const double> x,
                                             const std::vector<std::vector<double>>& F,
                                             const InvariantDensity& density, const PoissonOptions& opt = {},
                                             ErrorCode fredholm_code = ErrorCode::FredholmViolation) {
    const auto& g = density.grid;
    const std::size_t n = g.size();
    require(n >= 8, ErrorCode::GridTooCoarse, "fd solver needs at least 8 nodes");
    const auto ctx = detail::poisson_context(model, x, density);
    const auto N = static_cast<Eigen::Index>(n);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * 8);
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = quad::stencil_at(g, i);
        const auto row = static_cast<Eigen::Index>(i);
        const bool end = detail::fd_end_row(g, density, i);
        // generator coefficients in the computational coordinate
        const double jac = g.jacobian(i);
        const double drift_c = ctx.drift[i] / jac - 0.5 * ctx.diff[i] * g.jacobian2() / (jac * jac * jac);
        const double diff_c = ctx.diff[i] / (jac * jac);
        for (std::size_t k = 0; k < s.d1.size(); ++k) {
            const auto col = static_cast<Eigen::Index>((s.first + k) % n);
            const double coeff = end ? s.d1[k] : drift_c * s.d1[k] + 0.5 * diff_c * s.d2[k];
            if (coeff != 0.0) trip.emplace_back(row, col, coeff);
        }
        if (!end) trip.emplace_back(row, N, 1.0);
    }
    for (std::size_t i = 0; i < n; ++i)
        trip.emplace_back(N, static_cast<Eigen::Index>(i), density.weights[i] * density.values[i]);
    Eigen::SparseMatrix<double> A(N + 1, N + 1);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    require(lu.info() == Eigen::Success, ErrorCode::SingularSystem, "bordered fd system is singular");

    CorrectorSolution sol;
    sol.grid = g;
    sol.method = PoissonMethod::FiniteDifference;
    std::vector<std::vector<double>> rhs;
    for (std::size_t col = 0; col < F.size(); ++col) {
        auto Fc = detail::centered_rhs(density, F[col], opt, fredholm_code, col);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(N + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const bool end = detail::fd_end_row(g, density, i);
            b[static_cast<Eigen::Index>(i)] = end ? 0.0 : -Fc[i];
        }
        const Eigen::VectorXd sol_vec = lu.solve(b);
        require(lu.info() == Eigen::Success && sol_vec.allFinite(), ErrorCode::SingularSystem, "fd solve failed");
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = sol_vec[static_cast<Eigen::Index>(i)];
        detail::center_in_place(density, u);
        sol.dy.push_back(quad::derivative(g, u, 1));
        sol.d2y.push_back(quad::derivative(g, u, 2));
        sol.values.push_back(std::move(u));
        rhs.push_back(std::move(Fc));
    }
    detail::certify(sol, model, x, density, rhs, ctx, opt);
    return sol;
}

inline CorrectorSolution solve_poisson(PoissonMethod method, const SlowFastModel& model, std::span<const double> x,
                                       const std::vector<std::vector<double>>& F, const InvariantDensity& density,
                                       const PoissonOptions& opt = {},
                                       ErrorCode fredholm_code = ErrorCode::FredholmViolation) {
    return method == PoissonMethod::Quadrature ? solve_poisson_quadrature_1d(model, x, F, density, opt, fredholm_code)
                                               : solve_poisson_fd_1d(model, x, F, density, opt, fredholm_code);
}

// ============================================================================
// Cell problem and corrector
// ============================================================================

/// b_l sampled on the density grid, one column per slow component.
inline std::vector<std::vector<double>> sample_b(const SlowFastModel& model, std::span<const double> x,
                                                 const Grid1D& grid) {
    std::vector<std::vector<double>> cols(model.dims.n, std::vector<double>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double y[1] = {grid.node(i)};
        const auto bv = model.b(x, y);
        for (std::size_t l = 0; l < model.dims.n; ++l) cols[l][i] = bv[l];
    }
    return cols;
}

/// Cell problem L_1 chi_l = -b_l, int chi_l dmu = 0.
inline CorrectorSolution cell_chi(const SlowFastModel& model, std::span<const double> x,
                                  const InvariantDensity& density,
                                  PoissonMethod method = PoissonMethod::Quadrature, PoissonOptions opt = {}) {
    require(model.regime() == Regime::One, ErrorCode::InvalidArgument, "cell problem belongs to Regime 1");
    auto cols = sample_b(model, x, density.grid);
    for (std::size_t l = 0; l < cols.size(); ++l) {
        const double mean = density.integrate(cols[l]);
        require(std::abs(mean) < 1e-8, ErrorCode::CenteringViolation,
                "int b_" + std::to_string(l) + " dmu = " + fmt::num(mean));
    }
    return solve_poisson(method, model, x, cols, density, opt, ErrorCode::CenteringViolation);
}

/// Corrector L_i Phi = -(lambda_i - lambdabar_i), int Phi dmu = 0.
inline CorrectorSolution corrector_phi(const SlowFastModel& model, std::span<const double> x,
                                       const InvariantDensity& density,
                                       const std::vector<std::vector<double>>& lambda_centered,
                                       PoissonMethod method = PoissonMethod::Quadrature, PoissonOptions opt = {}) {
    require(lambda_centered.size() == model.dims.n, ErrorCode::InvalidArgument, "one column per slow component");
    return solve_poisson(method, model, x, lambda_centered, density, opt);
}

inline CsvTable corrector_csv(const CorrectorSolution& sol) {
    CsvTable t;
    t.add_meta("method", std::string(to_string(sol.method)));
    t.add_meta("centering_defect", sol.centering_defect);
    t.add_meta("residual_sup", sol.residual_sup);
    t.add_meta("certified", sol.certified() ? "true" : "false");
    t.columns = {"y"};
    for (std::size_t c = 0; c < sol.columns(); ++c) t.columns.push_back("u_" + std::to_string(c + 1));
    for (std::size_t c = 0; c < sol.columns(); ++c) t.columns.push_back("du_" + std::to_string(c + 1));
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        std::vector<double> row{sol.grid.node(i)};
        for (std::size_t c = 0; c < sol.columns(); ++c) row.push_back(sol.values[c][i]);
        for (std::size_t c = 0; c < sol.columns(); ++c) row.push_back(sol.dy[c][i]);
        t.add_row(std::move(row));
    }
    return t;
}

}  // namespace slowfast
