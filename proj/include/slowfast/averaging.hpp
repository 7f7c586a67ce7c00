#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "slowfast/csv.hpp"
#include "slowfast/error.hpp"
#include "slowfast/fast_dynamics.hpp"
#include "slowfast/format.hpp"
#include "slowfast/model.hpp"
#include "slowfast/poisson.hpp"

namespace slowfast {

struct PipelineOptions {
    std::size_t nodes = 1025;       // fast grid size (torus grids drop the duplicate end node)
    double density_tail = 1e-24;    // excluded-mass target of the solver grid
    PoissonMethod method = PoissonMethod::Quadrature;
    PoissonOptions poisson;
    bool require_certified = true;
};

// ============================================================================
// Density cache
// ============================================================================

/// Memoizes densities per x. Models whose fast dynamics ignore x share one
/// entry. Internally synchronized; returned densities are immutable.
class DensityCache {
public:
    DensityCache(const SlowFastModel& model, PipelineOptions opt) : model_(&model), opt_(opt) {}
    // Holds a pointer to the model; temporaries would dangle.
    DensityCache(SlowFastModel&&, PipelineOptions) = delete;

    std::shared_ptr<const InvariantDensity> get(std::span<const double> x) {
        std::vector<double> key;
        if (model_->fast_depends_on_x) key.assign(x.begin(), x.end());
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        const std::size_t count = model_->fast_space.kind == FastSpaceKind::Torus ? opt_.nodes - 1 : opt_.nodes;
        const Grid1D grid = fast_grid(*model_, x, count, opt_.density_tail);
        auto dens = std::make_shared<const InvariantDensity>(invariant_density_1d(*model_, x, grid));
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.emplace(std::move(key), std::move(dens)).first->second;
    }

    [[nodiscard]] const PipelineOptions& options() const noexcept { return opt_; }
    [[nodiscard]] const SlowFastModel& model() const noexcept { return *model_; }

private:
    const SlowFastModel* model_;
    PipelineOptions opt_;
    std::mutex mutex_;
    std::map<std::vector<double>, std::shared_ptr<const InvariantDensity>> cache_;
};

// ============================================================================
// lambda_i and averages
// ============================================================================

/// lambda_1 = (grad_y chi) g + c (Regime 1), lambda_2 = gamma b + c (Regime 2).
inline std::vector<double> lambda_pointwise(const SlowFastModel& model, std::span<const double> x,
                                            std::span<const double> y, const CorrectorSolution* chi) {
    auto out = model.c(x, y);
    if (model.regime() == Regime::Two) {
        const auto bv = model.b(x, y);
        for (std::size_t l = 0; l < out.size(); ++l) out[l] += model.scaling.gamma * bv[l];
        return out;
    }
    require(chi != nullptr, ErrorCode::MissingCellSolution, "Regime 1 lambda needs the cell solution");
    const auto gv = model.g(x, y);
    for (std::size_t l = 0; l < out.size(); ++l) out[l] += chi->dy_at(l, y[0]) * gv[0];
    return out;
}

/// lambda_i sampled on the density grid, one column per slow component.
inline std::vector<std::vector<double>> lambda_on_grid(const SlowFastModel& model, std::span<const double> x,
                                                       const Grid1D& grid, const CorrectorSolution* chi) {
    require(model.regime() == Regime::Two || chi != nullptr, ErrorCode::MissingCellSolution,
            "Regime 1 lambda needs the cell solution");
    if (chi) require_same_grid(grid, chi->grid, "lambda");
    const std::size_t n = model.dims.n;
    std::vector<std::vector<double>> cols(n, std::vector<double>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double y[1] = {grid.node(i)};
        auto v = model.c(x, y);
        if (model.regime() == Regime::Two) {
            const auto bv = model.b(x, y);
            for (std::size_t l = 0; l < n; ++l) v[l] += model.scaling.gamma * bv[l];
        } else {
            const auto gv = model.g(x, y);
            for (std::size_t l = 0; l < n; ++l) v[l] += chi->dy[l][i] * gv[0];
        }
        for (std::size_t l = 0; l < n; ++l) cols[l][i] = v[l];
    }
    return cols;
}

/// Componentwise int G dmu for gridded components.
inline std::vector<double> average_against_mu(const std::vector<std::vector<double>>& columns,
                                              const InvariantDensity& density) {
    std::vector<double> out;
    out.reserve(columns.size());
    for (const auto& c : columns) {
        require(c.size() == density.grid.size(), ErrorCode::GridMismatch, "integrand not on the density grid");
        out.push_back(density.integrate(c));
    }
    return out;
}

inline double average_against_mu(const std::vector<double>& column, const InvariantDensity& density) {
    require(column.size() == density.grid.size(), ErrorCode::GridMismatch, "integrand not on the density grid");
    return density.integrate(column);
}

// ============================================================================
// Averaged drift
// ============================================================================

enum class GradientMethod { Analytic, FiniteDifference };

/// x -> lambdabar(x) and its Jacobian.
class AveragedDrift {
public:
    AveragedDrift(const SlowFastModel& model, std::shared_ptr<DensityCache> cache)
        : model_(&model), cache_(std::move(cache)) {}

    explicit AveragedDrift(const SlowFastModel& model, PipelineOptions opt = {})
        : AveragedDrift(model, std::make_shared<DensityCache>(model, opt)) {}
    AveragedDrift(SlowFastModel&&, PipelineOptions = {}) = delete;
    AveragedDrift(SlowFastModel&&, std::shared_ptr<DensityCache>) = delete;

    /// Drift given directly as a function (used for closed-form drifts).
    explicit AveragedDrift(std::function<std::vector<double>(std::span<const double>)> fn)
        : direct_(std::move(fn)) {}

    [[nodiscard]] std::vector<double> operator()(std::span<const double> x) const {
        if (direct_) return direct_(x);
        const auto dens = cache_->get(x);
        if (model_->regime() == Regime::One) {
            const auto chi = cell_chi(*model_, x, *dens, cache_->options().method, cache_->options().poisson);
            return average_against_mu(lambda_on_grid(*model_, x, dens->grid, &chi), *dens);
        }
        return average_against_mu(lambda_on_grid(*model_, x, dens->grid, nullptr), *dens);
    }

    /// Analytic differentiation under the integral is available in Regime 2
    /// with x-independent fast dynamics and user-supplied db/dx, dc/dx.
    [[nodiscard]] GradientMethod gradient_method() const {
        if (direct_) return GradientMethod::FiniteDifference;
        const bool analytic = model_->regime() == Regime::Two && !model_->fast_depends_on_x &&
                              model_->coef.db_dx && model_->coef.dc_dx;
        return analytic ? GradientMethod::Analytic : GradientMethod::FiniteDifference;
    }

    [[nodiscard]] const SlowFastModel* model() const noexcept { return model_; }
    [[nodiscard]] DensityCache* cache() const noexcept { return cache_.get(); }

private:
    const SlowFastModel* model_ = nullptr;
    std::shared_ptr<DensityCache> cache_;
    std::function<std::vector<double>(std::span<const double>)> direct_;
};

/// Jacobian d lambdabar_i / d x_j, row-major n x n. Central differences use
/// the step 1e-5 (1 + |x_j|).
inline std::vector<double> grad_lambda_bar(const AveragedDrift& drift, std::span<const double> x,
                                           double rel_step = 1e-5) {
    const std::size_t n = x.size();
    std::vector<double> jac(n * n, 0.0);
    if (drift.gradient_method() == GradientMethod::Analytic) {
        const auto& model = *drift.model();
        const auto dens = drift.cache()->get(x);
        const auto& grid = dens->grid;
        std::vector<std::vector<double>> cols(n * n, std::vector<double>(grid.size()));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double y[1] = {grid.node(i)};
            const auto db = model.eval(model.coef.db_dx, x, y, n * n);
            const auto dc = model.eval(model.coef.dc_dx, x, y, n * n);
            for (std::size_t k = 0; k < n * n; ++k) cols[k][i] = model.scaling.gamma * db[k] + dc[k];
        }
        for (std::size_t k = 0; k < n * n; ++k) jac[k] = dens->integrate(cols[k]);
        return jac;
    }
    std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
    for (std::size_t j = 0; j < n; ++j) {
        const double h = rel_step * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        const auto fp = drift(xp);
        const auto fm = drift(xm);
        for (std::size_t i = 0; i < n; ++i) jac[i * n + j] = (fp[i] - fm[i]) / (xp[j] - xm[j]);
        xp[j] = xm[j] = x[j];
    }
    return jac;
}

// ============================================================================
// Averaged path
// ============================================================================

struct AveragedPath {
    std::vector<double> times;                // uniform on [0, 1]
    std::vector<std::vector<double>> values;  // Xbar per node
    std::vector<std::vector<double>> slopes;  // lambdabar(Xbar) per node
    double halving_error = 0.0;               // max |X^{dt} - X^{dt/2}| at the end point
    std::string integrator = "rk4";

    [[nodiscard]] std::size_t size() const { return times.size(); }
    [[nodiscard]] std::size_t dim() const { return values.empty() ? 0 : values.front().size(); }

    /// Cubic Hermite interpolation using the drift values as node slopes.
    [[nodiscard]] std::vector<double> at(double t) const {
        const std::size_t N = times.size() - 1;
        const double dt = times[1] - times[0];
        double s = std::clamp(t, 0.0, 1.0) / dt;
        std::size_t k = std::min(static_cast<std::size_t>(s), N - 1);
        const double u = s - static_cast<double>(k);
        const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
        const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
        std::vector<double> out(dim());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = h00 * values[k][i] + h10 * dt * slopes[k][i] + h01 * values[k + 1][i] + h11 * dt * slopes[k + 1][i];
        return out;
    }
};

namespace detail {

inline std::vector<std::vector<double>> rk4_path(const AveragedDrift& drift, const std::vector<double>& x0,
                                                 std::size_t steps) {
    const std::size_t n = x0.size();
    const double dt = 1.0 / static_cast<double>(steps);
    std::vector<std::vector<double>> out{x0};
    std::vector<double> x = x0, tmp(n);
    for (std::size_t k = 0; k < steps; ++k) {
        const auto k1 = drift(x);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
        const auto k2 = drift(tmp);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
        const auto k3 = drift(tmp);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
        const auto k4 = drift(tmp);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            require(std::isfinite(x[i]) && std::abs(x[i]) <= 1e6, ErrorCode::BlowUp,
                    "averaged path left |x| <= 1e6 at t=" + fmt::num(dt * static_cast<double>(k + 1)));
        }
        out.push_back(x);
    }
    return out;
}

}  // namespace detail

/// Classical RK4 on [0, 1] with `nodes - 1` steps; the step-halving difference
/// at t = 1 is stored as the error estimate.
inline AveragedPath solve_xbar(const AveragedDrift& drift, const std::vector<double>& x0, std::size_t nodes = 1025) {
    require(nodes >= 64, ErrorCode::InvalidArgument, "averaged path needs at least 64 nodes");
    const std::size_t steps = nodes - 1;
    AveragedPath path;
    path.values = detail::rk4_path(drift, x0, steps);
    const auto fine = detail::rk4_path(drift, x0, 2 * steps);
    for (std::size_t i = 0; i < x0.size(); ++i)
        path.halving_error = std::max(path.halving_error, std::abs(path.values.back()[i] - fine.back()[i]));
    path.times.resize(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        path.times[k] = static_cast<double>(k) / static_cast<double>(steps);
        path.slopes.push_back(drift(path.values[k]));
    }
    return path;
}

inline CsvTable averaged_path_csv(const AveragedPath& path) {
    CsvTable t;
    t.add_meta("integrator", path.integrator);
    t.add_meta("halving_error", path.halving_error);
    t.columns = {"t"};
    for (std::size_t i = 0; i < path.dim(); ++i) t.columns.push_back("xbar_" + std::to_string(i + 1));
    for (std::size_t k = 0; k < path.size(); ++k) {
        std::vector<double> row{path.times[k]};
        row.insert(row.end(), path.values[k].begin(), path.values[k].end());
        t.add_row(std::move(row));
    }
    return t;
}

}  // namespace slowfast
