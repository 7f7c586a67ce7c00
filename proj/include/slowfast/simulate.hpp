#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/csv.hpp"
#include "slowfast/error.hpp"
#include "slowfast/format.hpp"
#include "slowfast/mdp_rate.hpp"
#include "slowfast/model.hpp"
#include "slowfast/rng.hpp"

namespace slowfast {

// ============================================================================
// Configuration
// ============================================================================

struct SimConfig {
    double epsilon = 0.01;
    std::size_t substeps = 20;          // M: steps per fast time unit delta^2/eps
    double dt_cap = 1.0 / 1024.0;
    std::uint64_t seed = 1;
    std::size_t path_count = 1000;
    std::size_t record_stride = 0;      // 0 records only t = 0 and t = 1
    unsigned workers = 0;               // 0 uses the hardware concurrency
    bool antithetic = false;            // paths 2k and 2k+1 use opposite noise
    std::optional<double> delta;        // overrides the scaling family
    std::optional<double> h;            // overrides the scaling family
    double y_power = 0.0;               // > 0 accumulates int_0^1 |Y_s|^{y_power} ds
};

/// eps, delta(eps), h(eps) and the uniform step on [0, 1].
struct SimScales {
    double epsilon = 0.0;
    double delta = 0.0;
    double h = 1.0;
    double dt = 0.0;
    std::size_t steps = 0;
    double stiffness = 0.0;  // dt times the fast drift rate at y0
    [[nodiscard]] bool stiffness_ok() const { return stiffness < 0.5; }
};

/// dt = (delta^2/eps)/M capped at dt_cap, then shrunk so that 1/dt is an integer.
inline SimScales sim_scales(const SlowFastModel& model, const SimConfig& cfg) {
    require(cfg.epsilon > 0.0 && cfg.epsilon < 1.0, ErrorCode::InvalidArgument, "epsilon must lie in (0, 1)");
    require(cfg.substeps >= 20, ErrorCode::InvalidArgument, "at least 20 substeps per fast time unit");
    require(cfg.path_count >= 1, ErrorCode::InvalidArgument, "path_count must be positive");
    SimScales s;
    s.epsilon = cfg.epsilon;
    const auto& fam = model.scaling.family;
    require(cfg.delta.has_value() || fam.has_value(), ErrorCode::InvalidArgument, "delta(eps) needs a scaling family");
    require(cfg.h.has_value() || fam.has_value(), ErrorCode::InvalidArgument, "h(eps) needs a scaling family");
    s.delta = cfg.delta ? *cfg.delta : fam->delta(cfg.epsilon);
    s.h = cfg.h ? *cfg.h : fam->h(cfg.epsilon);
    require(s.delta > 0.0 && s.h > 0.0, ErrorCode::InvalidArgument, "delta and h must be positive");
    const double fast = s.delta * s.delta / cfg.epsilon;
    const double dt = std::min(fast / static_cast<double>(cfg.substeps), cfg.dt_cap);
    s.steps = static_cast<std::size_t>(std::ceil(1.0 / dt - 1e-9));
    require(s.steps < (std::size_t{1} << 32), ErrorCode::InvalidArgument, "too many steps");
    s.dt = 1.0 / static_cast<double>(s.steps);
    // Fast drift (1/delta)(eps/delta) f has rate (eps/delta^2)|df/dy|.
    if (model.dims.d == 1) {
        const double y = model.y0[0], dy = 1e-4 * (1.0 + std::abs(y));
        const double yp[1] = {y + dy}, ym[1] = {y - dy};
        const double slope = (model.f(model.x0, yp)[0] - model.f(model.x0, ym)[0]) / (2 * dy);
        s.stiffness = s.dt * cfg.epsilon / (s.delta * s.delta) * std::abs(slope);
    }
    return s;
}

// ============================================================================
// Paths
// ============================================================================

struct PathSample {
    std::vector<double> times;  // recorded times
    std::vector<double> X;      // n per recorded node
    std::vector<double> Y;      // d per recorded node
    std::vector<double> eta;    // n per recorded node; empty without an averaged path
    std::vector<double> u;      // 2m per recorded node; controlled runs only
    double log_weight = 0.0;    // Girsanov log dP/dQ
    double y_moment = 0.0;      // int_0^1 |Y|^{y_power} ds when requested
    std::size_t negative_fast_steps = 0;  // steps with a negative raw fast state (positive models)

    [[nodiscard]] std::span<const double> final_x(std::size_t n) const { return {X.data() + X.size() - n, n}; }
    [[nodiscard]] std::span<const double> final_eta(std::size_t n) const {
        return {eta.data() + eta.size() - n, n};
    }
};

/// u(step, t, X, Y, eta) -> (u1, u2) in R^{2m}.
using FeedbackControl = std::function<void(std::size_t step, double t, std::span<const double> x,
                                           std::span<const double> y, std::span<const double> eta,
                                           std::span<double> u)>;

namespace detail {

/// Xbar on the simulation grid, by Hermite interpolation of the averaged path.
inline std::vector<double> xbar_on_steps(const AveragedPath& xbar, std::size_t steps) {
    const std::size_t n = xbar.dim();
    std::vector<double> out((steps + 1) * n);
    for (std::size_t k = 0; k <= steps; ++k) {
        const auto v = xbar.at(static_cast<double>(k) / static_cast<double>(steps));
        std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(k * n));
    }
    return out;
}

struct SimContext {
    const SlowFastModel* model;
    const SimConfig* cfg;
    SimScales scales;
    const std::vector<double>* xbar;  // null when eta is not tracked
    const FeedbackControl* control;   // null for the uncontrolled system
};

inline PathSample simulate_one(const SimContext& ctx, std::size_t path) {
    const auto& model = *ctx.model;
    const auto& cfg = *ctx.cfg;
    const auto& s = ctx.scales;
    const std::size_t n = model.dims.n, d = model.dims.d, m = model.dims.m;
    const std::uint64_t stream = cfg.antithetic ? path / 2 : path;
    const double sign = (cfg.antithetic && path % 2 == 1) ? -1.0 : 1.0;
    const NormalStream rng(cfg.seed, stream);

    const double eps = s.epsilon, delta = s.delta, h = s.h, dt = s.dt, sqdt = std::sqrt(dt);
    const double sqeps = std::sqrt(eps), eta_scale = 1.0 / (sqeps * h);
    std::vector<double> x = model.x0, y = model.y0, yc(d), eta(n, 0.0);
    std::vector<double> b(n), c(n), sig(n * m), f(d), g(d), t1(d * m), t2(d * m);
    std::vector<double> z(2 * m), dW(m), dB(m), u(2 * m, 0.0), xn(n), yn(d);

    PathSample out;
    const std::size_t stride = cfg.record_stride == 0 ? s.steps : cfg.record_stride;
    auto record = [&](std::size_t k) {
        out.times.push_back(static_cast<double>(k) * dt);
        out.X.insert(out.X.end(), x.begin(), x.end());
        out.Y.insert(out.Y.end(), y.begin(), y.end());
        if (ctx.xbar) out.eta.insert(out.eta.end(), eta.begin(), eta.end());
        if (ctx.control) out.u.insert(out.u.end(), u.begin(), u.end());
    };
    auto update_eta = [&](std::size_t k) {
        if (!ctx.xbar) return;
        for (std::size_t i = 0; i < n; ++i) eta[i] = (x[i] - (*ctx.xbar)[k * n + i]) * eta_scale;
    };

    update_eta(0);
    for (std::size_t k = 0; k < s.steps; ++k) {
        for (std::size_t i = 0; i < d; ++i) yc[i] = model.positive_fast ? std::max(y[i], 0.0) : y[i];
        if (ctx.control) (*ctx.control)(k, static_cast<double>(k) * dt, x, yc, eta, u);
        if (k % stride == 0) record(k);
        rng.fill(k, z);
        for (std::size_t j = 0; j < m; ++j) {
            dW[j] = sign * sqdt * z[j];
            dB[j] = sign * sqdt * z[m + j];
        }
        model.coef.b(x, yc, b);
        model.coef.c(x, yc, c);
        model.coef.sigma(x, yc, sig);
        model.coef.f(x, yc, f);
        model.coef.g(x, yc, g);
        model.coef.tau1(x, yc, t1);
        model.coef.tau2(x, yc, t2);

        for (std::size_t i = 0; i < n; ++i) {
            double drift = (eps / delta) * b[i] + c[i];
            double noise = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                noise += sig[i * m + j] * dW[j];
                if (ctx.control) drift += sqeps * h * sig[i * m + j] * u[j];
            }
            xn[i] = x[i] + drift * dt + sqeps * noise;
        }
        for (std::size_t i = 0; i < d; ++i) {
            double drift = ((eps / delta) * f[i] + g[i]) / delta;
            double noise = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                noise += t1[i * m + j] * dW[j] + t2[i * m + j] * dB[j];
                if (ctx.control) drift += sqeps * h / delta * (t1[i * m + j] * u[j] + t2[i * m + j] * u[m + j]);
            }
            yn[i] = y[i] + drift * dt + sqeps / delta * noise;
        }
        if (ctx.control) {
            double dot = 0.0, sq = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                dot += u[j] * dW[j] + u[m + j] * dB[j];
                sq += u[j] * u[j] + u[m + j] * u[m + j];
            }
            out.log_weight += -h * dot - 0.5 * h * h * sq * dt;
        }
        if (cfg.y_power > 0.0) {
            double r2 = 0.0;
            for (const double v : y) r2 += v * v;
            out.y_moment += std::pow(r2, 0.5 * cfg.y_power) * dt;
        }
        x.swap(xn);
        y.swap(yn);
        for (std::size_t i = 0; i < d; ++i) {
            if (!(std::abs(y[i]) <= 1e8))
                fail(ErrorCode::NumericalBlowUp, "|Y| exceeded 1e8 on path " + std::to_string(path) + " at step " +
                                                     std::to_string(k + 1) + " (t=" + fmt::num((k + 1) * dt) + ")");
            if (model.positive_fast && y[i] < 0.0) ++out.negative_fast_steps;
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(x[i]))
                fail(ErrorCode::NumericalBlowUp, "X is not finite on path " + std::to_string(path) + " at step " +
                                                     std::to_string(k + 1));
        update_eta(k + 1);
    }
    if (ctx.control) {
        for (std::size_t i = 0; i < d; ++i) yc[i] = model.positive_fast ? std::max(y[i], 0.0) : y[i];
        (*ctx.control)(s.steps, 1.0, x, yc, eta, u);
    }
    record(s.steps);
    return out;
}

/// Runs `task(path)` for every path on a fixed worker partition; results are
/// stored by path index. The lowest-index failure is rethrown.
template <class Task>
auto run_paths(std::size_t count, unsigned workers, Task task) {
    using R = decltype(task(std::size_t{0}));
    std::vector<R> results(count);
    std::vector<std::exception_ptr> errors(count);
    unsigned w = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
    w = static_cast<unsigned>(std::min<std::size_t>(w, count));
    auto body = [&](unsigned id) {
        for (std::size_t p = id; p < count; p += w) {
            try {
                results[p] = task(p);
            } catch (...) {
                errors[p] = std::current_exception();
                return;
            }
        }
    };
    if (w <= 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned id = 0; id < w; ++id) pool.emplace_back(body, id);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace detail

/// Euler-Maruyama for the slow-fast system; W drives X and Y jointly, B only Y.
/// `xbar` (optional) enables the deviation process eta.
inline std::vector<PathSample> simulate_uncontrolled(const SlowFastModel& model, const SimConfig& cfg,
                                                     const AveragedPath* xbar = nullptr) {
    model.validate();
    const auto scales = sim_scales(model, cfg);
    std::vector<double> xb;
    if (xbar) xb = detail::xbar_on_steps(*xbar, scales.steps);
    const detail::SimContext ctx{&model, &cfg, scales, xbar ? &xb : nullptr, nullptr};
    return detail::run_paths(cfg.path_count, cfg.workers, [&](std::size_t p) { return detail::simulate_one(ctx, p); });
}

/// Controlled system: sqrt(eps) h sigma u1 is added to the slow drift and
/// (sqrt(eps) h / delta)(tau1 u1 + tau2 u2) to the fast drift. The log weight
/// -h sum u . dW - (h^2/2) sum |u|^2 dt converts back to the nominal measure.
inline std::vector<PathSample> simulate_controlled(const SlowFastModel& model, const SimConfig& cfg,
                                                   const AveragedPath& xbar, const FeedbackControl& control) {
    model.validate();
    const auto scales = sim_scales(model, cfg);
    const auto xb = detail::xbar_on_steps(xbar, scales.steps);
    const detail::SimContext ctx{&model, &cfg, scales, &xb, &control};
    return detail::run_paths(cfg.path_count, cfg.workers, [&](std::size_t p) { return detail::simulate_one(ctx, p); });
}

inline FeedbackControl constant_control(std::vector<double> u) {
    return [u = std::move(u)](std::size_t, double, std::span<const double>, std::span<const double>,
                              std::span<const double>, std::span<double> out) {
        std::copy(u.begin(), u.end(), out.begin());
    };
}

inline CsvTable paths_csv(const std::vector<PathSample>& paths, std::size_t n, std::size_t d) {
    CsvTable t;
    t.columns = {"path", "t"};
    for (std::size_t i = 0; i < n; ++i) t.columns.push_back("x_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < d; ++i) t.columns.push_back("y_" + std::to_string(i + 1));
    const bool has_eta = !paths.empty() && !paths.front().eta.empty();
    if (has_eta)
        for (std::size_t i = 0; i < n; ++i) t.columns.push_back("eta_" + std::to_string(i + 1));
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& s = paths[p];
        for (std::size_t k = 0; k < s.times.size(); ++k) {
            std::vector<double> row{static_cast<double>(p), s.times[k]};
            for (std::size_t i = 0; i < n; ++i) row.push_back(s.X[k * n + i]);
            for (std::size_t i = 0; i < d; ++i) row.push_back(s.Y[k * d + i]);
            if (has_eta)
                for (std::size_t i = 0; i < n; ++i) row.push_back(s.eta[k * n + i]);
            t.add_row(std::move(row));
        }
    }
    return t;
}

// ============================================================================
// Summary statistics
// ============================================================================

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double variance = 0.0;  // sample variance of the per-unit values
    std::size_t count = 0;
};

/// Mean and standard error of values in index order. With `paired`, adjacent
/// entries (2k, 2k+1) are averaged first and treated as one sample.
inline MeanEstimate mean_estimate(std::span<const double> v, bool paired = false) {
    std::vector<double> units;
    if (paired) {
        require(v.size() % 2 == 0, ErrorCode::InvalidArgument, "paired estimate needs an even count");
        for (std::size_t i = 0; i < v.size(); i += 2) units.push_back(0.5 * (v[i] + v[i + 1]));
    } else {
        units.assign(v.begin(), v.end());
    }
    MeanEstimate e;
    e.count = units.size();
    CompensatedSum s;
    for (const double u : units) s.add(u);
    e.mean = s.value() / static_cast<double>(e.count);
    CompensatedSum q;
    for (const double u : units) q.add((u - e.mean) * (u - e.mean));
    e.variance = e.count > 1 ? q.value() / static_cast<double>(e.count - 1) : 0.0;
    e.std_error = std::sqrt(e.variance / static_cast<double>(e.count));
    return e;
}

// ============================================================================
// Controlled limit check
// ============================================================================

struct LimitCheckRow {
    double epsilon = 0.0;
    double mean_eta = 0.0;
    double std_error = 0.0;
    double gap = 0.0;
};

struct LimitCheckReport {
    std::vector<double> psi_times;
    std::vector<double> psi;  // first component of the limit path
    double psi_final = 0.0;
    std::vector<LimitCheckRow> rows;
    bool monotone = false;
    bool final_within = false;
    [[nodiscard]] bool passed() const { return monotone && final_within; }
};

/// psi' = int theta(Xbar_t, psi, y, u1, u2) mu(dy), psi_0 = 0, RK4 on the
/// uniform grid with linearly interpolated midpoint coefficients. theta is
/// affine in eta, so the average is A(Xbar_t) psi + cbar(t).
inline std::pair<std::vector<double>, std::vector<VectorXd>> viable_limit_path(const RateIngredients& ing,
                                                                               const AveragedPath& xbar,
                                                                               const VectorXd& u1, const VectorXd& u2,
                                                                               std::size_t steps = 256) {
    const auto& model = ing.model();
    const auto n = static_cast<Eigen::Index>(model.dims.n);
    const auto times = uniform_times(steps);
    std::vector<MatrixXd> A;
    std::vector<VectorXd> cbar;
    const VectorXd zero = VectorXd::Zero(n);
    for (const double t : times) {
        const auto p = ing.at(xbar.at(t));
        const auto& dens = *p->density;
        VectorXd acc = VectorXd::Zero(n);
        for (std::size_t i = 0; i < dens.grid.size(); ++i) {
            const double w = dens.weights[i] * dens.values[i];
            if (w == 0.0) continue;
            acc += w * theta_drift(model, *p, zero, dens.grid.node(i), u1, u2);
        }
        A.push_back(p->kappa.A);
        cbar.push_back(acc);
    }
    const double dt = 1.0 / static_cast<double>(steps);
    std::vector<VectorXd> psi{zero};
    VectorXd v = zero;
    for (std::size_t k = 0; k < steps; ++k) {
        const MatrixXd Am = 0.5 * (A[k] + A[k + 1]);
        const VectorXd cm = 0.5 * (cbar[k] + cbar[k + 1]);
        const VectorXd k1 = A[k] * v + cbar[k];
        const VectorXd k2 = Am * (v + 0.5 * dt * k1) + cm;
        const VectorXd k3 = Am * (v + 0.5 * dt * k2) + cm;
        const VectorXd k4 = A[k + 1] * (v + dt * k3) + cbar[k + 1];
        v += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        psi.push_back(v);
    }
    return {times, psi};
}

/// Simulates the controlled system with constant u for each epsilon (listed
/// from largest to smallest) and compares mean eta_1(1) with psi_1(1).
inline LimitCheckReport controlled_limit_check(const SlowFastModel& model, const RateIngredients& ing,
                                               const AveragedPath& xbar, const std::vector<double>& u,
                                               const std::vector<double>& epsilons, SimConfig base) {
    const std::size_t m = model.dims.m;
    require(u.size() == 2 * m, ErrorCode::InvalidArgument, "constant control needs 2m entries");
    require(!epsilons.empty(), ErrorCode::InvalidArgument, "no epsilons");
    const VectorXd u1 = Eigen::Map<const VectorXd>(u.data(), static_cast<Eigen::Index>(m));
    const VectorXd u2 = Eigen::Map<const VectorXd>(u.data() + m, static_cast<Eigen::Index>(m));
    const auto [times, psi] = viable_limit_path(ing, xbar, u1, u2);
    LimitCheckReport rep;
    rep.psi_times = times;
    for (const auto& v : psi) rep.psi.push_back(v[0]);
    rep.psi_final = rep.psi.back();
    const auto control = constant_control(u);
    for (const double eps : epsilons) {
        SimConfig cfg = base;
        cfg.epsilon = eps;
        const auto paths = simulate_controlled(model, cfg, xbar, control);
        std::vector<double> etas;
        for (const auto& p : paths) etas.push_back(p.final_eta(model.dims.n)[0]);
        const auto est = mean_estimate(etas, cfg.antithetic);
        rep.rows.push_back({eps, est.mean, est.std_error, std::abs(est.mean - rep.psi_final)});
    }
    rep.monotone = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) rep.monotone = rep.monotone && rep.rows[i].gap < rep.rows[i - 1].gap;
    const auto& last = rep.rows.back();
    rep.final_within = last.gap < std::max(3.0 * last.std_error, 0.05 * (1.0 + std::abs(rep.psi_final)));
    return rep;
}

// ============================================================================
// Fast-process moment diagnostic
// ============================================================================

struct MomentRow {
    double epsilon = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    bool blew_up = false;
};

struct MomentReport {
    std::vector<MomentRow> rows;
    double log_slope = 0.0;  // d log(estimate) / d log(eps)
    bool flagged = false;
};

inline constexpr double kMomentSlopeGate = -0.1;

/// Estimates E int_0^1 |Y_s|^{power} ds per epsilon. Flags growth as eps
/// decreases: a blow-up, or a log-log slope below kMomentSlopeGate with the
/// smallest-eps estimate above the largest-eps one by more than 3 combined
/// standard errors. The slope gate ignores the O(eps) start-up bias of a fast
/// process started away from stationarity, which stays bounded.
inline MomentReport y_moment_diagnostic(const SlowFastModel& model, SimConfig base, const std::vector<double>& epsilons,
                                        double power) {
    require(power > 0.0, ErrorCode::InvalidArgument, "moment power must be positive");
    require(epsilons.size() >= 2, ErrorCode::InvalidArgument, "need at least two epsilons");
    MomentReport rep;
    base.y_power = power;
    for (const double eps : epsilons) {
        SimConfig cfg = base;
        cfg.epsilon = eps;
        MomentRow row{eps, 0.0, 0.0, false};
        try {
            const auto paths = simulate_uncontrolled(model, cfg);
            std::vector<double> v;
            for (const auto& p : paths) v.push_back(p.y_moment);
            const auto est = mean_estimate(v, cfg.antithetic);
            row.estimate = est.mean;
            row.std_error = est.std_error;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NumericalBlowUp) throw;
            row.blew_up = true;
            row.estimate = std::numeric_limits<double>::infinity();
        }
        rep.rows.push_back(row);
    }
    bool any_blowup = false;
    for (const auto& r : rep.rows) any_blowup = any_blowup || r.blew_up;
    if (any_blowup) {
        rep.flagged = true;
        rep.log_slope = -std::numeric_limits<double>::infinity();
        return rep;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(rep.rows.size());
    for (const auto& r : rep.rows) {
        const double lx = std::log(r.epsilon), ly = std::log(std::max(r.estimate, 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    rep.log_slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    auto smallest = rep.rows.front(), largest = rep.rows.front();
    for (const auto& r : rep.rows) {
        if (r.epsilon < smallest.epsilon) smallest = r;
        if (r.epsilon > largest.epsilon) largest = r;
    }
    const double se = std::hypot(smallest.std_error, largest.std_error);
    rep.flagged = rep.log_slope < kMomentSlopeGate && smallest.estimate - largest.estimate > 3.0 * se;
    return rep;
}

}  // namespace slowfast
