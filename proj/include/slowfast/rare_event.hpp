#pragma once

#include <cmath>
#include <memory>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/error.hpp"
#include "slowfast/format.hpp"
#include "slowfast/mdp_rate.hpp"
#include "slowfast/simulate.hpp"

namespace slowfast {

// ============================================================================
// Events and results
// ============================================================================

enum class EventDirection { AtLeast, AtMost };

/// Endpoint halfspace {ell . eta_1 >= a} or {ell . eta_1 <= a}.
struct EventSpec {
    VectorXd ell;
    double threshold = 0.0;
    EventDirection direction = EventDirection::AtLeast;

    void validate(std::size_t n) const {
        require(static_cast<std::size_t>(ell.size()) == n, ErrorCode::InvalidArgument, "event functional has wrong size");
        require(ell.norm() > 0.0, ErrorCode::InvalidArgument, "event functional must be nonzero");
    }
    [[nodiscard]] bool hit(std::span<const double> eta) const {
        double v = 0.0;
        for (Eigen::Index i = 0; i < ell.size(); ++i) v += ell[i] * eta[static_cast<std::size_t>(i)];
        return direction == EventDirection::AtLeast ? v >= threshold : v <= threshold;
    }
    [[nodiscard]] std::string str() const {
        std::string s;
        for (Eigen::Index i = 0; i < ell.size(); ++i) s += (i ? "," : "") + fmt::num(ell[i]);
        return "l=(" + s + ")" + (direction == EventDirection::AtLeast ? ">=" : "<=") + fmt::num(threshold);
    }
};

struct EstimatorResult {
    std::string method;  // "plain" or "is"
    double estimate = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;  // 95%
    std::size_t sample_count = 0;
    std::size_t hits = 0;
    double second_moment = 0.0;
    double relative_error = 0.0;
    double mdp_approx = 0.0;       // exp(-h^2 S*), log-asymptotic only
    double s_star = 0.0;
    double epsilon = 0.0, h = 0.0;
    bool zero_hits = false;        // CI is one-sided
    double weight_mean = 1.0;      // IS only: estimate of E[weight] = 1
    double weight_std_error = 0.0;

    [[nodiscard]] std::vector<std::pair<std::string, std::string>> to_key_value() const {
        return {{"method", method},
                {"epsilon", fmt::num(epsilon)},
                {"h", fmt::num(h)},
                {"estimate", fmt::num(estimate)},
                {"std_error", fmt::num(std_error)},
                {"ci95_lo", fmt::num(ci_lo)},
                {"ci95_hi", fmt::num(ci_hi)},
                {"sample_count", std::to_string(sample_count)},
                {"hits", std::to_string(hits)},
                {"second_moment", fmt::num(second_moment)},
                {"relative_error", fmt::num(relative_error)},
                {"s_star", fmt::num(s_star)},
                {"mdp_approx", fmt::num(mdp_approx)},
                {"zero_hits", zero_hits ? "true" : "false"},
                {"weight_mean", fmt::num(weight_mean)},
                {"weight_std_error", fmt::num(weight_std_error)}};
    }
};

/// Wilson score interval at 95%.
inline std::pair<double, double> wilson_interval(std::size_t hits, std::size_t n) {
    constexpr double z = 1.959963984540054;
    const double N = static_cast<double>(n), p = static_cast<double>(hits) / N;
    const double denom = 1.0 + z * z / N;
    const double centre = (p + z * z / (2 * N)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / N + z * z / (4 * N * N)) / denom;
    // the interval touches 0 (or 1) exactly when no (or every) sample hits
    return {hits == 0 ? 0.0 : std::max(0.0, centre - half), hits == n ? 1.0 : std::min(1.0, centre + half)};
}

// ============================================================================
// Rate of the event
// ============================================================================

/// Minimal discrete action over paths ending in the event halfspace. When the
/// zero-cost path already ends inside, S* = 0 and that path is returned.
inline MinimizerResult event_minimizer(const PathCoefficients& pc, const EventSpec& event) {
    event.validate(static_cast<std::size_t>(pc.dim()));
    auto zero = zero_cost_path(pc);
    const std::vector<double> end(zero.values.back().data(), zero.values.back().data() + zero.values.back().size());
    if (event.hit(end)) return {std::move(zero), 0.0};
    try {
        return minimize_action(pc, TerminalConstraint::hyperplane(event.ell, event.threshold));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SingularSystem) fail(ErrorCode::MinimizationFailed, e.what());
        throw;
    }
}

inline double mdp_asymptote(double s_star, double h) { return std::exp(-h * h * s_star); }

inline double mdp_asymptote(const PathCoefficients& pc, const EventSpec& event, double h) {
    return mdp_asymptote(event_minimizer(pc, event).value, h);
}

// ============================================================================
// Estimators
// ============================================================================

/// Indicator mean over uncontrolled paths with the binomial standard error
/// (paired standard error under antithetic sampling) and a Wilson interval.
inline EstimatorResult estimate_plain(const SlowFastModel& model, const SimConfig& cfg, const AveragedPath& xbar,
                                      const EventSpec& event) {
    event.validate(model.dims.n);
    const auto scales = sim_scales(model, cfg);
    const auto paths = simulate_uncontrolled(model, cfg, &xbar);
    std::vector<double> ind;
    ind.reserve(paths.size());
    for (const auto& p : paths) ind.push_back(event.hit(p.final_eta(model.dims.n)) ? 1.0 : 0.0);
    EstimatorResult r;
    r.method = "plain";
    r.epsilon = cfg.epsilon;
    r.h = scales.h;
    r.sample_count = ind.size();
    for (const double v : ind) r.hits += v > 0.0 ? 1 : 0;
    const double N = static_cast<double>(r.sample_count);
    r.estimate = static_cast<double>(r.hits) / N;
    r.second_moment = r.estimate;
    r.std_error = cfg.antithetic ? mean_estimate(ind, true).std_error : std::sqrt(r.estimate * (1 - r.estimate) / N);
    std::tie(r.ci_lo, r.ci_hi) = wilson_interval(r.hits, r.sample_count);
    r.zero_hits = r.hits == 0;
    r.relative_error = r.estimate > 0 ? r.std_error / r.estimate : std::numeric_limits<double>::infinity();
    return r;
}

/// Feedback control u(t) = (alpha1, alpha2)^T q^{-1}(Xbar_t)(psi'_t - kappa(Xbar_t, eta))
/// with the coefficients frozen at the left node of each minimizer interval.
inline FeedbackControl mdp_feedback_control(const RateIngredients& ing, const AveragedPath& xbar,
                                            const DeviationPath& psi) {
    const auto& model = ing.model();
    const std::size_t N = psi.size() - 1;
    const double dt = 1.0 / static_cast<double>(N);
    struct Node {
        std::shared_ptr<const PointIngredients> point;
        VectorXd psi_dot;
    };
    auto nodes = std::make_shared<std::vector<Node>>();
    for (std::size_t j = 0; j < N; ++j)
        nodes->push_back({ing.at(xbar.at(psi.times[j])), (psi.values[j + 1] - psi.values[j]) / dt});
    const SlowFastModel* mp = &model;
    return [nodes, mp, N](std::size_t, double t, std::span<const double>, std::span<const double> y,
                          std::span<const double> eta, std::span<double> u) {
        const auto& model = *mp;
        const std::size_t n = model.dims.n, m = model.dims.m;
        const auto j = std::min(static_cast<std::size_t>(t * static_cast<double>(N)), N - 1);
        const auto& node = (*nodes)[j];
        const auto& p = *node.point;
        const VectorXd e = Eigen::Map<const VectorXd>(eta.data(), static_cast<Eigen::Index>(n));
        const VectorXd w = p.q.solve(node.psi_dot - p.kappa(e));
        thread_local std::vector<double> sig, t1, t2;
        sig.resize(n * m);
        t1.resize(m);
        t2.resize(m);
        model.coef.sigma(p.x, y, sig);
        model.coef.tau1(p.x, y, t1);
        model.coef.tau2(p.x, y, t2);
        const CorrectorSolution& corr = p.regime == Regime::One ? *p.chi : p.phi;
        for (std::size_t k = 0; k < 2 * m; ++k) u[k] = 0.0;
        for (std::size_t l = 0; l < n; ++l) {
            const double du = corr.dy_at(l, y[0]);
            for (std::size_t k = 0; k < m; ++k) {
                u[k] += (sig[l * m + k] + du * t1[k]) * w[static_cast<Eigen::Index>(l)];
                u[m + k] += du * t2[k] * w[static_cast<Eigen::Index>(l)];
            }
        }
    };
}

/// Importance sampling with the feedback control built from the event's
/// action minimizer. Estimator: mean of 1{event} exp(log weight).
inline EstimatorResult estimate_is(const SlowFastModel& model, const SimConfig& cfg, const RateIngredients& ing,
                                   const AveragedPath& xbar, const EventSpec& event, std::size_t time_steps = 256) {
    event.validate(model.dims.n);
    const auto scales = sim_scales(model, cfg);
    const auto pc = path_coefficients(ing, xbar, time_steps);
    const auto mini = event_minimizer(pc, event);
    const auto control = mdp_feedback_control(ing, xbar, mini.path);
    const auto paths = simulate_controlled(model, cfg, xbar, control);
    std::vector<double> vals, weights;
    vals.reserve(paths.size());
    weights.reserve(paths.size());
    EstimatorResult r;
    r.method = "is";
    r.epsilon = cfg.epsilon;
    r.h = scales.h;
    r.s_star = mini.value;
    r.mdp_approx = mdp_asymptote(mini.value, scales.h);
    for (const auto& p : paths) {
        require(p.log_weight <= 700.0, ErrorCode::WeightOverflow, "log weight " + fmt::num(p.log_weight));
        const double w = std::exp(p.log_weight);
        const bool hit = event.hit(p.final_eta(model.dims.n));
        r.hits += hit ? 1 : 0;
        vals.push_back(hit ? w : 0.0);
        weights.push_back(w);
    }
    const auto est = mean_estimate(vals, cfg.antithetic);
    const auto west = mean_estimate(weights, cfg.antithetic);
    CompensatedSum sq;
    for (const double v : vals) sq.add(v * v);
    r.sample_count = vals.size();
    r.estimate = est.mean;
    r.std_error = est.std_error;
    r.second_moment = sq.value() / static_cast<double>(vals.size());
    r.ci_lo = std::max(0.0, r.estimate - 1.959963984540054 * r.std_error);
    r.ci_hi = std::min(1.0, r.estimate + 1.959963984540054 * r.std_error);
    r.zero_hits = r.hits == 0;
    r.relative_error = r.estimate > 0 ? r.std_error / r.estimate : std::numeric_limits<double>::infinity();
    r.weight_mean = west.mean;
    r.weight_std_error = west.std_error;
    return r;
}

}  // namespace slowfast
