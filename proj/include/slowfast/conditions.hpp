#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "slowfast/error.hpp"
#include "slowfast/format.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

// ============================================================================
// Condition report
// ============================================================================

enum class Verdict { Pass, Fail, Unchecked };

constexpr std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Unchecked: return "unchecked";
    }
    return "unchecked";
}

struct ConditionEntry {
    std::string name;
    Verdict verdict = Verdict::Unchecked;
    std::string basis;    // "exact", "scan-based", "declared"
    std::string witness;  // non-empty whenever verdict == Fail
};

struct ConditionReport {
    std::vector<ConditionEntry> entries;

    void add(std::string name, Verdict v, std::string basis, std::string witness = {}) {
        if (v == Verdict::Fail && witness.empty()) witness = "unspecified";
        entries.push_back({std::move(name), v, std::move(basis), std::move(witness)});
    }

    void merge(const ConditionReport& other) {
        entries.insert(entries.end(), other.entries.begin(), other.entries.end());
    }

    [[nodiscard]] bool passed() const {
        return std::none_of(entries.begin(), entries.end(),
                            [](const ConditionEntry& e) { return e.verdict == Verdict::Fail; });
    }

    [[nodiscard]] Verdict verdict(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e.verdict;
        return Verdict::Unchecked;
    }

    /// One `key = value` line per field; keys are `<condition>.<field>`.
    [[nodiscard]] std::string to_key_value() const {
        std::ostringstream os;
        os << "overall = " << (passed() ? "pass" : "fail") << '\n';
        for (const auto& e : entries) {
            os << e.name << ".verdict = " << to_string(e.verdict) << '\n';
            os << e.name << ".basis = " << e.basis << '\n';
            if (!e.witness.empty()) os << e.name << ".witness = " << e.witness << '\n';
        }
        return os.str();
    }
};

// ============================================================================
// Tightness exponent inequalities (exact)
// ============================================================================

using Rational = boost::rational<std::int64_t>;

/// Exact rational for a decimal input: the best continued-fraction
/// approximation with denominator <= 10^9 that reproduces the double.
inline Rational to_rational(double v) {
    require(std::isfinite(v), ErrorCode::InvalidArgument, "non-finite exponent");
    const bool neg = v < 0;
    double x = std::abs(v);
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double rest = x;
    for (int iter = 0; iter < 64; ++iter) {
        const double a = std::floor(rest);
        const auto ai = static_cast<std::int64_t>(a);
        const std::int64_t p2 = ai * p1 + p0;
        const std::int64_t q2 = ai * q1 + q0;
        if (q2 > 1000000000) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        if (static_cast<double>(p1) / static_cast<double>(q1) == x) break;
        const double frac = rest - a;
        if (frac <= 0.0) break;
        rest = 1.0 / frac;
    }
    Rational r(p1, q1);
    return neg ? -r : r;
}

inline Rational positive_part(const Rational& r) { return r >= 0 ? r : Rational(0); }

inline std::string rational_text(const Rational& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

/// Both max-inequalities of the tightness condition for the declared regime.
inline ConditionReport check_tightness(const GrowthErgodicityParams& p, const RegimeScaling& regime) {
    require(p.q_b >= 0 && p.q_c >= 0 && p.q_sigma >= 0 && p.r >= 0, ErrorCode::InvalidArgument,
            "exponents must be >= 0");
    const Rational qb = to_rational(p.q_b), qc = to_rational(p.q_c), qs = to_rational(p.q_sigma),
                   r = to_rational(p.r);
    const Rational one(1);
    const Rational qbc = std::max(qb, qc);
    const Rational qF = std::max({qb, qc, positive_part(qb + one - r)});
    const Rational base = regime.regime == Regime::One ? qF : qbc;

    const Rational t1 = positive_part(base + one - r);
    const Rational t2 = positive_part(base + Rational(2) * (one - r));
    const Rational t3 = positive_part(base + Rational(3) * (one - r));
    const Rational first = std::max({t1 + qbc, t2 + qbc, t1 + Rational(2) * qs, t2 + Rational(2) * qs,
                                     t3 + Rational(2) * qs});
    const Rational second = std::max({base, qs, t1});

    ConditionReport rep;
    const std::string tag = regime.regime == Regime::One ? "regime1" : "regime2";
    if (first <= r) {
        rep.add("tightness.first_group", Verdict::Pass, "exact");
    } else {
        rep.add("tightness.first_group", Verdict::Fail, "exact",
                tag + ": max=" + rational_text(first) + " > r=" + rational_text(r));
    }
    if (second < r) {
        rep.add("tightness.second_group", Verdict::Pass, "exact");
    } else {
        rep.add("tightness.second_group", Verdict::Fail, "exact",
                tag + ": max=" + rational_text(second) + " >= r=" + rational_text(r));
    }
    return rep;
}

// ============================================================================
// Numerical scans
// ============================================================================

/// Radial probe directions in R^d: coordinate axes and the main diagonals.
inline std::vector<std::vector<double>> probe_directions(std::size_t d, bool positive_only) {
    std::vector<std::vector<double>> dirs;
    for (std::size_t i = 0; i < d; ++i) {
        std::vector<double> e(d, 0.0);
        e[i] = 1.0;
        dirs.push_back(e);
        if (!positive_only) {
            e[i] = -1.0;
            dirs.push_back(e);
        }
    }
    if (d > 1) {
        std::vector<double> diag(d, 1.0 / std::sqrt(static_cast<double>(d)));
        dirs.push_back(diag);
        if (!positive_only) {
            for (double& v : diag) v = -v;
            dirs.push_back(diag);
        }
    }
    return dirs;
}

/// Scans (effective fast drift) . y <= -Gamma |y|^{r+1} on R < |y| <= y_radius.
inline ConditionReport check_recurrence_scan(const SlowFastModel& model, double y_radius,
                                             const std::vector<std::vector<double>>& x_probes,
                                             std::size_t grid_points = 200) {
    require(!x_probes.empty(), ErrorCode::EmptyProbeSet, "no x probes supplied");
    ConditionReport rep;
    if (model.fast_space.kind == FastSpaceKind::Torus) {
        rep.add("recurrence", Verdict::Pass, "not-required-on-torus");
        return rep;
    }
    const auto& p = model.params;
    require(y_radius > p.R_rec, ErrorCode::InvalidArgument, "y_radius must exceed the declared R");
    require(grid_points >= 2, ErrorCode::InvalidArgument, "need at least 2 radial points");
    const bool half = model.fast_space.kind == FastSpaceKind::HalfLine;
    const auto dirs = probe_directions(model.dims.d, half);
    for (const auto& x : x_probes) {
        require(x.size() == model.dims.n, ErrorCode::InvalidArgument, "x probe has wrong dimension");
        for (std::size_t k = 1; k <= grid_points; ++k) {
            const double rad = p.R_rec + (y_radius - p.R_rec) * static_cast<double>(k) / static_cast<double>(grid_points);
            for (const auto& dir : dirs) {
                std::vector<double> y(dir.size());
                for (std::size_t i = 0; i < y.size(); ++i) y[i] = rad * dir[i];
                const auto drift = effective_fast_drift(model, x, y);
                double dot = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) dot += drift[i] * y[i];
                const double bound = -p.Gamma * std::pow(rad, p.r + 1.0);
                if (dot > bound) {
                    std::ostringstream w;
                    w << "x=" << fmt::join(x) << " y=" << fmt::join(y) << " drift.y=" << fmt::num(dot)
                      << " bound=" << fmt::num(bound);
                    rep.add("recurrence", Verdict::Fail, "scan-based", w.str());
                    return rep;
                }
            }
        }
    }
    rep.add("recurrence", Verdict::Pass, "scan-based");
    return rep;
}

struct ScanBox {
    std::vector<double> x_lo, x_hi;  // slow-variable box
    double y_radius = 50.0;          // growth is examined for 1 <= |y| <= y_radius
    std::size_t x_points = 5;        // per slow coordinate
    std::size_t y_points = 60;       // geometric radial grid
};

namespace detail {

/// Least-squares slope of log(envelope) against log(rho), rho >= 1.
inline double loglog_slope(const std::vector<double>& rho, const std::vector<double>& envelope) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double lx = std::log(rho[i]);
        const double ly = std::log(std::max(envelope[i], 1e-300));
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double den = k * sxx - sx * sx;
    return den > 0 ? (k * sxy - sx * sy) / den : 0.0;
}

inline std::vector<std::vector<double>> box_points(const ScanBox& box) {
    const std::size_t n = box.x_lo.size();
    std::vector<std::vector<double>> pts{std::vector<double>{}};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::vector<double>> next;
        for (const auto& base : pts)
            for (std::size_t k = 0; k < box.x_points; ++k) {
                auto p = base;
                const double t = box.x_points == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(box.x_points - 1);
                p.push_back(box.x_lo[i] + t * (box.x_hi[i] - box.x_lo[i]));
                next.push_back(std::move(p));
            }
        pts = std::move(next);
    }
    return pts;
}

}  // namespace detail

/// Empirical growth exponents in |y| of |b|, |c|, ||sigma|| and of the
/// x-gradients of b, c, compared with the declared exponents (+0.1 slack).
inline ConditionReport check_growth_scan(const SlowFastModel& model, const ScanBox& box) {
    const std::size_t n = model.dims.n;
    require(box.x_lo.size() == n && box.x_hi.size() == n, ErrorCode::InvalidArgument, "box has wrong dimension");
    require(box.y_radius > 1.0 && box.y_points >= 4 && box.x_points >= 1, ErrorCode::DegenerateScan,
            "scan box collapses");
    for (std::size_t i = 0; i < n; ++i)
        require(box.x_hi[i] >= box.x_lo[i], ErrorCode::DegenerateScan, "scan box has empty x-range");

    const bool half = model.fast_space.kind == FastSpaceKind::HalfLine;
    const bool torus = model.fast_space.kind == FastSpaceKind::Torus;
    ConditionReport rep;
    const auto xs = detail::box_points(box);
    const auto dirs = probe_directions(model.dims.d, half);
    std::vector<double> rho(box.y_points);
    for (std::size_t k = 0; k < box.y_points; ++k)
        rho[k] = std::exp(std::log(box.y_radius) * static_cast<double>(k) / static_cast<double>(box.y_points - 1));

    auto norm_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    };
    auto grad_norm = [&](const CoefficientFn& fn, const CoefficientFn& analytic, const std::vector<double>& x,
                         const std::vector<double>& y) {
        if (analytic) return norm_of(model.eval(analytic, x, y, n * n));
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double hstep = 1e-5 * (1.0 + std::abs(x[j]));
            auto xp = x, xm = x;
            xp[j] += hstep;
            xm[j] -= hstep;
            const auto fp = model.eval(fn, xp, y, n);
            const auto fm = model.eval(fn, xm, y, n);
            for (std::size_t i = 0; i < n; ++i) {
                const double dv = (fp[i] - fm[i]) / (2 * hstep);
                s += dv * dv;
            }
        }
        return std::sqrt(s);
    };

    struct Item {
        std::string name;
        double declared;
        std::function<double(const std::vector<double>&, const std::vector<double>&)> measure;
    };
    const std::vector<Item> items = {
        {"growth.b", model.params.q_b, [&](const auto& x, const auto& y) { return norm_of(model.b(x, y)); }},
        {"growth.grad_b", model.params.q_b,
         [&](const auto& x, const auto& y) { return grad_norm(model.coef.b, model.coef.db_dx, x, y); }},
        {"growth.c", model.params.q_c, [&](const auto& x, const auto& y) { return norm_of(model.c(x, y)); }},
        {"growth.grad_c", model.params.q_c,
         [&](const auto& x, const auto& y) { return grad_norm(model.coef.c, model.coef.dc_dx, x, y); }},
        {"growth.sigma", model.params.q_sigma, [&](const auto& x, const auto& y) { return norm_of(model.sigma(x, y)); }},
    };

    if (torus) {
        for (const auto& it : items) rep.add(it.name, Verdict::Pass, "bounded-on-torus");
        return rep;
    }
    // env[k] approximates sup over the ball |y| <= rho[k]: 16 radii inside the
    // first ball, then 4 sub-radii per shell.
    for (const auto& it : items) {
        std::vector<double> env(rho.size(), 0.0);
        double running = 0.0;
        auto visit = [&](double radius) {
            for (const auto& x : xs)
                for (const auto& dir : dirs) {
                    std::vector<double> y(dir.size());
                    for (std::size_t i = 0; i < y.size(); ++i) y[i] = radius * dir[i];
                    running = std::max(running, it.measure(x, y));
                }
        };
        for (int s = 0; s < 16; ++s) visit(rho[0] * s / 16.0);
        for (std::size_t k = 0; k < rho.size(); ++k) {
            const double prev = k == 0 ? rho[0] : rho[k - 1];
            for (int s = 1; s <= 4; ++s) visit(prev + (rho[k] - prev) * s / 4.0);
            env[k] = running;
        }
        if (running == 0.0) {
            rep.add(it.name, Verdict::Pass, "scan-based");
            continue;
        }
        const double slope = detail::loglog_slope(rho, env);
        if (slope <= it.declared + 0.1) {
            rep.add(it.name, Verdict::Pass, "scan-based");
        } else {
            rep.add(it.name, Verdict::Fail, "scan-based",
                    "empirical slope " + fmt::num(slope) + " > declared " + fmt::num(it.declared) + " + 0.1");
        }
    }
    return rep;
}

// ============================================================================
// Limiting constants and regime helpers
// ============================================================================

struct LimitConstants {
    double j = 0.0;
    double gamma = 0.0;  // Regime 2 only
};

/// j1 = lim (delta/eps)/(sqrt(eps) h), j2 = lim (eps/delta - gamma)/(sqrt(eps) h)
/// for the declared power family.
inline LimitConstants limit_constants_from_family(const RegimeScaling& regime) {
    require(regime.family.has_value(), ErrorCode::InvalidArgument, "scaling family required");
    const auto& fam = *regime.family;
    if (regime.regime == Regime::One) {
        require(fam.p > 1.0, ErrorCode::InvalidArgument, "Regime 1 requires p > 1");
        // (delta/eps)/(sqrt(eps) h) = c_delta * eps^{(p-1) - (1/2 - q_h)}
        const double expo = (fam.p - 1.0) - (0.5 - fam.q_h);
        if (std::abs(expo) <= 1e-12) return {fam.c_delta, 0.0};
        if (expo > 0.0) return {0.0, 0.0};
        fail(ErrorCode::DivergentLimit, "p-1=" + fmt::num(fam.p - 1.0) + " < 1/2-q_h=" + fmt::num(0.5 - fam.q_h));
    }
    require(fam.p == 1.0, ErrorCode::InvalidArgument, "Regime 2 requires p = 1");
    // eps/delta = 1/c_delta exactly, so the numerator vanishes identically.
    return {0.0, 1.0 / fam.c_delta};
}

/// Runs every declared-condition check available for the model.
inline ConditionReport validate_model(const SlowFastModel& model, const std::vector<std::vector<double>>& x_probes,
                                      double y_radius, const ScanBox& box) {
    ConditionReport rep;
    if (model.fast_space.kind == FastSpaceKind::Torus) {
        rep.add("tightness", Verdict::Pass, "not-required-on-torus");
    } else {
        rep.merge(check_tightness(model.params, model.scaling));
    }
    rep.merge(check_recurrence_scan(model, y_radius, x_probes));
    rep.merge(check_growth_scan(model, box));
    rep.add("strong_solution", model.params.strong_solution_declared ? Verdict::Pass : Verdict::Fail, "declared",
            model.params.strong_solution_declared ? "" : "strong solution not declared");
    if (model.degenerate_ok) rep.add("ellipticity", Verdict::Unchecked, "degenerate-ok-flag");
    return rep;
}

}  // namespace slowfast
