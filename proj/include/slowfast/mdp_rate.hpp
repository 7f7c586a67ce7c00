#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/conditions.hpp"
#include "slowfast/csv.hpp"
#include "slowfast/error.hpp"
#include "slowfast/fast_dynamics.hpp"
#include "slowfast/model.hpp"
#include "slowfast/poisson.hpp"

namespace slowfast {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ============================================================================
// Alphas, q, kappa
// ============================================================================

/// alpha1 = sigma + (grad_y u) tau1, alpha2 = (grad_y u) tau2 per grid node,
/// where u is chi (Regime 1) or Phi_2 (Regime 2).
struct AlphaField {
    Grid1D grid;
    std::vector<MatrixXd> alpha1, alpha2;  // n x m per node
};

inline AlphaField build_alphas(const SlowFastModel& model, std::span<const double> x, const CorrectorSolution& corrector,
                               bool require_certified = true) {
    require(!require_certified || corrector.certified(), ErrorCode::UncertifiedCorrector,
            "corrector residual " + fmt::num(corrector.residual_sup) + " exceeds " + fmt::num(corrector.residual_tol));
    const std::size_t n = model.dims.n, m = model.dims.m;
    require(corrector.columns() == n, ErrorCode::InvalidArgument, "corrector needs one column per slow component");
    AlphaField out;
    out.grid = corrector.grid;
    const std::size_t N = corrector.grid.size();
    out.alpha1.reserve(N);
    out.alpha2.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double y[1] = {corrector.grid.node(i)};
        const auto s = model.sigma(x, y);
        const auto t1 = model.tau1(x, y);
        const auto t2 = model.tau2(x, y);
        MatrixXd a1(n, m), a2(n, m);
        for (std::size_t l = 0; l < n; ++l) {
            const double du = corrector.dy[l][i];
            for (std::size_t k = 0; k < m; ++k) {
                a1(l, k) = s[l * m + k] + du * t1[k];
                a2(l, k) = du * t2[k];
            }
        }
        out.alpha1.push_back(std::move(a1));
        out.alpha2.push_back(std::move(a2));
    }
    return out;
}

/// Symmetric positive-definite matrix with a stored Cholesky factor.
struct SpdMatrix {
    MatrixXd value;
    Eigen::LLT<MatrixXd> llt;
    double min_eigenvalue = 0.0;

    [[nodiscard]] MatrixXd inverse() const { return llt.solve(MatrixXd::Identity(value.rows(), value.cols())); }
    [[nodiscard]] VectorXd solve(const VectorXd& v) const { return llt.solve(v); }
};

inline SpdMatrix factor_spd(MatrixXd q) {
    q = 0.5 * (q + q.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(q, Eigen::EigenvaluesOnly);
    SpdMatrix out;
    out.min_eigenvalue = eig.eigenvalues().minCoeff();
    require(out.min_eigenvalue > 1e-12, ErrorCode::SingularQ,
            "smallest eigenvalue of q is " + fmt::num(out.min_eigenvalue));
    out.value = std::move(q);
    out.llt.compute(out.value);
    require(out.llt.info() == Eigen::Success, ErrorCode::SingularQ, "Cholesky factorization of q failed");
    return out;
}

/// q = int (alpha1 alpha1^T + alpha2 alpha2^T) dmu.
inline SpdMatrix build_q(const AlphaField& alphas, const InvariantDensity& density) {
    require_same_grid(alphas.grid, density.grid, "build_q");
    const auto n = alphas.alpha1.front().rows();
    MatrixXd q = MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < alphas.alpha1.size(); ++i) {
        const double w = density.weights[i] * density.values[i];
        if (w == 0.0) continue;
        q += w * (alphas.alpha1[i] * alphas.alpha1[i].transpose() + alphas.alpha2[i] * alphas.alpha2[i].transpose());
    }
    return factor_spd(std::move(q));
}

/// kappa(x, eta) = A eta + d.
struct AffineKappa {
    MatrixXd A;
    VectorXd d;

    [[nodiscard]] VectorXd operator()(const VectorXd& eta) const { return A * eta + d; }
};

/// Constant part of kappa: j int (grad_y Phi_1) g dmu (Regime 1) or
/// j int [b - (grad_y Phi_2) g / gamma] dmu (Regime 2). Exactly zero when j = 0.
inline VectorXd kappa_offset(const SlowFastModel& model, std::span<const double> x, const CorrectorSolution& phi,
                             const InvariantDensity& density, double j) {
    const std::size_t n = model.dims.n;
    VectorXd d = VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (j == 0.0) return d;
    require_same_grid(phi.grid, density.grid, "kappa");
    const auto& grid = density.grid;
    std::vector<double> integrand(grid.size());
    for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double y[1] = {grid.node(i)};
            const double gv = model.g(x, y)[0];
            integrand[i] = model.regime() == Regime::One
                               ? phi.dy[l][i] * gv
                               : model.b(x, y)[l] - phi.dy[l][i] * gv / model.scaling.gamma;
        }
        d[static_cast<Eigen::Index>(l)] = j * density.integrate(integrand);
    }
    return d;
}

inline AffineKappa build_kappa(const SlowFastModel& model, std::span<const double> x, const CorrectorSolution& phi,
                               const InvariantDensity& density, const std::vector<double>& grad_lambda_bar, double j) {
    const auto n = static_cast<Eigen::Index>(model.dims.n);
    require(grad_lambda_bar.size() == model.dims.n * model.dims.n, ErrorCode::InvalidArgument, "gradient must be n x n");
    require(std::isfinite(j), ErrorCode::DivergentLimit, "limiting constant is not finite");
    AffineKappa k;
    k.A = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        grad_lambda_bar.data(), n, n);
    k.d = kappa_offset(model, x, phi, density, j);
    return k;
}

/// Limiting constant used by the rate pipeline: taken from the scaling family
/// when one is declared, otherwise the model's own value.
inline double effective_j(const SlowFastModel& model) {
    if (model.scaling.family) return limit_constants_from_family(model.scaling).j;
    return model.scaling.j;
}

// ============================================================================
// Ingredients at a slow state
// ============================================================================

struct PointIngredients {
    std::vector<double> x;
    Regime regime = Regime::Two;
    double j = 0.0;
    std::shared_ptr<const InvariantDensity> density;
    std::optional<CorrectorSolution> chi;  // Regime 1 only
    CorrectorSolution phi;
    VectorXd lambda_bar;
    AffineKappa kappa;
    AlphaField alphas;
    SpdMatrix q;
};

struct LocalRateQuery {
    VectorXd x, eta, beta;
};

inline double local_rate(const PointIngredients& p, const VectorXd& eta, const VectorXd& beta) {
    const VectorXd r = beta - p.kappa(eta);
    return std::max(0.0, 0.5 * r.dot(p.q.solve(r)));
}

/// x -> kappa, q, alphas. Per-x results are memoized behind a mutex; each
/// stored entry is immutable.
class RateIngredients {
public:
    explicit RateIngredients(const SlowFastModel& model, PipelineOptions opt = {})
        : model_(&model),
          opt_(opt),
          cache_(std::make_shared<DensityCache>(model, opt)),
          drift_(model, cache_),
          j_(effective_j(model)) {
        model.validate();
        require(model.dims.d == 1, ErrorCode::InvalidArgument, "rate pipeline supports d = 1");
    }
    RateIngredients(SlowFastModel&&, PipelineOptions = {}) = delete;

    [[nodiscard]] std::shared_ptr<const PointIngredients> at(std::span<const double> x) const {
        std::vector<double> key(x.begin(), x.end());
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const auto it = points_.find(key);
            if (it != points_.end()) return it->second;
        }
        auto p = std::make_shared<const PointIngredients>(compute(key));
        std::lock_guard<std::mutex> lock(mutex_);
        return points_.emplace(std::move(key), std::move(p)).first->second;
    }

    [[nodiscard]] std::shared_ptr<const PointIngredients> at(double x) const { return at(std::span<const double>(&x, 1)); }

    [[nodiscard]] const SlowFastModel& model() const noexcept { return *model_; }
    [[nodiscard]] const AveragedDrift& drift() const noexcept { return drift_; }
    [[nodiscard]] const PipelineOptions& options() const noexcept { return opt_; }
    [[nodiscard]] double j() const noexcept { return j_; }

private:
    [[nodiscard]] PointIngredients compute(const std::vector<double>& x) const {
        const auto& model = *model_;
        PointIngredients p;
        p.x = x;
        p.regime = model.regime();
        p.j = j_;
        p.density = cache_->get(x);
        const auto& dens = *p.density;
        const CorrectorSolution* chi = nullptr;
        if (p.regime == Regime::One) {
            p.chi = cell_chi(model, x, dens, opt_.method, opt_.poisson);
            require(!opt_.require_certified || p.chi->certified(), ErrorCode::UncertifiedCorrector,
                    "cell solution residual " + fmt::num(p.chi->residual_sup));
            chi = &*p.chi;
        }
        auto lam = lambda_on_grid(model, x, dens.grid, chi);
        const auto lbar = average_against_mu(lam, dens);
        p.lambda_bar = Eigen::Map<const VectorXd>(lbar.data(), static_cast<Eigen::Index>(lbar.size()));
        for (std::size_t l = 0; l < lam.size(); ++l)
            for (double& v : lam[l]) v -= lbar[l];
        p.phi = corrector_phi(model, x, dens, lam, opt_.method, opt_.poisson);
        require(!opt_.require_certified || p.phi.certified(), ErrorCode::UncertifiedCorrector,
                "corrector residual " + fmt::num(p.phi.residual_sup));
        p.kappa = build_kappa(model, x, p.phi, dens, grad_lambda_bar(drift_, x), j_);
        p.alphas = build_alphas(model, x, chi ? *chi : p.phi, opt_.require_certified);
        p.q = build_q(p.alphas, dens);
        return p;
    }

    const SlowFastModel* model_;
    PipelineOptions opt_;
    std::shared_ptr<DensityCache> cache_;
    AveragedDrift drift_;
    double j_;
    mutable std::mutex mutex_;
    mutable std::map<std::vector<double>, std::shared_ptr<const PointIngredients>> points_;
};

inline double local_rate(const RateIngredients& ing, const LocalRateQuery& query) {
    const std::vector<double> x(query.x.data(), query.x.data() + query.x.size());
    return local_rate(*ing.at(x), query.eta, query.beta);
}

inline CsvTable rate_csv(const RateIngredients& ing, const std::vector<double>& xs) {
    CsvTable t;
    t.add_meta("model", ing.model().name);
    t.add_meta("regime", static_cast<double>(static_cast<int>(ing.model().regime())));
    t.add_meta("j", ing.j());
    t.columns = {"x", "lambda_bar", "kappa_A", "kappa_d", "q", "q_inv"};
    for (const double x : xs) {
        const auto p = ing.at(x);
        t.add_row({x, p->lambda_bar[0], p->kappa.A(0, 0), p->kappa.d[0], p->q.value(0, 0), 1.0 / p->q.value(0, 0)});
    }
    return t;
}

// ============================================================================
// Coefficients along the averaged path
// ============================================================================

/// A, d and q sampled on the uniform grid t_k = k/N, k = 0..N.
struct PathCoefficients {
    std::vector<double> times;
    std::vector<MatrixXd> A;
    std::vector<VectorXd> d;
    std::vector<SpdMatrix> q;

    [[nodiscard]] std::size_t steps() const { return times.size() - 1; }
    [[nodiscard]] Eigen::Index dim() const { return A.front().rows(); }
    [[nodiscard]] double dt() const { return times[1] - times[0]; }
};

inline std::vector<double> uniform_times(std::size_t steps) {
    require(steps >= 1, ErrorCode::InvalidArgument, "time grid needs at least one step");
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) / static_cast<double>(steps);
    return t;
}

inline PathCoefficients path_coefficients(const RateIngredients& ing, const AveragedPath& xbar, std::size_t steps = 256) {
    PathCoefficients pc;
    pc.times = uniform_times(steps);
    for (const double t : pc.times) {
        const auto p = ing.at(xbar.at(t));
        pc.A.push_back(p->kappa.A);
        pc.d.push_back(p->kappa.d);
        pc.q.push_back(p->q);
    }
    return pc;
}

/// Time-independent coefficients.
inline PathCoefficients constant_coefficients(const MatrixXd& A, const VectorXd& d, const MatrixXd& q,
                                              std::size_t steps = 256) {
    PathCoefficients pc;
    pc.times = uniform_times(steps);
    const auto f = factor_spd(q);
    pc.A.assign(steps + 1, A);
    pc.d.assign(steps + 1, d);
    pc.q.assign(steps + 1, f);
    return pc;
}

struct DeviationPath {
    std::vector<double> times;
    std::vector<VectorXd> values;

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

inline void require_same_time_grid(const PathCoefficients& pc, const DeviationPath& xi) {
    bool same = pc.times.size() == xi.times.size();
    for (std::size_t k = 0; same && k < xi.times.size(); ++k) same = std::abs(pc.times[k] - xi.times[k]) <= 1e-12;
    require(same, ErrorCode::GridMismatch, "deviation path and coefficients use different time grids");
}

/// S(xi) as a left-endpoint Riemann sum with forward-difference derivative.
/// Infinite when xi_0 != 0.
inline double action_functional(const PathCoefficients& pc, const DeviationPath& xi) {
    require_same_time_grid(pc, xi);
    if (xi.values.front().norm() > 1e-12) return std::numeric_limits<double>::infinity();
    const double dt = pc.dt();
    long double s = 0.0L;
    for (std::size_t k = 0; k < pc.steps(); ++k) {
        const VectorXd r = (xi.values[k + 1] - xi.values[k]) / dt - (pc.A[k] * xi.values[k] + pc.d[k]);
        s += static_cast<long double>(0.5 * dt * r.dot(pc.q[k].solve(r)));
    }
    return std::max(0.0, static_cast<double>(s));
}

enum class PathIntegrator { Euler, RK4 };

/// Solution of xi' = A(t) xi + d(t), xi_0 = 0. Forward Euler is the path whose
/// discrete action vanishes; RK4 uses linearly interpolated midpoint coefficients.
inline DeviationPath zero_cost_path(const PathCoefficients& pc, PathIntegrator method = PathIntegrator::Euler) {
    DeviationPath xi;
    xi.times = pc.times;
    const double dt = pc.dt();
    VectorXd v = VectorXd::Zero(pc.dim());
    xi.values.push_back(v);
    for (std::size_t k = 0; k < pc.steps(); ++k) {
        if (method == PathIntegrator::Euler) {
            v += dt * (pc.A[k] * v + pc.d[k]);
        } else {
            const MatrixXd Am = 0.5 * (pc.A[k] + pc.A[k + 1]);
            const VectorXd dm = 0.5 * (pc.d[k] + pc.d[k + 1]);
            const VectorXd k1 = pc.A[k] * v + pc.d[k];
            const VectorXd k2 = Am * (v + 0.5 * dt * k1) + dm;
            const VectorXd k3 = Am * (v + 0.5 * dt * k2) + dm;
            const VectorXd k4 = pc.A[k + 1] * (v + dt * k3) + pc.d[k + 1];
            v += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
        xi.values.push_back(v);
    }
    return xi;
}

// ============================================================================
// Action minimization
// ============================================================================

/// Terminal constraint: xi_N = a (endpoint) or ell . xi_N = a (hyperplane).
struct TerminalConstraint {
    std::optional<VectorXd> endpoint;
    VectorXd normal;
    double level = 0.0;

    static TerminalConstraint fixed(VectorXd a) {
        TerminalConstraint c;
        c.endpoint = std::move(a);
        return c;
    }
    static TerminalConstraint hyperplane(VectorXd ell, double a) {
        TerminalConstraint c;
        c.normal = std::move(ell);
        c.level = a;
        return c;
    }
};

struct MinimizerResult {
    DeviationPath path;
    double value = 0.0;
};

/// Minimizes the discrete action over xi_1..xi_N with xi_0 = 0 under the
/// terminal constraint. The discrete action is quadratic, so the
/// Euler-Lagrange system is solved once through a sparse KKT factorization.
inline MinimizerResult minimize_action(const PathCoefficients& pc, const TerminalConstraint& tc) {
    const Eigen::Index n = pc.dim();
    const auto N = static_cast<Eigen::Index>(pc.steps());
    const double dt = pc.dt();
    const Eigen::Index nz = n * N;
    // Residual rows e_k = xi_{k+1} - (I + dt A_k) xi_k, k = 0..N-1; unknown block k is xi_{k+1}.
    using Sp = Eigen::SparseMatrix<double>;
    std::vector<Eigen::Triplet<double>> rt, qt;
    VectorXd qd = VectorXd::Zero(nz);
    for (Eigen::Index k = 0; k < N; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        for (Eigen::Index i = 0; i < n; ++i) rt.emplace_back(k * n + i, k * n + i, 1.0);
        if (k > 0) {
            const MatrixXd B = MatrixXd::Identity(n, n) + dt * pc.A[ks];
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index c = 0; c < n; ++c)
                    if (B(i, c) != 0.0) rt.emplace_back(k * n + i, (k - 1) * n + c, -B(i, c));
        }
        const MatrixXd Qk = pc.q[ks].inverse();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < n; ++c) qt.emplace_back(k * n + i, k * n + c, Qk(i, c));
        qd.segment(k * n, n) = Qk * pc.d[ks];
    }
    Sp R(nz, nz), Q(nz, nz);
    R.setFromTriplets(rt.begin(), rt.end());
    Q.setFromTriplets(qt.begin(), qt.end());
    const Sp H = Sp(R.transpose() * Q * R) / dt;
    const VectorXd g = R.transpose() * qd;

    const Eigen::Index nc = tc.endpoint ? n : 1;
    if (tc.endpoint) require(tc.endpoint->size() == n, ErrorCode::InvalidArgument, "endpoint has wrong dimension");
    else require(tc.normal.size() == n && tc.normal.norm() > 0, ErrorCode::InvalidArgument, "bad hyperplane normal");
    std::vector<Eigen::Triplet<double>> kt;
    for (int o = 0; o < H.outerSize(); ++o)
        for (Sp::InnerIterator it(H, o); it; ++it) kt.emplace_back(it.row(), it.col(), it.value());
    VectorXd rhs(nz + nc);
    rhs.head(nz) = g;
    for (Eigen::Index c = 0; c < nc; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = tc.endpoint ? (i == c ? 1.0 : 0.0) : tc.normal[i];
            if (v == 0.0) continue;
            kt.emplace_back(nz + c, (N - 1) * n + i, v);
            kt.emplace_back((N - 1) * n + i, nz + c, v);
        }
        rhs[nz + c] = tc.endpoint ? (*tc.endpoint)[c] : tc.level;
    }
    Sp K(nz + nc, nz + nc);
    K.setFromTriplets(kt.begin(), kt.end());
    Eigen::SparseLU<Sp> lu;
    lu.compute(K);
    require(lu.info() == Eigen::Success, ErrorCode::SingularSystem, "Euler-Lagrange system is singular");
    const VectorXd sol = lu.solve(rhs);
    require(lu.info() == Eigen::Success && sol.allFinite(), ErrorCode::SingularSystem, "Euler-Lagrange solve failed");

    MinimizerResult res;
    res.path.times = pc.times;
    res.path.values.push_back(VectorXd::Zero(n));
    for (Eigen::Index k = 0; k < N; ++k) res.path.values.push_back(sol.segment(k * n, n));
    res.value = action_functional(pc, res.path);
    return res;
}

inline MinimizerResult minimize_action_endpoint(const PathCoefficients& pc, const VectorXd& target) {
    return minimize_action(pc, TerminalConstraint::fixed(target));
}

inline CsvTable deviation_path_csv(const DeviationPath& xi, double value) {
    CsvTable t;
    t.add_meta("S_star", value);
    t.columns = {"t"};
    for (Eigen::Index i = 0; i < xi.values.front().size(); ++i) t.columns.push_back("xi_" + std::to_string(i + 1));
    for (std::size_t k = 0; k < xi.size(); ++k) {
        std::vector<double> row{xi.times[k]};
        for (Eigen::Index i = 0; i < xi.values[k].size(); ++i) row.push_back(xi.values[k][i]);
        t.add_row(std::move(row));
    }
    return t;
}

/// Covariance of the linear Gaussian limit: V' = A V + V A^T + q, V_0 = 0.
/// RK4 with linearly interpolated midpoint coefficients.
inline std::vector<MatrixXd> lyapunov_variance(const PathCoefficients& pc) {
    const Eigen::Index n = pc.dim();
    const double dt = pc.dt();
    auto rhs = [](const MatrixXd& A, const MatrixXd& q, const MatrixXd& V) -> MatrixXd {
        return A * V + V * A.transpose() + q;
    };
    std::vector<MatrixXd> out{MatrixXd::Zero(n, n)};
    MatrixXd V = out.front();
    for (std::size_t k = 0; k < pc.steps(); ++k) {
        const MatrixXd Am = 0.5 * (pc.A[k] + pc.A[k + 1]);
        const MatrixXd qm = 0.5 * (pc.q[k].value + pc.q[k + 1].value);
        const MatrixXd k1 = rhs(pc.A[k], pc.q[k].value, V);
        const MatrixXd k2 = rhs(Am, qm, V + 0.5 * dt * k1);
        const MatrixXd k3 = rhs(Am, qm, V + 0.5 * dt * k2);
        const MatrixXd k4 = rhs(pc.A[k + 1], pc.q[k + 1].value, V + dt * k3);
        V += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        out.push_back(V);
    }
    return out;
}

// ============================================================================
// Theta drifts and optimal controls
// ============================================================================

/// theta_1 = chi'(tau1 z1 + tau2 z2) + j Phi_1' g + A eta + sigma z1;
/// theta_2 = j b + Phi_2'(tau1 z1 + tau2 z2) + A eta + sigma z1 + j Phi_2' f + (j/2) a Phi_2''.
inline VectorXd theta_drift(const SlowFastModel& model, const PointIngredients& p, const VectorXd& eta, double y,
                            const VectorXd& z1, const VectorXd& z2) {
    const std::size_t n = model.dims.n, m = model.dims.m;
    require(p.regime == Regime::Two || p.chi.has_value(), ErrorCode::MissingCorrector,
            "theta_1 needs the cell solution");
    require(p.phi.columns() == n, ErrorCode::MissingCorrector, "theta needs the corrector");
    const double yy[1] = {y};
    const auto& x = p.x;
    const auto s = model.sigma(x, yy);
    const auto t1 = model.tau1(x, yy);
    const auto t2 = model.tau2(x, yy);
    double noise = 0.0;
    for (std::size_t k = 0; k < m; ++k) noise += t1[k] * z1[static_cast<Eigen::Index>(k)] + t2[k] * z2[static_cast<Eigen::Index>(k)];
    const double gv = model.g(x, yy)[0];
    VectorXd out = p.kappa.A * eta;
    for (std::size_t l = 0; l < n; ++l) {
        double v = 0.0;
        for (std::size_t k = 0; k < m; ++k) v += s[l * m + k] * z1[static_cast<Eigen::Index>(k)];
        const double dphi = p.phi.dy_at(l, y);
        if (p.regime == Regime::One) {
            v += p.chi->dy_at(l, y) * noise + p.j * dphi * gv;
        } else {
            const double fv = model.f(x, yy)[0];
            const double a = model.fast_diffusion(x, yy)[0];
            v += p.j * model.b(x, yy)[l] + dphi * noise + p.j * dphi * fv + 0.5 * p.j * a * p.phi.d2y_at(l, y);
        }
        out[static_cast<Eigen::Index>(l)] += v;
    }
    return out;
}

/// v_i(y) = alpha_i(x, y)^T q^{-1} (beta - kappa) on the density grid.
struct ControlField {
    Grid1D grid;
    std::vector<VectorXd> v1, v2;   // m-vectors per node
    double cost = 0.0;              // int (|v1|^2 + |v2|^2) dmu
    double target = 0.0;            // (beta - kappa)^T q^{-1} (beta - kappa)
    double constraint_residual = 0.0;  // |int (alpha1 v1 + alpha2 v2) dmu - (beta - kappa)|

    [[nodiscard]] double certificate_error() const {
        return std::abs(cost - target) / std::max(target, std::numeric_limits<double>::min());
    }
};

inline ControlField optimal_controls(const PointIngredients& p, const VectorXd& eta, const VectorXd& beta) {
    const VectorXd r = beta - p.kappa(eta);
    const VectorXd w = p.q.solve(r);
    const auto& dens = *p.density;
    ControlField out;
    out.grid = dens.grid;
    out.target = r.dot(w);
    long double cost = 0.0L;
    VectorXd achieved = VectorXd::Zero(r.size());
    for (std::size_t i = 0; i < dens.grid.size(); ++i) {
        VectorXd v1 = p.alphas.alpha1[i].transpose() * w;
        VectorXd v2 = p.alphas.alpha2[i].transpose() * w;
        const double mw = dens.weights[i] * dens.values[i];
        cost += static_cast<long double>(mw * (v1.squaredNorm() + v2.squaredNorm()));
        achieved += mw * (p.alphas.alpha1[i] * v1 + p.alphas.alpha2[i] * v2);
        out.v1.push_back(std::move(v1));
        out.v2.push_back(std::move(v2));
    }
    out.cost = static_cast<double>(cost);
    out.constraint_residual = (achieved - r).norm();
    return out;
}

/// Cost of an arbitrary gridded control pair; used for optimality comparisons.
inline double control_cost(const InvariantDensity& dens, const std::vector<VectorXd>& v1, const std::vector<VectorXd>& v2) {
    long double cost = 0.0L;
    for (std::size_t i = 0; i < dens.grid.size(); ++i)
        cost += static_cast<long double>(dens.weights[i] * dens.values[i] * (v1[i].squaredNorm() + v2[i].squaredNorm()));
    return static_cast<double>(cost);
}

}  // namespace slowfast
