#ifndef CHEMOLAB_ANALYSIS_HPP
#define CHEMOLAB_ANALYSIS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chemolab/cosine_transform.hpp"
#include "chemolab/grid.hpp"
#include "chemolab/linsolve.hpp"
#include "chemolab/model.hpp"
#include "chemolab/sim_eps.hpp"
#include "chemolab/sim_limit.hpp"
#include "chemolab/species.hpp"

namespace chemolab {

// ---------------------------------------------------------------------------
// Discrete norms

inline double norm_l2(const Field& f) { return std::sqrt(inner(f, f)); }

/// ||D_h f||^2 over the n-1 interior faces.
inline double gradient_norm_sq(const Field& f)
{
    const double dx = f.dx();
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < f.size(); ++j) {
        const double g = (f[j + 1] - f[j]) / dx;
        s += g * g;
    }
    return s * dx;
}

inline double norm_h1(const Field& f) { return std::sqrt(inner(f, f) + gradient_norm_sq(f)); }

/// H^2 proxy: L^2 of value, face gradient and discrete Laplacian.
inline double norm_h2_proxy(const Field& f)
{
    const Field lap = laplacian_neumann(f);
    return std::sqrt(inner(f, f) + gradient_norm_sq(f) + inner(lap, lap));
}

// ---------------------------------------------------------------------------
// Critical manifold

/// Residual lambda3 Lap v - mu3 v + zeta3 u; zero on the critical manifold.
inline Field manifold_residual(const Field& u, const Field& v, const ModelParams& p)
{
    u.check_same(v);
    Field r = laplacian_neumann(v);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = p.lambda3 * r[j] - p.mu3 * v[j] + p.zeta3 * u[j];
    return r;
}

inline double initial_layer_size(const Field& u30, const Field& v30, const ModelParams& p)
{
    return norm_l2(manifold_residual(u30, v30, p));
}

/// H^2 proxy of the layer residual; logged, not gated.
inline double initial_layer_size_h2(const Field& u30, const Field& v30, const ModelParams& p)
{
    return norm_h2_proxy(manifold_residual(u30, v30, p));
}

/// v with (u, v) on the discrete critical manifold.
inline Field manifold_projection(const Field& u, const ModelParams& p, SolverMethod method = SolverMethod::tridiagonal,
                                 double tol = 1e-10)
{
    return helmholtz_solve(HelmholtzOperator(p.lambda3, p.mu3, u.grid()), p.zeta3 * u, method, tol).v;
}

inline double manifold_distance(const PopulationState& s, const ModelParams& p)
{
    return initial_layer_size(s.u[2], s.v[2], p);
}

/// Recipe for (u30, v30) at a prescribed distance eps^gamma from the manifold.
struct InitialLayerSpec {
    std::optional<double> gamma;  // empty: start on the manifold
    std::optional<Field> shape;   // perturbation direction; first cosine mode if empty
    double eps = 1.0;
};

inline Field make_layer_data(const Field& u30, const InitialLayerSpec& spec, const ModelParams& p)
{
    Field v30 = manifold_projection(u30, p);
    if (!spec.gamma) return v30;
    require(*spec.gamma >= 0.0, "initial layer: gamma must be non-negative");
    require(spec.eps > 0.0, "initial layer: eps must be positive");
    const Field w = spec.shape ? *spec.shape : neumann_mode(u30.grid(), 1);
    Field image = laplacian_neumann(w);
    for (std::size_t j = 0; j < image.size(); ++j) image[j] = p.lambda3 * image[j] - p.mu3 * w[j];
    const double scale = norm_l2(image);
    require(scale > 0.0, "initial layer: perturbation shape has zero operator image");
    const double delta = std::pow(spec.eps, *spec.gamma);
    v30.axpy(delta / scale, w);
    return v30;
}

// ---------------------------------------------------------------------------
// Semigroup-integral identity

/// L^2 distance between A^{-1} f and the truncated semigroup integral
/// sum_k (1 - e^{-b_k S}) / b_k f_k phi_k, b_k = mu - lambda a_k.
/// Bounded by e^{-mu S} / mu * ||f||. The default spectral solve works in
/// the same mode basis, so round-off stays near u ||A^{-1} f|| rather than
/// the cond(A) u of the tridiagonal path.
inline double semigroup_identity_residual(const Field& f, double lambda, double mu, double S,
                                          SolverMethod method = SolverMethod::spectral)
{
    require(S >= 0.0, "semigroup identity: S must be non-negative");
    const HelmholtzOperator op(lambda, mu, f.grid());
    const Field direct = helmholtz_solve(op, f, method).v;
    const auto tr = CosineTransform::get(f.size());
    std::vector<double> c(f.size());
    tr->forward(f.span(), c);
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double b = op.symbol(k);
        c[k] *= -std::expm1(-b * S) / b;
    }
    Field integral(f.grid());
    tr->inverse(c, integral.span());
    return norm_l2(direct - integral);
}

// ---------------------------------------------------------------------------
// Trajectory comparison

struct ErrorRecord {
    std::array<double, 3> u{};  // sup_t ||u_i^eps - u_i||_{L2}
    double v1 = 0.0;            // sup_t H^2 proxy
    double v2 = 0.0;
    double v3_h1 = 0.0;         // sup_t ||v3^eps - v3||_{H1}
    double v3_l2h2 = 0.0;       // (int_0^T ||v3^eps - v3||_{H2}^2 dt)^{1/2}, trapezoid over snapshots
};

inline ErrorRecord compare_states_accumulate(ErrorRecord rec, const PopulationState& a, const PopulationState& b)
{
    for (std::size_t i = 0; i < 3; ++i) rec.u[i] = std::max(rec.u[i], norm_l2(a.u[i] - b.u[i]));
    rec.v1 = std::max(rec.v1, norm_h2_proxy(a.v[0] - b.v[0]));
    rec.v2 = std::max(rec.v2, norm_h2_proxy(a.v[1] - b.v[1]));
    rec.v3_h1 = std::max(rec.v3_h1, norm_h1(a.v[2] - b.v[2]));
    return rec;
}

template <class StateA, class StateB>
ErrorRecord compare_trajectories(const Trajectory<StateA>& A, const Trajectory<StateB>& B)
{
    require(A.snapshots.size() == B.snapshots.size(), "compare: snapshot schedules differ in length");
    ErrorRecord rec;
    double l2h2 = 0.0, prev = 0.0;
    for (std::size_t s = 0; s < A.snapshots.size(); ++s) {
        const auto& a = A.snapshots[s];
        const auto& b = B.snapshots[s];
        require(a.t == b.t, "compare: snapshot times differ");
        require(a.state.grid() == b.state.grid(), "compare: grids differ");
        rec = compare_states_accumulate(rec, a.state, b.state);
        const double h2 = norm_h2_proxy(a.state.v[2] - b.state.v[2]);
        if (s > 0) l2h2 += 0.5 * (a.t - A.snapshots[s - 1].t) * (prev * prev + h2 * h2);
        prev = h2;
    }
    rec.v3_l2h2 = std::sqrt(l2h2);
    return rec;
}

// ---------------------------------------------------------------------------
// Paired runs and rate studies

struct PairedRun {
    Trajectory<EpsState> eps_traj;
    Trajectory<LimitState> limit_traj;
    ErrorRecord errors;
    double eps_in = 0.0;
    double eps_in_h2 = 0.0;
    std::vector<double> manifold_distance;  // eps_t at each snapshot of the eps run
};

/// Runs both systems in lockstep on one dt schedule, dt = min of the two
/// stable steps, so time-discretization error cancels in their difference.
inline PairedRun run_pair(const Field& u10, const Field& u20, const Field& u30, const Field& v30, double eps, double T,
                          const ModelParams& p, std::span<const double> output_times, const SimOptions& opt = {})
{
    for (double t : output_times) require(t >= 0.0 && t <= T, "run_pair: output times must lie in [0, T]");
    EpsState se = initial_eps_state(u10, u20, u30, v30, eps, p, opt);
    LimitState sl = initial_limit_state(u10, u20, u30, p, opt);
    const EpsStepper eps_step(se.grid(), eps, p, opt);
    const LimitStepper lim_step(p, opt);

    PairedRun run;
    run.eps_in = initial_layer_size(u30, v30, p);
    run.eps_in_h2 = initial_layer_size_h2(u30, v30, p);
    march(
        output_times,
        [&] { return std::min(stable_dt(se, p, opt.cfl, opt.max_dt), stable_dt(sl, p, opt.cfl, opt.max_dt)); },
        [&](double dt, double t_end) {
            run.eps_traj.steps.push_back(eps_step.step(se, dt, t_end));
            run.limit_traj.steps.push_back(lim_step.step(sl, dt, t_end));
            for (std::size_t i = 0; i < 3; ++i) {
                run.eps_traj.clipped_total[i] += run.eps_traj.steps.back().clipped[i];
                run.limit_traj.clipped_total[i] += run.limit_traj.steps.back().clipped[i];
            }
        },
        [&](double t) {
            run.eps_traj.snapshots.push_back({t, se});
            run.limit_traj.snapshots.push_back({t, sl});
            run.manifold_distance.push_back(manifold_distance(se, p));
        });
    run.errors = compare_trajectories(run.eps_traj, run.limit_traj);
    return run;
}

struct SlopeFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();  // RMS of log10 misfit
    int points = 0;
    bool ok = false;
};

/// Unweighted least squares of log10(y) against log10(x) over points with
/// y > floor. Fewer than three such points: ok = false.
inline SlopeFit fit_loglog(std::span<const double> x, std::span<const double> y, double floor = 1e-9)
{
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
        if (y[i] > floor && x[i] > 0.0) {
            lx.push_back(std::log10(x[i]));
            ly.push_back(std::log10(y[i]));
        }
    SlopeFit fit;
    fit.points = static_cast<int>(lx.size());
    if (lx.size() < 3) return fit;
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
    mx /= n, my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
        rss += e * e;
    }
    fit.residual = std::sqrt(rss / n);
    fit.ok = true;
    return fit;
}

/// Column order of the rate table.
inline const std::array<const char*, 7>& rate_components()
{
    static const std::array<const char*, 7> names = {"err_u1", "err_u2", "err_u3", "err_v1",
                                                     "err_v2", "err_v3_h1", "err_v3_l2h2"};
    return names;
}

inline std::array<double, 7> flatten(const ErrorRecord& e)
{
    return {e.u[0], e.u[1], e.u[2], e.v1, e.v2, e.v3_h1, e.v3_l2h2};
}

struct RateReport {
    std::vector<double> eps_list;
    std::vector<double> eps_in;
    std::vector<double> eps_in_h2;
    std::vector<ErrorRecord> errors;
    std::vector<double> manifold_sup;  // sup of eps_t over snapshots with t >= manifold_from
    std::vector<double> manifold_t0;
    std::array<SlopeFit, 7> slopes;
    SlopeFit manifold_slope;
    std::optional<double> gamma;
    double T = 0.0;
    double floor = 1e-9;
    double manifold_from = 0.1;

    std::vector<double> column(std::size_t c) const
    {
        std::vector<double> out;
        for (const auto& e : errors) out.push_back(flatten(e)[c]);
        return out;
    }
};

struct RateStudyOptions {
    int snapshots = 64;
    double floor = 1e-9;
    double manifold_from = 0.1;
    std::optional<Field> shape;
    bool parallel = true;
};

/// For each eps: build v30 at distance eps^gamma from the manifold, run the
/// eps- and limit systems in lockstep, compare. Results are collected in
/// eps_list order regardless of scheduling.
inline RateReport rate_study(const Field& u10, const Field& u20, const Field& u30, std::optional<double> gamma,
                             std::span<const double> eps_list, double T, const ModelParams& p,
                             const SimOptions& opt = {}, const RateStudyOptions& ropt = {})
{
    require(eps_list.size() >= 3, "rate study: need at least three eps values");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        require(eps_list[i] > 0.0, "rate study: eps values must be positive");
        if (i > 0) require(eps_list[i] < eps_list[i - 1], "rate study: eps_list must be strictly decreasing");
    }
    require(T > 0.0, "rate study: T must be positive");
    const std::vector<double> times = uniform_times(T, ropt.snapshots);

    auto task = [&](double eps) {
        InitialLayerSpec spec{gamma, ropt.shape, eps};
        const Field v30 = make_layer_data(u30, spec, p);
        PairedRun run = run_pair(u10, u20, u30, v30, eps, T, p, times, opt);
        // trajectories are not kept in the report
        run.eps_traj = {};
        run.limit_traj = {};
        return run;
    };

    std::vector<PairedRun> runs;
    if (ropt.parallel) {
        std::vector<std::future<PairedRun>> futures;
        for (double eps : eps_list) futures.push_back(std::async(std::launch::async, task, eps));
        for (auto& f : futures) runs.push_back(f.get());
    } else {
        for (double eps : eps_list) runs.push_back(task(eps));
    }

    RateReport rep;
    rep.eps_list.assign(eps_list.begin(), eps_list.end());
    rep.gamma = gamma;
    rep.T = T;
    rep.floor = ropt.floor;
    rep.manifold_from = ropt.manifold_from;
    for (const auto& r : runs) {
        rep.eps_in.push_back(r.eps_in);
        rep.eps_in_h2.push_back(r.eps_in_h2);
        rep.errors.push_back(r.errors);
        double sup = 0.0;
        for (std::size_t s = 0; s < times.size(); ++s)
            if (times[s] >= ropt.manifold_from) sup = std::max(sup, r.manifold_distance[s]);
        rep.manifold_sup.push_back(sup);
        rep.manifold_t0.push_back(r.manifold_distance.front());
    }
    for (std::size_t c = 0; c < 7; ++c) rep.slopes[c] = fit_loglog(rep.eps_list, rep.column(c), ropt.floor);
    rep.manifold_slope = fit_loglog(rep.eps_list, rep.manifold_sup, ropt.floor);
    return rep;
}

/// Default initial data u_i0 = c_i + a_i cos(pi x / L).
inline std::array<Field, 3> default_initial_species(const Grid& g, const Vec3& c = {1.0, 1.0, 0.5},
                                                    const Vec3& a = {0.2, -0.2, 0.1})
{
    const Field phi = neumann_mode(g, 1);
    std::array<Field, 3> u{Field(g), Field(g), Field(g)};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < g.size(); ++j) u[i][j] = c[i] + a[i] * phi[j];
    return u;
}

} // namespace chemolab

#endif
