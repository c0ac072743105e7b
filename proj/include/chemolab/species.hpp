#ifndef CHEMOLAB_SPECIES_HPP
#define CHEMOLAB_SPECIES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "chemolab/errors.hpp"
#include "chemolab/grid.hpp"
#include "chemolab/linsolve.hpp"
#include "chemolab/model.hpp"

namespace chemolab {

enum class ChemicalMode { mixed, fully_parabolic };

/// How the exponential step for a parabolic chemical sees its source u(t)
/// across one step: frozen at the updated level, or linear between levels.
enum class SourceHold { frozen, linear };

/// Parabolic chemical seen by the species transport over one step: the value
/// at the start of the step, or its exact mean over the step (frozen source).
/// The mean keeps an initial layer of width eps from acting for a whole dt,
/// so layer-induced species errors scale with eps rather than with dt.
enum class TransportField { start, step_average };

struct SimOptions {
    double cfl = 0.9;
    double max_dt = std::numeric_limits<double>::infinity();
    FaceScheme face = FaceScheme::upwind;
    SolverMethod elliptic = SolverMethod::tridiagonal;
    double solver_tol = 1e-10;
    int gmres_restart = 30;
    int gmres_maxit = 500;
    HelmholtzPreconditioner gmres_precond = HelmholtzPreconditioner::symbol;
    ChemicalMode chemical_mode = ChemicalMode::mixed;
    SourceHold source_hold = SourceHold::linear;
    TransportField transport_field = TransportField::start;
};

/// Species densities u[0..2] = (u1, u2, u3) and chemicals v[0..2] = (v1, v2, v3).
struct PopulationState {
    explicit PopulationState(const Grid& g)
        : u{Field(g), Field(g), Field(g)}, v{Field(g), Field(g), Field(g)}
    {
    }
    double t = 0.0;
    std::array<Field, 3> u;
    std::array<Field, 3> v;

    const Grid& grid() const { return u[0].grid(); }
    Vec3 masses() const { return {u[0].integral(), u[1].integral(), u[2].integral()}; }
};

struct StepDiagnostics {
    double t = 0.0;   // time at the start of the step
    double dt = 0.0;
    Vec3 mass_before{};
    Vec3 mass_after{};   // after clipping
    Vec3 reaction{};     // dt * Heun average of the integrated kinetics
    Vec3 clipped{};      // mass added back by clipping negatives to zero
    double min_before_clip = 0.0;
};

/// max_i |M_after - M_before - reaction - clipped| / M_before, the relative
/// mass-balance residual of one step.
inline double mass_balance_residual(const StepDiagnostics& d)
{
    double r = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double scale = std::max({std::abs(d.mass_before[i]), std::abs(d.mass_after[i]), std::abs(d.reaction[i])});
        if (scale == 0.0) continue;
        r = std::max(r, std::abs(d.mass_after[i] - d.mass_before[i] - d.reaction[i] - d.clipped[i]) / scale);
    }
    return r;
}

template <class State>
struct Snapshot {
    double t;
    State state;
};

template <class State>
struct Trajectory {
    std::vector<Snapshot<State>> snapshots;
    std::vector<StepDiagnostics> steps;
    Vec3 clipped_total{};

    std::vector<double> times() const
    {
        std::vector<double> t;
        for (const auto& s : snapshots) t.push_back(s.t);
        return t;
    }
};

/// Uniform output schedule: count points from 0 to T inclusive.
inline std::vector<double> uniform_times(double T, int count)
{
    require(T >= 0.0, "output times: T must be non-negative");
    if (T == 0.0 || count <= 1) return {0.0};
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = T * i / (count - 1);
    t.back() = T;
    return t;
}

namespace detail {

inline void check_initial(const Field& f, const char* name)
{
    require(f.all_finite(), std::string(name) + ": initial data not finite");
    require(f.min() >= 0.0, std::string(name) + ": initial data must be non-negative");
}

inline double max_abs(std::span<const double> x)
{
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

inline void check_finite(const PopulationState& s, double t)
{
    static const char* names[] = {"u1", "u2", "u3", "v1", "v2", "v3"};
    for (int i = 0; i < 3; ++i) {
        if (!s.u[static_cast<std::size_t>(i)].all_finite())
            throw NumericalError(std::string("blow-up: field ") + names[i] + " non-finite at t=" + std::to_string(t));
        if (!s.v[static_cast<std::size_t>(i)].all_finite())
            throw NumericalError(std::string("blow-up: field ") + names[i + 3] +
                                 " non-finite at t=" + std::to_string(t));
    }
}

// Face coefficients g with du_i/dt += (F_{j+1/2} - F_{j-1/2})/dx, F = u_face g.
struct TransportFaces {
    std::array<std::vector<double>, 3> g;
};

inline TransportFaces transport_faces(const PopulationState& s, const ModelParams& p)
{
    const std::size_t nf = s.grid().size() - 1;
    const double dx = s.grid().dx();
    TransportFaces tf;
    for (auto& g : tf.g) g.assign(nf, 0.0);
    // prey: + chi_i div(u_i grad v3)
    kernel::face_gradient(s.v[2].span(), p.chi1, dx, tf.g[0]);
    kernel::face_gradient(s.v[2].span(), p.chi2, dx, tf.g[1]);
    // predator: - div(u3 (chi31 grad v1 + chi32 grad v2))
    std::vector<double> tmp(nf);
    kernel::face_gradient(s.v[0].span(), -p.chi31, dx, tf.g[2]);
    kernel::face_gradient(s.v[1].span(), -p.chi32, dx, tmp);
    for (std::size_t j = 0; j < nf; ++j) tf.g[2][j] += tmp[j];
    return tf;
}

// du/dt for all species with chemicals frozen; returns integrated kinetics.
inline Vec3 species_rhs(const std::array<Field, 3>& u, const TransportFaces& tf, const ModelParams& p,
                        FaceScheme face, std::array<std::vector<double>, 3>& out)
{
    const std::size_t n = u[0].size();
    const double dx = u[0].dx();
    const Vec3 d = p.d();
    Vec3 react{};
    for (std::size_t i = 0; i < 3; ++i) {
        out[i].resize(n);
        kernel::laplacian(u[i].span(), dx, out[i]);
        for (double& x : out[i]) x *= d[i];
        kernel::add_face_flux(u[i].span(), tf.g[i], dx, face, out[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        const Vec3 f = kinetics(u[0][j], u[1][j], u[2][j], p);
        for (std::size_t i = 0; i < 3; ++i) {
            out[i][j] += f[i];
            react[i] += f[i];
        }
    }
    for (double& r : react) r *= dx;
    return react;
}

} // namespace detail

/// Explicit step bound for the species update:
///     dt = cfl * min_i dx^2 / (2 d_i + 2 c_i dx + dx^2 Lambda)
/// with c_i the largest chemotactic face speed of species i and Lambda the
/// largest row sum of |kinetics Jacobian| over the cells. Capped at max_dt.
inline double stable_dt(const PopulationState& s, const ModelParams& p, double cfl,
                        double max_dt = std::numeric_limits<double>::infinity())
{
    require(cfl > 0.0 && cfl <= 1.0, "stable_dt: cfl must lie in (0, 1]");
    const double dx = s.grid().dx();
    const auto tf = detail::transport_faces(s, p);
    double lam = 0.0;
    for (std::size_t j = 0; j < s.grid().size(); ++j) {
        const Mat3 J = kinetics_jacobian(s.u[0][j], s.u[1][j], s.u[2][j], p);
        for (const auto& row : J) lam = std::max(lam, std::abs(row[0]) + std::abs(row[1]) + std::abs(row[2]));
    }
    const Vec3 d = p.d();
    double dt = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 3; ++i) {
        const double c = detail::max_abs(tf.g[i]);
        dt = std::min(dt, dx * dx / (2.0 * d[i] + 2.0 * c * dx + dx * dx * lam));
    }
    return std::min(cfl * dt, max_dt);
}

/// One Heun (RK2) step of the species equations with chemicals frozen at
/// their values in `s`. Negative round-off is clipped to zero and accounted.
inline StepDiagnostics advance_species(PopulationState& s, const ModelParams& p, double dt, FaceScheme face)
{
    StepDiagnostics diag;
    diag.t = s.t;
    diag.dt = dt;
    diag.mass_before = s.masses();

    const auto tf = detail::transport_faces(s, p);
    const std::size_t n = s.grid().size();
    std::array<std::vector<double>, 3> k1, k2;
    const Vec3 r1 = detail::species_rhs(s.u, tf, p, face, k1);
    std::array<Field, 3> stage = s.u;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < n; ++j) stage[i][j] += dt * k1[i][j];
    const Vec3 r2 = detail::species_rhs(stage, tf, p, face, k2);

    double min_val = std::numeric_limits<double>::infinity();
    const double dx = s.grid().dx();
    for (std::size_t i = 0; i < 3; ++i) {
        diag.reaction[i] = 0.5 * dt * (r1[i] + r2[i]);
        double clipped = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double& x = s.u[i][j];
            x += 0.5 * dt * (k1[i][j] + k2[i][j]);
            min_val = std::min(min_val, x);
            if (x < 0.0) {
                clipped -= x;
                x = 0.0;
            }
        }
        diag.clipped[i] = clipped * dx;
    }
    diag.min_before_clip = min_val;
    return diag;
}

/// Steps from t = 0 through every requested output time. Substeps use
/// dt_fn() and are shortened so each output time is hit exactly;
/// step(dt, t_end) must leave the state at t_end.
template <class DtFn, class StepFn, class SnapFn>
void march(std::span<const double> output_times, DtFn&& dt_fn, StepFn&& step, SnapFn&& snap)
{
    require(!output_times.empty(), "march: no output times");
    double t = 0.0;
    for (std::size_t i = 0; i < output_times.size(); ++i) {
        const double target = output_times[i];
        require(target >= t, "march: output times must be non-decreasing and non-negative");
        while (t < target) {
            double dt = dt_fn();
            if (!(dt > 0.0) || !std::isfinite(dt)) {
                std::ostringstream msg;
                msg << "step size collapsed at t=" << t << " (dt=" << dt << ")";
                throw NumericalError(msg.str());
            }
            bool last = false;
            if (t + dt >= target - 1e-9 * dt) {
                dt = target - t;
                last = true;
            }
            const double t_end = last ? target : t + dt;
            step(dt, t_end);
            t = t_end;
        }
        snap(target);
    }
}

} // namespace chemolab

#endif
