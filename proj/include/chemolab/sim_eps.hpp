#ifndef CHEMOLAB_SIM_EPS_HPP
#define CHEMOLAB_SIM_EPS_HPP

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "chemolab/linsolve.hpp"
#include "chemolab/model.hpp"
#include "chemolab/species.hpp"

namespace chemolab {

/// State of the relaxation system: v3 (and in fully parabolic mode also v1,
/// v2) relaxes on the fast time scale eps.
struct EpsState : PopulationState {
    EpsState(const Grid& g, double eps_) : PopulationState(g), eps(eps_) {}
    double eps;
};

namespace detail {

inline Field elliptic_chemical(const Field& u, double lambda, double mu, double zeta, const SimOptions& opt)
{
    const HelmholtzOperator op(lambda, mu, u.grid());
    return helmholtz_solve(op, zeta * u, opt.elliptic, opt.solver_tol, opt.gmres_restart, opt.gmres_maxit,
                          opt.gmres_precond)
        .v;
}

inline void refresh_elliptic(PopulationState& s, std::size_t i, const ModelParams& p, const SimOptions& opt)
{
    s.v[i] = elliptic_chemical(s.u[i], p.lambda()[i], p.mu()[i], p.zeta()[i], opt);
}

} // namespace detail

/// Lie-split stepper for the eps-system. Holds the per-mode exponential
/// factors so repeated steps with the same dt reuse them.
class EpsStepper {
public:
    EpsStepper(const Grid& g, double eps, const ModelParams& p, const SimOptions& opt) : p_(p), opt_(opt)
    {
        require(eps > 0.0, "eps must be positive");
        const Vec3 lam = p.lambda(), mu = p.mu();
        for (std::size_t i = 0; i < 3; ++i) prop_[i].emplace(lam[i], mu[i], eps, g);
    }

    /// (1) species by Heun with chemicals frozen (v3 replaced by its step mean
    /// unless transport_field = start), (2) v3 by the exponential
    /// propagator using u3 at the old and new levels, (3) v1, v2 refreshed by
    /// elliptic solves (or propagated in fully parabolic mode), (4) negative
    /// round-off in the species is clipped inside (1).
    StepDiagnostics step(EpsState& s, double dt, std::optional<double> t_end = {}) const
    {
        require(dt > 0.0, "step_eps: dt must be positive");
        const std::array<Field, 3> u_old = s.u;
        const Vec3 zeta = p_.zeta();
        const std::size_t first = opt_.chemical_mode == ChemicalMode::fully_parabolic ? 0 : 2;
        const std::array<Field, 3> v_start = s.v;
        if (opt_.transport_field == TransportField::step_average)
            for (std::size_t i = first; i < 3; ++i) s.v[i] = prop_[i]->average(s.v[i], zeta[i] * s.u[i], dt);
        StepDiagnostics diag = advance_species(s, p_, dt, opt_.face);
        for (std::size_t i = first; i < 3; ++i) s.v[i] = v_start[i];
        auto propagate = [&](std::size_t i) {
            if (opt_.source_hold == SourceHold::linear)
                s.v[i] = prop_[i]->advance(s.v[i], zeta[i] * u_old[i], zeta[i] * s.u[i], dt);
            else
                s.v[i] = prop_[i]->advance(s.v[i], zeta[i] * s.u[i], dt);
        };
        propagate(2);
        for (std::size_t i = 0; i < 2; ++i) {
            if (opt_.chemical_mode == ChemicalMode::fully_parabolic)
                propagate(i);
            else
                detail::refresh_elliptic(s, i, p_, opt_);
        }
        s.t = t_end ? *t_end : s.t + dt;
        diag.mass_after = s.masses();
        detail::check_finite(s, s.t);
        return diag;
    }

private:
    ModelParams p_;
    SimOptions opt_;
    std::array<std::optional<ExpPropagator>, 3> prop_;
};

inline StepDiagnostics step_eps(EpsState& s, const ModelParams& p, double dt, const SimOptions& opt = {})
{
    return EpsStepper(s.grid(), s.eps, p, opt).step(s, dt);
}

/// Initial state: species and v3 as given; v1, v2 from elliptic solves.
inline EpsState initial_eps_state(const Field& u10, const Field& u20, const Field& u30, const Field& v30, double eps,
                                  const ModelParams& p, const SimOptions& opt = {})
{
    require(eps > 0.0, "eps must be positive");
    p.validate();
    detail::check_initial(u10, "u10");
    detail::check_initial(u20, "u20");
    detail::check_initial(u30, "u30");
    require(v30.all_finite(), "v30: initial data not finite");
    u10.check_same(u20), u10.check_same(u30), u10.check_same(v30);
    EpsState s(u10.grid(), eps);
    s.u = {u10, u20, u30};
    s.v[2] = v30;
    detail::refresh_elliptic(s, 0, p, opt);
    detail::refresh_elliptic(s, 1, p, opt);
    return s;
}

inline Trajectory<EpsState> run_eps(const Field& u10, const Field& u20, const Field& u30, const Field& v30, double eps,
                                    double T, const ModelParams& p, std::span<const double> output_times,
                                    const SimOptions& opt = {})
{
    require(T >= 0.0, "run_eps: T must be non-negative");
    for (double t : output_times) require(t >= 0.0 && t <= T, "run_eps: output times must lie in [0, T]");
    EpsState s = initial_eps_state(u10, u20, u30, v30, eps, p, opt);
    const EpsStepper stepper(s.grid(), eps, p, opt);
    Trajectory<EpsState> traj;
    march(
        output_times, [&] { return stable_dt(s, p, opt.cfl, opt.max_dt); },
        [&](double dt, double t_end) {
            traj.steps.push_back(stepper.step(s, dt, t_end));
            for (std::size_t i = 0; i < 3; ++i) traj.clipped_total[i] += traj.steps.back().clipped[i];
        },
        [&](double t) { traj.snapshots.push_back({t, s}); });
    return traj;
}

} // namespace chemolab

#endif
