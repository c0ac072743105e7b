#ifndef CHEMOLAB_SIM_LIMIT_HPP
#define CHEMOLAB_SIM_LIMIT_HPP

#include <optional>
#include <span>

#include "chemolab/model.hpp"
#include "chemolab/sim_eps.hpp"
#include "chemolab/species.hpp"

namespace chemolab {

/// State of the parabolic-elliptic limit: all three chemicals are slaved to
/// the species through -lambda_i Lap v_i + mu_i v_i = zeta_i u_i.
struct LimitState : PopulationState {
    using PopulationState::PopulationState;
};

class LimitStepper {
public:
    LimitStepper(const ModelParams& p, const SimOptions& opt) : p_(p), opt_(opt) {}

    StepDiagnostics step(LimitState& s, double dt, std::optional<double> t_end = {}) const
    {
        require(dt > 0.0, "step_limit: dt must be positive");
        StepDiagnostics diag = advance_species(s, p_, dt, opt_.face);
        for (std::size_t i = 0; i < 3; ++i) detail::refresh_elliptic(s, i, p_, opt_);
        s.t = t_end ? *t_end : s.t + dt;
        diag.mass_after = s.masses();
        detail::check_finite(s, s.t);
        return diag;
    }

private:
    ModelParams p_;
    SimOptions opt_;
};

inline StepDiagnostics step_limit(LimitState& s, const ModelParams& p, double dt, const SimOptions& opt = {})
{
    return LimitStepper(p, opt).step(s, dt);
}

/// Chemicals at t = 0 come from elliptic solves; v3(0) is the resolvent of u30.
inline LimitState initial_limit_state(const Field& u10, const Field& u20, const Field& u30, const ModelParams& p,
                                      const SimOptions& opt = {})
{
    p.validate();
    detail::check_initial(u10, "u10");
    detail::check_initial(u20, "u20");
    detail::check_initial(u30, "u30");
    u10.check_same(u20), u10.check_same(u30);
    LimitState s(u10.grid());
    s.u = {u10, u20, u30};
    for (std::size_t i = 0; i < 3; ++i) detail::refresh_elliptic(s, i, p, opt);
    return s;
}

inline Trajectory<LimitState> run_limit(const Field& u10, const Field& u20, const Field& u30, double T,
                                        const ModelParams& p, std::span<const double> output_times,
                                        const SimOptions& opt = {})
{
    require(T >= 0.0, "run_limit: T must be non-negative");
    for (double t : output_times) require(t >= 0.0 && t <= T, "run_limit: output times must lie in [0, T]");
    LimitState s = initial_limit_state(u10, u20, u30, p, opt);
    const LimitStepper stepper(p, opt);
    Trajectory<LimitState> traj;
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
