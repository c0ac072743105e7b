#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "chemolab/analysis.hpp"
#include "chemolab/ode.hpp"
#include "chemolab/sim_eps.hpp"
#include "chemolab/sim_limit.hpp"

using namespace chemolab;

namespace {

double sup_diff(const Field& a, const Field& b)
{
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

double spread(const Field& f) { return f.max() - f.min(); }

} // namespace

TEST(StableDt, DiffusionDominatedAtZeroState)
{
    const Grid g(1.0, 256);
    const PopulationState s(g);
    const double dx = g.dx();
    // zero state: Lambda = max row sum of |J(0)| = 1.0
    const double expect = 0.9 * dx * dx / (0.2 + dx * dx * 1.0);
    EXPECT_NEAR(stable_dt(s, ModelParams{}, 0.9), expect, 1e-18);
    EXPECT_NEAR(stable_dt(s, ModelParams{}, 0.9) / (0.9 * dx * dx / 0.2), 1.0, 1e-4);
}

TEST(StableDt, HalvingDxQuartersDt)
{
    const ModelParams p;
    const double a = stable_dt(PopulationState(Grid(1.0, 128)), p, 0.9);
    const double b = stable_dt(PopulationState(Grid(1.0, 256)), p, 0.9);
    EXPECT_NEAR(a / b, 4.0, 1e-3);
}

TEST(StableDt, RejectsBadCfl)
{
    const PopulationState s(Grid(1.0, 16));
    EXPECT_THROW(stable_dt(s, ModelParams{}, 0.0), ValidationError);
    EXPECT_THROW(stable_dt(s, ModelParams{}, 1.5), ValidationError);
    EXPECT_EQ(stable_dt(s, ModelParams{}, 0.9, 1e-9), 1e-9);
}

TEST(StepEps, ZeroStateStaysZero)
{
    const Grid g(1.0, 32);
    const Field z(g);
    EpsState s = initial_eps_state(z, z, z, z, 1e-3, ModelParams{});
    step_eps(s, ModelParams{}, 0.5);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            EXPECT_EQ(s.u[i][j], 0.0);
            EXPECT_EQ(s.v[i][j], 0.0);
        }
}

TEST(StepLimit, ZeroStateStaysZero)
{
    const Grid g(1.0, 32);
    const Field z(g);
    LimitState s = initial_limit_state(z, z, z, ModelParams{});
    step_limit(s, ModelParams{}, 0.5);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_EQ(s.u[i][j], 0.0);
}

TEST(StepEps, ManifoldConstantV3Unchanged)
{
    // u3 = c is not a reaction equilibrium, so isolate stage (3): with the
    // kinetics switched off u3 stays c and v3 = c/mu3 stays put
    ModelParams p;
    p.alpha1 = p.alpha2 = p.m1 = p.m2 = p.k = p.l = 0.0;
    const Grid g(1.0, 32);
    const double c = 0.7;
    EpsState s = initial_eps_state(Field(g, 1.0), Field(g, 1.0), Field(g, c), Field(g, c / p.mu3), 1e-4, p);
    step_eps(s, p, 1e-3);
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(s.v[2][j], c / p.mu3, 1e-13);
}

TEST(StepLimit, ConstantU3GivesResolvent)
{
    const ModelParams p;
    const Grid g(1.0, 32);
    const LimitState s = initial_limit_state(Field(g, 1.0), Field(g, 1.0), Field(g, 0.4), p);
    // exact up to the elimination round-off, which scales with 4 lambda / (mu dx^2)
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(s.v[2][j], 0.4 / p.mu3, 1e-10);
}

TEST(StepEps, RejectsBadInput)
{
    const Grid g(1.0, 16);
    Field neg(g, 1.0);
    neg[3] = -0.1;
    EXPECT_THROW(initial_eps_state(neg, Field(g), Field(g), Field(g), 1e-3, ModelParams{}), ValidationError);
    EXPECT_THROW(initial_eps_state(Field(g), Field(g), Field(g), Field(g), 0.0, ModelParams{}), ValidationError);
    EXPECT_THROW(initial_limit_state(Field(g), Field(Grid(1.0, 17)), Field(g), ModelParams{}), ValidationError);
}

TEST(RunEps, ZeroHorizonGivesInitialSnapshot)
{
    const Grid g(1.0, 32);
    const auto u = default_initial_species(g);
    const ModelParams p;
    const std::vector<double> times{0.0};
    const auto tr = run_eps(u[0], u[1], u[2], manifold_projection(u[2], p), 1e-3, 0.0, p, times);
    ASSERT_EQ(tr.snapshots.size(), 1u);
    EXPECT_TRUE(tr.steps.empty());
    EXPECT_EQ(sup_diff(tr.snapshots[0].state.u[0], u[0]), 0.0);

    const auto tl = run_limit(u[0], u[1], u[2], 0.0, p, times);
    ASSERT_EQ(tl.snapshots.size(), 1u);
    EXPECT_LT(sup_diff(tl.snapshots[0].state.v[2], manifold_projection(u[2], p)), 1e-14);
}

TEST(RunEps, SnapshotTimesHitExactly)
{
    const Grid g(1.0, 32);
    const auto u = default_initial_species(g);
    const ModelParams p;
    const std::vector<double> times{0.0, 0.013, 0.1, 0.1 + 1.0 / 3.0};
    const auto tr = run_eps(u[0], u[1], u[2], manifold_projection(u[2], p), 1e-2, times.back(), p, times);
    ASSERT_EQ(tr.snapshots.size(), times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        EXPECT_EQ(tr.snapshots[i].t, times[i]);
        EXPECT_EQ(tr.snapshots[i].state.t, times[i]);
    }
    EXPECT_THROW(run_eps(u[0], u[1], u[2], u[2], 1e-2, 0.1, p, times), ValidationError);
}

TEST(RunEps, BlowUpIsReported)
{
    // very large step overrides with max_dt far beyond stability
    const Grid g(1.0, 64);
    auto u = default_initial_species(g);
    const ModelParams p;
    EpsState s = initial_eps_state(u[0], u[1], u[2], manifold_projection(u[2], p), 1e-3, p);
    const EpsStepper st(g, 1e-3, p, SimOptions{});
    bool thrown = false;
    try {
        for (int i = 0; i < 200; ++i) st.step(s, 1.0);
    } catch (const NumericalError& e) {
        thrown = true;
        EXPECT_NE(std::string(e.what()).find("blow-up"), std::string::npos);
    }
    EXPECT_TRUE(thrown);
}

TEST(Homogeneous, TracksOdeBothSystems)
{
    const ModelParams p;
    const Grid g(1.0, 16);
    const double T = 10.0;
    const std::vector<double> times = uniform_times(T, 21);
    SimOptions opt;
    opt.max_dt = 1e-3;
    const auto ode = integrate([&](const OdeState& s) { return ode_rhs_3pop(s, p); }, {1.0, 1.0, 0.5}, T,
                               IntegrateOptions{1e-12, 1e-14}, times);
    const Field u1(g, 1.0), u2(g, 1.0), u3(g, 0.5);
    const auto te = run_eps(u1, u2, u3, manifold_projection(u3, p), 1e-3, T, p, times, opt);
    const auto tl = run_limit(u1, u2, u3, T, p, times, opt);
    for (std::size_t s = 0; s < times.size(); ++s)
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_LT(spread(te.snapshots[s].state.u[i]), 1e-12);
            EXPECT_NEAR(te.snapshots[s].state.u[i].mean(), ode.states[s][i], 1e-6);
            EXPECT_NEAR(tl.snapshots[s].state.u[i].mean(), ode.states[s][i], 1e-6);
        }
}

TEST(MassBalance, TransportContributesNothing)
{
    const Grid g(1.0, 64);
    const auto u = default_initial_species(g);
    const ModelParams p;
    const std::vector<double> times = uniform_times(0.5, 3);
    const auto tr = run_eps(u[0], u[1], u[2], manifold_projection(u[2], p), 1e-3, 0.5, p, times);
    ASSERT_FALSE(tr.steps.empty());
    for (const auto& d : tr.steps) {
        EXPECT_LE(mass_balance_residual(d), 1e-12);
        EXPECT_GE(d.min_before_clip, -1e-12);
    }
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(tr.clipped_total[i], 1e-8 * u[i].integral());
}

TEST(Positivity, SharpDataStaysNonNegative)
{
    // a species that vanishes on half the domain, strong chemotaxis
    ModelParams p;
    p.chi1 = p.chi2 = p.chi31 = p.chi32 = 5.0;
    const Grid g(1.0, 64);
    const Field u1 = Field::sample(g, [](double x) { return x < 0.5 ? 0.0 : 1.0; });
    const Field u2 = Field::sample(g, [](double x) { return x < 0.5 ? 1.0 : 0.0; });
    const Field u3 = Field::sample(g, [](double x) { return 0.5 + 0.4 * std::cos(6 * x); });
    const std::vector<double> times = uniform_times(0.2, 3);
    const auto tr = run_limit(u1, u2, u3, 0.2, p, times);
    for (const auto& d : tr.steps) EXPECT_GE(d.min_before_clip, -1e-12);
    for (const auto& snap : tr.snapshots)
        for (const auto& f : snap.state.u) EXPECT_GE(f.min(), 0.0);
}

TEST(LimitRun, EllipticConsistencyAtSnapshots)
{
    const Grid g(1.0, 64);
    const auto u = default_initial_species(g);
    const ModelParams p;
    const std::vector<double> times = uniform_times(0.5, 6);
    const auto tr = run_limit(u[0], u[1], u[2], 0.5, p, times);
    for (const auto& snap : tr.snapshots) {
        const Vec3 lam = p.lambda(), mu = p.mu(), zeta = p.zeta();
        for (std::size_t i = 0; i < 3; ++i) {
            const Field lap = laplacian_neumann(snap.state.v[i]);
            Field r(g);
            for (std::size_t j = 0; j < g.size(); ++j)
                r[j] = lam[i] * lap[j] - mu[i] * snap.state.v[i][j] + zeta[i] * snap.state.u[i][j];
            EXPECT_LE(norm_l2(r), 10 * 1e-10);
        }
    }
}

TEST(RunEps, TimeRescalingIdentity)
{
    // lambda3 = mu3 = s with eps = s behaves like lambda3 = mu3 = 1 with eps = 1
    // (source zeta3 u3 scaled by s as well)
    const Grid g(1.0, 32);
    const auto u = default_initial_species(g);
    ModelParams a, b;
    a.lambda3 = a.mu3 = 1.0, a.zeta3 = 1.0;
    b.lambda3 = b.mu3 = 50.0, b.zeta3 = 50.0;
    const Field v30 = neumann_mode(g, 1) + Field(g, 2.0);
    SimOptions opt;
    opt.max_dt = 1e-3;
    const std::vector<double> times{0.0, 0.2};
    const auto ta = run_eps(u[0], u[1], u[2], v30, 1.0, 0.2, a, times, opt);
    const auto tb = run_eps(u[0], u[1], u[2], v30, 50.0, 0.2, b, times, opt);
    EXPECT_LT(sup_diff(ta.snapshots[1].state.v[2], tb.snapshots[1].state.v[2]), 1e-11);
    EXPECT_LT(sup_diff(ta.snapshots[1].state.u[0], tb.snapshots[1].state.u[0]), 1e-11);
}

TEST(SelfConvergence, FirstOrderInDt)
{
    const Grid g(1.0, 32);
    const auto u = default_initial_species(g);
    const ModelParams p;
    const Field v30 = manifold_projection(u[2], p);
    const std::vector<double> times{0.0, 1.0};
    auto run = [&](double dt) {
        SimOptions opt;
        opt.max_dt = dt;
        return run_eps(u[0], u[1], u[2], v30, 1e-2, 1.0, p, times, opt).snapshots.back().state;
    };
    const auto s1 = run(4e-3), s2 = run(2e-3), s3 = run(1e-3);
    const double d12 = norm_l2(s1.v[2] - s2.v[2]) + norm_l2(s1.u[2] - s2.u[2]);
    const double d23 = norm_l2(s2.v[2] - s3.v[2]) + norm_l2(s2.u[2] - s3.u[2]);
    ASSERT_GT(d23, 0.0);
    // O(dt): successive differences halve (order between 0.8 and 2.2)
    const double order = std::log2(d12 / d23);
    EXPECT_GT(order, 0.8);
    EXPECT_LT(order, 2.2);
}

TEST(FullyParabolic, SmallEpsApproachesLimit)
{
    const Grid g(1.0, 32);
    const auto u = default_initial_species(g);
    const ModelParams p;
    const Field v30 = manifold_projection(u[2], p);
    const std::vector<double> times{0.0, 0.5};
    SimOptions opt;
    opt.chemical_mode = ChemicalMode::fully_parabolic;
    const auto tl = run_limit(u[0], u[1], u[2], 0.5, p, times);
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const auto te = run_eps(u[0], u[1], u[2], v30, eps, 0.5, p, times, opt);
        const double d = norm_l2(te.snapshots.back().state.u[0] - tl.snapshots.back().state.u[0]);
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_LT(prev, 1e-4);
}
