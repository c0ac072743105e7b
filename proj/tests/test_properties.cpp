#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "chemolab/analysis.hpp"
#include "chemolab/linsolve.hpp"
#include "chemolab/ode.hpp"
#include "chemolab/sim_eps.hpp"
#include "chemolab/verify.hpp"

using namespace chemolab;

namespace {

constexpr int trials = 40;

std::size_t random_n(std::mt19937_64& rng)
{
    return std::uniform_int_distribution<std::size_t>(4, 200)(rng);
}

Field positive_field(const Grid& g, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(0.0, 2.0);
    Field f(g);
    for (std::size_t j = 0; j < g.size(); ++j) f[j] = U(rng);
    return f;
}

} // namespace

TEST(Property, DiscreteGaussAndConservation)
{
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> U(0.1, 5.0);
    for (int t = 0; t < trials; ++t) {
        const Grid g(U(rng), random_n(rng));
        const Field f = random_field(g, rng), u = positive_field(g, rng), v = random_field(g, rng);
        const double scale = g.size() / (g.dx() * g.dx());
        EXPECT_NEAR(laplacian_neumann(f).integral(), 0.0, 1e-13 * scale * g.dx());
        for (auto s : {FaceScheme::upwind, FaceScheme::central})
            EXPECT_NEAR(chemotaxis_divergence(u, v, U(rng), s).integral(), 0.0, 1e-12 * scale * g.dx());
    }
}

TEST(Property, LaplacianSymmetricNegative)
{
    std::mt19937_64 rng(102);
    for (int t = 0; t < trials; ++t) {
        const Grid g(1.0, random_n(rng));
        const Field a = random_field(g, rng), b = random_field(g, rng);
        const double ab = inner(laplacian_neumann(a), b), ba = inner(a, laplacian_neumann(b));
        EXPECT_NEAR(ab, ba, 1e-9 * (std::abs(ab) + 1.0));
        EXPECT_LE(inner(laplacian_neumann(a), a), 1e-9);
    }
}

TEST(Property, UnitDensityChemotaxisIsLaplacian)
{
    // u = 1: div(grad v) with matching face stencils
    std::mt19937_64 rng(103);
    for (int t = 0; t < trials; ++t) {
        const Grid g(1.0, random_n(rng));
        const Field v = random_smooth_field(g, rng);
        const Field a = chemotaxis_divergence(Field(g, 1.0), v, 1.0);
        const Field b = laplacian_neumann(v);
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-10 * (1.0 + std::abs(b[j])));
    }
}

TEST(Property, HelmholtzSolversAgreeAndInvert)
{
    std::mt19937_64 rng(104);
    std::uniform_real_distribution<double> L(0.1, 3.0), M(0.05, 2.0);
    for (int t = 0; t < trials; ++t) {
        const Grid g(1.0, random_n(rng));
        const HelmholtzOperator op(L(rng), M(rng), g);
        const Field b = random_smooth_field(g, rng);
        const Field x = helmholtz_solve(op, b).v;
        const Field s = helmholtz_solve(op, b, SolverMethod::spectral).v;
        const Field m = helmholtz_solve(op, b, SolverMethod::gmres, 1e-12).v;
        EXPECT_LE(norm_l2(x - s), 1e-9 * norm_l2(x));
        EXPECT_LE(norm_l2(x - m), 1e-9 * norm_l2(x));
        EXPECT_LE(norm_l2(op.apply(x) - b), 1e-9 * norm_l2(b));
    }
}

TEST(Property, HelmholtzMaximumPrinciple)
{
    // (-lambda Lap + mu) is an M-matrix: non-negative data gives a non-negative solution
    std::mt19937_64 rng(105);
    for (int t = 0; t < trials; ++t) {
        const Grid g(1.0, random_n(rng));
        const Field v = helmholtz_solve(HelmholtzOperator(1.0, 0.1, g), positive_field(g, rng)).v;
        EXPECT_GE(v.min(), -1e-14);
    }
}

TEST(Property, ExpPropagateSemigroup)
{
    // with a frozen source, two steps of dt/2 equal one step of dt
    std::mt19937_64 rng(106);
    std::uniform_real_distribution<double> E(-6.0, 0.0), D(1e-4, 1.0);
    for (int t = 0; t < trials; ++t) {
        const Grid g(1.0, random_n(rng));
        const double eps = std::pow(10.0, E(rng)), dt = D(rng);
        const Field v = random_field(g, rng), s = random_field(g, rng);
        const Field one = exp_propagate(1.0, 0.1, eps, dt, v, s);
        const Field two = exp_propagate(1.0, 0.1, eps, dt / 2, exp_propagate(1.0, 0.1, eps, dt / 2, v, s), s);
        EXPECT_LE(norm_l2(one - two), 1e-11 * (norm_l2(one) + 1.0));
    }
}

TEST(Property, ExpPropagateContractsTowardSteadyState)
{
    std::mt19937_64 rng(107);
    for (int t = 0; t < trials; ++t) {
        const Grid g(1.0, random_n(rng));
        const Field s = random_field(g, rng);
        const Field steady = helmholtz_solve(HelmholtzOperator(1.0, 0.1, g), s, SolverMethod::spectral).v;
        const Field v = random_field(g, rng);
        const Field out = exp_propagate(1.0, 0.1, 1e-2, 1e-3, v, s);
        EXPECT_LE(norm_l2(out - steady), norm_l2(v - steady) * (1.0 + 1e-12));
    }
}

TEST(Property, LayerRoundTripOnRandomData)
{
    const ModelParams p;
    std::mt19937_64 rng(108);
    std::uniform_real_distribution<double> G(0.0, 1.5), E(-5.0, -1.0);
    for (int t = 0; t < trials; ++t) {
        const Grid g(1.0, std::max<std::size_t>(16, random_n(rng)));
        const Field u = positive_field(g, rng);
        const double gamma = G(rng), eps = std::pow(10.0, E(rng));
        const Field v30 = make_layer_data(u, InitialLayerSpec{gamma, random_smooth_field(g, rng), eps}, p);
        const double base = initial_layer_size(u, manifold_projection(u, p), p);
        const double target = std::pow(eps, gamma);
        EXPECT_NEAR(initial_layer_size(u, v30, p), target, 1e-9 * target + base);
    }
}

TEST(Property, StepsKeepPositivityAndBalance)
{
    const ModelParams p;
    std::mt19937_64 rng(109);
    for (int t = 0; t < 10; ++t) {
        const Grid g(1.0, std::uniform_int_distribution<std::size_t>(8, 64)(rng));
        const Field u1 = positive_field(g, rng), u2 = positive_field(g, rng), u3 = positive_field(g, rng);
        EpsState s = initial_eps_state(u1, u2, u3, manifold_projection(u3, p), 1e-3, p);
        const EpsStepper st(g, 1e-3, p, SimOptions{});
        for (int k = 0; k < 50; ++k) {
            const auto d = st.step(s, stable_dt(s, p, 0.9));
            EXPECT_GE(d.min_before_clip, -1e-12);
            EXPECT_LE(mass_balance_residual(d), 1e-12);
        }
    }
}

TEST(Property, OdeTrajectoriesStayNonNegative)
{
    std::mt19937_64 rng(110);
    std::uniform_real_distribution<double> U(0.0, 2.0), M(0.05, 5.0);
    for (int t = 0; t < 20; ++t) {
        ModelParams p;
        p.m1 = M(rng);
        p.eta1 = p.eta2 = 0.2;
        const auto tr = integrate(make_rhs(OdeModel::three_pop, p), {U(rng), U(rng), U(rng)}, 100.0);
        for (const auto& s : tr.states)
            for (double v : s) EXPECT_GE(v, -1e-10);
    }
}

TEST(Property, EquilibriaAreRoots)
{
    std::mt19937_64 rng(111);
    std::uniform_real_distribution<double> M(0.05, 5.0);
    for (int t = 0; t < 10; ++t) {
        ModelParams p;
        p.m1 = M(rng);
        p.eta1 = p.eta2 = 0.2;
        for (auto model : {OdeModel::three_pop, OdeModel::pp}) {
            const auto rhs = make_rhs(model, p);
            for (const auto& r : find_equilibria(rhs, make_jacobian(model, p), model == OdeModel::pp ? 2 : 3)) {
                EXPECT_LE(max_abs(rhs(r)), 1e-12);
                for (double v : r) EXPECT_GE(v, 0.0);
            }
        }
    }
}
