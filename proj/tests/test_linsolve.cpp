#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "chemolab/cosine_transform.hpp"
#include "chemolab/gmres.hpp"
#include "chemolab/analysis.hpp"
#include "chemolab/linsolve.hpp"

using namespace chemolab;

namespace {

double rel_l2(const Field& a, const Field& b) { return std::sqrt(inner(a - b, a - b) / inner(b, b)); }

Field random_field(const Grid& g, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Field f(g);
    for (std::size_t j = 0; j < g.size(); ++j) f[j] = U(rng);
    return f;
}

} // namespace

TEST(CosineTransform, RoundTripBothPaths)
{
    for (std::size_t n : {8u, 12u, 17u, 64u}) {
        const Grid g(1.0, n);
        const Field f = random_field(g, 3);
        const auto tr = CosineTransform::get(n);
        std::vector<double> cf(n), cd(n);
        tr->forward(f.span(), cf, CosineTransform::Path::fast);
        tr->forward(f.span(), cd, CosineTransform::Path::direct);
        for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(cf[k], cd[k], 1e-13);
        Field back(g), back_d(g);
        tr->inverse(cf, back.span(), CosineTransform::Path::fast);
        tr->inverse(cd, back_d.span(), CosineTransform::Path::direct);
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_NEAR(back[j], f[j], 1e-13);
            EXPECT_NEAR(back_d[j], f[j], 1e-13);
        }
    }
}

TEST(CosineTransform, ModeCoefficients)
{
    const Grid g(1.0, 16);
    const auto tr = CosineTransform::get(16);
    std::vector<double> c(16);
    Field f = neumann_mode(g, 3);
    f.axpy(2.0, Field(g, 1.0));
    tr->forward(f.span(), c);
    for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(c[k], k == 3 ? 1.0 : (k == 0 ? 2.0 : 0.0), 1e-14);
}

TEST(CosineTransform, Convenient)
{
    EXPECT_TRUE(CosineTransform::convenient(256));
    EXPECT_TRUE(CosineTransform::convenient(210));
    EXPECT_FALSE(CosineTransform::convenient(17));
    EXPECT_FALSE(CosineTransform::convenient(22));
}

TEST(Gmres, Identity)
{
    std::vector<double> b{1.0, -2.0, 3.0, 0.5};
    auto r = gmres([](std::span<const double> in, std::span<double> out) { std::copy(in.begin(), in.end(), out.begin()); },
                   b);
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(r.stats.iterations, 1);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(r.x[i], b[i], 1e-14);
}

TEST(Gmres, Diagonal)
{
    std::vector<double> b{2.0, 4.0, -6.0};
    auto r = gmres(
        [](std::span<const double> in, std::span<double> out) {
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = 2.0 * in[i];
        },
        b);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-14);
    EXPECT_NEAR(r.x[2], -3.0, 1e-14);
}

TEST(Gmres, ZeroRhs)
{
    std::vector<double> b(5, 0.0);
    auto r = gmres([](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }, b);
    EXPECT_TRUE(r.converged);
    for (double x : r.x) EXPECT_EQ(x, 0.0);
}

TEST(Gmres, NonSymmetricWithRestart)
{
    // upper bidiagonal, non-normal; restart 3 forces several cycles
    const std::size_t n = 20;
    auto apply = [n](std::span<const double> in, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = 3.0 * in[i] + (i + 1 < n ? in[i + 1] : 0.0);
    };
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = std::sin(static_cast<double>(i));
    auto r = gmres(apply, b, GmresOptions{1e-12, 3, 1000});
    ASSERT_TRUE(r.converged);
    std::vector<double> ax(n);
    apply(r.x, ax);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ax[i], b[i], 1e-10);
}

TEST(Gmres, ReportsFailureWithBestIterate)
{
    const std::size_t n = 50;
    auto apply = [n](std::span<const double> in, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 + static_cast<double>(i) * 100.0) * in[i];
    };
    std::vector<double> b(n, 1.0);
    auto r = gmres(apply, b, GmresOptions{1e-14, 2, 4});
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.stats.iterations, 4);
    EXPECT_GT(r.stats.residual_norm, 0.0);
    EXPECT_LT(r.stats.residual_norm, std::sqrt(static_cast<double>(n)));
}

TEST(Helmholtz, ConstantSteadyState)
{
    const Grid g(1.0, 32);
    const HelmholtzOperator op(1.0, 0.1, g);
    for (auto m : {SolverMethod::tridiagonal, SolverMethod::spectral, SolverMethod::gmres}) {
        const auto r = helmholtz_solve(op, Field(g, 0.1), m);
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(r.v[j], 1.0, 1e-12) << to_string(m);
        EXPECT_EQ(r.stats.method, m);
    }
}

TEST(Helmholtz, ZeroRhs)
{
    const Grid g(1.0, 16);
    const HelmholtzOperator op(2.0, 0.5, g);
    for (auto m : {SolverMethod::tridiagonal, SolverMethod::spectral, SolverMethod::gmres}) {
        const auto r = helmholtz_solve(op, Field(g), m);
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_EQ(r.v[j], 0.0);
    }
}

TEST(Helmholtz, SingleModeAllMethods)
{
    const Grid g(1.0, 256);
    const HelmholtzOperator op(1.0, 0.1, g);
    const Field phi = neumann_mode(g, 1);
    const Field exact = (1.0 / (-neumann_eigenvalue(g, 1) + 0.1)) * phi;
    for (auto m : {SolverMethod::tridiagonal, SolverMethod::spectral, SolverMethod::gmres})
        EXPECT_LT(rel_l2(helmholtz_solve(op, phi, m).v, exact), 1e-10) << to_string(m);
}

TEST(Helmholtz, GmresResidualMeetsTolerance)
{
    const Grid g(1.0, 64);
    const HelmholtzOperator op(1.0, 0.1, g);
    const Field b = random_field(g, 11);
    const auto r = helmholtz_solve(op, b, SolverMethod::gmres, 1e-8);
    EXPECT_LE(r.stats.residual_norm, 1e-8 * std::sqrt(inner(b, b) / g.dx()));
    EXPECT_GT(r.stats.iterations, 1);
}

TEST(Helmholtz, GmresWithoutPreconditionerStallsOnFineGrids)
{
    // the condition number grows like 4 lambda / (mu dx^2); restart 30 is far too short
    const Grid g(1.0, 256);
    const HelmholtzOperator op(1.0, 0.1, g);
    const Field b = random_field(g, 2);
    EXPECT_THROW(helmholtz_solve(op, b, SolverMethod::gmres, 1e-10, 30, 200, HelmholtzPreconditioner::none),
                 NumericalError);
    EXPECT_NO_THROW(helmholtz_solve(op, b, SolverMethod::gmres, 1e-10, 30, 200, HelmholtzPreconditioner::symbol));
}

TEST(Helmholtz, NonConvenientSizeUsesDirectTransform)
{
    const Grid g(1.0, 37);
    const HelmholtzOperator op(1.0, 0.3, g);
    const Field b = random_field(g, 5);
    EXPECT_LT(rel_l2(helmholtz_solve(op, b, SolverMethod::spectral).v, helmholtz_solve(op, b).v), 1e-12);
}

TEST(Helmholtz, RejectsBadOperator)
{
    const Grid g(1.0, 8);
    EXPECT_THROW(HelmholtzOperator(0.0, 1.0, g), ValidationError);
    EXPECT_THROW(HelmholtzOperator(1.0, 0.0, g), ValidationError);
    EXPECT_THROW(helmholtz_solve(HelmholtzOperator(1.0, 1.0, g), Field(Grid(1.0, 9))), ValidationError);
}

TEST(ExpPropagate, SteadyStateIsFixedPoint)
{
    const Grid g(1.0, 32);
    const Field v(g, 2.0), s(g, 0.1 * 2.0);
    for (double eps : {1.0, 1e-3, 1e-7})
        for (double dt : {1e-6, 1e-2, 10.0}) {
            const Field out = exp_propagate(1.0, 0.1, eps, dt, v, s);
            for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(out[j], 2.0, 1e-13);
        }
}

TEST(ExpPropagate, SmallStepIsNearIdentity)
{
    const Grid g(1.0, 16);
    const Field v = neumann_mode(g, 2), s(g, 0.3);
    const Field out = exp_propagate(1.0, 0.1, 1.0, 1e-14, v, s);
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(out[j], v[j], 1e-10);
}

TEST(ExpPropagate, SingleModeClosedForm)
{
    // eps dv/dt = lambda Lap v - mu v: v = e^{(a1 - 0.1) dt / eps} phi1
    const Grid g(1.0, 64);
    const Field phi = neumann_mode(g, 1);
    const double a1 = neumann_eigenvalue(g, 1);
    const Field out = exp_propagate(1.0, 0.1, 1e-3, 1e-2, phi, Field(g));
    const double f = std::exp((a1 - 0.1) * 10.0);
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(out[j], f * phi[j], 1e-15 + 1e-12 * f);
}

TEST(ExpPropagate, MatchesFineReferenceIntegration)
{
    // mode ODE eps y' = -b y + s, y(0)=1 integrated by tiny RK4 steps
    const Grid g(1.0, 16);
    const double eps = 0.05, dt = 0.2, lambda = 0.5, mu = 0.2;
    const double b = mu - lambda * neumann_eigenvalue(g, 2);
    const double s = 0.7;
    double y = 1.0;
    const int steps = 200000;
    const double h = dt / steps;
    auto f = [&](double yy) { return (-b * yy + s) / eps; };
    for (int i = 0; i < steps; ++i) {
        const double k1 = f(y), k2 = f(y + 0.5 * h * k1), k3 = f(y + 0.5 * h * k2), k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    const Field phi = neumann_mode(g, 2);
    const Field out = exp_propagate(lambda, mu, eps, dt, phi, s * phi);
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(out[j], y * phi[j], 1e-10);
}

TEST(ExpPropagate, LinearSourceExactForRamp)
{
    // eps y' = -b y + s0 + (s1 - s0) t/dt has the closed form used by the ramp term
    const Grid g(1.0, 8);
    const double eps = 1e-3, dt = 0.01, lambda = 1.0, mu = 0.1;
    const Field v(g, 0.0), s0(g, 1.0), s1(g, 2.0);
    const Field out = exp_propagate_linear(lambda, mu, eps, dt, v, s0, s1);
    double y = 0.0;
    const int steps = 400000;
    const double h = dt / steps;
    auto f = [&](double t, double yy) { return (-mu * yy + 1.0 + t / dt) / eps; };
    double t = 0.0;
    for (int i = 0; i < steps; ++i, t += h) {
        const double k1 = f(t, y), k2 = f(t + h / 2, y + h / 2 * k1), k3 = f(t + h / 2, y + h / 2 * k2),
                     k4 = f(t + h, y + h * k3);
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(out[j], y, 1e-9);
}

TEST(ExpPropagate, AverageMatchesQuadrature)
{
    const Grid g(1.0, 64);
    const ExpPropagator prop(1.0, 0.1, 1e-3, g);
    const Field v = Field::sample(g, [](double x) { const double pi = std::numbers::pi; return std::cos(pi * x) + 0.3 * std::cos(5 * pi * x); });
    const Field s = Field::sample(g, [](double x) { return 1.0 + x * x; });
    const double dt = 0.01;
    const int m = 20000;
    // composite Simpson over [0, dt]
    Field acc = v + prop.advance(v, s, dt);
    for (int k = 1; k < m; ++k) acc.axpy(k % 2 ? 4.0 : 2.0, prop.advance(v, s, dt * k / m));
    const Field ref = acc * (1.0 / (3.0 * m));
    EXPECT_LE(norm_l2(prop.average(v, s, dt) - ref), 1e-9 * norm_l2(ref));
    // steady state averages to itself
    const Field st = helmholtz_solve(HelmholtzOperator(1.0, 0.1, g), s, SolverMethod::spectral).v;
    EXPECT_LE(norm_l2(prop.average(st, s, dt) - st), 1e-12 * norm_l2(st));
}

TEST(ExpPropagate, RejectsBadArguments)
{
    const Grid g(1.0, 8);
    EXPECT_THROW(exp_propagate(1.0, 0.1, 0.0, 0.1, Field(g), Field(g)), ValidationError);
    EXPECT_THROW(exp_propagate(1.0, 0.1, 1.0, 0.0, Field(g), Field(g)), ValidationError);
    EXPECT_THROW(exp_propagate(1.0, 0.1, 1.0, 0.1, Field(g), Field(Grid(1.0, 9))), ValidationError);
}

TEST(ExpPropagate, Phi2Series)
{
    // phi2(z) = sum_k z^k / (k+2)!
    auto series = [](double z) {
        double term = 0.5, s = 0.0;
        for (int k = 0; k < 30; ++k) {
            s += term;
            term *= z / (k + 3);
        }
        return s;
    };
    for (double z : {-1e-8, -0.3, -0.49, -0.51, -3.0, -40.0}) {
        const double ref = z < -5.0 ? (std::expm1(z) - z) / (z * z) : series(z);
        EXPECT_NEAR(detail::phi2(z), ref, 1e-14);
    }
}
