#ifndef CHEMOLAB_LINSOLVE_HPP
#define CHEMOLAB_LINSOLVE_HPP

#include <cmath>
#include <limits>
#include <cstddef>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include "chemolab/cosine_transform.hpp"
#include "chemolab/errors.hpp"
#include "chemolab/gmres.hpp"
#include "chemolab/grid.hpp"

namespace chemolab {

/// A = -lambda * Laplacian_h + mu * I on a Neumann grid. SPD with smallest
/// eigenvalue mu (constant mode).
class HelmholtzOperator {
public:
    HelmholtzOperator(double lambda, double mu, const Grid& g) : lambda_(lambda), mu_(mu), grid_(g)
    {
        require(lambda > 0.0, "helmholtz: lambda must be positive");
        require(mu > 0.0, "helmholtz: mu must be positive");
    }

    double lambda() const { return lambda_; }
    double mu() const { return mu_; }
    const Grid& grid() const { return grid_; }

    /// Eigenvalue mu - lambda * a_k of cosine mode k.
    double symbol(std::size_t k) const { return mu_ - lambda_ * neumann_eigenvalue(grid_, k); }

    void apply(std::span<const double> v, std::span<double> out) const
    {
        kernel::laplacian(v, grid_.dx(), out);
        for (std::size_t j = 0; j < v.size(); ++j) out[j] = mu_ * v[j] - lambda_ * out[j];
    }

    Field apply(const Field& v) const
    {
        require(v.grid() == grid_, "helmholtz: field grid mismatch");
        Field out(grid_);
        apply(v.span(), out.span());
        return out;
    }

private:
    double lambda_;
    double mu_;
    Grid grid_;
};

struct HelmholtzResult {
    Field v;
    SolverStats stats;
};

namespace detail {

// Thomas elimination for the symmetric tridiagonal Neumann Helmholtz matrix.
inline void helmholtz_tridiagonal(const HelmholtzOperator& op, std::span<const double> rhs, std::span<double> x)
{
    const std::size_t n = rhs.size();
    const double off = -op.lambda() / (op.grid().dx() * op.grid().dx());
    std::vector<double> c(n);
    auto diag = [&](std::size_t j) {
        return (j == 0 || j + 1 == n) ? op.mu() - off : op.mu() - 2.0 * off;
    };
    double b = diag(0);
    c[0] = off / b;
    x[0] = rhs[0] / b;
    for (std::size_t j = 1; j < n; ++j) {
        b = diag(j) - off * c[j - 1];
        c[j] = off / b;
        x[j] = (rhs[j] - off * x[j - 1]) / b;
    }
    for (std::size_t j = n - 1; j-- > 0;) x[j] -= c[j] * x[j + 1];
}

inline double residual_norm(const HelmholtzOperator& op, std::span<const double> v, std::span<const double> rhs)
{
    std::vector<double> r(v.size());
    op.apply(v, r);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += (r[j] - rhs[j]) * (r[j] - rhs[j]);
    return std::sqrt(s);
}

// max_j |r_j| / (|A| |v| + |rhs|)_j, the componentwise backward error.
inline double backward_error(const HelmholtzOperator& op, std::span<const double> v, std::span<const double> r,
                             std::span<const double> rhs)
{
    const std::size_t n = v.size();
    const double s = op.lambda() / (op.grid().dx() * op.grid().dx());
    double w = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double vl = std::abs(v[j > 0 ? j - 1 : j]), vr = std::abs(v[j + 1 < n ? j + 1 : j]);
        const double scale = op.mu() * std::abs(v[j]) + s * (vl + 2.0 * std::abs(v[j]) + vr) + std::abs(rhs[j]);
        if (scale > 0.0) w = std::max(w, std::abs(r[j]) / scale);
    }
    return w;
}

} // namespace detail

/// Right preconditioner for GMRES on A: none, or the inverse of the
/// continuum symbol mu + lambda (k pi / L)^2 applied through the cosine
/// transform. Its ratio to the discrete symbol lies in [4/pi^2, 1].
enum class HelmholtzPreconditioner { none, symbol };

inline const char* to_string(HelmholtzPreconditioner p)
{
    return p == HelmholtzPreconditioner::none ? "none" : "symbol";
}

/// Solves A v = rhs. Direct methods are exact up to round-off; GMRES stops at
/// ||A v - rhs|| <= tol ||rhs||, or once the componentwise backward error is
/// within 16 unit roundoffs (fine grids put tol below that floor), and throws
/// NumericalError otherwise.
inline HelmholtzResult helmholtz_solve(const HelmholtzOperator& op, const Field& rhs,
                                       SolverMethod method = SolverMethod::tridiagonal, double tol = 1e-10,
                                       int restart = 30, int maxit = 500,
                                       HelmholtzPreconditioner precond = HelmholtzPreconditioner::symbol)
{
    require(rhs.grid() == op.grid(), "helmholtz: rhs grid mismatch");
    HelmholtzResult out{Field(op.grid()), {}};
    out.stats.method = method;
    switch (method) {
    case SolverMethod::tridiagonal:
        detail::helmholtz_tridiagonal(op, rhs.span(), out.v.span());
        out.stats.iterations = 1;
        break;
    case SolverMethod::spectral: {
        auto tr = CosineTransform::get(rhs.size());
        std::vector<double> c(rhs.size());
        tr->forward(rhs.span(), c);
        for (std::size_t k = 0; k < c.size(); ++k) c[k] /= op.symbol(k);
        tr->inverse(c, out.v.span());
        out.stats.iterations = 1;
        break;
    }
    case SolverMethod::gmres: {
        require(tol > 0.0, "helmholtz: tol must be positive");
        GmresOptions gopt{tol, restart, maxit, {}};
        gopt.accept = [&](std::span<const double> x, std::span<const double> r) {
            return detail::backward_error(op, x, r, rhs.span()) <= 16.0 * std::numeric_limits<double>::epsilon() / 2;
        };
        std::vector<double> coeff;
        std::shared_ptr<const CosineTransform> tr;
        if (precond == HelmholtzPreconditioner::symbol) {
            tr = CosineTransform::get(rhs.size());
            coeff.resize(rhs.size());
            const double scale = std::numbers::pi / op.grid().length();
            gopt.precond = [&, scale](std::span<const double> in, std::span<double> o) {
                tr->forward(in, coeff);
                for (std::size_t k = 0; k < coeff.size(); ++k) {
                    const double kk = scale * static_cast<double>(k);
                    coeff[k] /= op.mu() + op.lambda() * kk * kk;
                }
                tr->inverse(coeff, o);
            };
        }
        auto r = gmres([&](std::span<const double> in, std::span<double> o) { op.apply(in, o); }, rhs.span(), gopt);
        if (!r.converged) {
            std::ostringstream msg;
            msg << "gmres did not converge: iterations=" << r.stats.iterations
                << " residual=" << r.stats.residual_norm;
            throw NumericalError(msg.str());
        }
        out.v = Field(op.grid(), std::move(r.x));
        out.stats = r.stats;
        return out;
    }
    }
    out.stats.residual_norm = detail::residual_norm(op, out.v.span(), rhs.span());
    return out;
}

namespace detail {

// phi2(z) = (e^z - 1 - z) / z^2, series near zero.
inline double phi2(double z)
{
    if (std::abs(z) < 0.5) {
        double term = 0.5, sum = 0.5;
        for (int j = 1; j < 20; ++j) {
            term *= z / static_cast<double>(j + 2);
            sum += term;
        }
        return sum;
    }
    return (std::expm1(z) - z) / (z * z);
}

} // namespace detail

/// Exact per-mode propagator for eps dv/dt = lambda Lap_h v - mu v + s(t).
///
/// Mode k decays with rate rho_k = (lambda a_k - mu)/eps < 0. With the source
/// frozen over the step (exponential Euler):
///     v_k <- e^{z} v_k + (1 - e^{z}) s_k / b_k,   z = rho_k dt, b_k = mu - lambda a_k.
/// With the source linear in time between s0 and s1 the update adds
///     (s1_k - s0_k) * (1 + z - e^{z}) / (b_k z),
/// which reproduces the O(eps) lag of the quasi-steady state for any ratio
/// dt / eps. Per-mode factors are cached for the last dt.
class ExpPropagator {
public:
    ExpPropagator(double lambda, double mu, double eps, const Grid& g)
        : op_(lambda, mu, g), eps_(eps), transform_(CosineTransform::get(g.size()))
    {
        require(eps > 0.0, "exp_propagate: eps must be positive");
        symbol_.resize(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) symbol_[k] = op_.symbol(k);
    }

    const HelmholtzOperator& op() const { return op_; }
    double eps() const { return eps_; }

    /// Source frozen at `source` over the step.
    Field advance(const Field& v, const Field& source, double dt) const { return advance(v, source, source, dt); }

    /// Source varying linearly from s0 (start of step) to s1 (end of step).
    Field advance(const Field& v, const Field& s0, const Field& s1, double dt) const
    {
        require(dt > 0.0, "exp_propagate: dt must be positive");
        require(v.grid() == op_.grid() && s0.grid() == op_.grid() && s1.grid() == op_.grid(),
                "exp_propagate: grid mismatch");
        update_factors(dt);
        const std::size_t n = v.size();
        std::vector<double> vh(n), sh0(n), sh1(n);
        transform_->forward(v.span(), vh);
        transform_->forward(s0.span(), sh0);
        const bool linear = &s0 != &s1;
        if (linear) transform_->forward(s1.span(), sh1);
        for (std::size_t k = 0; k < n; ++k) {
            double r = decay_[k] * vh[k] + hold_[k] * sh0[k];
            if (linear) r += ramp_[k] * (sh1[k] - sh0[k]);
            vh[k] = r;
        }
        Field out(op_.grid());
        transform_->inverse(vh, out.span());
        return out;
    }

    /// Mean of the frozen-source solution over [0, dt]:
    /// phi1(z) v + (1 - phi1(z)) s / b per mode, z = -b dt / eps.
    Field average(const Field& v, const Field& source, double dt) const
    {
        require(dt > 0.0, "exp_propagate: dt must be positive");
        require(v.grid() == op_.grid() && source.grid() == op_.grid(), "exp_propagate: grid mismatch");
        const std::size_t n = v.size();
        std::vector<double> vh(n), sh(n);
        transform_->forward(v.span(), vh);
        transform_->forward(source.span(), sh);
        for (std::size_t k = 0; k < n; ++k) {
            const double b = symbol_[k];
            const double z = -b * dt / eps_;
            const double phi1 = z == 0.0 ? 1.0 : std::expm1(z) / z;
            vh[k] = phi1 * vh[k] + (1.0 - phi1) * sh[k] / b;
        }
        Field out(op_.grid());
        transform_->inverse(vh, out.span());
        return out;
    }

private:
    void update_factors(double dt) const
    {
        if (dt == cached_dt_) return;
        const std::size_t n = symbol_.size();
        decay_.resize(n);
        hold_.resize(n);
        ramp_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double b = symbol_[k];
            const double z = -b * dt / eps_;
            const double em1 = std::expm1(z);
            decay_[k] = em1 + 1.0;
            hold_[k] = -em1 / b;
            // (1 + z - e^z)/(b z) = (dt/eps) * phi2(z)
            ramp_[k] = (dt / eps_) * detail::phi2(z);
        }
        cached_dt_ = dt;
    }

    HelmholtzOperator op_;
    double eps_;
    std::shared_ptr<const CosineTransform> transform_;
    std::vector<double> symbol_;
    mutable double cached_dt_ = -1.0;
    mutable std::vector<double> decay_, hold_, ramp_;
};

/// Exponential-Euler step of eps dv/dt = lambda Lap_h v - mu v + source.
inline Field exp_propagate(double lambda, double mu, double eps, double dt, const Field& v, const Field& source)
{
    require(eps > 0.0, "exp_propagate: eps must be positive");
    require(dt > 0.0, "exp_propagate: dt must be positive");
    return ExpPropagator(lambda, mu, eps, v.grid()).advance(v, source, dt);
}

/// Same, with the source interpolated linearly from s0 to s1 across the step.
inline Field exp_propagate_linear(double lambda, double mu, double eps, double dt, const Field& v, const Field& s0,
                                  const Field& s1)
{
    require(eps > 0.0, "exp_propagate: eps must be positive");
    require(dt > 0.0, "exp_propagate: dt must be positive");
    return ExpPropagator(lambda, mu, eps, v.grid()).advance(v, s0, s1, dt);
}

} // namespace chemolab

#endif
