#ifndef CHEMOLAB_GMRES_HPP
#define CHEMOLAB_GMRES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chemolab/errors.hpp"

namespace chemolab {

enum class SolverMethod { tridiagonal, gmres, spectral };

inline const char* to_string(SolverMethod m)
{
    switch (m) {
    case SolverMethod::tridiagonal: return "tridiagonal";
    case SolverMethod::gmres: return "gmres";
    case SolverMethod::spectral: return "spectral";
    }
    return "?";
}

struct SolverStats {
    int iterations = 0;
    double residual_norm = 0.0;
    SolverMethod method = SolverMethod::tridiagonal;
};

struct GmresOptions {
    double tol = 1e-10;  // relative to ||b||
    int restart = 30;
    int maxit = 500;     // cap on total inner iterations (operator applications)
    // Optional: accept(x, r) may declare x converged when ||r|| <= tol ||b|| is
    // below what floating point can represent for this operator.
    std::function<bool(std::span<const double>, std::span<const double>)> accept;
    // Optional right preconditioner: precond(in, out) writes M^{-1} in.
    // The stopping test still uses the unpreconditioned residual.
    std::function<void(std::span<const double>, std::span<double>)> precond;
};

struct GmresResult {
    std::vector<double> x;  // best iterate, also when not converged
    SolverStats stats;
    bool converged = false;
    bool at_roundoff = false;  // accepted by opt.accept rather than by tol
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

} // namespace detail

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations,
/// optionally right-preconditioned.
///
/// `apply(in, out)` writes A*in into out; both are std::span<double>-like.
/// Stops when ||A x - b|| <= tol ||b||. The residual tracked through the
/// rotations is confirmed against the true residual at every restart.
template <class Apply>
GmresResult gmres(Apply&& apply, std::span<const double> b, const GmresOptions& opt = {},
                  std::span<const double> x0 = {})
{
    require(opt.tol > 0.0, "gmres: tol must be positive");
    require(opt.restart >= 1 && opt.maxit >= 1, "gmres: restart and maxit must be >= 1");

    const std::size_t n = b.size();
    const std::size_t m = static_cast<std::size_t>(std::min<long>(opt.restart, static_cast<long>(n)));

    GmresResult res;
    res.stats.method = SolverMethod::gmres;
    res.x.assign(n, 0.0);
    if (!x0.empty()) std::copy(x0.begin(), x0.end(), res.x.begin());

    const double bnorm = detail::norm2(b);
    if (bnorm == 0.0) {
        std::fill(res.x.begin(), res.x.end(), 0.0);
        res.converged = true;
        return res;
    }
    const double target = opt.tol * bnorm;

    std::vector<double> r(n), w(n), z(n), update(n);
    std::vector<std::vector<double>> V(m + 1, std::vector<double>(n));
    std::vector<double> H((m + 1) * m), cs(m), sn(m), g(m + 1), y(m);
    auto h = [&](std::size_t i, std::size_t j) -> double& { return H[i * m + j]; };

    auto true_residual = [&]() {
        apply(std::span<const double>(res.x), std::span<double>(r));
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        return detail::norm2(r);
    };

    auto accepted = [&]() { return opt.accept && opt.accept(res.x, r); };

    double beta = true_residual();
    int total = 0;
    while (beta > target && total < opt.maxit && !(res.at_roundoff = accepted())) {
        for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;

        std::size_t k = 0;
        for (; k < m && total < opt.maxit; ++k) {
            ++total;
            if (opt.precond) {
                opt.precond(std::span<const double>(V[k]), std::span<double>(z));
                apply(std::span<const double>(z), std::span<double>(w));
            } else {
                apply(std::span<const double>(V[k]), std::span<double>(w));
            }
            for (std::size_t i = 0; i <= k; ++i) {
                h(i, k) = detail::dot(w, V[i]);
                for (std::size_t q = 0; q < n; ++q) w[q] -= h(i, k) * V[i][q];
            }
            const double wnorm = detail::norm2(w);
            for (std::size_t i = 0; i < k; ++i) {
                const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
                h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
                h(i, k) = t;
            }
            const double denom = std::hypot(h(k, k), wnorm);
            cs[k] = h(k, k) / denom;
            sn[k] = wnorm / denom;
            h(k, k) = denom;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];

            const bool breakdown = wnorm <= 1e-300;
            if (!breakdown)
                for (std::size_t q = 0; q < n; ++q) V[k + 1][q] = w[q] / wnorm;
            if (std::abs(g[k + 1]) <= target || breakdown) {
                ++k;
                break;
            }
        }

        for (std::size_t i = k; i-- > 0;) {
            double s = g[i];
            for (std::size_t j = i + 1; j < k; ++j) s -= h(i, j) * y[j];
            y[i] = s / h(i, i);
        }
        std::fill(update.begin(), update.end(), 0.0);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t q = 0; q < n; ++q) update[q] += y[j] * V[j][q];
        if (opt.precond) {
            opt.precond(std::span<const double>(update), std::span<double>(z));
            for (std::size_t q = 0; q < n; ++q) res.x[q] += z[q];
        } else {
            for (std::size_t q = 0; q < n; ++q) res.x[q] += update[q];
        }

        beta = true_residual();
    }

    res.stats.iterations = total;
    res.stats.residual_norm = beta;
    if (beta > target && !res.at_roundoff) res.at_roundoff = accepted();
    res.converged = beta <= target || res.at_roundoff;
    return res;
}

} // namespace chemolab

#endif
