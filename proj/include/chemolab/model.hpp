#ifndef CHEMOLAB_MODEL_HPP
#define CHEMOLAB_MODEL_HPP

#include <array>
#include <cmath>
#include <string>

#include "chemolab/errors.hpp"

namespace chemolab {

/// Scaled coefficients of the two-prey/one-predator chemotaxis model.
/// Index convention: species 1, 2 are prey, 3 is the predator.
struct ModelParams {
    double d1 = 0.1, d2 = 0.1, d3 = 0.1;
    double chi1 = 1.0, chi2 = 1.0;    // prey repulsion from v3
    double chi31 = 1.0, chi32 = 1.0;  // predator attraction to v1, v2
    double alpha1 = 0.8, alpha2 = 1.0;
    double beta1 = 0.6, beta2 = 0.5;
    double m1 = 0.3, m2 = 0.1;
    double eta1 = 1.0, eta2 = 1.0;  // half-saturation; not tabulated, 1.0 by choice
    double gamma1 = 0.5, gamma2 = 0.3;
    double k = 0.1, l = 0.1;
    double lambda1 = 1.0, lambda2 = 1.0, lambda3 = 1.0;
    double mu1 = 0.1, mu2 = 0.1, mu3 = 0.1;
    double zeta1 = 1.0, zeta2 = 1.0, zeta3 = 1.0;

    std::array<double, 3> d() const { return {d1, d2, d3}; }
    std::array<double, 3> lambda() const { return {lambda1, lambda2, lambda3}; }
    std::array<double, 3> mu() const { return {mu1, mu2, mu3}; }
    std::array<double, 3> zeta() const { return {zeta1, zeta2, zeta3}; }

    /// Throws ValidationError naming the first offending coefficient.
    void validate() const
    {
        auto positive = [](double v, const char* name) {
            require(std::isfinite(v) && v > 0.0, std::string(name) + " must be positive");
        };
        auto nonneg = [](double v, const char* name) {
            require(std::isfinite(v) && v >= 0.0, std::string(name) + " must be non-negative");
        };
        positive(d1, "d1"), positive(d2, "d2"), positive(d3, "d3");
        positive(lambda1, "lambda1"), positive(lambda2, "lambda2"), positive(lambda3, "lambda3");
        positive(mu1, "mu1"), positive(mu2, "mu2"), positive(mu3, "mu3");
        positive(eta1, "eta1"), positive(eta2, "eta2");
        nonneg(chi1, "chi1"), nonneg(chi2, "chi2"), nonneg(chi31, "chi31"), nonneg(chi32, "chi32");
        nonneg(alpha1, "alpha1"), nonneg(alpha2, "alpha2"), nonneg(beta1, "beta1"), nonneg(beta2, "beta2");
        nonneg(m1, "m1"), nonneg(m2, "m2"), nonneg(gamma1, "gamma1"), nonneg(gamma2, "gamma2");
        nonneg(k, "k"), nonneg(l, "l");
        nonneg(zeta1, "zeta1"), nonneg(zeta2, "zeta2"), nonneg(zeta3, "zeta3");
    }
};

inline ModelParams default_params() { return ModelParams{}; }

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// Lotka-Volterra competition for the prey, Holling type II predation.
inline Vec3 kinetics(double u1, double u2, double u3, const ModelParams& p)
{
    const double h1 = p.m1 * u1 / (p.eta1 + u1);
    const double h2 = p.m2 * u2 / (p.eta2 + u2);
    return {
        p.alpha1 * u1 * (1.0 - u1 - p.beta1 * u2) - h1 * u3,
        p.alpha2 * u2 * (1.0 - u2 - p.beta2 * u1) - h2 * u3,
        (p.gamma1 * h1 + p.gamma2 * h2 - p.k) * u3 - p.l * u3 * u3,
    };
}

inline Mat3 kinetics_jacobian(double u1, double u2, double u3, const ModelParams& p)
{
    const double h1 = p.m1 * u1 / (p.eta1 + u1);
    const double h2 = p.m2 * u2 / (p.eta2 + u2);
    // d/du (m u / (eta + u)) = m eta / (eta + u)^2
    const double dh1 = p.m1 * p.eta1 / ((p.eta1 + u1) * (p.eta1 + u1));
    const double dh2 = p.m2 * p.eta2 / ((p.eta2 + u2) * (p.eta2 + u2));
    Mat3 J{};
    J[0][0] = p.alpha1 * (1.0 - 2.0 * u1 - p.beta1 * u2) - dh1 * u3;
    J[0][1] = -p.alpha1 * p.beta1 * u1;
    J[0][2] = -h1;
    J[1][0] = -p.alpha2 * p.beta2 * u2;
    J[1][1] = p.alpha2 * (1.0 - 2.0 * u2 - p.beta2 * u1) - dh2 * u3;
    J[1][2] = -h2;
    J[2][0] = p.gamma1 * dh1 * u3;
    J[2][1] = p.gamma2 * dh2 * u3;
    J[2][2] = p.gamma1 * h1 + p.gamma2 * h2 - p.k - 2.0 * p.l * u3;
    return J;
}

} // namespace chemolab

#endif
