#ifndef CHEMOLAB_GRID_HPP
#define CHEMOLAB_GRID_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chemolab/errors.hpp"

namespace chemolab {

/// Cell-centered uniform grid on (0, L) with homogeneous Neumann walls.
///
/// Cell j covers [j dx, (j+1) dx] and is sampled at x_j = (j + 1/2) dx.
/// Ghost cells mirror the boundary cells, so the discrete no-flux condition
/// holds exactly and cos(k pi x / L) restricted to the centers is an exact
/// eigenvector of the three-point Laplacian.
class Grid {
public:
    Grid(double length, std::size_t cells) : length_(length), n_(cells)
    {
        require(std::isfinite(length) && length > 0.0, "grid: L must be positive, got " + std::to_string(length));
        require(cells >= 4, "grid: n must be >= 4, got " + std::to_string(cells));
        dx_ = length_ / static_cast<double>(n_);
    }

    double length() const { return length_; }
    std::size_t size() const { return n_; }
    double dx() const { return dx_; }
    double center(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dx_; }

    std::vector<double> centers() const
    {
        std::vector<double> x(n_);
        for (std::size_t j = 0; j < n_; ++j) x[j] = center(j);
        return x;
    }

    friend bool operator==(const Grid& a, const Grid& b) { return a.length_ == b.length_ && a.n_ == b.n_; }

private:
    double length_;
    std::size_t n_;
    double dx_;
};

inline Grid make_grid(double length, long long cells)
{
    require(cells >= 4, "grid: n must be >= 4, got " + std::to_string(cells));
    return Grid(length, static_cast<std::size_t>(cells));
}

/// Scalar grid function. Grid is held by value (it is two numbers).
class Field {
public:
    explicit Field(const Grid& g, double fill = 0.0) : grid_(g), values_(g.size(), fill) {}
    Field(const Grid& g, std::vector<double> values) : grid_(g), values_(std::move(values))
    {
        require(values_.size() == grid_.size(), "field: expected " + std::to_string(grid_.size()) +
                                                    " samples, got " + std::to_string(values_.size()));
    }

    template <class F>
    static Field sample(const Grid& g, F&& fn)
    {
        Field f(g);
        for (std::size_t j = 0; j < g.size(); ++j) f[j] = fn(g.center(j));
        return f;
    }

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    double dx() const { return grid_.dx(); }

    double& operator[](std::size_t j) { return values_[j]; }
    double operator[](std::size_t j) const { return values_[j]; }
    std::span<double> span() { return values_; }
    std::span<const double> span() const { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool all_finite() const
    {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double min() const
    {
        double m = values_.front();
        for (double v : values_) m = v < m ? v : m;
        return m;
    }
    double max() const
    {
        double m = values_.front();
        for (double v : values_) m = v > m ? v : m;
        return m;
    }
    /// dx * sum f_j, the midpoint-rule integral over (0, L).
    double integral() const
    {
        double s = 0.0;
        for (double v : values_) s += v;
        return s * grid_.dx();
    }
    double mean() const { return integral() / grid_.length(); }

    Field& operator+=(const Field& o)
    {
        check_same(o);
        for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += o.values_[j];
        return *this;
    }
    Field& operator-=(const Field& o)
    {
        check_same(o);
        for (std::size_t j = 0; j < values_.size(); ++j) values_[j] -= o.values_[j];
        return *this;
    }
    Field& operator*=(double a)
    {
        for (double& v : values_) v *= a;
        return *this;
    }
    /// this += a * o
    Field& axpy(double a, const Field& o)
    {
        check_same(o);
        for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += a * o.values_[j];
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }
    friend Field operator*(Field a, double s) { return a *= s; }

    void check_same(const Field& o) const
    {
        if (!(grid_ == o.grid_)) throw ValidationError("field: grid mismatch");
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

namespace kernel {

/// Face-value choice for the chemotactic flux.
enum class FaceScheme { upwind, central };

// out_j = (f_{j-1} - 2 f_j + f_{j+1}) / dx^2 with mirrored ghosts.
inline void laplacian(std::span<const double> f, double dx, std::span<double> out)
{
    const std::size_t n = f.size();
    const double s = 1.0 / (dx * dx);
    out[0] = (f[1] - f[0]) * s;
    for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (f[j - 1] - 2.0 * f[j] + f[j + 1]) * s;
    out[n - 1] = (f[n - 2] - f[n - 1]) * s;
}

// g_j = chi * (v_{j+1} - v_j) / dx on the n-1 interior faces.
inline void face_gradient(std::span<const double> v, double chi, double dx, std::span<double> g)
{
    const double s = chi / dx;
    for (std::size_t j = 0; j + 1 < v.size(); ++j) g[j] = s * (v[j + 1] - v[j]);
}

// out_j += (F_{j+1/2} - F_{j-1/2}) / dx with F = u_face * g on interior faces
// and zero flux through the walls. The term enters du/dt with a plus sign, so
// material moves with velocity -g; upwinding reads u from the cell that
// velocity leaves.
inline void add_face_flux(std::span<const double> u, std::span<const double> g, double dx, FaceScheme scheme,
                          std::span<double> out)
{
    const std::size_t n = u.size();
    const double inv_dx = 1.0 / dx;
    double flux_left = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        double uf;
        if (scheme == FaceScheme::upwind)
            uf = g[j] < 0.0 ? u[j] : u[j + 1];
        else
            uf = 0.5 * (u[j] + u[j + 1]);
        const double flux_right = uf * g[j];
        out[j] += (flux_right - flux_left) * inv_dx;
        flux_left = flux_right;
    }
    out[n - 1] -= flux_left * inv_dx;
}

} // namespace kernel

using FaceScheme = kernel::FaceScheme;

/// Three-point Neumann Laplacian.
inline Field laplacian_neumann(const Field& f)
{
    Field out(f.grid());
    kernel::laplacian(f.span(), f.dx(), out.span());
    return out;
}

/// chi * div(u grad v) in conservative face-flux form.
inline Field chemotaxis_divergence(const Field& u, const Field& v, double chi,
                                   FaceScheme scheme = FaceScheme::upwind)
{
    u.check_same(v);
    Field out(u.grid());
    std::vector<double> g(u.size() - 1);
    kernel::face_gradient(v.span(), chi, u.dx(), g);
    kernel::add_face_flux(u.span(), g, u.dx(), scheme, out.span());
    return out;
}

/// Eigenvalue of the discrete Neumann Laplacian for cosine mode k.
inline double neumann_eigenvalue(const Grid& g, std::size_t k)
{
    const double dx = g.dx();
    const double n = static_cast<double>(g.size());
    return -(2.0 / (dx * dx)) * (1.0 - std::cos(std::numbers::pi * static_cast<double>(k) / n));
}

/// phi_k(x_j) = cos(k pi (j + 1/2) / n).
inline Field neumann_mode(const Grid& g, std::size_t k)
{
    Field phi(g);
    const double n = static_cast<double>(g.size());
    for (std::size_t j = 0; j < g.size(); ++j)
        phi[j] = std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(j) + 0.5) / n);
    return phi;
}

struct NeumannMode {
    double eigenvalue;
    Field vector;
};

inline std::vector<NeumannMode> neumann_modes(const Grid& g)
{
    std::vector<NeumannMode> modes;
    modes.reserve(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) modes.push_back({neumann_eigenvalue(g, k), neumann_mode(g, k)});
    return modes;
}

/// Weighted inner product dx * sum f_j g_j.
inline double inner(const Field& f, const Field& g)
{
    f.check_same(g);
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += f[j] * g[j];
    return s * f.dx();
}

} // namespace chemolab

#endif
