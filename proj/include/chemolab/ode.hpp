#ifndef CHEMOLAB_ODE_HPP
#define CHEMOLAB_ODE_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "chemolab/errors.hpp"
#include "chemolab/model.hpp"

namespace chemolab {

using OdeState = std::vector<double>;
using OdeRhs = std::function<OdeState(const OdeState&)>;
using OdeJacobian = std::function<Eigen::MatrixXd(const OdeState&)>;

inline OdeState ode_rhs_3pop(const OdeState& s, const ModelParams& p)
{
    const Vec3 f = kinetics(s[0], s[1], s[2], p);
    return {f[0], f[1], f[2]};
}

inline Eigen::MatrixXd jacobian_3pop(const OdeState& s, const ModelParams& p)
{
    const Mat3 J = kinetics_jacobian(s[0], s[1], s[2], p);
    Eigen::MatrixXd M(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) M(i, j) = J[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return M;
}

/// One prey, one predator: state (u1, u3).
inline std::array<double, 2> ode_rhs_pp(double u1, double u3, const ModelParams& p)
{
    const double h = p.m1 * u1 / (p.eta1 + u1);
    return {p.alpha1 * u1 * (1.0 - u1) - h * u3, (p.gamma1 * h - p.k) * u3 - p.l * u3 * u3};
}

inline Eigen::MatrixXd jacobian_pp(double u1, double u3, const ModelParams& p)
{
    const double h = p.m1 * u1 / (p.eta1 + u1);
    const double dh = p.m1 * p.eta1 / ((p.eta1 + u1) * (p.eta1 + u1));
    Eigen::MatrixXd M(2, 2);
    M << p.alpha1 * (1.0 - 2.0 * u1) - dh * u3, -h, p.gamma1 * dh * u3, p.gamma1 * h - p.k - 2.0 * p.l * u3;
    return M;
}

enum class OdeModel { three_pop, pp };

inline std::string to_string(OdeModel m) { return m == OdeModel::pp ? "pp" : "3pop"; }

inline OdeRhs make_rhs(OdeModel m, const ModelParams& p)
{
    if (m == OdeModel::pp)
        return [p](const OdeState& s) {
            const auto f = ode_rhs_pp(s[0], s[1], p);
            return OdeState{f[0], f[1]};
        };
    return [p](const OdeState& s) { return ode_rhs_3pop(s, p); };
}

inline OdeJacobian make_jacobian(OdeModel m, const ModelParams& p)
{
    if (m == OdeModel::pp) return [p](const OdeState& s) { return jacobian_pp(s[0], s[1], p); };
    return [p](const OdeState& s) { return jacobian_3pop(s, p); };
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)

struct OdeTrajectory {
    std::vector<double> times;
    std::vector<OdeState> states;
    long steps = 0;
    long rejected = 0;
};

struct IntegrateOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h0 = 0.0;  // 0: automatic
    long max_steps = 10'000'000;
};

/// Adaptive DP5(4) with FSAL. Without output_times every accepted step is
/// recorded; otherwise states at the requested times come from cubic
/// Hermite interpolation on the bracketing step.
inline OdeTrajectory integrate(const OdeRhs& rhs, const OdeState& s0, double T, const IntegrateOptions& opt = {},
                               const std::vector<double>& output_times = {})
{
    require(opt.rtol > 0.0 && opt.atol > 0.0, "integrate: rtol and atol must be positive");
    require(T >= 0.0 && std::isfinite(T), "integrate: T must be non-negative");
    for (std::size_t i = 0; i < output_times.size(); ++i) {
        require(output_times[i] >= 0.0 && output_times[i] <= T, "integrate: output times must lie in [0, T]");
        if (i > 0) require(output_times[i] > output_times[i - 1], "integrate: output times must increase");
    }

    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b*, the embedded fourth-order difference
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2, (void)c3, (void)c4, (void)c5;

    const std::size_t n = s0.size();
    OdeTrajectory tr;
    OdeState y = s0, k1 = rhs(y);
    double t = 0.0;
    std::size_t next_out = 0;
    auto emit = [&](double tt, const OdeState& s) {
        tr.times.push_back(tt);
        tr.states.push_back(s);
    };
    if (output_times.empty())
        emit(0.0, y);
    else
        while (next_out < output_times.size() && output_times[next_out] == 0.0) emit(output_times[next_out++], y);
    if (T == 0.0) return tr;

    auto scale = [&](double a, double b) { return opt.atol + opt.rtol * std::max(std::abs(a), std::abs(b)); };
    double h = opt.h0;
    if (h <= 0.0) {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = scale(y[i], y[i]);
            d0 = std::max(d0, std::abs(y[i]) / sc);
            d1 = std::max(d1, std::abs(k1[i]) / sc);
        }
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min(h, T);
    }

    OdeState tmp(n), k2, k3, k4, k5, k6, k7, ynew(n);
    while (t < T) {
        if (tr.steps + tr.rejected >= opt.max_steps) throw NumericalError("integrate: step budget exhausted at t=" + std::to_string(t));
        if (h < 1e-14 * std::max(1.0, std::abs(t))) {
            std::ostringstream msg;
            msg << "stiffness failure: step size underflow at t=" << t << " (h=" << h << ")";
            throw NumericalError(msg.str());
        }
        const bool last = t + h >= T;
        if (last) h = T - t;
        auto stage = [&](std::initializer_list<std::pair<double, const OdeState*>> terms) {
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (const auto& [a, k] : terms) s += a * (*k)[i];
                tmp[i] = y[i] + h * s;
            }
            return rhs(tmp);
        };
        k2 = stage({{a21, &k1}});
        k3 = stage({{a31, &k1}, {a32, &k2}});
        k4 = stage({{a41, &k1}, {a42, &k2}, {a43, &k3}});
        k5 = stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
        k6 = stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        k7 = rhs(ynew);
        double err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            const double e =
                h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            finite = finite && std::isfinite(ynew[i]);
            err = std::max(err, std::abs(e) / scale(y[i], ynew[i]));
        }
        if (!finite) err = std::numeric_limits<double>::infinity();

        if (err <= 1.0) {
            const double t_new = last ? T : t + h;
            if (output_times.empty()) {
                emit(t_new, ynew);
            } else {
                while (next_out < output_times.size() && output_times[next_out] <= t_new) {
                    const double th = (output_times[next_out] - t) / h;
                    const double h00 = (1 + 2 * th) * (1 - th) * (1 - th), h10 = th * (1 - th) * (1 - th);
                    const double h01 = th * th * (3 - 2 * th), h11 = th * th * (th - 1);
                    OdeState s(n);
                    for (std::size_t i = 0; i < n; ++i)
                        s[i] = h00 * y[i] + h10 * h * k1[i] + h01 * ynew[i] + h11 * h * k7[i];
                    if (output_times[next_out] == t_new) s = ynew;
                    emit(output_times[next_out++], s);
                }
            }
            t = t_new;
            y = ynew;
            k1 = k7;
            ++tr.steps;
            const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h *= fac;
        } else {
            ++tr.rejected;
            h *= std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9) : 0.1;
        }
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Equilibria and stability

struct Equilibrium {
    OdeState state;
    std::vector<std::complex<double>> eigenvalues;
    double re_max = 0.0;
    bool stable = false;
};

inline double max_abs(const OdeState& f)
{
    double m = 0.0;
    for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

/// Damped Newton from one guess; empty when it does not reach ||f|| <= tol.
inline std::optional<OdeState> newton_root(const OdeRhs& rhs, const OdeJacobian& jac, OdeState x, double tol = 1e-12,
                                           int maxit = 100)
{
    const auto n = static_cast<Eigen::Index>(x.size());
    OdeState f = rhs(x);
    double fn = max_abs(f);
    for (int it = 0; it < maxit && fn > tol; ++it) {
        const Eigen::MatrixXd J = jac(x);
        Eigen::VectorXd b(n);
        for (Eigen::Index i = 0; i < n; ++i) b(i) = -f[static_cast<std::size_t>(i)];
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) return std::nullopt;
        const Eigen::VectorXd dx = lu.solve(b);
        double step = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
            OdeState xt = x;
            for (Eigen::Index i = 0; i < n; ++i) xt[static_cast<std::size_t>(i)] += step * dx(i);
            const OdeState ft = rhs(xt);
            const double ftn = max_abs(ft);
            if (std::isfinite(ftn) && ftn < fn) {
                x = xt, f = ft, fn = ftn;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    if (!(fn <= tol)) return std::nullopt;
    return x;
}

inline std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& J)
{
    std::vector<std::complex<double>> ev;
    if (J.rows() == 2) {
        const double tr = J(0, 0) + J(1, 1), det = J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0);
        const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr / 4.0 - det));
        ev = {tr / 2.0 + disc, tr / 2.0 - disc};
    } else {
        const Eigen::EigenSolver<Eigen::MatrixXd> es(J, false);
        for (Eigen::Index i = 0; i < J.rows(); ++i) ev.push_back(es.eigenvalues()(i));
    }
    std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.real() > b.real(); });
    return ev;
}

inline Equilibrium classify_stability(const OdeState& eq, const OdeJacobian& jac)
{
    Equilibrium e;
    e.state = eq;
    e.eigenvalues = eigenvalues(jac(eq));
    e.re_max = -std::numeric_limits<double>::infinity();
    for (const auto& l : e.eigenvalues) e.re_max = std::max(e.re_max, l.real());
    e.stable = e.re_max < -1e-10;
    return e;
}

/// Newton from every point of a lattice over [0, upper]^dim. Roots with
/// ||f|| <= 1e-12 and no negative component are kept, deduplicated within 1e-8.
inline std::vector<OdeState> find_equilibria(const OdeRhs& rhs, const OdeJacobian& jac, std::size_t dim,
                                             int per_axis = 7, double upper = 1.5)
{
    require(dim >= 1 && per_axis >= 2, "find_equilibria: bad lattice");
    std::vector<OdeState> roots;
    std::vector<int> idx(dim, 0);
    auto consider = [&](OdeState x) {
        for (double& v : x) {
            if (v < -1e-10) return;
            v = std::max(v, 0.0);
        }
        if (max_abs(rhs(x)) > 1e-12) return;
        for (const auto& r : roots) {
            double d = 0.0;
            for (std::size_t i = 0; i < dim; ++i) d = std::max(d, std::abs(r[i] - x[i]));
            if (d <= 1e-8) return;
        }
        roots.push_back(x);
    };
    while (true) {
        OdeState g(dim);
        for (std::size_t i = 0; i < dim; ++i) g[i] = upper * idx[i] / (per_axis - 1);
        if (auto r = newton_root(rhs, jac, g)) consider(*r);
        std::size_t a = 0;
        while (a < dim && ++idx[a] == per_axis) idx[a++] = 0;
        if (a == dim) break;
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

// ---------------------------------------------------------------------------
// Oscillation detection

struct OscillationRecord {
    bool detected = false;
    std::vector<double> amplitude;  // peak-to-trough over the retained window, per component
    std::vector<double> minimum, maximum;
    double period = 0.0;
    int peaks = 0;
};

/// Drops the first transient_fraction of the samples, then looks for strict
/// local maxima of component 0 in the upper half of its range: at least 5, amplitude above 1e-3 and the
/// last three inter-peak intervals within 20% of each other.
inline OscillationRecord detect_oscillation(const OdeTrajectory& tr, double transient_fraction = 0.5)
{
    require(transient_fraction >= 0.0 && transient_fraction < 1.0, "detect_oscillation: bad transient fraction");
    OscillationRecord rec;
    if (tr.states.empty()) return rec;
    const double t0 = tr.times.front() + transient_fraction * (tr.times.back() - tr.times.front());
    std::size_t first = 0;
    while (first < tr.times.size() && tr.times[first] < t0) ++first;
    const std::size_t dim = tr.states.front().size();
    rec.minimum.assign(dim, std::numeric_limits<double>::infinity());
    rec.maximum.assign(dim, -std::numeric_limits<double>::infinity());
    for (std::size_t s = first; s < tr.states.size(); ++s)
        for (std::size_t i = 0; i < dim; ++i) {
            rec.minimum[i] = std::min(rec.minimum[i], tr.states[s][i]);
            rec.maximum[i] = std::max(rec.maximum[i], tr.states[s][i]);
        }
    rec.amplitude.resize(dim);
    for (std::size_t i = 0; i < dim; ++i)
        rec.amplitude[i] = first < tr.states.size() ? rec.maximum[i] - rec.minimum[i] : 0.0;

    // maxima in the lower half of the range are numerical ripple, not peaks
    const double mid = 0.5 * (rec.minimum[0] + rec.maximum[0]);
    std::vector<double> peak_t;
    for (std::size_t s = std::max<std::size_t>(first, 1); s + 1 < tr.states.size(); ++s) {
        const double a = tr.states[s - 1][0], b = tr.states[s][0], c = tr.states[s + 1][0];
        if (b > a && b > c && b >= mid) peak_t.push_back(tr.times[s]);
    }
    rec.peaks = static_cast<int>(peak_t.size());
    if (peak_t.size() < 5 || rec.amplitude[0] <= 1e-3) return rec;
    const std::size_t m = peak_t.size();
    const double p1 = peak_t[m - 3] - peak_t[m - 4], p2 = peak_t[m - 2] - peak_t[m - 3], p3 = peak_t[m - 1] - peak_t[m - 2];
    const double lo = std::min({p1, p2, p3}), hi = std::max({p1, p2, p3});
    if (hi > 1.2 * lo) return rec;
    rec.detected = true;
    rec.period = (p1 + p2 + p3) / 3.0;
    return rec;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

struct BranchPoint {
    double param = 0.0;
    Equilibrium equilibrium;               // the reported branch
    std::vector<Equilibrium> equilibria;   // every non-negative root found
    bool any_stable = false;
    OscillationRecord oscillation;
    std::optional<OdeState> final_state;   // end of the long run, when one was made
};

/// Settable continuous parameters by name.
inline double& param_ref(ModelParams& p, const std::string& name)
{
    if (name == "m1") return p.m1;
    if (name == "m2") return p.m2;
    if (name == "eta1") return p.eta1;
    if (name == "eta2") return p.eta2;
    if (name == "alpha1") return p.alpha1;
    if (name == "alpha2") return p.alpha2;
    if (name == "beta1") return p.beta1;
    if (name == "beta2") return p.beta2;
    if (name == "gamma1") return p.gamma1;
    if (name == "gamma2") return p.gamma2;
    if (name == "k") return p.k;
    if (name == "l") return p.l;
    throw ValidationError("bifurcation: unknown sweep parameter " + name);
}

struct SweepOptions {
    double T = 2000.0;
    double sample_dt = 0.05;
    double transient_fraction = 0.5;
    IntegrateOptions integrate;
    int lattice = 7;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Picks the reported equilibrium: a stable one when present (the one with
/// the most surviving species), else the one with the most surviving species.
inline Equilibrium pick_branch(const std::vector<Equilibrium>& eqs)
{
    auto alive = [](const Equilibrium& e) {
        int a = 0;
        for (double v : e.state) a += v > 1e-10;
        return a;
    };
    const Equilibrium* best = nullptr;
    for (const auto& e : eqs) {
        if (!best) {
            best = &e;
            continue;
        }
        const auto key = [&](const Equilibrium& x) { return std::make_pair(x.stable, alive(x)); };
        if (key(e) > key(*best)) best = &e;
    }
    return best ? *best : Equilibrium{};
}

inline BranchPoint sweep_point(OdeModel model, const std::string& param, double value, ModelParams p,
                               const SweepOptions& opt)
{
    param_ref(p, param) = value;
    p.validate();
    const OdeRhs rhs = make_rhs(model, p);
    const OdeJacobian jac = make_jacobian(model, p);
    const std::size_t dim = model == OdeModel::pp ? 2 : 3;
    BranchPoint bp;
    bp.param = value;
    for (const auto& r : find_equilibria(rhs, jac, dim, opt.lattice)) {
        bp.equilibria.push_back(classify_stability(r, jac));
        bp.any_stable = bp.any_stable || bp.equilibria.back().stable;
    }
    bp.equilibrium = pick_branch(bp.equilibria);
    if (!bp.any_stable) {
        // start near the interior branch so the run leaves the unstable state
        OdeState s0 = bp.equilibrium.state.empty() ? OdeState(dim, 0.5) : bp.equilibrium.state;
        for (double& v : s0) v = v > 1e-10 ? 1.05 * v : 0.1;
        const int count = static_cast<int>(std::round(opt.T / opt.sample_dt));
        std::vector<double> times(static_cast<std::size_t>(count) + 1);
        for (int i = 0; i <= count; ++i) times[static_cast<std::size_t>(i)] = opt.T * i / count;
        const OdeTrajectory tr = integrate(rhs, s0, opt.T, opt.integrate, times);
        bp.oscillation = detect_oscillation(tr, opt.transient_fraction);
        bp.final_state = tr.states.back();
    } else {
        bp.oscillation.amplitude.assign(dim, 0.0);
    }
    return bp;
}

/// Independent per-value work on a small thread pool; results land in the
/// order of `values`.
inline std::vector<BranchPoint> bifurcation_sweep(OdeModel model, const std::string& param,
                                                  const std::vector<double>& values, const ModelParams& p,
                                                  const SweepOptions& opt = {})
{
    ModelParams probe = p;
    (void)param_ref(probe, param);
    std::vector<BranchPoint> out(values.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < values.size();) {
            try {
                out[i] = sweep_point(model, param, values[i], p, opt);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    unsigned nt = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, std::max<std::size_t>(values.size(), 1)));
    if (nt <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

/// Regime label of a sweep point, used for ordering checks.
enum class Regime { predator_extinction, coexistence, oscillation, other };

inline Regime regime_of(const BranchPoint& bp)
{
    if (bp.any_stable) {
        const auto& s = bp.equilibrium.state;
        return s.back() <= 1e-10 ? Regime::predator_extinction : Regime::coexistence;
    }
    return bp.oscillation.detected ? Regime::oscillation : Regime::other;
}

inline std::string to_string(Regime r)
{
    switch (r) {
    case Regime::predator_extinction: return "predator_extinction";
    case Regime::coexistence: return "coexistence";
    case Regime::oscillation: return "oscillation";
    default: return "other";
    }
}

/// Whether the long-time state of a 3pop sweep point has lost u2.
inline bool u2_extinct(const BranchPoint& bp, double tol = 1e-6)
{
    if (bp.equilibrium.state.size() != 3) return false;
    if (bp.any_stable) return bp.equilibrium.state[1] <= tol;
    return !bp.oscillation.maximum.empty() && bp.oscillation.maximum[1] <= tol;
}

} // namespace chemolab

#endif
