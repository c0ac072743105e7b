#ifndef CHEMOLAB_CONFIG_HPP
#define CHEMOLAB_CONFIG_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chemolab/errors.hpp"
#include "chemolab/linsolve.hpp"
#include "chemolab/model.hpp"
#include "chemolab/ode.hpp"
#include "chemolab/species.hpp"

namespace chemolab {

/// Validation failure tied to one configuration key. line is 0 for values
/// given as flags or left at their defaults.
class ConfigError : public ValidationError {
public:
    ConfigError(std::string key, int line, const std::string& msg)
        : ValidationError(msg), key_(std::move(key)), line_(line)
    {
    }
    const std::string& key() const { return key_; }
    int line() const { return line_; }

private:
    std::string key_;
    int line_;
};

struct RunConfig {
    ModelParams params;
    double L = 1.0;
    long long n = 256;
    double T = 2.0;
    int outputs = 11;
    SimOptions sim;
    double eps = 1e-3;
    std::vector<double> eps_list{1e-2, 1e-3, 1e-4, 1e-5};
    std::optional<double> gamma;  // empty: on the manifold
    std::string perturbation = "cos1";
    Vec3 ic_c{1.0, 1.0, 0.5};
    Vec3 ic_a{0.2, -0.2, 0.1};
    int snapshots = 64;
    double floor = 1e-9;
    double manifold_from = 0.1;
    OdeModel ode_model = OdeModel::three_pop;
    std::vector<double> ode_init{1.0, 1.0, 1.0};
    double rtol = 1e-9;
    double atol = 1e-12;
    std::string sweep_param = "m1";
    double sweep_min = 0.05;
    double sweep_max = 20.0;
    int sweep_count = 200;
    std::string sweep_scale = "log";
    double sweep_T = 2000.0;
    std::uint64_t seed = 20240601;
    std::string out_dir;
    int threads = 0;

    /// key -> line it was set on (0 when from a flag)
    std::map<std::string, int> origin;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& v)
{
    double x = 0.0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end) {
        if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
        throw ValidationError("not a number: '" + v + "'");
    }
    return x;
}

inline long long parse_int(const std::string& v)
{
    long long x = 0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end) throw ValidationError("not an integer: '" + v + "'");
    return x;
}

inline std::vector<double> parse_list(const std::string& v)
{
    std::vector<double> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item));
    }
    if (out.empty()) throw ValidationError("empty list");
    return out;
}

inline std::string fmt(double x)
{
    std::ostringstream o;
    o.precision(17);
    o << x;
    return o.str();
}

inline std::string fmt_list(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

struct KeySpec {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline KeySpec real_key(double RunConfig::*m)
{
    return {[m](RunConfig& c, const std::string& v) { c.*m = parse_double(v); },
            [m](const RunConfig& c) { return fmt(c.*m); }};
}

inline KeySpec param_key(double ModelParams::*m)
{
    return {[m](RunConfig& c, const std::string& v) { c.params.*m = parse_double(v); },
            [m](const RunConfig& c) { return fmt(c.params.*m); }};
}

inline KeySpec sim_real_key(double SimOptions::*m)
{
    return {[m](RunConfig& c, const std::string& v) { c.sim.*m = parse_double(v); },
            [m](const RunConfig& c) { return fmt(c.sim.*m); }};
}

template <class T>
KeySpec int_key(T RunConfig::*m)
{
    return {[m](RunConfig& c, const std::string& v) { c.*m = static_cast<T>(parse_int(v)); },
            [m](const RunConfig& c) { return std::to_string(c.*m); }};
}

template <class E>
KeySpec enum_key(E RunConfig::*m, std::vector<std::pair<std::string, E>> names)
{
    return {[m, names](RunConfig& c, const std::string& v) {
                for (const auto& [s, e] : names)
                    if (s == v) {
                        c.*m = e;
                        return;
                    }
                std::string allowed;
                for (const auto& [s, e] : names) allowed += (allowed.empty() ? "" : "|") + s;
                throw ValidationError("expected one of " + allowed + ", got '" + v + "'");
            },
            [m, names](const RunConfig& c) {
                for (const auto& [s, e] : names)
                    if (e == c.*m) return s;
                return std::string("?");
            }};
}

template <class E>
KeySpec sim_enum_key(E SimOptions::*m, std::vector<std::pair<std::string, E>> names)
{
    return {[m, names](RunConfig& c, const std::string& v) {
                for (const auto& [s, e] : names)
                    if (s == v) {
                        c.sim.*m = e;
                        return;
                    }
                std::string allowed;
                for (const auto& [s, e] : names) allowed += (allowed.empty() ? "" : "|") + s;
                throw ValidationError("expected one of " + allowed + ", got '" + v + "'");
            },
            [m, names](const RunConfig& c) {
                for (const auto& [s, e] : names)
                    if (e == c.sim.*m) return s;
                return std::string("?");
            }};
}

inline KeySpec vec3_key(Vec3 RunConfig::*m, std::size_t i)
{
    return {[m, i](RunConfig& c, const std::string& v) { (c.*m)[i] = parse_double(v); },
            [m, i](const RunConfig& c) { return fmt((c.*m)[i]); }};
}

inline KeySpec string_key(std::string RunConfig::*m)
{
    return {[m](RunConfig& c, const std::string& v) { c.*m = v; }, [m](const RunConfig& c) { return c.*m; }};
}

} // namespace detail

/// Every accepted key, in echo order.
inline const std::vector<std::pair<std::string, detail::KeySpec>>& config_keys()
{
    using namespace detail;
    using P = ModelParams;
    static const std::vector<std::pair<std::string, KeySpec>> keys = [] {
        std::vector<std::pair<std::string, KeySpec>> k;
        const std::pair<const char*, double P::*> params[] = {
            {"d1", &P::d1},         {"d2", &P::d2},         {"d3", &P::d3},           {"chi1", &P::chi1},
            {"chi2", &P::chi2},     {"chi31", &P::chi31},   {"chi32", &P::chi32},     {"alpha1", &P::alpha1},
            {"alpha2", &P::alpha2}, {"beta1", &P::beta1},   {"beta2", &P::beta2},     {"m1", &P::m1},
            {"m2", &P::m2},         {"eta1", &P::eta1},     {"eta2", &P::eta2},       {"gamma1", &P::gamma1},
            {"gamma2", &P::gamma2}, {"k", &P::k},           {"l", &P::l},             {"lambda1", &P::lambda1},
            {"lambda2", &P::lambda2}, {"lambda3", &P::lambda3}, {"mu1", &P::mu1},     {"mu2", &P::mu2},
            {"mu3", &P::mu3},       {"zeta1", &P::zeta1},   {"zeta2", &P::zeta2},     {"zeta3", &P::zeta3},
        };
        for (const auto& [name, m] : params) k.emplace_back(name, param_key(m));
        k.emplace_back("L", real_key(&RunConfig::L));
        k.emplace_back("n", int_key(&RunConfig::n));
        k.emplace_back("T", real_key(&RunConfig::T));
        k.emplace_back("outputs", int_key(&RunConfig::outputs));
        k.emplace_back("cfl", sim_real_key(&SimOptions::cfl));
        k.emplace_back("max_dt", sim_real_key(&SimOptions::max_dt));
        k.emplace_back("face", sim_enum_key(&SimOptions::face, std::vector<std::pair<std::string, FaceScheme>>{
                                                                   {"upwind", FaceScheme::upwind},
                                                                   {"central", FaceScheme::central}}));
        k.emplace_back("elliptic", sim_enum_key(&SimOptions::elliptic,
                                                std::vector<std::pair<std::string, SolverMethod>>{
                                                    {"tridiagonal", SolverMethod::tridiagonal},
                                                    {"gmres", SolverMethod::gmres},
                                                    {"spectral", SolverMethod::spectral}}));
        k.emplace_back("solver_tol", sim_real_key(&SimOptions::solver_tol));
        k.emplace_back("gmres_restart", KeySpec{[](RunConfig& c, const std::string& v) {
                                                    c.sim.gmres_restart = static_cast<int>(parse_int(v));
                                                },
                                                [](const RunConfig& c) { return std::to_string(c.sim.gmres_restart); }});
        k.emplace_back("gmres_maxit", KeySpec{[](RunConfig& c, const std::string& v) {
                                                  c.sim.gmres_maxit = static_cast<int>(parse_int(v));
                                              },
                                              [](const RunConfig& c) { return std::to_string(c.sim.gmres_maxit); }});
        k.emplace_back("gmres_precond", sim_enum_key(&SimOptions::gmres_precond,
                                                     std::vector<std::pair<std::string, HelmholtzPreconditioner>>{
                                                         {"symbol", HelmholtzPreconditioner::symbol},
                                                         {"none", HelmholtzPreconditioner::none}}));
        k.emplace_back("chemical_mode", sim_enum_key(&SimOptions::chemical_mode,
                                                     std::vector<std::pair<std::string, ChemicalMode>>{
                                                         {"mixed", ChemicalMode::mixed},
                                                         {"fully_parabolic", ChemicalMode::fully_parabolic}}));
        k.emplace_back("source_hold", sim_enum_key(&SimOptions::source_hold,
                                                   std::vector<std::pair<std::string, SourceHold>>{
                                                       {"linear", SourceHold::linear}, {"frozen", SourceHold::frozen}}));
        k.emplace_back("transport_field", sim_enum_key(&SimOptions::transport_field,
                                                       std::vector<std::pair<std::string, TransportField>>{
                                                           {"start", TransportField::start},
                                                           {"step_average", TransportField::step_average}}));
        k.emplace_back("eps", real_key(&RunConfig::eps));
        k.emplace_back("eps_list", KeySpec{[](RunConfig& c, const std::string& v) { c.eps_list = parse_list(v); },
                                           [](const RunConfig& c) { return fmt_list(c.eps_list); }});
        k.emplace_back("gamma", KeySpec{[](RunConfig& c, const std::string& v) {
                                            if (v == "on_manifold")
                                                c.gamma.reset();
                                            else
                                                c.gamma = parse_double(v);
                                        },
                                        [](const RunConfig& c) {
                                            return c.gamma ? fmt(*c.gamma) : std::string("on_manifold");
                                        }});
        k.emplace_back("perturbation", string_key(&RunConfig::perturbation));
        for (std::size_t i = 0; i < 3; ++i) {
            k.emplace_back("ic_c" + std::to_string(i + 1), vec3_key(&RunConfig::ic_c, i));
            k.emplace_back("ic_a" + std::to_string(i + 1), vec3_key(&RunConfig::ic_a, i));
        }
        k.emplace_back("snapshots", int_key(&RunConfig::snapshots));
        k.emplace_back("floor", real_key(&RunConfig::floor));
        k.emplace_back("manifold_from", real_key(&RunConfig::manifold_from));
        k.emplace_back("ode_model", enum_key(&RunConfig::ode_model, std::vector<std::pair<std::string, OdeModel>>{
                                                                        {"3pop", OdeModel::three_pop},
                                                                        {"pp", OdeModel::pp}}));
        k.emplace_back("ode_init", KeySpec{[](RunConfig& c, const std::string& v) { c.ode_init = parse_list(v); },
                                           [](const RunConfig& c) { return fmt_list(c.ode_init); }});
        k.emplace_back("rtol", real_key(&RunConfig::rtol));
        k.emplace_back("atol", real_key(&RunConfig::atol));
        k.emplace_back("sweep_param", string_key(&RunConfig::sweep_param));
        k.emplace_back("sweep_min", real_key(&RunConfig::sweep_min));
        k.emplace_back("sweep_max", real_key(&RunConfig::sweep_max));
        k.emplace_back("sweep_count", int_key(&RunConfig::sweep_count));
        k.emplace_back("sweep_scale", string_key(&RunConfig::sweep_scale));
        k.emplace_back("sweep_T", real_key(&RunConfig::sweep_T));
        k.emplace_back("seed", KeySpec{[](RunConfig& c, const std::string& v) {
                                           const long long s = parse_int(v);
                                           if (s < 0) throw ValidationError("seed must be non-negative");
                                           c.seed = static_cast<std::uint64_t>(s);
                                       },
                                       [](const RunConfig& c) { return std::to_string(c.seed); }});
        k.emplace_back("out_dir", string_key(&RunConfig::out_dir));
        k.emplace_back("threads", int_key(&RunConfig::threads));
        return k;
    }();
    return keys;
}

inline const detail::KeySpec* find_key(const std::string& key)
{
    for (const auto& [name, spec] : config_keys())
        if (name == key) return &spec;
    return nullptr;
}

/// Sets one key; wraps parse failures with the key and line.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value, int line)
{
    const auto* spec = find_key(key);
    if (!spec) throw ConfigError(key, line, "unknown key '" + key + "'");
    try {
        spec->set(c, value);
    } catch (const ValidationError& e) {
        throw ConfigError(key, line, key + ": " + e.what());
    }
    c.origin[key] = line;
}

inline void apply_config_text(RunConfig& c, std::istream& in)
{
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("", line, "malformed line (expected key = value)");
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string value = detail::trim(body.substr(eq + 1));
        if (key.empty()) throw ConfigError("", line, "malformed line (empty key)");
        if (value.empty()) throw ConfigError(key, line, key + ": empty value");
        set_config_value(c, key, value, line);
    }
}

inline void validate(const RunConfig& c)
{
    auto fail = [&](const std::string& key, const std::string& msg) {
        const auto it = c.origin.find(key);
        throw ConfigError(key, it == c.origin.end() ? 0 : it->second, key + ": " + msg);
    };
    try {
        c.params.validate();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        fail(msg.substr(0, msg.find(' ')), msg.substr(msg.find(' ') + 1));
    }
    if (!(std::isfinite(c.L) && c.L > 0.0)) fail("L", "must be positive");
    if (c.n < 4) fail("n", "must be >= 4");
    if (!(std::isfinite(c.T) && c.T >= 0.0)) fail("T", "must be non-negative");
    if (c.outputs < 1) fail("outputs", "must be >= 1");
    if (!(c.sim.cfl > 0.0 && c.sim.cfl <= 1.0)) fail("cfl", "must lie in (0, 1]");
    if (!(c.sim.max_dt > 0.0)) fail("max_dt", "must be positive");
    if (!(c.sim.solver_tol > 0.0)) fail("solver_tol", "must be positive");
    if (c.sim.gmres_restart < 1) fail("gmres_restart", "must be >= 1");
    if (c.sim.gmres_maxit < 1) fail("gmres_maxit", "must be >= 1");
    if (!(std::isfinite(c.eps) && c.eps > 0.0)) fail("eps", "must be positive");
    for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
        if (!(c.eps_list[i] > 0.0)) fail("eps_list", "values must be positive");
        if (i > 0 && !(c.eps_list[i] < c.eps_list[i - 1])) fail("eps_list", "must be strictly decreasing");
    }
    if (c.gamma && !(std::isfinite(*c.gamma) && *c.gamma >= 0.0)) fail("gamma", "must be non-negative or on_manifold");
    if (c.perturbation.rfind("cos", 0) != 0 || c.perturbation.size() == 3 ||
        c.perturbation.find_first_not_of("0123456789", 3) != std::string::npos)
        fail("perturbation", "expected cos<k>, e.g. cos1");
    if (c.perturbation == "cos0" || std::stoll(c.perturbation.substr(3)) >= c.n)
        fail("perturbation", "mode index must lie in [1, n)");
    for (std::size_t i = 0; i < 3; ++i) {
        if (!(c.ic_c[i] - std::abs(c.ic_a[i]) >= 0.0))
            fail("ic_c" + std::to_string(i + 1), "initial data must stay non-negative (need c >= |a|)");
    }
    if (c.snapshots < 2) fail("snapshots", "must be >= 2");
    if (!(c.floor >= 0.0)) fail("floor", "must be non-negative");
    if (!(c.manifold_from >= 0.0)) fail("manifold_from", "must be non-negative");
    const std::size_t dim = c.ode_model == OdeModel::pp ? 2 : 3;
    if (c.ode_init.size() != dim) fail("ode_init", "expected " + std::to_string(dim) + " values");
    for (double v : c.ode_init)
        if (!(v >= 0.0)) fail("ode_init", "values must be non-negative");
    if (!(c.rtol > 0.0)) fail("rtol", "must be positive");
    if (!(c.atol > 0.0)) fail("atol", "must be positive");
    try {
        ModelParams probe = c.params;
        (void)param_ref(probe, c.sweep_param);
    } catch (const ValidationError&) {
        fail("sweep_param", "not a sweepable parameter");
    }
    if (!(c.sweep_min > 0.0 || (c.sweep_scale == "linear" && c.sweep_min >= 0.0))) fail("sweep_min", "out of range");
    if (!(c.sweep_max > c.sweep_min)) fail("sweep_max", "must exceed sweep_min");
    if (c.sweep_count < 2) fail("sweep_count", "must be >= 2");
    if (c.sweep_scale != "log" && c.sweep_scale != "linear") fail("sweep_scale", "expected log|linear");
    if (!(c.sweep_T > 0.0)) fail("sweep_T", "must be positive");
    if (c.threads < 0) fail("threads", "must be non-negative");
}

/// Defaults, then the file (if any), then flag overrides; validated.
inline RunConfig parse_config(const std::optional<std::string>& path,
                              const std::vector<std::pair<std::string, std::string>>& flags = {})
{
    RunConfig c;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("config", 0, "cannot open config file '" + *path + "'");
        apply_config_text(c, in);
    }
    for (const auto& [k, v] : flags) set_config_value(c, k, v, 0);
    validate(c);
    return c;
}

inline RunConfig parse_config_text(const std::string& text,
                                   const std::vector<std::pair<std::string, std::string>>& flags = {})
{
    RunConfig c;
    std::istringstream in(text);
    apply_config_text(c, in);
    for (const auto& [k, v] : flags) set_config_value(c, k, v, 0);
    validate(c);
    return c;
}

/// key = value for every key; parsing it back reproduces the config.
inline std::string echo_config(const RunConfig& c)
{
    std::string s;
    for (const auto& [name, spec] : config_keys()) s += name + " = " + spec.get(c) + "\n";
    return s;
}

inline std::vector<double> sweep_values(const RunConfig& c)
{
    std::vector<double> v(static_cast<std::size_t>(c.sweep_count));
    for (int i = 0; i < c.sweep_count; ++i) {
        const double f = static_cast<double>(i) / (c.sweep_count - 1);
        v[static_cast<std::size_t>(i)] = c.sweep_scale == "log"
                                             ? c.sweep_min * std::pow(c.sweep_max / c.sweep_min, f)
                                             : c.sweep_min + f * (c.sweep_max - c.sweep_min);
    }
    v.back() = c.sweep_max;
    return v;
}

} // namespace chemolab

#endif
