// chemolab: simulations, rate studies and ODE sweeps for the two-prey /
// one-predator chemotaxis model.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "chemolab/analysis.hpp"
#include "chemolab/config.hpp"
#include "chemolab/io.hpp"
#include "chemolab/ode.hpp"
#include "chemolab/sim_eps.hpp"
#include "chemolab/sim_limit.hpp"
#include "chemolab/verify.hpp"

using namespace chemolab;

namespace {

enum Exit { exit_ok = 0, exit_validation = 1, exit_numerical = 2, exit_gate = 3 };

std::string quoted(std::string s)
{
    for (char& c : s)
        if (c == '"' || c == '\n') c = '\'';
    return "\"" + s + "\"";
}

std::vector<std::pair<std::string, std::string>> flag_pairs(const std::vector<std::string>& extras)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError(a, 0, "unexpected argument '" + a + "'");
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size()) throw ConfigError(a.substr(2), 0, "flag " + a + " needs a value");
            out.emplace_back(a.substr(2), extras[++i]);
        }
    }
    return out;
}

struct Setup {
    RunConfig cfg;
    fs::path dir;
};

Setup prepare(const std::string& command, const std::optional<std::string>& config_path,
              const std::vector<std::string>& extras)
{
    Setup s{parse_config(config_path, flag_pairs(extras)), {}};
    s.dir = resolve_output_dir(s.cfg, command);
    fs::create_directories(s.dir);
    write_config_echo(s.dir, s.cfg, command);
    return s;
}

Grid grid_of(const RunConfig& c) { return make_grid(c.L, c.n); }

Field perturbation_shape(const RunConfig& c, const Grid& g)
{
    return neumann_mode(g, static_cast<std::size_t>(std::stoll(c.perturbation.substr(3))));
}

Field initial_v3(const RunConfig& c, const Field& u30, double eps)
{
    return make_layer_data(u30, InitialLayerSpec{c.gamma, perturbation_shape(c, u30.grid()), eps}, c.params);
}

template <class State>
void write_run(const fs::path& dir, const Trajectory<State>& tr, const ModelParams& p)
{
    write_trajectory(dir, tr);
    CsvWriter d(dir / "diagnostics.csv");
    d.header({"t", "mass_u1", "mass_u2", "mass_u3", "min_u", "manifold_distance"});
    for (const auto& snap : tr.snapshots) {
        const Vec3 m = snap.state.masses();
        const double mn = std::min({snap.state.u[0].min(), snap.state.u[1].min(), snap.state.u[2].min()});
        d.row({snap.t, m[0], m[1], m[2], mn, manifold_distance(snap.state, p)});
    }
    double balance = 0.0;
    for (const auto& st : tr.steps) balance = std::max(balance, mass_balance_residual(st));
    std::ostringstream sum;
    sum << "steps = " << tr.steps.size() << "\n"
        << "snapshots = " << tr.snapshots.size() << "\n"
        << "max_mass_balance_residual = " << num(balance) << "\n"
        << "clipped_mass = " << num(tr.clipped_total[0]) << "," << num(tr.clipped_total[1]) << ","
        << num(tr.clipped_total[2]) << "\n";
    write_text(dir / "summary.txt", sum.str());
}

int cmd_simulate_eps(const Setup& s)
{
    const auto& c = s.cfg;
    const Grid g = grid_of(c);
    const auto u = default_initial_species(g, c.ic_c, c.ic_a);
    const Field v30 = initial_v3(c, u[2], c.eps);
    const auto times = uniform_times(c.T, c.outputs);
    const auto tr = run_eps(u[0], u[1], u[2], v30, c.eps, c.T, c.params, times, c.sim);
    write_run(s.dir, tr, c.params);
    return exit_ok;
}

int cmd_simulate_limit(const Setup& s)
{
    const auto& c = s.cfg;
    const Grid g = grid_of(c);
    const auto u = default_initial_species(g, c.ic_c, c.ic_a);
    const auto times = uniform_times(c.T, c.outputs);
    const auto tr = run_limit(u[0], u[1], u[2], c.T, c.params, times, c.sim);
    write_run(s.dir, tr, c.params);
    return exit_ok;
}

int cmd_rate_study(const Setup& s)
{
    const auto& c = s.cfg;
    const Grid g = grid_of(c);
    const auto u = default_initial_species(g, c.ic_c, c.ic_a);
    RateStudyOptions ro;
    ro.snapshots = c.snapshots;
    ro.floor = c.floor;
    ro.manifold_from = c.manifold_from;
    ro.shape = perturbation_shape(c, g);
    const auto rep = rate_study(u[0], u[1], u[2], c.gamma, c.eps_list, c.T, c.params, c.sim, ro);
    write_rate_report(s.dir / "rates.csv", rep);
    write_text(s.dir / "summary.txt", rate_summary(rep) + "\n# config\n" + echo_config(c));
    return exit_ok;
}

int cmd_manifold_distance(const Setup& s)
{
    const auto& c = s.cfg;
    const Grid g = grid_of(c);
    const auto u = default_initial_species(g, c.ic_c, c.ic_a);
    const auto times = uniform_times(c.T, c.snapshots);
    CsvWriter w(s.dir / "manifold.csv");
    w.header({"eps", "t", "eps_t"});
    std::vector<double> sup;
    for (double eps : c.eps_list) {
        const Field v30 = initial_v3(c, u[2], eps);
        const auto tr = run_eps(u[0], u[1], u[2], v30, eps, c.T, c.params, times, c.sim);
        double m = 0.0;
        for (const auto& snap : tr.snapshots) {
            const double d = manifold_distance(snap.state, c.params);
            w.row({eps, snap.t, d});
            if (snap.t >= c.manifold_from) m = std::max(m, d);
        }
        sup.push_back(m);
    }
    const SlopeFit fit = fit_loglog(c.eps_list, sup, c.floor);
    std::ostringstream sum;
    for (std::size_t i = 0; i < sup.size(); ++i)
        sum << "eps = " << num(c.eps_list[i]) << "  sup_eps_t = " << num(sup[i]) << "\n";
    sum << "slope_sup_eps_t = " << (fit.ok ? num(fit.slope) : std::string("nan")) << "\n";
    write_text(s.dir / "summary.txt", sum.str());
    return exit_ok;
}

int cmd_ode_simulate(const Setup& s)
{
    const auto& c = s.cfg;
    const auto times = uniform_times(c.T, c.outputs);
    const auto tr = integrate(make_rhs(c.ode_model, c.params), c.ode_init, c.T, IntegrateOptions{c.rtol, c.atol},
                              times);
    CsvWriter w(s.dir / "trajectory.csv");
    if (c.ode_model == OdeModel::pp)
        w.header({"t", "u1", "u3"});
    else
        w.header({"t", "u1", "u2", "u3"});
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        std::vector<double> row{tr.times[i]};
        row.insert(row.end(), tr.states[i].begin(), tr.states[i].end());
        w.row(row);
    }
    const auto osc = detect_oscillation(tr);
    std::ostringstream sum;
    sum << "model = " << to_string(c.ode_model) << "\n"
        << "steps = " << tr.steps << "\nrejected = " << tr.rejected << "\n"
        << "oscillating = " << (osc.detected ? 1 : 0) << "\nperiod = " << num(osc.period) << "\n"
        << "amplitude_u1 = " << num(osc.amplitude.empty() ? 0.0 : osc.amplitude[0]) << "\n";
    write_text(s.dir / "summary.txt", sum.str());
    return exit_ok;
}

int cmd_ode_bifurcation(const Setup& s)
{
    const auto& c = s.cfg;
    SweepOptions so;
    so.T = c.sweep_T;
    so.integrate = IntegrateOptions{c.rtol, c.atol};
    so.threads = static_cast<unsigned>(c.threads);
    const auto pts = bifurcation_sweep(c.ode_model, c.sweep_param, sweep_values(c), c.params, so);
    write_branch(s.dir / "branch.csv", pts);
    std::ostringstream sum;
    sum << "model = " << to_string(c.ode_model) << "\nparam = " << c.sweep_param << "\n";
    std::string last;
    for (const auto& b : pts) {
        const std::string r = to_string(regime_of(b));
        if (r != last) sum << "regime " << r << " from " << num(b.param) << "\n";
        last = r;
    }
    write_text(s.dir / "summary.txt", sum.str());
    return exit_ok;
}

int cmd_verify(const Setup& s)
{
    const auto results = run_verify_suite(s.cfg.params, s.cfg.seed);
    std::ostringstream out;
    std::string failed;
    for (const auto& r : results) {
        out << "check name=" << r.name << " passed=" << (r.passed ? 1 : 0) << " value=" << num(r.value)
            << " bound=" << num(r.bound) << " detail=" << quoted(r.detail) << "\n";
        if (!r.passed) failed += (failed.empty() ? "" : ",") + r.name;
    }
    write_text(s.dir / "verify.txt", out.str());
    std::cout << out.str();
    if (!failed.empty()) {
        std::cout << "error kind=gate failed=" << failed << "\n";
        return exit_gate;
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"chemolab: two-prey / one-predator chemotaxis experiments"};
    app.require_subcommand(1);
    std::optional<std::string> config_path;

    using Handler = int (*)(const Setup&);
    const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
        {"simulate-eps", "run the relaxation system, write CSV snapshots", cmd_simulate_eps},
        {"simulate-limit", "run the parabolic-elliptic limit, write CSV snapshots", cmd_simulate_limit},
        {"rate-study", "paired eps/limit runs over eps_list, fitted slopes", cmd_rate_study},
        {"manifold-distance", "distance from the critical manifold over t and eps", cmd_manifold_distance},
        {"ode-simulate", "integrate the homogeneous ODE", cmd_ode_simulate},
        {"ode-bifurcation", "equilibria, stability and oscillations over a parameter sweep", cmd_ode_bifurcation},
        {"verify", "built-in invariant checks", cmd_verify},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, fn] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_path, "key = value config file");
        sub->allow_extras();
        sub->footer("Any config key may be given as --key value; flags override the file.");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cout << "error kind=validation key=- line=0 msg=" << quoted(e.what()) << "\n";
        return exit_validation;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        const std::string& name = std::get<0>(commands[i]);
        try {
            const Setup s = prepare(name, config_path, subs[i]->remaining());
            const int code = std::get<2>(commands[i])(s);
            if (code == exit_ok) std::cout << "ok command=" << name << " out=" << s.dir.string() << "\n";
            return code;
        } catch (const ConfigError& e) {
            std::cout << "error kind=validation key=" << (e.key().empty() ? "-" : e.key()) << " line=" << e.line()
                      << " msg=" << quoted(e.what()) << "\n";
            return exit_validation;
        } catch (const ValidationError& e) {
            std::cout << "error kind=validation key=- line=0 msg=" << quoted(e.what()) << "\n";
            return exit_validation;
        } catch (const NumericalError& e) {
            std::cout << "error kind=numerical msg=" << quoted(e.what()) << "\n";
            return exit_numerical;
        } catch (const fs::filesystem_error& e) {
            std::cout << "error kind=validation key=out_dir line=0 msg=" << quoted(e.what()) << "\n";
            return exit_validation;
        } catch (const std::exception& e) {
            std::cout << "error kind=numerical msg=" << quoted(e.what()) << "\n";
            return exit_numerical;
        }
    }
    return exit_validation;
}
