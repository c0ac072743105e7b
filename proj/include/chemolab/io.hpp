#ifndef CHEMOLAB_IO_HPP
#define CHEMOLAB_IO_HPP

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "chemolab/analysis.hpp"
#include "chemolab/config.hpp"
#include "chemolab/errors.hpp"
#include "chemolab/ode.hpp"
#include "chemolab/species.hpp"

namespace chemolab {

namespace fs = std::filesystem;

inline constexpr const char* output_root_env = "CHEMOLAB_OUTPUT_ROOT";

/// out_dir if set, else "out/<command>"; relative paths sit under
/// $CHEMOLAB_OUTPUT_ROOT when that is set.
inline fs::path resolve_output_dir(const RunConfig& c, const std::string& command)
{
    const char* env = std::getenv(output_root_env);
    const fs::path root = env && *env ? fs::path(env) : fs::path("out");
    const fs::path dir = c.out_dir.empty() ? fs::path(command) : fs::path(c.out_dir);
    if (dir.is_absolute()) return dir;
    if (!c.out_dir.empty() && !(env && *env)) return dir;
    return root / dir;
}

inline std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12e", x);
    return buf;
}

/// 6 significant digits, as used in snapshot file names.
inline std::string time_tag(double t)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", t);
    return buf;
}

inline std::string snapshot_name(std::size_t index, double t)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return "t" + std::string(buf) + "_" + time_tag(t) + ".csv";
}

class CsvWriter {
public:
    explicit CsvWriter(const fs::path& path) : out_(path)
    {
        if (!out_) throw ValidationError("cannot write " + path.string());
    }
    void header(const std::vector<std::string>& cols) { row_strings(cols); }
    void row(const std::vector<double>& vals)
    {
        for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << num(vals[i]);
        out_ << '\n';
    }
    void row_strings(const std::vector<std::string>& vals)
    {
        for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << vals[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
}

inline void write_config_echo(const fs::path& dir, const RunConfig& c, const std::string& command)
{
    write_text(dir / "config.txt", "# command = " + command + "\n" + echo_config(c));
}

/// x, u1, u2, u3, v1, v2, v3.
inline void write_snapshot(const fs::path& path, const PopulationState& s)
{
    CsvWriter w(path);
    w.header({"x", "u1", "u2", "u3", "v1", "v2", "v3"});
    const Grid& g = s.grid();
    for (std::size_t j = 0; j < g.size(); ++j)
        w.row({g.center(j), s.u[0][j], s.u[1][j], s.u[2][j], s.v[0][j], s.v[1][j], s.v[2][j]});
}

template <class State>
void write_trajectory(const fs::path& dir, const Trajectory<State>& tr)
{
    for (std::size_t i = 0; i < tr.snapshots.size(); ++i)
        write_snapshot(dir / snapshot_name(i, tr.snapshots[i].t), tr.snapshots[i].state);
}

inline void write_rate_report(const fs::path& path, const RateReport& r)
{
    CsvWriter w(path);
    w.header({"eps", "eps_in", "err_u1", "err_u2", "err_u3", "err_v1", "err_v2", "err_v3_h1", "err_v3_l2h2"});
    for (std::size_t i = 0; i < r.eps_list.size(); ++i) {
        std::vector<double> row{r.eps_list[i], r.eps_in[i]};
        for (double e : flatten(r.errors[i])) row.push_back(e);
        w.row(row);
    }
}

inline std::string rate_summary(const RateReport& r)
{
    std::string s;
    s += "gamma = " + (r.gamma ? num(*r.gamma) : std::string("on_manifold")) + "\n";
    s += "T = " + num(r.T) + "\n";
    s += "floor = " + num(r.floor) + "\n";
    for (std::size_t c = 0; c < 7; ++c) {
        const auto& f = r.slopes[c];
        s += std::string("slope_") + rate_components()[c] + " = " + (f.ok ? num(f.slope) : std::string("nan")) +
             "  residual = " + (f.ok ? num(f.residual) : std::string("nan")) + "  points = " +
             std::to_string(f.points) + "\n";
    }
    s += "slope_manifold_sup = " + (r.manifold_slope.ok ? num(r.manifold_slope.slope) : std::string("nan")) + "\n";
    for (std::size_t i = 0; i < r.eps_list.size(); ++i)
        s += "eps = " + num(r.eps_list[i]) + "  eps_in = " + num(r.eps_in[i]) + "  eps_in_h2 = " +
             num(r.eps_in_h2[i]) + "  manifold_sup = " + num(r.manifold_sup[i]) + "\n";
    return s;
}

inline void write_branch(const fs::path& path, const std::vector<BranchPoint>& pts)
{
    CsvWriter w(path);
    w.header({"param", "u1", "u2", "u3", "re_lambda_max", "stable", "oscillating", "amplitude_u1", "period"});
    for (const auto& b : pts) {
        const auto& s = b.equilibrium.state;
        // pp state is (u1, u3); u2 is absent and written as 0
        const double u1 = s.empty() ? 0.0 : s[0];
        const double u2 = s.size() == 3 ? s[1] : 0.0;
        const double u3 = s.empty() ? 0.0 : s.back();
        const double amp = b.oscillation.amplitude.empty() ? 0.0 : b.oscillation.amplitude[0];
        w.row_strings({num(b.param), num(u1), num(u2), num(u3), num(b.equilibrium.re_max),
                       b.equilibrium.stable ? "1" : "0", b.oscillation.detected ? "1" : "0", num(amp),
                       num(b.oscillation.period)});
    }
}

} // namespace chemolab

#endif
