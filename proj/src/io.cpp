#include "fpk/io.hpp"

#include <charconv>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace fpk::io {

namespace {

struct File {
    std::FILE* f = nullptr;
    std::string path;

    File(const std::string& p) : f(std::fopen(p.c_str(), "wb")), path(p) {
        if (!f) throw Error(errc::io, "cannot open '" + p + "' for writing");
    }
    ~File() {
        if (f) std::fclose(f);
    }
    void close() {
        if (std::fclose(f) != 0) {
            f = nullptr;
            throw Error(errc::io, "write to '" + path + "' failed");
        }
        f = nullptr;
    }
    void row(const char* fmt, ...) {
        va_list ap;
        va_start(ap, fmt);
        int rc = std::vfprintf(f, fmt, ap);
        va_end(ap);
        if (rc < 0) throw Error(errc::io, "write to '" + path + "' failed");
    }
};

double parse_double(const std::string& s, const std::string& path) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(errc::io, "'" + path + "': not a number: '" + s + "'");
    return v;
}

} // namespace

void write_density_csv(const std::string& path, const DensityFlow& flow) {
    File out(path);
    out.row("t,x,u\n");
    for (std::size_t m = 0; m < flow.times.size(); ++m)
        for (int i = 0; i < flow.grid.n; ++i)
            out.row("%.17g,%.17g,%.17g\n", flow.times[m], flow.grid.center(i),
                    flow.u[m][static_cast<std::size_t>(i)]);
    out.close();
}

void write_mass_csv(const std::string& path, const MassLedger& led) {
    File out(path);
    out.row("t,M,C,B,r\n");
    for (std::size_t m = 0; m < led.t.size(); ++m)
        out.row("%.17g,%.17g,%.17g,%.17g,%.17g\n", led.t[m], led.M[m], led.C[m], led.B[m],
                led.r[m]);
    out.close();
}

void write_stationary_csv(const std::string& path, const StationaryDensity& s) {
    File out(path);
    out.row("x,u\n");
    for (int i = 0; i < s.grid.n; ++i)
        out.row("%.17g,%.17g\n", s.grid.center(i), s.u[static_cast<std::size_t>(i)]);
    out.close();
}

void write_ergodic_csv(const std::string& path, const ConvergenceReport& rep) {
    File out(path);
    out.row("t,l1_to_stationary,sigma_mass\n");
    for (const ConvergenceRow& r : rep.rows)
        out.row("%.17g,%.17g,%.17g\n", r.t, r.l1, r.sigma_mass);
    out.close();
}

void write_mc_csv(const std::string& path, const McResult& mc) {
    File out(path);
    out.row("t,alive,killed,exited,subprob_mean,subprob_se\n");
    for (const PathEnsemble& e : mc.snapshots) {
        SubprobEstimate est = subprob_estimate(e);
        out.row("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.t, e.alive_fraction(),
                e.killed_fraction(), e.exited_fraction(), est.mean, est.se);
    }
    out.close();
}

void write_mc_hist_csv(const std::string& path, const McResult& mc, const Grid1D& grid) {
    File out(path);
    out.row("t,x,u_mc\n");
    for (const PathEnsemble& e : mc.snapshots) {
        std::vector<double> u = empirical_density(e, grid);
        for (int i = 0; i < grid.n; ++i)
            out.row("%.17g,%.17g,%.17g\n", e.t, grid.center(i),
                    u[static_cast<std::size_t>(i)]);
    }
    out.close();
}

void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows) {
    File out(path);
    out.row("t,l1,mass_delta\n");
    for (const CompareRow& r : rows) out.row("%.17g,%.17g,%.17g\n", r.t, r.l1, r.mass_delta);
    out.close();
}

void write_text(const std::string& path, const std::string& text) {
    File out(path);
    if (!text.empty() && std::fwrite(text.data(), 1, text.size(), out.f) != text.size())
        throw Error(errc::io, "write to '" + path + "' failed");
    out.close();
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

DensityTable read_density_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot read '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error(errc::io, "'" + path + "' is empty");

    DensityTable tab;
    std::vector<double> cur;
    bool first_block = true;
    std::size_t xi = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t c1 = line.find(',');
        std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw Error(errc::io, "'" + path + "': expected three columns: " + line);
        double t = parse_double(line.substr(0, c1), path);
        double x = parse_double(line.substr(c1 + 1, c2 - c1 - 1), path);
        double v = parse_double(line.substr(c2 + 1), path);

        if (tab.times.empty() || t != tab.times.back()) {
            if (!cur.empty()) {
                if (!first_block && cur.size() != tab.x.size())
                    throw Error(errc::io, "'" + path + "': ragged time blocks");
                tab.u.push_back(std::move(cur));
                cur.clear();
                first_block = false;
            }
            tab.times.push_back(t);
            xi = 0;
        }
        if (first_block) {
            tab.x.push_back(x);
        } else {
            if (xi >= tab.x.size() || x != tab.x[xi])
                throw Error(errc::io, "'" + path + "': grid changes between time blocks");
        }
        ++xi;
        cur.push_back(v);
    }
    if (!cur.empty()) {
        if (!first_block && cur.size() != tab.x.size())
            throw Error(errc::io, "'" + path + "': ragged time blocks");
        tab.u.push_back(std::move(cur));
    }
    if (tab.times.empty()) throw Error(errc::io, "'" + path + "' has no rows");
    return tab;
}

} // namespace fpk::io
