#include "fpk/fpk.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "fpk/config.hpp"
#include "fpk/ergodic.hpp"
#include "fpk/io.hpp"
#include "fpk/lyapunov.hpp"

struct fpk_config {
    fpk::RunConfig c;
};

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

thread_local std::string t_last_error;

int code_of(fpk::errc c) {
    switch (c) {
        case fpk::errc::ok: return FPK_OK;
        case fpk::errc::parse: return FPK_EPARSE;
        case fpk::errc::eval_domain: return FPK_EEVAL;
        case fpk::errc::config: return FPK_ECONFIG;
        case fpk::errc::precondition: return FPK_EPRECOND;
        case fpk::errc::invalid: return FPK_EINVAL;
        case fpk::errc::io: return FPK_EIO;
        case fpk::errc::numeric: return FPK_ENUMERIC;
    }
    return FPK_EUNKNOWN;
}

template <class F>
int guarded(F&& f) {
    try {
        f();
        t_last_error.clear();
        return FPK_OK;
    } catch (const fpk::Error& e) {
        t_last_error = e.what();
        return code_of(e.code);
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return FPK_EUNKNOWN;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void set_out(char** slot, const std::string& s) {
    if (slot) *slot = dup_string(s);
}

const fpk::RunConfig& need(const fpk_config* cfg) {
    if (!cfg) throw fpk::Error(fpk::errc::invalid, "null config handle");
    return cfg->c;
}

void ensure_dir(const char* dir) {
    if (!dir || !*dir) throw fpk::Error(fpk::errc::invalid, "output directory not given");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw fpk::Error(fpk::errc::io, "cannot create '" + std::string(dir) +
                                                "': " + ec.message());
}

std::string join(const char* dir, const char* name) {
    return (fs::path(dir) / name).string();
}

fpk::Grid1D solver_grid(const fpk::RunConfig& c) {
    fpk::Region reg = fpk::exhaust(c.problem.domain, c.solve.K);
    return fpk::Grid1D{c.solve.K, reg.lo[0], reg.hi[0], c.solve.N};
}

json grid_json(const fpk::Grid1D& g) {
    return json{{"k", g.K}, {"lo", g.lo}, {"hi", g.hi}, {"n", g.n}, {"h", g.h()}};
}

json witness_json(const fpk::Witness& w) {
    return json{{"what", w.what}, {"x", w.x}, {"t", w.t}, {"lhs", w.lhs}, {"rhs", w.rhs}};
}

const char* cert_kind_str(fpk::CertKind k) {
    switch (k) {
        case fpk::CertKind::ExistenceKV: return "existence";
        case fpk::CertKind::TimedepKH: return "timedep";
        case fpk::CertKind::Ergodic: return "ergodic";
        case fpk::CertKind::UniqClassI: return "uniqueness_i";
        case fpk::CertKind::UniqClassII: return "uniqueness_ii";
    }
    return "unknown";
}

const char* cert_status_str(fpk::CertStatus s) {
    switch (s) {
        case fpk::CertStatus::Holds: return "holds";
        case fpk::CertStatus::Fails: return "fails";
        case fpk::CertStatus::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

json cert_json(const fpk::Certificate& c) {
    json j;
    j["kind"] = cert_kind_str(c.kind);
    j["status"] = cert_status_str(c.status);
    j["k"] = c.K;
    j["k2"] = c.K2;
    j["shell_n"] = c.shell_n;
    j["blowup_confirmed"] = c.blowup_confirmed;
    j["note"] = c.note;
    json shells = json::array();
    for (const fpk::ShellSup& s : c.shells)
        shells.push_back(json{{"k", s.k},
                              {"sup_ratio", s.sup_ratio},
                              {"sup_lv_over_v", s.sup_lv_over_v},
                              {"argmax_x", s.argmax_x},
                              {"argmax_t", s.argmax_t}});
    j["shells"] = shells;
    json viols = json::array();
    for (const fpk::Witness& w : c.violations) viols.push_back(witness_json(w));
    j["violations"] = viols;
    if (!c.t_grid.empty()) {
        j["t_grid"] = c.t_grid;
        j["r_curve"] = c.R_curve;
        j["q_curve"] = c.Q_curve;
    }
    if (!c.N_ladder.empty()) {
        j["n_ladder"] = c.N_ladder;
        j["r_n"] = c.R_N;
        j["r_n_ii"] = c.R_N_ii;
        j["masked_fraction"] = c.masked_fraction;
    }
    return j;
}

json config_json_obj(const fpk::RunConfig& c) { return json::parse(fpk::config_json(c)); }

// shared metadata head so every output dir carries the full provenance
json meta_head(const char* command, const fpk::RunConfig& c) {
    json j;
    j["version"] = kVersion;
    j["command"] = command;
    j["config"] = config_json_obj(c);
    return j;
}

} // namespace

extern "C" {

const char* fpk_version(void) { return kVersion; }

const char* fpk_last_error(void) { return t_last_error.c_str(); }

void fpk_string_free(char* s) { std::free(s); }

int fpk_config_load(const char* path, fpk_config** out) {
    return guarded([&] {
        if (!path || !out) throw fpk::Error(fpk::errc::invalid, "null argument");
        *out = new fpk_config{fpk::config_load(path)};
    });
}

int fpk_config_loads(const char* text, fpk_config** out) {
    return guarded([&] {
        if (!text || !out) throw fpk::Error(fpk::errc::invalid, "null argument");
        *out = new fpk_config{fpk::config_parse(text)};
    });
}

void fpk_config_free(fpk_config* cfg) { delete cfg; }

int fpk_config_json(const fpk_config* cfg, char** json_out) {
    return guarded([&] { set_out(json_out, fpk::config_json(need(cfg))); });
}

int fpk_validate(const fpk_config* cfg, char** json_out, int* ok_out) {
    return guarded([&] {
        const fpk::RunConfig& c = need(cfg);
        fpk::ValidationReport rep = fpk::validate(c.problem);

        json j;
        j["version"] = kVersion;
        j["ok"] = rep.ok();
        j["samples_per_shell"] = rep.samples_per_shell;
        j["seed"] = rep.seed;
        j["symmetry_residual"] = rep.symmetry_residual;
        json shells = json::array();
        for (const fpk::ShellStats& s : rep.shells)
            shells.push_back(json{{"k", s.k},
                                  {"ell_min", s.ell_min},
                                  {"ell_max", s.ell_max},
                                  {"degenerate", s.degenerate},
                                  {"lipschitz", s.lipschitz},
                                  {"sup_a", s.sup_a},
                                  {"sup_b", s.sup_b},
                                  {"sup_c", s.sup_c}});
        j["shells"] = shells;
        json viols = json::array();
        for (const fpk::Witness& w : rep.violations) viols.push_back(witness_json(w));
        j["violations"] = viols;

        if (ok_out) *ok_out = rep.ok() ? 1 : 0;
        set_out(json_out, j.dump(2));
    });
}

int fpk_check(const fpk_config* cfg, char** json_out, int* all_hold_out) {
    return guarded([&] {
        const fpk::RunConfig& c = need(cfg);
        if (!c.lyapunov)
            throw fpk::Error(fpk::errc::precondition,
                             "config has no [lyapunov] section, nothing to check");
        const fpk::LyapunovConfig& ly = *c.lyapunov;

        bool all = true;
        json certs = json::array();
        for (const std::string& what : ly.checks) {
            fpk::Certificate cert;
            if (what == "existence")
                cert = fpk::check_existence_condition(c.problem, ly.v, ly.params);
            else if (what == "ergodic")
                cert = fpk::check_ergodic_condition(c.problem, ly.v, ly.params);
            else
                cert = fpk::check_timedep_condition(c.problem, ly.v, ly.timedep_k,
                                                    ly.timedep_h, ly.params);
            all = all && cert.status == fpk::CertStatus::Holds;
            certs.push_back(cert_json(cert));
        }

        json j;
        j["version"] = kVersion;
        j["all_hold"] = all;
        j["certificates"] = certs;
        if (all_hold_out) *all_hold_out = all ? 1 : 0;
        set_out(json_out, j.dump(2));
    });
}

int fpk_solve(const fpk_config* cfg, const char* out_dir, char** json_out, int* mass_ok_out) {
    return guarded([&] {
        const fpk::RunConfig& c = need(cfg);
        ensure_dir(out_dir);

        fpk::SolveResult r = fpk::solve(c.problem, c.solve);
        fpk::MassIdentityReport rep = fpk::mass_identity_report(r.ledger, c.solve.tol_mass);
        bool mass_ok = rep.classification != "inconsistent";

        fpk::io::write_density_csv(join(out_dir, "density.csv"), r.flow);
        fpk::io::write_mass_csv(join(out_dir, "mass.csv"), r.ledger);

        json j = meta_head("solve", c);
        j["grid"] = grid_json(r.flow.grid);
        j["save_times"] = r.flow.times;
        j["eps_used"] = r.flow.eps_used;
        j["eps_l1"] = r.eps_l1;
        j["ladder_converged"] = r.ladder_converged;
        j["warnings"] = r.warnings;
        j["mass"] = json{{"classification", rep.classification},
                         {"max_abs_r", rep.max_abs_r},
                         {"min_r", rep.min_r},
                         {"budget_gap", rep.budget_gap},
                         {"final", r.ledger.M.back()},
                         {"tol_mass", c.solve.tol_mass},
                         {"ok", mass_ok}};
        j["notes"] = json::array(
            {"well-posedness certificates are not evaluated by this command; run check"});
        std::string text = j.dump(2);
        fpk::io::write_text(join(out_dir, "metadata.json"), text);

        if (mass_ok_out) *mass_ok_out = mass_ok ? 1 : 0;
        set_out(json_out, text);
    });
}

int fpk_mc(const fpk_config* cfg, const char* out_dir, long long n_paths_override,
           long long seed_override, int has_seed, int threads_override, char** json_out) {
    return guarded([&] {
        const fpk::RunConfig& c = need(cfg);
        ensure_dir(out_dir);

        fpk::McParams mp = c.mc;
        if (n_paths_override > 0) mp.n_paths = static_cast<std::size_t>(n_paths_override);
        if (has_seed)
            mp.seed = static_cast<std::uint64_t>(seed_override);
        else if (!c.mc_seed_set)
            throw fpk::Error(fpk::errc::precondition,
                             "no seed: give --seed or set [mc] seed (runs must be reproducible)");
        if (threads_override > 0) mp.threads = threads_override;

        fpk::McResult res = fpk::simulate(c.problem, mp);
        fpk::io::write_mc_csv(join(out_dir, "mc.csv"), res);
        json j = meta_head("mc", c);
        if (c.problem.coeffs.d == 1) {
            fpk::Grid1D grid = solver_grid(c);
            fpk::io::write_mc_hist_csv(join(out_dir, "mc_hist.csv"), res, grid);
            j["grid"] = grid_json(grid);
        }

        const fpk::PathEnsemble& last = res.snapshots.back();
        fpk::SubprobEstimate est = fpk::subprob_estimate(last);
        j["n_paths"] = mp.n_paths;
        j["dt"] = mp.dt;
        j["seed"] = mp.seed;
        j["threads"] = mp.threads;
        json times = json::array();
        for (const fpk::PathEnsemble& e : res.snapshots) times.push_back(e.t);
        j["save_times"] = times;
        j["final"] = json{{"t", last.t},
                          {"alive", last.alive_fraction()},
                          {"killed", last.killed_fraction()},
                          {"exited", last.exited_fraction()},
                          {"subprob_mean", est.mean},
                          {"subprob_se", est.se}};
        std::string text = j.dump(2);
        fpk::io::write_text(join(out_dir, "metadata.json"), text);
        set_out(json_out, text);
    });
}

int fpk_compare(const char* pde_dir, const char* mc_dir, const char* out_dir,
                char** json_out, int* within_out) {
    return guarded([&] {
        if (!pde_dir || !mc_dir) throw fpk::Error(fpk::errc::invalid, "null directory");
        ensure_dir(out_dir);

        json meta;
        try {
            meta = json::parse(fpk::io::read_text(join(pde_dir, "metadata.json")));
        } catch (const json::exception& e) {
            throw fpk::Error(fpk::errc::io, "bad metadata.json in '" + std::string(pde_dir) +
                                                "': " + e.what());
        }
        if (!meta.contains("grid") || meta.value("command", "") != "solve")
            throw fpk::Error(fpk::errc::invalid,
                             "'" + std::string(pde_dir) + "' does not look like a solve output");
        double h = meta["grid"]["h"].get<double>();
        double bound = 0.05;
        if (meta.contains("config") && meta["config"].contains("tolerances"))
            bound = meta["config"]["tolerances"]["compare_l1"].get<double>();

        fpk::io::DensityTable pde = fpk::io::read_density_table(join(pde_dir, "density.csv"));
        fpk::io::DensityTable mc = fpk::io::read_density_table(join(mc_dir, "mc_hist.csv"));
        if (pde.x.size() != mc.x.size())
            throw fpk::Error(fpk::errc::invalid, "grids differ in size");
        for (std::size_t i = 0; i < pde.x.size(); ++i)
            if (std::fabs(pde.x[i] - mc.x[i]) > 1e-9)
                throw fpk::Error(fpk::errc::invalid, "grids do not line up");

        // the two runs may save on different schedules; compare where they meet
        bool within = true;
        std::vector<fpk::CompareRow> rows;
        json jrows = json::array();
        std::size_t a = 0, b = 0;
        while (a < pde.times.size() && b < mc.times.size()) {
            double ta = pde.times[a], tb = mc.times[b];
            double slack = 1e-9 * std::max(1.0, std::fabs(ta));
            if (ta < tb - slack) {
                ++a;
                continue;
            }
            if (tb < ta - slack) {
                ++b;
                continue;
            }
            fpk::CompareRow row;
            row.t = ta;
            double l1 = 0, mp = 0, mm = 0;
            for (std::size_t i = 0; i < pde.x.size(); ++i) {
                l1 += std::fabs(pde.u[a][i] - mc.u[b][i]);
                mp += pde.u[a][i];
                mm += mc.u[b][i];
            }
            row.l1 = l1 * h;
            row.mass_delta = std::fabs(mp - mm) * h;
            within = within && row.l1 <= bound;
            rows.push_back(row);
            jrows.push_back(
                json{{"t", row.t}, {"l1", row.l1}, {"mass_delta", row.mass_delta}});
            ++a;
            ++b;
        }
        if (rows.empty())
            throw fpk::Error(fpk::errc::invalid, "the runs share no save times");
        fpk::io::write_compare_csv(join(out_dir, "compare.csv"), rows);

        json j;
        j["version"] = kVersion;
        j["bound"] = bound;
        j["within"] = within;
        j["rows"] = jrows;
        if (within_out) *within_out = within ? 1 : 0;
        set_out(json_out, j.dump(2));
    });
}

int fpk_ergodic(const fpk_config* cfg, double t_end, const char* out_dir, char** json_out) {
    return guarded([&] {
        const fpk::RunConfig& c = need(cfg);
        ensure_dir(out_dir);

        fpk::Problem p = c.problem;
        if (t_end > 0) p.t_end = t_end;
        fpk::SolveParams sp = c.solve;
        // averaging needs a dense tail of saves; the config schedule is kept
        // only when it was written for this horizon
        if (t_end > 0 || sp.save_times.size() < 8) {
            sp.save_times.clear();
            for (int j = 1; j <= 40; ++j)
                sp.save_times.push_back(p.t_end * j / 40);
        }

        fpk::SolveResult r = fpk::solve(p, sp);
        fpk::StationaryDensity s = fpk::stationary_solve(p, sp.K, sp.N, sp.scheme);
        fpk::ConvergenceReport rep = fpk::convergence_report(r.flow, s);

        fpk::io::write_ergodic_csv(join(out_dir, "ergodic.csv"), rep);
        fpk::io::write_stationary_csv(join(out_dir, "stationary.csv"), s);

        json j = meta_head("ergodic", c);
        j["t_end"] = p.t_end;
        j["grid"] = grid_json(s.grid);
        j["stationary_residual"] = s.residual;
        j["monotone_trend"] = rep.monotone_trend;
        if (!rep.rows.empty())
            j["final"] = json{{"t", rep.rows.back().t},
                              {"l1_to_stationary", rep.rows.back().l1},
                              {"sigma_mass", rep.rows.back().sigma_mass}};
        std::string text = j.dump(2);
        fpk::io::write_text(join(out_dir, "metadata.json"), text);
        set_out(json_out, text);
    });
}

} // extern "C"
