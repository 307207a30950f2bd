// Acceptance gates. Each criterion prints exactly one [PASS]/[FAIL] line
// with the measured numbers and its wall time; the exit code is the number
// of failed criteria. Run a single criterion by passing its index (1..8).

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "fpk/config.hpp"
#include "fpk/ergodic.hpp"
#include "fpk/lyapunov.hpp"
#include "fpk/mc.hpp"
#include "fpk/mollify.hpp"

using namespace fpk;

namespace {

std::string f(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return buf;
}

struct Gate {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what;
        if (!ok) detail += " [VIOLATED]";
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

RunConfig load(const char* name) {
    return config_load(std::string(FPK_CONFIG_DIR) + "/" + name);
}

double l1_between(const std::vector<double>& a, const std::vector<double>& b, double h) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s * h;
}

std::vector<double> uniform_saves(double t_end, int count) {
    std::vector<double> out;
    for (int j = 1; j <= count; ++j) out.push_back(t_end * j / count);
    return out;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// ------------------------------------------------------------- criterion 1
// Free heat flow against the closed-form Gaussian kernel.
Gate criterion1() {
    Gate g;
    RunConfig c = load("heat.cfg");
    g.require(c.solve.N == 1600 && c.solve.dt == 2.5e-4,
              "config pins N = 1600, dt = 2.5e-4");

    SolveResult r = solve(c.problem, c.solve);
    const Grid1D& grid = r.flow.grid;
    const std::vector<double>& u = r.flow.u.back();
    double t = r.flow.times.back();
    double l1 = 0;
    for (int i = 0; i < grid.n; ++i) {
        double x = grid.center(i);
        double gauss = std::exp(-x * x / (2 * t)) / std::sqrt(2 * M_PI * t);
        l1 += std::fabs(u[static_cast<std::size_t>(i)] - gauss);
    }
    l1 *= grid.h();
    g.require(t == 0.5, "final save at t = 0.5");
    g.require(l1 <= 5e-3, f("L1 vs Gaussian %.3g <= 5e-3", l1));
    g.require(r.ledger.M.back() >= 1 - 1e-6,
              f("M(0.5) = 1 %+.3g >= 1 - 1e-6", r.ledger.M.back() - 1));
    return g;
}

// ------------------------------------------------------------- criterion 2
// Constant killing: exponential mass decay and the exact discrete budget.
Gate criterion2() {
    Gate g;
    RunConfig c = load("heat_killed.cfg");
    SolveResult r = solve(c.problem, c.solve);

    double worst_decay = 0, worst_budget = 0;
    double m0 = 1.0;
    for (std::size_t m = 0; m < r.ledger.t.size(); ++m) {
        double want = std::exp(-0.3 * r.ledger.t[m]);
        worst_decay = std::max(worst_decay, std::fabs(r.ledger.M[m] - want));
        double budget = r.ledger.M[m] + std::fabs(r.ledger.C[m]) + r.ledger.B[m];
        worst_budget = std::max(worst_budget, std::fabs(budget - m0));
    }
    g.require(worst_decay <= 1e-3, f("max |M(t) - e^{-0.3t}| = %.3g <= 1e-3", worst_decay));
    g.require(worst_budget <= 1e-6,
              f("max |M + |C| + B - 1| = %.3g <= 1e-6", worst_budget));
    return g;
}

// ------------------------------------------------------------- criterion 3
// Ornstein-Uhlenbeck: discrete stationary state against exp(-x^2)/sqrt(pi),
// then the Cesaro average from a dirac start against that state.
Gate criterion3() {
    Gate g;
    RunConfig c = load("ou.cfg");
    g.require(c.solve.N == 2000, "config pins N = 2000");

    StationaryDensity s = stationary_solve(c.problem, c.solve.K, c.solve.N, c.solve.scheme);
    double l1_pi = 0;
    for (int i = 0; i < s.grid.n; ++i) {
        double x = s.grid.center(i);
        double pi_x = std::exp(-x * x) / std::sqrt(M_PI);
        l1_pi += std::fabs(s.u[static_cast<std::size_t>(i)] - pi_x);
    }
    l1_pi *= s.grid.h();
    g.require(l1_pi <= 1e-3, f("stationary L1 vs exp(-x^2)/sqrt(pi) %.3g <= 1e-3", l1_pi));

    SolveParams sp = c.solve;
    sp.save_times = uniform_saves(c.problem.t_end, 40);
    SolveResult r = solve(c.problem, sp);
    std::vector<double> sigma = time_average(r.flow, c.problem.t_end);
    double l1_sigma = l1_between(sigma, s.u, s.grid.h());
    g.require(l1_sigma <= 1e-2, f("L1(sigma_20, stationary) %.3g <= 1e-2", l1_sigma));
    return g;
}

// ------------------------------------------------------------- criterion 4
// Degenerate interval problem: both certificates, mass retention, the Monte
// Carlo exit fraction, and the long-run Cesaro average.
Gate criterion4() {
    Gate g;
    RunConfig c = load("interval_degenerate.cfg");
    const LyapunovConfig& ly = *c.lyapunov;

    // (a) existence certificate with finite K and eventually steep LV/V
    Certificate ce = check_existence_condition(c.problem, ly.v, ly.params);
    g.require(ce.status == CertStatus::Holds && std::isfinite(ce.K),
              f("existence holds, K1 = %.3g finite", ce.K));
    int k0 = -1;
    for (std::size_t i = ce.shells.size(); i-- > 0;) {
        if (ce.shells[i].sup_lv_over_v < -1.0)
            k0 = ce.shells[i].k;
        else
            break;
    }
    g.require(k0 >= 1 && k0 <= 12, f("sup LV/V < -1 for every shell k >= %d (<= 12)", k0));

    // (b) ergodic certificate with a positive rate
    Certificate cg = check_ergodic_condition(c.problem, ly.v, ly.params);
    g.require(cg.status == CertStatus::Holds && cg.K2 > 0,
              f("ergodic holds, K2 = %.3g > 0", cg.K2));

    // (c) the solve keeps essentially all mass on the grid
    g.require(c.solve.K == 12 && c.solve.N == 4000 && c.solve.dt == 5e-4,
              "config pins K = 12, N = 4000, dt = 5e-4");
    SolveResult r = solve(c.problem, c.solve);
    g.require(r.ledger.M.back() >= 0.999,
              f("M(1) = 1 %+.3g >= 0.999", r.ledger.M.back() - 1));

    // (d) the particle oracle confirms: paths do not reach the frontier
    g.require(c.mc.n_paths == 100000 && c.mc.dt == 1e-4,
              "config pins 1e5 paths, dt = 1e-4");
    McResult mc = simulate(c.problem, c.mc);
    double exited = mc.snapshots.back().exited_fraction();
    g.require(exited <= 1e-3, f("exited fraction %.3g <= 1e-3", exited));

    // (e) Cesaro average over [0,50] lands on the stationary state
    Problem p50 = c.problem;
    p50.t_end = 50.0;
    SolveParams sp = c.solve;
    sp.dt = 2e-3;
    sp.save_times = uniform_saves(50.0, 40);
    SolveResult r50 = solve(p50, sp);
    StationaryDensity s = stationary_solve(c.problem, c.solve.K, c.solve.N, c.solve.scheme);
    std::vector<double> sigma = time_average(r50.flow, 50.0);
    double l1 = l1_between(sigma, s.u, s.grid.h());
    g.require(l1 <= 0.05, f("L1(sigma_50, stationary) %.3g <= 0.05", l1));
    return g;
}

// ------------------------------------------------------------- criterion 5
// Quadratic-killing pair: existence certificates in d = 1 and d = 2, and the
// d = 2 particle oracle's subprobability statistic.
Gate criterion5() {
    Gate g;
    RunConfig c1 = load("example2_d1.cfg");
    Certificate e1 = check_existence_condition(c1.problem, c1.lyapunov->v,
                                               c1.lyapunov->params);
    g.require(e1.status == CertStatus::Holds && std::isfinite(e1.K),
              f("d=1 existence holds, K = %.3g finite", e1.K));

    RunConfig c2 = load("example2_d2.cfg");
    Certificate e2 = check_existence_condition(c2.problem, c2.lyapunov->v,
                                               c2.lyapunov->params);
    g.require(e2.status == CertStatus::Holds && std::isfinite(e2.K),
              f("d=2 existence holds, K = %.3g finite", e2.K));

    McResult mc = simulate(c2.problem, c2.mc);
    for (const PathEnsemble& snap : mc.snapshots) {
        SubprobEstimate est = subprob_estimate(snap);
        g.require(est.mean <= 1.0 + 3.0 * est.se,
                  f("t = %.3g: E[1{alive} - int c] = %.6g <= 1 + 3 SE (SE %.2g)", snap.t,
                    est.mean, est.se));
    }
    return g;
}

// ------------------------------------------------------------- criterion 6
// Vanishing viscosity on pure transport: the ladder contracts and the last
// run carries the bump to the right place.
Gate criterion6() {
    Gate g;
    RunConfig c = load("transport_bump.cfg");
    SolveResult r = solve(c.problem, c.solve);

    g.require(r.eps_l1.size() == 3, "four ladder runs, three consecutive distances");
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < r.eps_l1.size(); ++i)
        decreasing = decreasing && r.eps_l1[i + 1] < r.eps_l1[i];
    g.require(decreasing, f("ladder distances strictly decreasing: %.3g > %.3g > %.3g",
                            r.eps_l1[0], r.eps_l1[1], r.eps_l1[2]));

    const Grid1D& grid = r.flow.grid;
    const std::vector<double>& u = r.flow.u.back();
    double z = std::sqrt(M_PI / 8.0); // integral of the unnormalized bump
    double l1 = 0;
    for (int i = 0; i < grid.n; ++i) {
        double x = grid.center(i);
        l1 += std::fabs(u[static_cast<std::size_t>(i)] - std::exp(-8 * x * x) / z);
    }
    l1 *= grid.h();
    g.require(l1 <= 0.02, f("L1(u(1), shifted bump) %.3g <= 0.02", l1));
    return g;
}

// ------------------------------------------------------------- criterion 7
// Semigroup property: restarting at a save time retraces the direct run, and
// the particle oracle resumes bit-identically.
Gate criterion7() {
    Gate g;

    for (const char* name : {"heat.cfg", "interval_degenerate.cfg"}) {
        RunConfig c = load(name);
        SolveResult direct = solve(c.problem, c.solve);
        std::size_t mid = c.solve.save_times.size() / 2 - 1;
        double s = c.solve.save_times[mid];
        SolveResult tail = solve_from(c.problem, c.solve, direct.flow.u[mid], s);
        double l1 =
            l1_between(tail.flow.u.back(), direct.flow.u.back(), direct.flow.grid.h());
        g.require(l1 <= 1e-8, f("%s: restart at t = %.3g, L1 gap %.3g <= 1e-8", name, s, l1));
    }

    RunConfig c = load("heat.cfg");
    McResult full = simulate(c.problem, c.mc);
    McResult tail = resume(c.problem, full.snapshots.front(),
                           {c.mc.save_times.back()}, c.mc.threads);
    const PathEnsemble& a = tail.snapshots.back();
    const PathEnsemble& b = full.snapshots.back();
    bool identical = a.step_index == b.step_index && same_bits(a.x, b.x) &&
                     a.status == b.status && same_bits(a.death_time, b.death_time) &&
                     same_bits(a.c_int, b.c_int);
    g.require(identical, "mc resume is bit-identical to the longer run");
    return g;
}

// ------------------------------------------------------------- criterion 8
// Invariant sweep across the shipped configurations.
Gate criterion8() {
    Gate g;

    const char* all[] = {"heat.cfg",          "heat_killed.cfg",    "ou.cfg",
                         "interval_degenerate.cfg", "example2_d1.cfg", "example2_d2.cfg",
                         "transport_bump.cfg", "bad_sign_c.cfg"};

    // positivity and the subprobability residual on every solvable config;
    // flows are kept for the ladder and moment checks below
    DensityFlow flow_heat, flow_ex1, flow_ou;
    Problem prob_heat, prob_ex1, prob_ou;
    int solved = 0;
    double worst_neg = 0, worst_r = -1e300;
    for (const char* name : all) {
        RunConfig c = load(name);
        ValidationReport rep = validate(c.problem);
        if (!rep.ok()) {
            // the deliberately broken config is supposed to land here
            g.require(std::string(name) == "bad_sign_c.cfg",
                      f("%s: validate reports violations", name));
            continue;
        }
        if (c.problem.coeffs.d != 1) continue; // the grid solver is 1-d
        SolveResult r = solve(c.problem, c.solve);
        ++solved;
        for (const std::vector<double>& u : r.flow.u)
            for (double v : u) worst_neg = std::min(worst_neg, v);
        MassIdentityReport mass = mass_identity_report(r.ledger, c.solve.tol_mass);
        double max_r = mass.max_abs_r; // |r| bound; sign checked via classification
        worst_r = std::max(worst_r, max_r);
        g.require(mass.classification != "inconsistent",
                  f("%s: residual stays <= %.1g (%s)", name, c.solve.tol_mass,
                    mass.classification.c_str()));
        if (std::string(name) == "heat.cfg") {
            flow_heat = r.flow;
            prob_heat = c.problem;
        }
        if (std::string(name) == "interval_degenerate.cfg") {
            flow_ex1 = r.flow;
            prob_ex1 = c.problem;
        }
        if (std::string(name) == "ou.cfg") {
            flow_ou = r.flow;
            prob_ou = c.problem;
        }
    }
    g.require(solved == 6, f("%d one-dimensional configs solved", solved));
    g.require(worst_neg >= 0.0, f("every density nonnegative (min %.3g)", worst_neg));

    // symbolic derivatives against central differences, all shipped expressions
    double worst_fd = 0;
    for (const char* name : all) {
        RunConfig c = load(name);
        int d = c.problem.coeffs.d;
        std::vector<expr::Expr> exprs = c.problem.coeffs.a;
        exprs.insert(exprs.end(), c.problem.coeffs.b.begin(), c.problem.coeffs.b.end());
        if (c.problem.coeffs.has_c()) exprs.push_back(c.problem.coeffs.c);
        if (c.lyapunov) exprs.push_back(c.lyapunov->v);

        const double pts[] = {-0.45, -0.34, -0.21, -0.10, 0.10, 0.21, 0.34, 0.45};
        for (const expr::Expr& e : exprs) {
            for (int var = 0; var < d; ++var) {
                expr::Expr de = expr::differentiate(e, var);
                for (double s : pts) {
                    std::vector<double> x(static_cast<std::size_t>(d), 0.7 * s);
                    x[static_cast<std::size_t>(var)] = s;
                    double sym = expr::evaluate(de, x, 0.0);
                    const double step = 1e-6;
                    x[static_cast<std::size_t>(var)] = s + step;
                    double up = expr::evaluate(e, x, 0.0);
                    x[static_cast<std::size_t>(var)] = s - step;
                    double dn = expr::evaluate(e, x, 0.0);
                    double fd = (up - dn) / (2 * step);
                    worst_fd = std::max(worst_fd,
                                        std::fabs(sym - fd) / (1.0 + std::fabs(sym)));
                }
            }
        }
    }
    g.require(worst_fd <= 1e-6, f("symbolic vs central-difference gap %.3g <= 1e-6", worst_fd));

    // mollifier keeps sign, parity and local lower bounds of the rough fields
    {
        MollifiedSet mol = mollify_coefficients(prob_ex1, 8);
        double amin = 1e300;
        for (double v : mol.a) amin = std::min(amin, v);
        g.require(amin >= 0.0, f("mollified diffusion nonnegative (min %.3g)", amin));

        double even_defect = 0, odd_defect = 0, undershoot = 0;
        for (double x : {0.0, 0.25, 0.5, 0.75}) {
            for (double t : {0.1, 0.5, 0.9}) {
                even_defect = std::max(
                    even_defect, std::fabs(mol.eval_a(x, t) - mol.eval_a(-x, t)));
                odd_defect =
                    std::max(odd_defect, std::fabs(mol.eval_b(x, t) + mol.eval_b(-x, t)));
                double local_min = 1e300;
                for (double y = x - mol.bandwidth; y <= x + mol.bandwidth + 1e-12;
                     y += mol.bandwidth / 64)
                    local_min =
                        std::min(local_min, expr::evaluate1(prob_ex1.coeffs.a[0], y));
                undershoot = std::max(undershoot, local_min - mol.eval_a(x, t));
            }
        }
        g.require(even_defect <= 1e-12,
                  f("mollified a stays even (defect %.3g)", even_defect));
        g.require(odd_defect <= 1e-12, f("mollified b stays odd (defect %.3g)", odd_defect));
        g.require(undershoot <= 1e-12,
                  f("no undershoot below the local minimum (%.3g)", undershoot));
    }

    // uniqueness-class ladder contracts on the two reference flows
    {
        RunConfig ch = load("heat.cfg");
        Certificate uh = check_uniqueness_class(flow_heat, prob_heat, ch.lyapunov->v,
                                                ch.lyapunov->n_ladder);
        bool dec = true;
        for (std::size_t i = 0; i + 1 < uh.R_N.size(); ++i)
            dec = dec && uh.R_N[i + 1] < uh.R_N[i];
        g.require(dec && uh.R_N.size() == 4,
                  f("heat R_N ladder decreasing to %.3g", uh.R_N.back()));

        RunConfig ce = load("interval_degenerate.cfg");
        Certificate ue = check_uniqueness_class(flow_ex1, prob_ex1, ce.lyapunov->v,
                                                ce.lyapunov->n_ladder);
        dec = true;
        for (std::size_t i = 0; i + 1 < ue.R_N.size(); ++i)
            dec = dec && ue.R_N[i + 1] < ue.R_N[i];
        g.require(dec && ue.R_N.size() == 4,
                  f("degenerate-interval R_N ladder decreasing to %.3g", ue.R_N.back()));
    }

    // moment bound from the time-dependent certificate on the OU flow
    {
        RunConfig co = load("ou.cfg");
        Certificate td = check_timedep_condition(prob_ou, co.lyapunov->v,
                                                 co.lyapunov->timedep_k,
                                                 co.lyapunov->timedep_h,
                                                 co.lyapunov->params);
        g.require(td.status == CertStatus::Holds, "timedep certificate holds");
        MomentReport mom = moment_bound_check(flow_ou, prob_ou, co.lyapunov->v, td);
        g.require(mom.pass,
                  f("moment bound holds (worst gap %.3g, int V dnu = %.3g)", mom.worst_gap,
                    mom.v_initial));
    }
    return g;
}

struct Criterion {
    const char* name;
    Gate (*run)();
    double limit_s;
};

const Criterion kCriteria[] = {
    {"heat kernel oracle", criterion1, 10},
    {"killing ledger", criterion2, 10},
    {"OU stationary state and ergodic average", criterion3, 60},
    {"degenerate interval problem", criterion4, 300},
    {"quadratic killing in d = 1 and 2", criterion5, 120},
    {"vanishing-viscosity ladder", criterion6, 30},
    {"restart consistency", criterion7, 60},
    {"invariant sweep", criterion8, 120},
};

} // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        int k = std::atoi(argv[i]);
        if (k < 1 || k > 8) {
            std::fprintf(stderr, "usage: acceptance [criterion 1..8]...\n");
            return 2;
        }
        which.push_back(k);
    }
    if (which.empty())
        for (int k = 1; k <= 8; ++k) which.push_back(k);

    int failed = 0;
    for (int k : which) {
        const Criterion& crit = kCriteria[k - 1];
        auto t0 = std::chrono::steady_clock::now();
        Gate g;
        try {
            g = crit.run();
        } catch (const std::exception& e) {
            g.pass = false;
            g.note(std::string("threw: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
        bool in_time = secs <= crit.limit_s;
        bool pass = g.pass && in_time;
        if (!pass) ++failed;
        std::printf("[%s] criterion %d (%s): %s; runtime %.1fs <= %.0fs%s\n",
                    pass ? "PASS" : "FAIL", k, crit.name, g.detail.c_str(), secs,
                    crit.limit_s, in_time ? "" : " [VIOLATED]");
        std::fflush(stdout);
    }
    return failed;
}
