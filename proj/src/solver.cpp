#include "fpk/solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace fpk {

namespace {

// z / (e^z - 1), the exponential-fitting weight; continuous through 0,
// decays to 0 for large positive z and grows like -z for large negative z
double bern(double z) {
    if (std::fabs(z) < 1e-12) return 1 - z / 2;
    double em = std::expm1(z);
    if (std::isinf(em)) return 0;
    return z / em;
}

[[noreturn]] void bad_coefficient(const char* which, double x, double t) {
    throw Error(errc::numeric, std::string("coefficient ") + which +
                                   " evaluated to a non-finite value at x=" +
                                   std::to_string(x) + ", t=" + std::to_string(t));
}

} // namespace

void Discretization::resample(double t) {
    if (autonomous) return;
    const Grid1D& g = grid;
    double h = g.h();
    for (int i = 0; i < g.n; ++i) {
        double x = g.center(i);
        double a = mollified ? mollified->eval_a(x, t) : pa.run1(x, t);
        if (!std::isfinite(a)) bad_coefficient("a", x, t);
        a_cell[static_cast<std::size_t>(i)] = a;
        if (!pc.empty() || mollified) {
            double c = mollified ? mollified->eval_c(x, t) : pc.run1(x, t);
            if (!std::isfinite(c)) bad_coefficient("c", x, t);
            c_cell[static_cast<std::size_t>(i)] = c;
        }
    }
    for (int f = 0; f <= g.n; ++f) {
        double x = g.lo + f * h;
        double b = mollified ? mollified->eval_b(x, t) : pb.run1(x, t);
        if (!std::isfinite(b)) bad_coefficient("b", x, t);
        b_face[static_cast<std::size_t>(f)] = b;
    }
    sampled_at = t;
}

Discretization discretize(const Problem& p, int K, int N, FluxScheme scheme,
                          const MollifiedSet* mollified) {
    p.check();
    if (p.domain.dim != 1)
        throw Error(errc::invalid, "the grid solver is one-dimensional");
    if (K < 1) throw Error(errc::invalid, "shell index must be >= 1");
    if (N < 16) throw Error(errc::invalid, "need at least 16 cells");

    Region r = exhaust(p.domain, K);
    Discretization d;
    d.grid = Grid1D{K, r.lo[0], r.hi[0], N};
    d.scheme = scheme;
    d.mollified = mollified;
    d.pa = expr::Program::compile(p.coeffs.a[0]);
    d.pb = expr::Program::compile(p.coeffs.b[0]);
    if (p.coeffs.has_c()) d.pc = expr::Program::compile(p.coeffs.c);
    d.autonomous = p.coeffs.autonomous();

    d.a_cell.resize(static_cast<std::size_t>(N));
    d.b_face.resize(static_cast<std::size_t>(N) + 1);
    d.c_cell.assign(static_cast<std::size_t>(N), 0.0);

    bool was_autonomous = d.autonomous;
    d.autonomous = false;
    d.resample(0.0);
    d.autonomous = was_autonomous;
    return d;
}

OperatorStencil assemble_operator(const Discretization& d, double eps) {
    const Grid1D& g = d.grid;
    int n = g.n;
    double h = g.h();

    // interface transfer: F_f = P[f] u_f - Q[f] u_{f-1}, ghosts zero
    std::vector<double> P(static_cast<std::size_t>(n) + 1), Q(static_cast<std::size_t>(n) + 1);
    for (int f = 0; f <= n; ++f) {
        auto sf = static_cast<std::size_t>(f);
        double al = f > 0 ? d.a_cell[sf - 1] + eps : d.a_cell[0] + eps;
        double ar = f < n ? d.a_cell[sf] + eps : d.a_cell[static_cast<std::size_t>(n) - 1] + eps;
        double b = d.b_face[sf];
        if (d.scheme == FluxScheme::Upwind) {
            P[sf] = ar / h + std::max(-b, 0.0);
            Q[sf] = al / h + std::max(b, 0.0);
        } else {
            double am = (al + ar) / 2;
            if (am <= 0) {
                P[sf] = std::max(-b, 0.0);
                Q[sf] = std::max(b, 0.0);
            } else {
                double z = b * h / am;
                P[sf] = bern(z) * ar / h;
                Q[sf] = bern(-z) * al / h;
            }
        }
    }

    OperatorStencil st;
    st.sub.resize(static_cast<std::size_t>(n));
    st.diag.resize(static_cast<std::size_t>(n));
    st.sup.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto si = static_cast<std::size_t>(i);
        st.sub[si] = Q[si] / h;
        st.sup[si] = P[si + 1] / h;
        st.diag[si] = -(Q[si + 1] + P[si]) / h + d.c_cell[si];
    }
    st.leak_left = P[0];
    st.leak_right = Q[static_cast<std::size_t>(n)];
    return st;
}

void step(Discretization& d, std::vector<double>& u, double t_new, double dt,
          double eps, StepBudget* budget) {
    if (!(dt > 0)) throw Error(errc::invalid, "dt must be positive");
    d.resample(t_new);

    const Grid1D& g = d.grid;
    int n = g.n;
    double h = g.h();
    if (static_cast<int>(u.size()) != n)
        throw Error(errc::invalid, "state size does not match the grid");

    OperatorStencil st = assemble_operator(d, eps);

    // implicit Euler: (I - dt L) u_new = u, a tridiagonal M-matrix
    std::vector<double> lo(static_cast<std::size_t>(n)), di(static_cast<std::size_t>(n)),
        up(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto si = static_cast<std::size_t>(i);
        lo[si] = -dt * st.sub[si];
        up[si] = -dt * st.sup[si];
        di[si] = 1 - dt * st.diag[si];
    }

    // Thomas: with nonpositive off-diagonals and nonnegative data the sweep
    // only adds nonnegatives, so u_new >= 0 holds bitwise
    for (int i = 1; i < n; ++i) {
        auto si = static_cast<std::size_t>(i);
        double w = lo[si] / di[si - 1];
        di[si] -= w * up[si - 1];
        u[si] -= w * u[si - 1];
        if (!(di[si] > 0))
            throw Error(errc::numeric, "linear solve breakdown at t=" + std::to_string(t_new) +
                                           ", cell " + std::to_string(i));
    }
    auto sn = static_cast<std::size_t>(n);
    u[sn - 1] /= di[sn - 1];
    for (int i = n - 2; i >= 0; --i) {
        auto si = static_cast<std::size_t>(i);
        u[si] = (u[si] - up[si] * u[si + 1]) / di[si];
    }

    for (int i = 0; i < n; ++i)
        if (!std::isfinite(u[static_cast<std::size_t>(i)]))
            throw Error(errc::numeric,
                        "density non-finite at t=" + std::to_string(t_new) + ", cell " +
                            std::to_string(i) + " (x=" + std::to_string(g.center(i)) + ")");

    if (budget) {
        double killed = 0;
        for (int i = 0; i < n; ++i)
            killed += d.c_cell[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
        budget->killed = dt * killed * h;
        budget->outflux = dt * (st.leak_left * u[0] + st.leak_right * u[sn - 1]);
    }
}

namespace {

std::vector<double> initial_cells(const Problem& p, const Grid1D& g) {
    std::vector<double> u(static_cast<std::size_t>(g.n), 0.0);
    double h = g.h();
    switch (p.initial.kind) {
        case InitialMeasure::Kind::Dirac: {
            double x0 = p.initial.point[0];
            if (x0 < g.lo || x0 > g.hi)
                throw Error(errc::invalid, "dirac point lies outside the meshed shell");
            // a point exactly on an interior face belongs to both closed
            // cells; split evenly so the discrete mean stays at the point
            long f = std::lround((x0 - g.lo) / h);
            if (f >= 1 && f <= g.n - 1 && std::fabs(x0 - (g.lo + f * h)) <= 1e-9 * h) {
                u[static_cast<std::size_t>(f) - 1] = 0.5 / h;
                u[static_cast<std::size_t>(f)] = 0.5 / h;
            } else {
                u[static_cast<std::size_t>(g.locate(x0))] = 1.0 / h;
            }
            return u;
        }
        case InitialMeasure::Kind::Uniform: {
            double a = p.initial.lo[0], b = p.initial.hi[0];
            if (a < g.lo - 1e-12 * (g.hi - g.lo) || b > g.hi + 1e-12 * (g.hi - g.lo))
                throw Error(errc::invalid, "uniform initial box exceeds the meshed shell");
            for (int i = 0; i < g.n; ++i) {
                double cl = g.lo + i * h, ch = cl + h;
                double ov = std::max(0.0, std::min(ch, b) - std::max(cl, a));
                u[static_cast<std::size_t>(i)] = ov / ((b - a) * h);
            }
            return u;
        }
        case InitialMeasure::Kind::Density: {
            expr::Program pr = expr::Program::compile(p.initial.density);
            double z = 0;
            for (int i = 0; i < g.n; ++i) {
                double x = g.center(i);
                double v = pr.run1(x, 0.0);
                if (std::isnan(v)) v = expr::evaluate1(p.initial.density, x, 0.0);
                if (!std::isfinite(v) || v < 0)
                    throw Error(errc::invalid, "initial density invalid at x=" + std::to_string(x));
                u[static_cast<std::size_t>(i)] = v;
                z += v * h;
            }
            if (!(z > 0))
                throw Error(errc::invalid, "initial density carries no mass on the meshed shell");
            for (double& v : u) v /= z;
            return u;
        }
    }
    throw Error(errc::invalid, "unknown initial measure kind");
}

struct LegOutput {
    std::vector<std::vector<double>> snaps;
    MassLedger led;
};

// march one viscosity leg through the save schedule; every save interval is
// cut into equal steps so save times are hit exactly
LegOutput run_leg(Discretization& d, std::vector<double> u, double t0,
                  const std::vector<double>& saves, double dt, double eps) {
    LegOutput out;
    double h = d.grid.h();
    auto mass = [&](const std::vector<double>& v) {
        double s = 0;
        for (double w : v) s += w;
        return s * h;
    };
    double m0 = mass(u);
    double C = 0, B = 0;
    out.led.t.push_back(t0);
    out.led.M.push_back(m0);
    out.led.C.push_back(0);
    out.led.B.push_back(0);
    out.led.r.push_back(0);

    double t = t0;
    for (double target : saves) {
        if (target <= t + 1e-300) {
            // save at the current time (t0 itself when the schedule starts there)
            out.snaps.push_back(u);
            continue;
        }
        long m = std::lround((target - t) / dt);
        if (m < 1) m = 1;
        double hs = (target - t) / static_cast<double>(m);
        for (long j = 1; j <= m; ++j) {
            double tn = (j == m) ? target : t + hs * static_cast<double>(j);
            StepBudget sb;
            step(d, u, tn, hs, eps, &sb);
            C += sb.killed;
            B += sb.outflux;
        }
        t = target;
        out.snaps.push_back(u);
        out.led.t.push_back(t);
        out.led.M.push_back(mass(u));
        out.led.C.push_back(C);
        out.led.B.push_back(B);
        out.led.r.push_back(out.led.M.back() - m0 - C);
    }
    return out;
}

SolveResult solve_impl(const Problem& p, const SolveParams& sp,
                       const std::vector<double>* u0, double t0) {
    p.check();
    if (p.domain.dim != 1)
        throw Error(errc::invalid, "the grid solver is one-dimensional");

    std::vector<double> ladder = sp.eps_ladder.empty() ? std::vector<double>{0.0} : sp.eps_ladder;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] >= 0) || !std::isfinite(ladder[i]))
            throw Error(errc::invalid, "viscosity entries must be finite and nonnegative");
        if (i > 0 && !(ladder[i] < ladder[i - 1]))
            throw Error(errc::invalid, "viscosity ladder must be strictly decreasing");
    }

    std::vector<double> saves = sp.save_times;
    if (saves.empty()) {
        for (int j = 1; j <= 32; ++j) saves.push_back(p.t_end * j / 32);
        if (t0 > 0) {
            std::vector<double> tail;
            for (double s : saves)
                if (s > t0) tail.push_back(s);
            saves = std::move(tail);
        }
    }
    if (saves.empty()) throw Error(errc::invalid, "no save times requested");
    for (std::size_t i = 0; i < saves.size(); ++i) {
        if (saves[i] < t0 || saves[i] > p.t_end * (1 + 1e-12))
            throw Error(errc::invalid, "save times must lie between the start time and t_end");
        if (i > 0 && !(saves[i] > saves[i - 1]))
            throw Error(errc::invalid, "save times must increase strictly");
    }
    if (saves.front() <= 0 && p.initial.kind == InitialMeasure::Kind::Dirac)
        throw Error(errc::precondition,
                    "a dirac initial measure has no density at t=0; first save must be positive");

    double dt = sp.dt > 0 ? sp.dt : p.t_end / 2000;

    std::optional<MollifiedSet> ms;
    if (sp.mollify_n > 0) ms.emplace(mollify_coefficients(p, sp.mollify_n));

    Discretization d = discretize(p, sp.K, sp.N, sp.scheme, ms ? &*ms : nullptr);
    std::vector<double> u_init = u0 ? *u0 : initial_cells(p, d.grid);
    if (static_cast<int>(u_init.size()) != d.grid.n)
        throw Error(errc::invalid, "restart state does not match the grid");

    SolveResult res;
    std::vector<double> prev_final;
    double h = d.grid.h();
    for (std::size_t e = 0; e < ladder.size(); ++e) {
        LegOutput leg = run_leg(d, u_init, t0, saves, dt, ladder[e]);
        if (!prev_final.empty()) {
            double l1 = 0;
            for (std::size_t i = 0; i < leg.snaps.back().size(); ++i)
                l1 += std::fabs(leg.snaps.back()[i] - prev_final[i]);
            res.eps_l1.push_back(l1 * h);
        }
        prev_final = leg.snaps.back();
        if (e + 1 == ladder.size()) {
            res.flow.grid = d.grid;
            res.flow.times = saves;
            res.flow.u = std::move(leg.snaps);
            res.flow.eps_used = ladder;
            res.ledger = std::move(leg.led);
        }
    }

    for (std::size_t i = 1; i < res.eps_l1.size(); ++i)
        if (!(res.eps_l1[i] < res.eps_l1[i - 1])) {
            res.ladder_converged = false;
            res.warnings.push_back("viscosity ladder L1 distances are not decreasing");
            break;
        }
    return res;
}

} // namespace

SolveResult solve(const Problem& p, const SolveParams& sp) {
    return solve_impl(p, sp, nullptr, 0.0);
}

SolveResult solve_from(const Problem& p, const SolveParams& sp,
                       const std::vector<double>& u0, double t0) {
    if (!(t0 > 0) || !(t0 < p.t_end))
        throw Error(errc::invalid, "restart time must lie inside (0, t_end)");
    SolveParams filtered = sp;
    if (!sp.save_times.empty()) {
        filtered.save_times.clear();
        for (double s : sp.save_times)
            if (s > t0) filtered.save_times.push_back(s);
        if (filtered.save_times.empty())
            throw Error(errc::invalid, "no save times after the restart time");
    }
    return solve_impl(p, filtered, &u0, t0);
}

MassIdentityReport mass_identity_report(const MassLedger& led, double tol_mass) {
    if (led.t.empty()) throw Error(errc::invalid, "empty ledger");
    MassIdentityReport rep;
    rep.t = led.t;
    rep.B = led.B;
    double m0 = led.M.front();
    double max_r = 0; // signed: positive r means the scheme created mass
    for (std::size_t i = 0; i < led.t.size(); ++i) {
        rep.max_abs_r = std::max(rep.max_abs_r, std::fabs(led.r[i]));
        rep.min_r = std::min(rep.min_r, led.r[i]);
        max_r = std::max(max_r, led.r[i]);
        double gap = std::fabs(led.M[i] + std::fabs(led.C[i]) + led.B[i] - m0);
        rep.budget_gap = std::max(rep.budget_gap, gap);
    }
    if (max_r > tol_mass)
        rep.classification = "inconsistent"; // mass grew: scheme or ledger defect
    else if (rep.min_r < -tol_mass)
        rep.classification = "strict-subprobability";
    else
        rep.classification = "identity";
    return rep;
}

} // namespace fpk
