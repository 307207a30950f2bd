#include "fpk/mc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <span>
#include <string>
#include <thread>

#include "fpk/linalg.hpp"

namespace fpk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t sm64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// one draw = one hash; no stream state anywhere
std::uint64_t hash4(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                    std::uint64_t slot) {
    std::uint64_t h = sm64(seed);
    h = sm64(h ^ path);
    h = sm64(h ^ step);
    h = sm64(h ^ slot);
    return h;
}

double u01(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53 + 0x1.0p-54; }

// rational approximation of the standard normal quantile (relative error
// below 1.2e-9 everywhere, pure arithmetic, reproducible)
double inv_normal(double p) {
    static const double A[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double B[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double C[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double D[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        return (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
               ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1);
    }
    if (p <= 1 - plow) {
        double q = p - 0.5, r = q * q;
        return (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q /
               (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1);
    }
    double q = std::sqrt(-2 * std::log1p(-p));
    return -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
           ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1);
}

struct Dynamics {
    const Problem* p = nullptr;
    int d = 1;
    std::vector<expr::Program> pa; // d*d
    std::vector<expr::Program> pb; // d
    expr::Program pc;
    bool kill_active = false;
    bool const_sigma = false;
    double sigma_cached[9] = {};
};

[[noreturn]] void numeric_fail(const char* what, double t, std::size_t path) {
    throw Error(errc::numeric, std::string(what) + " at t=" + std::to_string(t) +
                                   " on path " + std::to_string(path));
}

Dynamics build_dynamics(const Problem& p) {
    Dynamics dy;
    dy.p = &p;
    dy.d = p.coeffs.d;
    for (const auto& e : p.coeffs.a) dy.pa.push_back(expr::Program::compile(e));
    for (const auto& e : p.coeffs.b) dy.pb.push_back(expr::Program::compile(e));
    if (p.coeffs.has_c()) {
        dy.pc = expr::Program::compile(p.coeffs.c);
        dy.kill_active = !(expr::is_constant(p.coeffs.c) && expr::evaluate(p.coeffs.c, {}) == 0);
    }
    bool all_const = true;
    for (const auto& e : p.coeffs.a) all_const = all_const && expr::is_constant(e);
    if (all_const) {
        double m[9];
        for (int i = 0; i < dy.d * dy.d; ++i)
            m[i] = 2 * expr::evaluate(p.coeffs.a[static_cast<std::size_t>(i)], {});
        if (!linalg::sym_sqrt(m, dy.d, dy.sigma_cached, 1e-10))
            throw Error(errc::numeric, "constant diffusion matrix is not PSD");
        dy.const_sigma = true;
    }
    return dy;
}

// advance the paths in [i0, i1) through global steps (from, to]
void run_block(const Dynamics& dy, PathEnsemble& e, std::size_t i0, std::size_t i1,
               std::uint64_t from, std::uint64_t to) {
    const int d = dy.d;
    const double dt = e.dt;
    const double sqdt = std::sqrt(dt);
    double m[9], sig[9], bvec[3], xi[3], xnew[3];
    for (std::size_t i = i0; i < i1; ++i) {
        if (e.status[i] != PathStatus::Alive) continue;
        double* xp = &e.x[i * static_cast<std::size_t>(d)];
        for (std::uint64_t k = from + 1; k <= to; ++k) {
            double told = dt * static_cast<double>(k - 1);
            double tnew = dt * static_cast<double>(k);

            const double* S = dy.sigma_cached;
            if (!dy.const_sigma) {
                for (int j = 0; j < d * d; ++j) {
                    m[j] = 2 * dy.pa[static_cast<std::size_t>(j)].run(xp, told);
                    if (!std::isfinite(m[j])) numeric_fail("diffusion coefficient blew up", told, i);
                }
                if (!linalg::sym_sqrt(m, d, sig, 1e-10))
                    numeric_fail("diffusion matrix not PSD", told, i);
                S = sig;
            }
            for (int j = 0; j < d; ++j) {
                bvec[j] = dy.pb[static_cast<std::size_t>(j)].run(xp, told);
                if (!std::isfinite(bvec[j])) numeric_fail("drift blew up", told, i);
            }
            for (int j = 0; j < d; ++j)
                xi[j] = inv_normal(u01(hash4(e.seed, i, k, static_cast<std::uint64_t>(j))));
            for (int j = 0; j < d; ++j) {
                double diff = 0;
                for (int l = 0; l < d; ++l) diff += S[j * d + l] * xi[l];
                xnew[j] = xp[j] + bvec[j] * dt + sqdt * diff;
                if (!std::isfinite(xnew[j])) numeric_fail("path blew up", tnew, i);
            }

            // killing decision uses the pre-step point, which is inside D
            double cv = 0;
            if (dy.kill_active) {
                cv = dy.pc.run(xp, told);
                if (!std::isfinite(cv)) numeric_fail("killing rate blew up", told, i);
                double pk = std::max(0.0, -std::expm1(cv * dt));
                if (u01(hash4(e.seed, i, k, static_cast<std::uint64_t>(d))) < pk) {
                    e.status[i] = PathStatus::Killed;
                    e.death_time[i] = tnew;
                    for (int j = 0; j < d; ++j) xp[j] = xnew[j];
                    break;
                }
            }
            if (!dy.p->domain.contains(std::span<const double>(xnew, static_cast<std::size_t>(d)))) {
                e.status[i] = PathStatus::Exited;
                e.death_time[i] = tnew;
                for (int j = 0; j < d; ++j) xp[j] = xnew[j];
                break;
            }
            for (int j = 0; j < d; ++j) xp[j] = xnew[j];
            // survived the whole step: credit its killing integral
            if (dy.kill_active) e.c_int[i] += cv * dt;
        }
    }
}

void advance(const Dynamics& dy, PathEnsemble& e, std::uint64_t to, int threads) {
    std::uint64_t from = e.step_index;
    if (to <= from) return;
    threads = std::clamp(threads, 1, 64);
    if (threads == 1 || e.n_paths < 2048) {
        run_block(dy, e, 0, e.n_paths, from, to);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w) {
            std::size_t i0 = e.n_paths * static_cast<std::size_t>(w) / static_cast<std::size_t>(threads);
            std::size_t i1 = e.n_paths * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(threads);
            pool.emplace_back([&, i0, i1, w] {
                try {
                    run_block(dy, e, i0, i1, from, to);
                } catch (...) {
                    errs[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& ep : errs)
            if (ep) std::rethrow_exception(ep);
    }
    e.step_index = to;
    e.t = e.dt * static_cast<double>(to);
}

PathEnsemble init_ensemble(const Problem& p, const McParams& mp) {
    PathEnsemble e;
    e.d = p.coeffs.d;
    e.n_paths = mp.n_paths;
    e.seed = mp.seed;
    e.dt = mp.dt;
    e.x.assign(e.n_paths * static_cast<std::size_t>(e.d), 0.0);
    e.status.assign(e.n_paths, PathStatus::Alive);
    e.death_time.assign(e.n_paths, kNaN);
    e.c_int.assign(e.n_paths, 0.0);

    switch (p.initial.kind) {
        case InitialMeasure::Kind::Dirac: {
            if (!p.domain.contains(p.initial.point))
                throw Error(errc::invalid, "dirac point lies outside the domain");
            for (std::size_t i = 0; i < e.n_paths; ++i)
                for (int j = 0; j < e.d; ++j)
                    e.x[i * static_cast<std::size_t>(e.d) + static_cast<std::size_t>(j)] =
                        p.initial.point[static_cast<std::size_t>(j)];
            return e;
        }
        case InitialMeasure::Kind::Uniform: {
            for (std::size_t i = 0; i < e.n_paths; ++i)
                for (int j = 0; j < e.d; ++j) {
                    double u = u01(hash4(e.seed, i, 0, static_cast<std::uint64_t>(j)));
                    auto sj = static_cast<std::size_t>(j);
                    e.x[i * static_cast<std::size_t>(e.d) + sj] =
                        p.initial.lo[sj] + u * (p.initial.hi[sj] - p.initial.lo[sj]);
                }
            return e;
        }
        case InitialMeasure::Kind::Density: {
            if (e.d != 1 || p.domain.unbounded())
                throw Error(errc::precondition,
                            "density initial sampling needs a bounded 1-d interval");
            double lo = p.domain.lower[0], hi = p.domain.upper[0];
            const int M = 4096;
            double hg = (hi - lo) / M;
            expr::Program pr = expr::Program::compile(p.initial.density);
            std::vector<double> cum(M + 1, 0.0), w(M);
            for (int j = 0; j < M; ++j) {
                double v = pr.run1(lo + (j + 0.5) * hg, 0.0);
                if (!std::isfinite(v) || v < 0)
                    throw Error(errc::invalid, "initial density invalid at x=" +
                                                   std::to_string(lo + (j + 0.5) * hg));
                w[static_cast<std::size_t>(j)] = v;
                cum[static_cast<std::size_t>(j) + 1] = cum[static_cast<std::size_t>(j)] + v;
            }
            double z = cum.back();
            if (!(z > 0)) throw Error(errc::invalid, "initial density carries no mass");
            for (std::size_t i = 0; i < e.n_paths; ++i) {
                double target = u01(hash4(e.seed, i, 0, 0)) * z;
                auto it = std::upper_bound(cum.begin() + 1, cum.end(), target);
                auto j = static_cast<std::size_t>(it - cum.begin() - 1);
                if (j >= w.size()) j = w.size() - 1;
                double frac = (target - cum[j]) / w[j];
                e.x[i] = lo + (static_cast<double>(j) + frac) * hg;
            }
            return e;
        }
    }
    throw Error(errc::invalid, "unknown initial measure kind");
}

// map save times onto the step lattice
std::vector<std::uint64_t> save_steps(const std::vector<double>& saves, double dt,
                                      double t_end, double t_from) {
    std::vector<std::uint64_t> ks;
    double prev = t_from;
    for (double s : saves) {
        if (!(s > prev) || s > t_end * (1 + 1e-12))
            throw Error(errc::invalid, "save times must increase strictly within (start, t_end]");
        auto k = static_cast<std::uint64_t>(std::llround(s / dt));
        if (k < 1 || std::fabs(static_cast<double>(k) * dt - s) > 1e-9 * std::max(1.0, s))
            throw Error(errc::invalid, "save time " + std::to_string(s) +
                                           " is not a multiple of dt");
        ks.push_back(k);
        prev = s;
    }
    return ks;
}

} // namespace

std::size_t PathEnsemble::count(PathStatus s) const {
    std::size_t n = 0;
    for (PathStatus q : status) n += (q == s);
    return n;
}

McResult simulate(const Problem& p, const McParams& mp) {
    p.check();
    if (p.coeffs.d > 3)
        throw Error(errc::precondition, "the particle oracle supports d <= 3");
    if (!(mp.dt > 0) || mp.n_paths == 0)
        throw Error(errc::invalid, "need dt > 0 and at least one path");

    std::vector<double> saves = mp.save_times;
    if (saves.empty()) {
        // default schedule: 32 near-uniform times snapped onto the step lattice
        auto n_total = std::llround(p.t_end / mp.dt);
        if (n_total >= 1 && mp.dt * static_cast<double>(n_total) > p.t_end * (1 + 1e-12))
            --n_total; // rounding up would step past the horizon
        if (n_total < 1) throw Error(errc::invalid, "dt exceeds the time horizon");
        long long prev = 0;
        for (int j = 1; j <= 32; ++j) {
            auto k = std::llround(static_cast<double>(j) * static_cast<double>(n_total) / 32.0);
            if (k <= prev) continue;
            saves.push_back(mp.dt * static_cast<double>(k));
            prev = k;
        }
    }
    std::vector<std::uint64_t> ks = save_steps(saves, mp.dt, p.t_end, 0.0);

    Dynamics dy = build_dynamics(p);
    PathEnsemble e = init_ensemble(p, mp);
    McResult res;
    for (std::size_t m = 0; m < ks.size(); ++m) {
        advance(dy, e, ks[m], mp.threads);
        e.t = saves[m]; // stamp the requested time, step_index holds the clock
        res.snapshots.push_back(e);
    }
    return res;
}

McResult resume(const Problem& p, const PathEnsemble& state,
                const std::vector<double>& save_times, int threads) {
    p.check();
    if (state.n_paths == 0 || state.x.size() != state.n_paths * static_cast<std::size_t>(state.d) ||
        state.status.size() != state.n_paths || state.c_int.size() != state.n_paths ||
        !(state.dt > 0))
        throw Error(errc::invalid, "malformed ensemble state");
    if (state.d != p.coeffs.d)
        throw Error(errc::invalid, "ensemble dimension does not match the problem");
    std::vector<std::uint64_t> ks =
        save_steps(save_times, state.dt, p.t_end, state.dt * static_cast<double>(state.step_index));

    Dynamics dy = build_dynamics(p);
    PathEnsemble e = state;
    McResult res;
    for (std::size_t m = 0; m < ks.size(); ++m) {
        if (ks[m] <= e.step_index)
            throw Error(errc::invalid, "save times must lie beyond the resume point");
        advance(dy, e, ks[m], threads);
        e.t = save_times[m];
        res.snapshots.push_back(e);
    }
    return res;
}

std::vector<double> empirical_density(const PathEnsemble& snap, const Grid1D& grid) {
    if (snap.d != 1)
        throw Error(errc::precondition, "histograms are one-dimensional");
    std::vector<double> u(static_cast<std::size_t>(grid.n), 0.0);
    double h = grid.h();
    for (std::size_t i = 0; i < snap.n_paths; ++i) {
        if (snap.status[i] != PathStatus::Alive) continue;
        double xv = snap.x[i];
        if (xv < grid.lo || xv >= grid.hi) continue;
        int c = grid.locate(xv);
        u[static_cast<std::size_t>(c)] += 1.0;
    }
    double scale = 1.0 / (static_cast<double>(snap.n_paths) * h);
    for (double& v : u) v *= scale;
    return u;
}

SubprobEstimate subprob_estimate(const PathEnsemble& snap) {
    SubprobEstimate est;
    auto n = static_cast<double>(snap.n_paths);
    double sum = 0, sumsq = 0;
    for (std::size_t i = 0; i < snap.n_paths; ++i) {
        double s = (snap.status[i] == PathStatus::Alive ? 1.0 : 0.0) - snap.c_int[i];
        sum += s;
        sumsq += s * s;
    }
    est.mean = sum / n;
    double var = std::max(0.0, sumsq / n - est.mean * est.mean);
    est.se = std::sqrt(var / n);
    return est;
}

std::vector<CompareRow> compare(const DensityFlow& flow, const McResult& mc) {
    if (flow.times.size() != mc.snapshots.size())
        throw Error(errc::invalid, "PDE and MC save schedules differ in length");
    std::vector<CompareRow> rows;
    double h = flow.grid.h();
    for (std::size_t m = 0; m < flow.times.size(); ++m) {
        const PathEnsemble& snap = mc.snapshots[m];
        if (std::fabs(snap.t - flow.times[m]) > 1e-9 * std::max(1.0, std::fabs(flow.times[m])))
            throw Error(errc::invalid, "PDE and MC save times do not line up");
        std::vector<double> umc = empirical_density(snap, flow.grid);
        CompareRow row;
        row.t = flow.times[m];
        double l1 = 0, mmc = 0;
        for (std::size_t i = 0; i < umc.size(); ++i) {
            l1 += std::fabs(flow.u[m][i] - umc[i]);
            mmc += umc[i];
        }
        row.l1 = l1 * h;
        row.mass_delta = std::fabs(flow.mass(m) - mmc * h);
        rows.push_back(row);
    }
    return rows;
}

} // namespace fpk
