#include "fpk/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "fpk/halton.hpp"

namespace fpk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// deterministic nudge off expression kinks (Halton points are rationals and
// land exactly on axis points and dyadic breakpoints)
constexpr double kJitter = 7.1e-10;

/* ----------------------------------------------------------------- *
 *  ring sampling                                                     *
 * ----------------------------------------------------------------- */

// Quasi-random points in D_k \ D_{k-1} (whole shell when inner == nullptr).
// 1-d non-ball rings are two segments sampled by inverse transform; higher
// dimensions use rejection against the inner shell.
class RingSampler {
public:
    RingSampler(Region outer, const Region* inner, double t_end, std::uint64_t seed)
        : outer_(std::move(outer)), inner_(inner), t_end_(t_end), index_(seed) {}

    void next(std::vector<double>& x, double* t) {
        int d = outer_.dim();
        double u[4];
        if (d == 1 && inner_) {
            quasi::halton_point(index_++, 2, u);
            *t = t_end_ * u[1];
            double left = inner_->lo[0] - outer_.lo[0];
            double right = outer_.hi[0] - inner_->hi[0];
            double s = u[0] * (left + right) + (left + right) * kJitter;
            x[0] = s < left ? outer_.lo[0] + s : inner_->hi[0] + (s - left);
            if (x[0] > outer_.hi[0]) x[0] = outer_.hi[0];
            if (inner_->contains(x)) x[0] = inner_->hi[0] + kJitter * (left + right);
            return;
        }
        for (int guard = 0; guard < (1 << 24); ++guard) {
            quasi::halton_point(index_++, d + 1, u);
            for (int i = 0; i < d; ++i) {
                auto s = static_cast<std::size_t>(i);
                double w = outer_.hi[s] - outer_.lo[s];
                double v = u[i] + kJitter;
                if (v >= 1) v -= 1;
                x[s] = outer_.lo[s] + w * v;
            }
            if (outer_.ball && !outer_.contains(x)) continue;
            if (inner_ && inner_->contains(x)) continue;
            *t = t_end_ * u[d];
            return;
        }
        throw Error(errc::numeric, "ring sampling stalled: inner shell nearly fills the outer one");
    }

private:
    Region outer_;
    const Region* inner_;
    double t_end_;
    std::uint64_t index_;
};

/* ----------------------------------------------------------------- *
 *  shared ring sweep                                                 *
 * ----------------------------------------------------------------- */

struct RingStats {
    int k = 0;
    double min_V = kInf;
    double sup_ratio = -kInf; // LV / (1 + V)
    double sup_lvv = -kInf;   // LV / V over samples with V > 0
    std::vector<double> arg_ratio_x, arg_lvv_x;
    double arg_ratio_t = 0, arg_lvv_t = 0;
    bool v_negative = false;
    Witness v_negative_witness;
};

struct SweepResult {
    std::vector<RingStats> rings;
    std::vector<Witness> eval_failures;
};

SweepResult ring_sweep(const Problem& p, const expr::Expr& V, const GeneratorImage& gi,
                       const CertParams& cp) {
    SweepResult out;
    expr::Program pv = expr::Program::compile(V);
    expr::Program plv = expr::Program::compile(gi.LV);
    std::vector<double> x(static_cast<std::size_t>(p.domain.dim));
    Region prev;
    for (int k = 1; k <= cp.k_max; ++k) {
        Region shell = exhaust(p.domain, k);
        RingSampler rs(shell, k > 1 ? &prev : nullptr, p.t_end, cp.seed);
        RingStats st;
        st.k = k;
        for (int s = 0; s < cp.samples_per_shell; ++s) {
            double t = 0;
            rs.next(x, &t);
            double v = pv.run(x.data(), t);
            double lv = plv.run(x.data(), t);
            if (!std::isfinite(v) || !std::isfinite(lv)) {
                if (out.eval_failures.size() < 16) {
                    Witness w;
                    w.x = x;
                    w.t = t;
                    w.lhs = w.rhs = kNaN;
                    try {
                        expr::evaluate(V, x, t);
                        expr::evaluate(gi.LV, x, t);
                        w.what = "V or LV evaluated to a non-finite value";
                    } catch (const Error& e) {
                        w.what = e.what();
                    }
                    out.eval_failures.push_back(std::move(w));
                }
                continue;
            }
            st.min_V = std::min(st.min_V, v);
            if (v < -cp.tol && !st.v_negative) {
                st.v_negative = true;
                st.v_negative_witness = Witness{"V takes a negative value", x, t, v, 0.0};
            }
            if (1 + v > 1e-300) {
                double ratio = lv / (1 + v);
                if (ratio > st.sup_ratio) {
                    st.sup_ratio = ratio;
                    st.arg_ratio_x = x;
                    st.arg_ratio_t = t;
                }
            }
            if (v > 1e-300) {
                double lvv = lv / v;
                if (lvv > st.sup_lvv) {
                    st.sup_lvv = lvv;
                    st.arg_lvv_x = x;
                    st.arg_lvv_t = t;
                }
            }
        }
        out.rings.push_back(std::move(st));
        prev = std::move(shell);
    }
    return out;
}

// finite-depth blow-up heuristic over ring minima
void assess_blowup(const SweepResult& sw, RingScan* scan) {
    scan->ring_min.clear();
    for (const auto& r : sw.rings) scan->ring_min.push_back(r.min_V);
    scan->failures = sw.eval_failures;
    auto& m = scan->ring_min;
    scan->increasing = m.size() >= 2;
    for (std::size_t i = 1; i < m.size(); ++i)
        if (!(m[i] > m[i - 1])) scan->increasing = false;
    scan->confirmed = scan->increasing && scan->failures.empty();
    if (scan->confirmed && m.size() >= 3) {
        double inc_first = m[1] - m[0];
        double inc_last = m[m.size() - 1] - m[m.size() - 2];
        if (!(inc_last >= 0.5 * inc_first)) scan->confirmed = false;
    }
}

std::vector<ShellSup> shell_table(const SweepResult& sw) {
    std::vector<ShellSup> t;
    for (const auto& r : sw.rings) {
        ShellSup s;
        s.k = r.k;
        s.sup_ratio = r.sup_ratio;
        s.sup_lv_over_v = r.sup_lvv;
        s.argmax_x = r.arg_ratio_x;
        s.argmax_t = r.arg_ratio_t;
        t.push_back(std::move(s));
    }
    return t;
}

void require_time_free(const expr::Expr& V, const char* who) {
    if (expr::uses_time(V))
        throw Error(errc::invalid, std::string(who) + " requires a time-independent V");
}

double eval_time_expr(const expr::Program& prog, const expr::Expr& e, double t) {
    if (prog.empty()) return 0;
    double dummy = 0;
    double v = prog.run(&dummy, t);
    if (std::isnan(v)) expr::evaluate(e, std::span<const double>(&dummy, 0), t);
    return v;
}

} // namespace

/* ----------------------------------------------------------------- *
 *  generator                                                         *
 * ----------------------------------------------------------------- */

GeneratorImage apply_generator(const Problem& p, const expr::Expr& V) {
    if (V.empty()) throw Error(errc::invalid, "V is empty");
    int d = p.coeffs.d;
    if (expr::max_var_index(V) >= d)
        throw Error(errc::invalid,
                    "V references coordinate x" + std::to_string(expr::max_var_index(V) + 1) +
                        " but the problem has dimension " + std::to_string(d));

    GeneratorImage gi;
    gi.gradV.reserve(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) gi.gradV.push_back(expr::differentiate(V, i));

    expr::Expr sum = expr::make_num(0);
    expr::Expr carre = expr::make_num(0);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const expr::Expr& aij = p.coeffs.aij(i, j);
            sum = expr::make_add(sum, expr::make_mul(aij, expr::differentiate(gi.gradV[static_cast<std::size_t>(i)], j)));
            carre = expr::make_add(carre, expr::make_mul(aij, expr::make_mul(gi.gradV[static_cast<std::size_t>(i)],
                                                                             gi.gradV[static_cast<std::size_t>(j)])));
        }
        sum = expr::make_add(sum, expr::make_mul(p.coeffs.b[static_cast<std::size_t>(i)],
                                                 gi.gradV[static_cast<std::size_t>(i)]));
    }
    gi.L0V = sum;
    gi.LV = p.coeffs.has_c() ? expr::make_add(sum, expr::make_mul(p.coeffs.c, V)) : sum;
    gi.carre = carre;
    gi.dtV = expr::differentiate(V, expr::kTimeVar);
    if (gi.dtV.empty()) gi.dtV = expr::make_num(0);
    return gi;
}

/* ----------------------------------------------------------------- *
 *  blow-up scan                                                      *
 * ----------------------------------------------------------------- */

RingScan scan_blowup(const Problem& p, const expr::Expr& V, const CertParams& cp) {
    p.check();
    GeneratorImage gi = apply_generator(p, V);
    SweepResult sw = ring_sweep(p, V, gi, cp);
    RingScan scan;
    assess_blowup(sw, &scan);
    return scan;
}

/* ----------------------------------------------------------------- *
 *  existence: LV <= K (1 + V)                                        *
 * ----------------------------------------------------------------- */

Certificate check_existence_condition(const Problem& p, const expr::Expr& V,
                                      const CertParams& cp) {
    p.check();
    require_time_free(V, "the existence check");
    GeneratorImage gi = apply_generator(p, V);
    SweepResult sw = ring_sweep(p, V, gi, cp);

    Certificate cert;
    cert.kind = CertKind::ExistenceKV;
    cert.shells = shell_table(sw);

    RingScan scan;
    assess_blowup(sw, &scan);
    cert.ring_min_V = scan.ring_min;
    cert.blowup_confirmed = scan.confirmed;

    if (!sw.eval_failures.empty()) {
        cert.status = CertStatus::Inconclusive;
        cert.violations = sw.eval_failures;
        cert.note = "V or LV failed to evaluate at sampled points";
        return cert;
    }
    for (const auto& r : sw.rings)
        if (r.v_negative) {
            cert.status = CertStatus::Inconclusive;
            cert.violations.push_back(r.v_negative_witness);
            cert.note = "V takes negative values; LV <= K(1+V) is not a normalizable bound";
            return cert;
        }
    if (!scan.confirmed) {
        cert.status = CertStatus::Inconclusive;
        cert.note = "blow-up at the frontier not confirmed: sampled ring minima of V do not "
                    "increase steadily";
        return cert;
    }

    double kstar = -kInf;
    for (const auto& r : sw.rings) kstar = std::max(kstar, r.sup_ratio);
    cert.K = kstar;
    cert.status = std::isfinite(kstar) ? CertStatus::Holds : CertStatus::Inconclusive;
    return cert;
}

/* ----------------------------------------------------------------- *
 *  time-dependent bound: dtV + LV <= K(t) + H(t) V                   *
 * ----------------------------------------------------------------- */

Certificate check_timedep_condition(const Problem& p, const expr::Expr& V,
                                    const expr::Expr& K, const expr::Expr& H,
                                    const CertParams& cp) {
    p.check();
    if (!K.empty() && expr::max_var_index(K) >= 0)
        throw Error(errc::invalid, "K must be a function of t only");
    if (!H.empty() && expr::max_var_index(H) >= 0)
        throw Error(errc::invalid, "H must be a function of t only");

    GeneratorImage gi = apply_generator(p, V);
    expr::Program pv = expr::Program::compile(V);
    expr::Program plv = expr::Program::compile(gi.LV);
    expr::Program pdtv = expr::Program::compile(gi.dtV);
    expr::Program pk = K.empty() ? expr::Program() : expr::Program::compile(K);
    expr::Program ph = H.empty() ? expr::Program() : expr::Program::compile(H);

    Certificate cert;
    cert.kind = CertKind::TimedepKH;

    // R(t) = exp(int_0^t H), Q(t) = R(t) int_0^t K/R: tabulated by 4th-order
    // integration of R' = H R, Q' = K + H Q (same curves, tighter error than
    // composing quadratures)
    int npts = std::max(2, cp.t_grid_points);
    cert.t_grid.resize(static_cast<std::size_t>(npts));
    cert.R_curve.resize(static_cast<std::size_t>(npts));
    cert.Q_curve.resize(static_cast<std::size_t>(npts));
    double R = 1, Q = 0;
    cert.t_grid[0] = 0;
    cert.R_curve[0] = 1;
    cert.Q_curve[0] = 0;
    int sub = std::max(1, 4096 / (npts - 1));
    for (int i = 1; i < npts; ++i) {
        double t0 = p.t_end * (i - 1) / (npts - 1);
        double t1 = p.t_end * i / (npts - 1);
        double hstep = (t1 - t0) / sub;
        for (int s = 0; s < sub; ++s) {
            double ts = t0 + s * hstep;
            auto f = [&](double t, double r, double q, double* dr, double* dq) {
                double ht = eval_time_expr(ph, H, t);
                double kt = eval_time_expr(pk, K, t);
                *dr = ht * r;
                *dq = kt + ht * q;
            };
            double k1r, k1q, k2r, k2q, k3r, k3q, k4r, k4q;
            f(ts, R, Q, &k1r, &k1q);
            f(ts + hstep / 2, R + hstep / 2 * k1r, Q + hstep / 2 * k1q, &k2r, &k2q);
            f(ts + hstep / 2, R + hstep / 2 * k2r, Q + hstep / 2 * k2q, &k3r, &k3q);
            f(ts + hstep, R + hstep * k3r, Q + hstep * k3q, &k4r, &k4q);
            R += hstep / 6 * (k1r + 2 * k2r + 2 * k3r + k4r);
            Q += hstep / 6 * (k1q + 2 * k2q + 2 * k3q + k4q);
        }
        cert.t_grid[static_cast<std::size_t>(i)] = t1;
        cert.R_curve[static_cast<std::size_t>(i)] = R;
        cert.Q_curve[static_cast<std::size_t>(i)] = Q;
    }

    // precondition: H >= 0 on [0,T]
    for (int i = 0; i <= 1024; ++i) {
        double t = p.t_end * i / 1024;
        double ht = eval_time_expr(ph, H, t);
        if (ht < -cp.tol) {
            cert.status = CertStatus::Inconclusive;
            cert.note = "H takes negative values on [0,T]";
            cert.violations.push_back(Witness{"H < 0", {}, t, ht, 0.0});
            return cert;
        }
    }

    // sampled inequality + ring minima for the blow-up requirement
    std::vector<double> x(static_cast<std::size_t>(p.domain.dim));
    std::vector<double> ring_min;
    bool eval_failed = false;
    double worst = -kInf;
    Region prev;
    for (int k = 1; k <= cp.k_max; ++k) {
        Region shell = exhaust(p.domain, k);
        RingSampler rs(shell, k > 1 ? &prev : nullptr, p.t_end, cp.seed);
        double mn = kInf;
        for (int s = 0; s < cp.samples_per_shell; ++s) {
            double t = 0;
            rs.next(x, &t);
            double v = pv.run(x.data(), t);
            double lv = plv.run(x.data(), t);
            double dtv = pdtv.empty() ? 0 : pdtv.run(x.data(), t);
            double kt = eval_time_expr(pk, K, t);
            double ht = eval_time_expr(ph, H, t);
            if (!std::isfinite(v) || !std::isfinite(lv) || !std::isfinite(dtv)) {
                eval_failed = true;
                if (cert.violations.size() < 16)
                    cert.violations.push_back(Witness{"V, dtV or LV evaluated to a non-finite value", x, t, kNaN, kNaN});
                continue;
            }
            mn = std::min(mn, v);
            double lhs = dtv + lv;
            double rhs = kt + ht * v;
            double slack = cp.tol * (1 + std::fabs(kt) + std::fabs(ht * v) + std::fabs(lv) + std::fabs(dtv));
            worst = std::max(worst, lhs - rhs);
            if (lhs > rhs + slack && cert.violations.size() < 16)
                cert.violations.push_back(Witness{"dtV + LV > K(t) + H(t) V", x, t, lhs, rhs});
        }
        ring_min.push_back(mn);
        prev = std::move(shell);
    }
    cert.ring_min_V = ring_min;
    cert.K = worst;

    bool increasing = ring_min.size() >= 2;
    for (std::size_t i = 1; i < ring_min.size(); ++i)
        if (!(ring_min[i] > ring_min[i - 1])) increasing = false;
    cert.blowup_confirmed = increasing;
    if (increasing && ring_min.size() >= 3) {
        double inc_first = ring_min[1] - ring_min[0];
        double inc_last = ring_min[ring_min.size() - 1] - ring_min[ring_min.size() - 2];
        if (!(inc_last >= 0.5 * inc_first)) cert.blowup_confirmed = false;
    }

    if (eval_failed) {
        cert.status = CertStatus::Inconclusive;
        cert.note = "evaluation failed at sampled points";
    } else if (!cert.violations.empty()) {
        cert.status = CertStatus::Fails;
        cert.note = "sampled inequality violated";
    } else if (!cert.blowup_confirmed) {
        cert.status = CertStatus::Inconclusive;
        cert.note = "blow-up at the frontier not confirmed for V";
    } else {
        cert.status = CertStatus::Holds;
    }
    return cert;
}

/* ----------------------------------------------------------------- *
 *  ergodic: LV <= -K V outside a shell                               *
 * ----------------------------------------------------------------- */

Certificate check_ergodic_condition(const Problem& p, const expr::Expr& V,
                                    const CertParams& cp) {
    p.check();
    if (!p.coeffs.autonomous())
        throw Error(errc::precondition, "the ergodic check requires time-independent coefficients");
    if (p.coeffs.has_c()) {
        bool zero = expr::is_constant(p.coeffs.c) &&
                    expr::evaluate(p.coeffs.c, std::span<const double>(), 0.0) == 0.0;
        if (!zero) throw Error(errc::precondition, "the ergodic check requires c = 0");
    }
    require_time_free(V, "the ergodic check");
    if (cp.k_max < 2) throw Error(errc::invalid, "ergodic check needs k_max >= 2");

    GeneratorImage gi = apply_generator(p, V);
    SweepResult sw = ring_sweep(p, V, gi, cp);

    Certificate cert;
    cert.kind = CertKind::Ergodic;
    cert.shells = shell_table(sw);

    RingScan scan;
    assess_blowup(sw, &scan);
    cert.ring_min_V = scan.ring_min;
    cert.blowup_confirmed = scan.confirmed;

    if (!sw.eval_failures.empty()) {
        cert.status = CertStatus::Inconclusive;
        cert.violations = sw.eval_failures;
        cert.note = "V or LV failed to evaluate at sampled points";
        return cert;
    }
    for (std::size_t i = 1; i < sw.rings.size(); ++i)
        if (sw.rings[i].v_negative || !(sw.rings[i].sup_lvv > -kInf)) {
            cert.status = CertStatus::Inconclusive;
            if (sw.rings[i].v_negative) cert.violations.push_back(sw.rings[i].v_negative_witness);
            cert.note = "V is not strictly positive on the outer shells";
            return cert;
        }
    if (!scan.confirmed) {
        cert.status = CertStatus::Inconclusive;
        cert.note = "blow-up at the frontier not confirmed: sampled ring minima of V do not "
                    "increase steadily";
        return cert;
    }

    // suffix suprema of LV/V over rings n+1..k_max
    int kmax = static_cast<int>(sw.rings.size());
    std::vector<double> suffix(static_cast<std::size_t>(kmax) + 2, -kInf);
    for (int k = kmax; k >= 2; --k)
        suffix[static_cast<std::size_t>(k)] = std::max(suffix[static_cast<std::size_t>(k) + 1],
                                                       sw.rings[static_cast<std::size_t>(k - 1)].sup_lvv);

    for (int n = 1; n < kmax; ++n) {
        double s = suffix[static_cast<std::size_t>(n) + 1];
        if (s < 0) {
            cert.status = CertStatus::Holds;
            cert.shell_n = n;
            cert.K2 = -s;
            return cert;
        }
    }
    cert.status = CertStatus::Fails;
    const RingStats& last = sw.rings.back();
    cert.violations.push_back(Witness{"sup LV/V over the outermost ring is nonnegative; no positive "
                                      "decay rate exists at any inner shell",
                                      last.arg_lvv_x, last.arg_lvv_t, last.sup_lvv, 0.0});
    cert.note = "LV/V does not become negative toward the frontier";
    return cert;
}

/* ----------------------------------------------------------------- *
 *  initial integrability                                             *
 * ----------------------------------------------------------------- */

namespace {

// ring-ladder quadrature of f against the (raw) initial density, d = 1
IntegralReport density_ladder_1d(const Problem& p, const std::function<double(double)>& f,
                                 const IntegrabilityParams& ip) {
    expr::Program prho = expr::Program::compile(p.initial.density);
    double Z = 0;
    std::vector<double> inc;
    Region prev;
    for (int k = 1; k <= ip.k_max; ++k) {
        Region r = exhaust(p.domain, k);
        struct Seg {
            double lo, hi;
        };
        Seg segs[2];
        int nseg = 0;
        if (k == 1) {
            segs[nseg++] = {r.lo[0], r.hi[0]};
        } else {
            if (prev.lo[0] > r.lo[0]) segs[nseg++] = {r.lo[0], prev.lo[0]};
            if (r.hi[0] > prev.hi[0]) segs[nseg++] = {prev.hi[0], r.hi[0]};
        }
        double vk = 0;
        for (int si = 0; si < nseg; ++si) {
            int cells = std::max(8, ip.cells_per_ring / std::max(1, nseg));
            double h = (segs[si].hi - segs[si].lo) / cells;
            if (!(h > 0)) continue;
            for (int i = 0; i < cells; ++i) {
                double x = segs[si].lo + (i + 0.5) * h;
                double rho = prho.run1(x, 0.0);
                if (std::isnan(rho)) rho = expr::evaluate1(p.initial.density, x, 0.0);
                if (rho <= 0) continue;
                Z += rho * h;
                vk += rho * f(x) * h;
            }
        }
        inc.push_back(vk);
        prev = std::move(r);
    }
    if (!(Z > 0))
        throw Error(errc::invalid, "initial density has no mass on the exhaustion ladder");

    IntegralReport rep;
    double s = 0;
    for (double v : inc) {
        s += v / Z;
        rep.partial.push_back(s);
    }
    rep.value = s;
    rep.finite = true;
    for (double v : rep.partial)
        if (!(std::fabs(v) < ip.blowup_threshold)) rep.finite = false;
    if (inc.size() >= 2) {
        double last = std::fabs(inc[inc.size() - 1] / Z);
        double prev_inc = std::fabs(inc[inc.size() - 2] / Z);
        if (!(last <= 0.99 * prev_inc + 1e-15 * (1 + std::fabs(rep.value)))) rep.finite = false;
    }
    if (!std::isfinite(rep.value)) rep.finite = false;
    return rep;
}

} // namespace

IntegralReport check_initial_integrability(const Problem& p, const expr::Expr& V,
                                           const IntegrabilityParams& ip) {
    p.check();
    if (expr::max_var_index(V) >= p.domain.dim)
        throw Error(errc::invalid, "V references coordinates beyond the problem dimension");

    if (p.initial.kind == InitialMeasure::Kind::Dirac) {
        IntegralReport rep;
        rep.value = expr::evaluate(V, p.initial.point, 0.0);
        rep.finite = std::isfinite(rep.value);
        rep.partial = {rep.value};
        return rep;
    }
    if (p.initial.kind == InitialMeasure::Kind::Uniform) {
        int d = p.domain.dim;
        int per_axis = std::max(2, static_cast<int>(std::round(
                                       std::pow(double(ip.cells_per_ring), 1.0 / d))));
        std::vector<double> x(static_cast<std::size_t>(d));
        long total = 1;
        for (int i = 0; i < d; ++i) total *= per_axis;
        double sum = 0;
        for (long idx = 0; idx < total; ++idx) {
            long rem = idx;
            for (int i = 0; i < d; ++i) {
                int ci = static_cast<int>(rem % per_axis);
                rem /= per_axis;
                auto s = static_cast<std::size_t>(i);
                x[s] = p.initial.lo[s] +
                       (p.initial.hi[s] - p.initial.lo[s]) * (ci + 0.5) / per_axis;
            }
            sum += expr::evaluate(V, x, 0.0);
        }
        IntegralReport rep;
        rep.value = sum / double(total);
        rep.finite = std::isfinite(rep.value);
        rep.partial = {rep.value};
        return rep;
    }

    if (p.domain.dim != 1)
        throw Error(errc::precondition,
                    "density quadrature of V is implemented for spatial dimension 1");
    expr::Program pv = expr::Program::compile(V);
    return density_ladder_1d(
        p,
        [&](double x) {
            double v = pv.run1(x, 0.0);
            if (std::isnan(v)) v = expr::evaluate1(V, x, 0.0);
            return v;
        },
        ip);
}

IntegralReport integrate_against_initial(const Problem& p,
                                         const std::function<double(double)>& f,
                                         const IntegrabilityParams& ip) {
    p.check();
    if (p.domain.dim != 1)
        throw Error(errc::precondition, "initial-measure quadrature of a tabulated field is 1-d only");
    if (p.initial.kind == InitialMeasure::Kind::Dirac) {
        IntegralReport rep;
        rep.value = f(p.initial.point[0]);
        rep.finite = std::isfinite(rep.value);
        rep.partial = {rep.value};
        return rep;
    }
    if (p.initial.kind == InitialMeasure::Kind::Uniform) {
        int cells = std::max(8, ip.cells_per_ring);
        double lo = p.initial.lo[0], hi = p.initial.hi[0];
        double sum = 0;
        for (int i = 0; i < cells; ++i) sum += f(lo + (hi - lo) * (i + 0.5) / cells);
        IntegralReport rep;
        rep.value = sum / cells;
        rep.finite = std::isfinite(rep.value);
        rep.partial = {rep.value};
        return rep;
    }
    return density_ladder_1d(p, f, ip);
}

/* ----------------------------------------------------------------- *
 *  integrable rescaling                                              *
 * ----------------------------------------------------------------- */

double Rescaling::g(double v) const {
    if (v < 0) v = 0;
    // pieces are ordered; find the one containing v
    std::size_t i = pieces.size() - 1;
    for (std::size_t j = 0; j + 1 < pieces.size(); ++j)
        if (v < pieces[j].hi) {
            i = j;
            break;
        }
    const Piece& pc = pieces[i];
    if (pc.ramp_w <= 0 || v <= pc.ramp_lo) return pc.m_head;
    double u = (v - pc.ramp_lo) / pc.ramp_w;
    if (u >= 1) return pc.m_tail;
    double s = u * u * (3 - 2 * u);
    return pc.m_head - (pc.m_head - pc.m_tail) * s;
}

double Rescaling::theta(double v) const {
    if (v <= 0) return 0;
    std::size_t i = pieces.size() - 1;
    for (std::size_t j = 0; j + 1 < pieces.size(); ++j)
        if (v < pieces[j].hi) {
            i = j;
            break;
        }
    const Piece& pc = pieces[i];
    double acc = pc.theta_lo;
    double head_end = pc.ramp_w > 0 ? pc.ramp_lo : pc.hi;
    acc += pc.m_head * (std::min(v, head_end) - pc.lo);
    if (pc.ramp_w > 0 && v > pc.ramp_lo) {
        double u = std::min((v - pc.ramp_lo) / pc.ramp_w, 1.0);
        double dm = pc.m_head - pc.m_tail;
        acc += pc.ramp_w * (pc.m_head * u - dm * (u * u * u - u * u * u * u / 2));
        if (v > pc.ramp_lo + pc.ramp_w) acc += pc.m_tail * (v - pc.ramp_lo - pc.ramp_w);
    }
    return acc;
}

double Rescaling::W(double v) const { return std::log1p(theta(v)); }

Rescaling rescale_integrable(const Problem& p, const expr::Expr& V, const RescaleParams& rp) {
    p.check();
    RingScan scan = scan_blowup(p, V, rp.blowup);
    if (!scan.confirmed)
        throw Error(errc::precondition,
                    "V is not confirmed to blow up at the frontier; the rescaling needs an "
                    "exhausting V");

    // sample sigma = nu o V^{-1}: (value, weight) pairs
    std::vector<std::pair<double, double>> smp;
    if (p.initial.kind == InitialMeasure::Kind::Dirac) {
        smp.emplace_back(expr::evaluate(V, p.initial.point, 0.0), 1.0);
    } else if (p.initial.kind == InitialMeasure::Kind::Uniform) {
        if (p.domain.dim != 1)
            throw Error(errc::precondition, "rescaling sigma sampling is 1-d only");
        int cells = std::max(8, rp.cells_per_ring);
        for (int i = 0; i < cells; ++i) {
            double x = p.initial.lo[0] +
                       (p.initial.hi[0] - p.initial.lo[0]) * (i + 0.5) / cells;
            smp.emplace_back(expr::evaluate1(V, x, 0.0), 1.0 / cells);
        }
    } else {
        if (p.domain.dim != 1)
            throw Error(errc::precondition, "rescaling sigma sampling is 1-d only");
        expr::Program pv = expr::Program::compile(V);
        expr::Program prho = expr::Program::compile(p.initial.density);
        Region prev;
        for (int k = 1; k <= rp.k_max; ++k) {
            Region r = exhaust(p.domain, k);
            double los[2], his[2];
            int nseg = 0;
            if (k == 1) {
                los[0] = r.lo[0];
                his[0] = r.hi[0];
                nseg = 1;
            } else {
                if (prev.lo[0] > r.lo[0]) { los[nseg] = r.lo[0]; his[nseg] = prev.lo[0]; ++nseg; }
                if (r.hi[0] > prev.hi[0]) { los[nseg] = prev.hi[0]; his[nseg] = r.hi[0]; ++nseg; }
            }
            for (int si = 0; si < nseg; ++si) {
                int cells = std::max(8, rp.cells_per_ring / std::max(1, nseg));
                double h = (his[si] - los[si]) / cells;
                if (!(h > 0)) continue;
                for (int i = 0; i < cells; ++i) {
                    double x = los[si] + (i + 0.5) * h;
                    double rho = prho.run1(x, 0.0);
                    if (std::isnan(rho)) rho = expr::evaluate1(p.initial.density, x, 0.0);
                    if (rho <= 0) continue;
                    double v = pv.run1(x, 0.0);
                    if (std::isnan(v)) v = expr::evaluate1(V, x, 0.0);
                    smp.emplace_back(v, rho * h);
                }
            }
            prev = std::move(r);
        }
    }
    if (smp.empty()) throw Error(errc::invalid, "no sigma samples: initial measure has no mass");

    std::sort(smp.begin(), smp.end());
    double wtot = 0;
    for (auto& s : smp) wtot += s.second;
    std::vector<double> suffix(smp.size() + 1, 0.0);
    for (std::size_t i = smp.size(); i-- > 0;)
        suffix[i] = suffix[i + 1] + smp[i].second / wtot;
    double vmax = smp.back().first;

    // q_k = smallest sampled value whose inclusive tail is <= 2^-k
    auto quantile = [&](int k) {
        double target = std::ldexp(1.0, -k);
        std::size_t i = 0;
        while (i < smp.size() && suffix[i] > target) ++i;
        while (i < smp.size() && i > 0 && smp[i].first == smp[i - 1].first) ++i;
        return i >= smp.size() ? vmax + 1 : smp[i].first;
    };
    auto tail_at = [&](double z) {
        std::size_t lo = 0, hi = smp.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (smp[mid].first < z)
                lo = mid + 1;
            else
                hi = mid;
        }
        return suffix[lo];
    };

    Rescaling out;
    int m = std::max(3, rp.table_size);
    out.z.resize(static_cast<std::size_t>(m));
    out.z[0] = std::max(quantile(1), 1e-9);
    double gap = 0;
    for (int k = 2; k <= m; ++k) {
        double need = quantile(k) - out.z[static_cast<std::size_t>(k - 2)];
        gap = std::max(need, (1 + 1e-6) * std::max(gap, 1.0));
        out.z[static_cast<std::size_t>(k - 1)] = out.z[static_cast<std::size_t>(k - 2)] + gap;
    }
    out.tail_mass.resize(out.z.size());
    for (std::size_t i = 0; i < out.z.size(); ++i) out.tail_mass[i] = tail_at(out.z[i]);

    // secant slopes; s_0 = 1 anchors the head, the phantom final gap grows by 1
    std::vector<double> s(static_cast<std::size_t>(m) + 1);
    s[0] = 1.0;
    for (int k = 1; k < m; ++k)
        s[static_cast<std::size_t>(k)] =
            1.0 / (out.z[static_cast<std::size_t>(k)] - out.z[static_cast<std::size_t>(k - 1)]);
    s[static_cast<std::size_t>(m)] =
        1.0 / ((out.z[static_cast<std::size_t>(m - 1)] - out.z[static_cast<std::size_t>(m - 2)]) + 1);

    std::vector<double> knot(static_cast<std::size_t>(m) + 1);
    for (int k = 1; k <= m; ++k)
        knot[static_cast<std::size_t>(k)] =
            (s[static_cast<std::size_t>(k - 1)] + s[static_cast<std::size_t>(k)]) / 2;

    out.anchor = knot[1] * out.z[0];

    Rescaling::Piece head;
    head.lo = 0;
    head.hi = out.z[0];
    head.m_head = head.m_tail = knot[1];
    head.ramp_lo = out.z[0];
    head.ramp_w = 0;
    head.theta_lo = 0;
    out.pieces.push_back(head);

    for (int k = 1; k < m; ++k) {
        Rescaling::Piece pc;
        pc.lo = out.z[static_cast<std::size_t>(k - 1)];
        pc.hi = out.z[static_cast<std::size_t>(k)];
        pc.m_head = knot[static_cast<std::size_t>(k)];
        pc.m_tail = knot[static_cast<std::size_t>(k) + 1];
        pc.theta_lo = out.anchor + (k - 1);
        double len = pc.hi - pc.lo;
        double dm = pc.m_head - pc.m_tail;
        if (dm <= 1e-300) {
            pc.ramp_lo = pc.hi;
            pc.ramp_w = 0;
        } else {
            double wa = 2 * (1 - pc.m_tail * len) / dm;
            double wb = 2 * (pc.m_head * len - 1) / dm;
            double w = std::min({len / 4, wa, wb}) * (1 - 1e-9);
            if (!(w > 0)) w = 0;
            double alpha = (1 - pc.m_tail * len) / dm - w / 2;
            pc.ramp_lo = pc.lo + alpha;
            pc.ramp_w = w;
        }
        out.pieces.push_back(pc);
    }

    Rescaling::Piece tail;
    tail.lo = out.z.back();
    tail.hi = kInf;
    tail.m_head = tail.m_tail = knot[static_cast<std::size_t>(m)];
    tail.ramp_lo = tail.lo;
    tail.ramp_w = 0;
    tail.theta_lo = out.anchor + (m - 1);
    out.pieces.push_back(tail);
    return out;
}

/* ----------------------------------------------------------------- *
 *  uniqueness-class ladders                                          *
 * ----------------------------------------------------------------- */

Certificate check_uniqueness_class(const DensityFlow& flow, const Problem& p,
                                   const expr::Expr& V, const std::vector<double>& N_ladder,
                                   const UniqParams& up) {
    p.check();
    if (p.coeffs.d != 1)
        throw Error(errc::invalid, "uniqueness-class functionals run on 1-d flows");
    if (N_ladder.empty()) throw Error(errc::invalid, "empty N ladder");
    if (flow.times.empty() || flow.u.empty())
        throw Error(errc::invalid, "flow carries no save times");

    GeneratorImage gi = apply_generator(p, V);
    expr::Program pv = expr::Program::compile(V);
    expr::Program pl0 = expr::Program::compile(gi.L0V);
    expr::Program pcarre = expr::Program::compile(gi.carre);
    expr::Program pgrad = expr::Program::compile(gi.gradV[0]);
    expr::Program pb = expr::Program::compile(p.coeffs.b[0]);
    expr::Program pda = expr::Program::compile(expr::differentiate(p.coeffs.aij(0, 0), 0));
    expr::Program pa = expr::Program::compile(p.coeffs.aij(0, 0));

    Certificate cert;
    cert.kind = CertKind::UniqClassI;
    cert.N_ladder = N_ladder;

    const Grid1D& g = flow.grid;
    double h = g.h();
    double nmax = *std::max_element(N_ladder.begin(), N_ladder.end());

    // coverage: the grid must reach {V <= 2 N_max}
    double vmax_grid = -kInf;
    for (int i = 0; i < g.n; ++i) {
        double v0 = pv.run1(g.center(i), flow.times.front());
        double v1 = pv.run1(g.center(i), flow.times.back());
        vmax_grid = std::max({vmax_grid, v0, v1});
    }
    if (vmax_grid < 2 * nmax * (1 - 1e-12)) {
        cert.status = CertStatus::Inconclusive;
        cert.note = "flow grid does not cover {V <= 2 N_max}";
        return cert;
    }

    std::size_t nt = flow.times.size();
    auto tweight = [&](std::size_t mi) {
        double wl = mi == 0 ? 0 : (flow.times[mi] - flow.times[mi - 1]) / 2;
        double wr = mi + 1 == nt ? 0 : (flow.times[mi + 1] - flow.times[mi]) / 2;
        return wl + wr;
    };

    long band_cells = 0, masked_cells = 0;
    for (double N : N_ladder) {
        double r1 = 0, r2 = 0;
        for (std::size_t mi = 0; mi < nt; ++mi) {
            double t = flow.times[mi];
            double wt = tweight(mi);
            if (wt <= 0 && nt > 1) continue;
            if (nt == 1) wt = 1;
            const std::vector<double>& u = flow.u[mi];
            for (int i = 0; i < g.n; ++i) {
                double x = g.center(i);
                double v = pv.run1(x, t);
                if (!(v >= N && v <= 2 * N)) continue;
                double mu = u[static_cast<std::size_t>(i)] * h;
                if (mu == 0) continue;
                double l0 = pl0.run1(x, t);
                double ca = pcarre.run1(x, t);
                r1 += wt * (std::fabs(l0) / N + ca / (N * N)) * mu;

                ++band_cells;
                if (i == 0 || i == g.n - 1 || u[static_cast<std::size_t>(i)] < up.rho_floor) {
                    ++masked_cells;
                    continue;
                }
                double drho = (u[static_cast<std::size_t>(i) + 1] - u[static_cast<std::size_t>(i) - 1]) / (2 * h);
                double beta = pda.run1(x, t) + pa.run1(x, t) * drho / u[static_cast<std::size_t>(i)];
                double gv = pgrad.run1(x, t);
                double bv = pb.run1(x, t);
                r2 += wt * (std::fabs((bv - beta) * gv) / N + ca / (N * N)) * mu;
            }
        }
        cert.R_N.push_back(r1);
        cert.R_N_ii.push_back(r2);
    }
    cert.masked_fraction = band_cells ? double(masked_cells) / double(band_cells) : 0.0;

    bool decreasing_below = cert.R_N.back() <= up.tol &&
                            (cert.R_N.size() < 2 || cert.R_N.back() <= cert.R_N.front());
    cert.status = decreasing_below ? CertStatus::Holds : CertStatus::Fails;
    if (cert.status == CertStatus::Fails) {
        cert.note = "R_N ladder does not decrease below tolerance";
        Witness w;
        w.what = "R_N at the largest N";
        w.t = flow.times.back();
        w.lhs = cert.R_N.back();
        w.rhs = up.tol;
        cert.violations.push_back(std::move(w));
    }
    return cert;
}

/* ----------------------------------------------------------------- *
 *  moment bound                                                      *
 * ----------------------------------------------------------------- */

MomentReport moment_bound_check(const DensityFlow& flow, const Problem& p,
                                const expr::Expr& V, const Certificate& timedep,
                                double tol_rel) {
    p.check();
    if (timedep.status != CertStatus::Holds)
        throw Error(errc::precondition, "the time-dependent certificate does not hold");
    if (timedep.t_grid.size() < 2)
        throw Error(errc::precondition, "certificate carries no R/Q curves");

    RingScan scan = scan_blowup(p, V);
    if (!scan.confirmed)
        throw Error(errc::precondition,
                    "V is not confirmed to blow up at the frontier; refusing to score a "
                    "degenerate candidate");

    IntegralReport init = check_initial_integrability(p, V);
    if (!init.finite)
        throw Error(errc::precondition,
                    "int V dnu is not finite; rescale V before the moment bound");

    auto interp = [&](const std::vector<double>& ys, double t) {
        const std::vector<double>& ts = timedep.t_grid;
        if (t <= ts.front()) return ys.front();
        if (t >= ts.back()) return ys.back();
        std::size_t i = 1;
        while (ts[i] < t) ++i;
        double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
        return ys[i - 1] * (1 - w) + ys[i] * w;
    };

    expr::Program pv = expr::Program::compile(V);
    const Grid1D& g = flow.grid;
    double h = g.h();

    MomentReport rep;
    rep.v_initial = init.value;
    rep.pass = true;
    rep.worst_gap = -kInf;
    for (std::size_t mi = 0; mi < flow.times.size(); ++mi) {
        double t = flow.times[mi];
        double lhs = 0;
        for (int i = 0; i < g.n; ++i)
            lhs += pv.run1(g.center(i), t) * flow.u[mi][static_cast<std::size_t>(i)] * h;
        double rhs = interp(timedep.Q_curve, t) + interp(timedep.R_curve, t) * init.value;
        rep.t.push_back(t);
        rep.lhs.push_back(lhs);
        rep.rhs.push_back(rhs);
        rep.worst_gap = std::max(rep.worst_gap, lhs - rhs);
        if (lhs > rhs + tol_rel * (1 + std::fabs(rhs))) rep.pass = false;
    }
    return rep;
}

} // namespace fpk
