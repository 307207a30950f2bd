#include "fpk/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fpk {

namespace {

// trapezoid weights over times[0..m-1]
std::vector<double> trap_weights(const std::vector<double>& t, std::size_t m) {
    std::vector<double> w(m, 0.0);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        double half = (t[j + 1] - t[j]) / 2;
        w[j] += half;
        w[j + 1] += half;
    }
    return w;
}

struct TriFactor {
    std::vector<double> diag, sup; // forward-eliminated
    std::vector<double> w;         // sub[i]/diag[i-1]
};

// factor (-L + shift I) once; -L has positive diagonal, nonpositive
// off-diagonals, and column sums equal to the frontier leaks, so it is
// singular up to the leak. The tiny shift makes it strictly column
// dominant (all pivots positive) without moving the null direction the
// iteration converges to, and elimination still never subtracts from a
// nonnegative right-hand side.
TriFactor factor_negL(const OperatorStencil& st, double shift) {
    std::size_t n = st.diag.size();
    TriFactor f;
    f.diag.resize(n);
    f.sup.resize(n);
    f.w.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        f.diag[i] = shift - st.diag[i];
        f.sup[i] = -st.sup[i];
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(f.diag[i - 1] > 0))
            throw Error(errc::numeric, "stationary operator factorization broke down");
        f.w[i] = -st.sub[i] / f.diag[i - 1];
        f.diag[i] -= f.w[i] * f.sup[i - 1];
    }
    if (!(f.diag.back() > 0))
        throw Error(errc::numeric, "stationary operator factorization broke down");
    return f;
}

std::vector<double> solve_negL(const TriFactor& f, std::vector<double> rhs) {
    std::size_t n = rhs.size();
    for (std::size_t i = 1; i < n; ++i) rhs[i] -= f.w[i] * rhs[i - 1];
    rhs[n - 1] /= f.diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - f.sup[i] * rhs[i + 1]) / f.diag[i];
    return rhs;
}

void normalize_l1(std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += std::fabs(x);
    if (!(s > 0)) throw Error(errc::numeric, "inverse iteration collapsed to zero");
    for (double& x : v) x /= s;
}

// inverse-iterate to the smallest mode of -L; returns the L1-normalized vector
std::vector<double> smallest_mode(const TriFactor& f, std::vector<double> v) {
    normalize_l1(v);
    for (int it = 0; it < 200; ++it) {
        std::vector<double> next = solve_negL(f, v);
        normalize_l1(next);
        double diff = 0;
        for (std::size_t i = 0; i < v.size(); ++i) diff += std::fabs(next[i] - v[i]);
        v = std::move(next);
        if (diff <= 1e-15) break;
    }
    return v;
}

double apply_residual(const OperatorStencil& st, const std::vector<double>& u, double h) {
    std::size_t n = u.size();
    double r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double lu = st.diag[i] * u[i];
        if (i > 0) lu += st.sub[i] * u[i - 1];
        if (i + 1 < n) lu += st.sup[i] * u[i + 1];
        r += std::fabs(lu);
    }
    return r * h;
}

} // namespace

std::vector<double> time_average(const DensityFlow& flow, double t) {
    if (flow.times.empty() || flow.u.size() != flow.times.size())
        throw Error(errc::invalid, "flow has no saved densities");
    double slack = 1e-9 * std::max(1.0, std::fabs(t));
    if (t > flow.times.back() + slack)
        throw Error(errc::invalid, "flow does not cover the requested time");
    std::size_t m = 0;
    while (m < flow.times.size() && flow.times[m] <= t + slack) ++m;
    if (m < 8)
        throw Error(errc::precondition, "time averaging needs at least 8 save times");

    std::vector<double> w = trap_weights(flow.times, m);
    double span = flow.times[m - 1] - flow.times[0];
    std::vector<double> sigma(flow.u[0].size(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double wj = w[j] / span;
        const std::vector<double>& uj = flow.u[j];
        for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] += wj * uj[i];
    }
    return sigma;
}

StationaryDensity stationary_solve(const Problem& p, int K, int N, FluxScheme scheme) {
    if (p.domain.dim != 1)
        throw Error(errc::precondition, "the stationary solver is one-dimensional");
    if (!p.coeffs.autonomous())
        throw Error(errc::precondition, "stationary states need time-independent coefficients");
    if (p.coeffs.has_c() &&
        !(expr::is_constant(p.coeffs.c) && expr::evaluate(p.coeffs.c, {}) == 0))
        throw Error(errc::precondition, "stationary states need c = 0");

    Discretization d = discretize(p, K, N, scheme);
    OperatorStencil st = assemble_operator(d, 0.0);
    double scale = 0;
    for (double v : st.diag) scale = std::max(scale, std::fabs(v));
    TriFactor f = factor_negL(st, 1e-12 * scale);
    auto n = static_cast<std::size_t>(N);
    double h = d.grid.h();

    std::vector<double> flat(n, 1.0), ramp(n);
    for (std::size_t i = 0; i < n; ++i)
        ramp[i] = static_cast<double>(i) - (static_cast<double>(n) - 1) / 2;
    std::vector<double> v = smallest_mode(f, std::move(flat));
    std::vector<double> w2 = smallest_mode(f, std::move(ramp));

    // both iterations must land on the same ray
    double same = 0, flip = 0;
    for (std::size_t i = 0; i < n; ++i) {
        same += std::fabs(v[i] - w2[i]);
        flip += std::fabs(v[i] + w2[i]);
    }
    if (std::min(same, flip) > 1e-6) {
        double r1 = apply_residual(st, v, h), r2 = apply_residual(st, w2, h);
        throw Error(errc::numeric,
                    "stationary null space is not one-dimensional (mode residuals " +
                        std::to_string(r1) + " and " + std::to_string(r2) + ")");
    }

    double vmin = *std::min_element(v.begin(), v.end());
    if (vmin < -1e-10)
        throw Error(errc::numeric, "stationary candidate has a negative component (" +
                                       std::to_string(vmin) + ")");

    double mass = 0;
    for (double x : v) mass += x;
    mass *= h;
    if (!(mass > 0)) throw Error(errc::numeric, "stationary candidate carries no mass");
    for (double& x : v) x /= mass;

    StationaryDensity out;
    out.grid = d.grid;
    out.u = std::move(v);
    out.residual = apply_residual(st, out.u, h);
    if (out.residual > 1e-8)
        throw Error(errc::numeric,
                    "no stationary probability state on this grid: the frontier leaks mass "
                    "(operator residual " +
                        std::to_string(out.residual) + ")");
    return out;
}

ConvergenceReport convergence_report(const DensityFlow& flow, const StationaryDensity& s) {
    if (flow.grid.n != s.grid.n || flow.grid.lo != s.grid.lo || flow.grid.hi != s.grid.hi)
        throw Error(errc::invalid, "flow and stationary density live on different grids");
    ConvergenceReport rep;
    double h = flow.grid.h();
    for (std::size_t m = 0; m < flow.times.size(); ++m) {
        if (m + 1 < 8) continue;
        ConvergenceRow row;
        row.t = flow.times[m];
        std::vector<double> sigma = time_average(flow, row.t);
        double l1 = 0, mass = 0;
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            l1 += std::fabs(sigma[i] - s.u[i]);
            mass += sigma[i];
        }
        row.l1 = l1 * h;
        row.sigma_mass = mass * h;
        rep.rows.push_back(row);
    }

    // trend: thirds of the curve decrease in mean
    std::size_t nrow = rep.rows.size();
    if (nrow >= 3) {
        std::size_t third = nrow / 3;
        double m0 = 0, m1 = 0, m2 = 0;
        for (std::size_t j = 0; j < third; ++j) m0 += rep.rows[j].l1;
        for (std::size_t j = third; j < 2 * third; ++j) m1 += rep.rows[j].l1;
        for (std::size_t j = nrow - third; j < nrow; ++j) m2 += rep.rows[j].l1;
        rep.monotone_trend = m1 < m0 && m2 < m1;
    }
    return rep;
}

} // namespace fpk
