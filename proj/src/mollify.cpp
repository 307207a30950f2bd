#include "fpk/mollify.hpp"

#include <algorithm>
#include <cmath>

namespace fpk {

double MollifiedSet::eval(const std::vector<double>& field, double x, double t) const {
    auto locate = [](const std::vector<double>& g, double v, double* w) {
        if (v <= g.front()) { *w = 0; return std::size_t{0}; }
        if (v >= g.back()) { *w = 1; return g.size() - 2; }
        auto it = std::upper_bound(g.begin(), g.end(), v);
        std::size_t i = static_cast<std::size_t>(it - g.begin()) - 1;
        if (i > g.size() - 2) i = g.size() - 2;
        *w = (v - g[i]) / (g[i + 1] - g[i]);
        return i;
    };
    double wx, wt;
    std::size_t i = locate(xs, x, &wx);
    std::size_t j = locate(ts, t, &wt);
    std::size_t nt = ts.size();
    double f00 = field[i * nt + j], f01 = field[i * nt + j + 1];
    double f10 = field[(i + 1) * nt + j], f11 = field[(i + 1) * nt + j + 1];
    return (1 - wx) * ((1 - wt) * f00 + wt * f01) + wx * ((1 - wt) * f10 + wt * f11);
}

MollifiedSet mollify_coefficients(const Problem& p, int n, const MollifyParams& mp) {
    p.check();
    if (p.domain.dim != 1)
        throw Error(errc::precondition, "mollify_coefficients supports spatial dimension 1");
    if (n < 1) throw Error(errc::invalid, "mollification index n must be >= 1");

    const double delta = 1.0 / n;
    double h = mp.spacing > 0 ? mp.spacing : delta / 4;
    if (h > delta / 4 + 1e-15)
        throw Error(errc::invalid, "mollification grid too coarse for requested n: spacing must be <= 1/(4n)");

    const double T = p.t_end;
    Region inner = exhaust(p.domain, n);      // cutoff support D_n
    Region outer = exhaust(p.domain, n + 1);  // output grid covers D_{n+1}

    MollifiedSet m;
    m.n = n;
    m.bandwidth = delta;

    auto linspace = [](double lo, double hi, double step) {
        int cnt = std::max(2, static_cast<int>(std::ceil((hi - lo) / step)) + 1);
        std::vector<double> g(static_cast<std::size_t>(cnt));
        for (int i = 0; i < cnt; ++i)
            g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (cnt - 1);
        return g;
    };
    m.xs = linspace(outer.lo[0], outer.hi[0], h);
    m.ts = linspace(-delta, T + delta, h);

    // discrete kernel on offsets strictly inside the bandwidth ball
    const int reach = static_cast<int>(std::floor(delta / h));
    std::vector<double> w;
    std::vector<std::pair<int, int>> off;
    double wsum = 0;
    for (int pq = -reach; pq <= reach; ++pq)
        for (int q = -reach; q <= reach; ++q) {
            double r2 = (double(pq) * pq + double(q) * q) * h * h / (delta * delta);
            if (r2 >= 1) continue;
            double val = std::exp(-1.0 / (1.0 - r2));
            off.emplace_back(pq, q);
            w.push_back(val);
            wsum += val;
        }
    for (double& v : w) v /= wsum;
    m.kernel_mass = 0;
    for (double v : w) m.kernel_mass += v;

    expr::Program pa = expr::Program::compile(p.coeffs.aij(0, 0));
    expr::Program pb = expr::Program::compile(p.coeffs.b[0]);
    expr::Program pc;
    if (p.coeffs.has_c()) pc = expr::Program::compile(p.coeffs.c);

    const bool reflect = mp.time_extension == TimeExtension::Reflect;
    auto fold_time = [&](double t) {
        // reflect into [0, T] as often as needed
        while (t < 0 || t > T) {
            if (t < 0) t = -t;
            if (t > T) t = 2 * T - t;
        }
        return t;
    };

    // cut-off field sample; NaN means the coefficient itself failed to evaluate
    auto raw = [&](const expr::Program& prog, double x, double t, double outside) {
        if (!(x > inner.lo[0] && x < inner.hi[0])) return outside;
        if (reflect)
            t = fold_time(t);
        else if (t < 0 || t > T)
            return outside;
        return prog.run1(x, t);
    };
    // re-run a failed sample through the checked evaluator for a useful error
    auto rethrow = [&](const expr::Expr& e, double x, double t) {
        expr::evaluate1(e, x, reflect ? fold_time(t) : t);
        throw Error(errc::numeric, "coefficient evaluated to a non-finite value during mollification");
    };

    std::size_t nx = m.xs.size(), nt = m.ts.size();
    m.a.assign(nx * nt, 0);
    m.b.assign(nx * nt, 0);
    m.c.assign(nx * nt, 0);

    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < nt; ++j) {
            double x0 = m.xs[i], t0 = m.ts[j];
            double sa = 0, sb = 0, sc = 0;
            for (std::size_t k = 0; k < off.size(); ++k) {
                double x1 = x0 - off[k].first * h;
                double t1 = t0 - off[k].second * h;
                double va = raw(pa, x1, t1, 1.0);
                double vb = raw(pb, x1, t1, 0.0);
                if (std::isnan(va)) rethrow(p.coeffs.aij(0, 0), x1, t1);
                if (std::isnan(vb)) rethrow(p.coeffs.b[0], x1, t1);
                sa += w[k] * va;
                sb += w[k] * vb;
                if (!pc.empty()) {
                    double vc = raw(pc, x1, t1, 0.0);
                    if (std::isnan(vc)) rethrow(p.coeffs.c, x1, t1);
                    sc += w[k] * vc;
                }
            }
            m.a[i * nt + j] = sa;
            m.b[i * nt + j] = sb;
            m.c[i * nt + j] = sc;
        }
    }
    return m;
}

} // namespace fpk
