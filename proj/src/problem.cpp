#include "fpk/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fpk/halton.hpp"
#include "fpk/linalg.hpp"

namespace fpk {

bool CoefficientSet::autonomous() const {
    for (const auto& e : a)
        if (expr::uses_time(e)) return false;
    for (const auto& e : b)
        if (expr::uses_time(e)) return false;
    if (has_c() && expr::uses_time(c)) return false;
    return true;
}

void CoefficientSet::check(int domain_dim) const {
    if (d != domain_dim)
        throw Error(errc::config, "coefficient dimension does not match the domain");
    if (static_cast<int>(a.size()) != d * d)
        throw Error(errc::config, "expected " + std::to_string(d * d) + " diffusion entries");
    if (static_cast<int>(b.size()) != d)
        throw Error(errc::config, "expected " + std::to_string(d) + " drift entries");
    auto check_vars = [&](const expr::Expr& e, const char* what) {
        if (e.empty()) throw Error(errc::config, std::string(what) + " is missing");
        int mx = expr::max_var_index(e);
        if (mx >= d)
            throw Error(errc::config, std::string(what) + " references x" +
                                          std::to_string(mx + 1) + " but d = " + std::to_string(d));
    };
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) check_vars(aij(i, j), "diffusion coefficient");
    for (const auto& e : b) check_vars(e, "drift coefficient");
    if (has_c()) check_vars(c, "killing coefficient");
}

void Problem::check() const {
    domain.check();
    coeffs.check(domain.dim);
    if (!(t_end > 0) || !std::isfinite(t_end))
        throw Error(errc::config, "t_end must be positive and finite");
    auto dimsz = static_cast<std::size_t>(domain.dim);
    switch (initial.kind) {
        case InitialMeasure::Kind::Dirac:
            if (initial.point.size() != dimsz)
                throw Error(errc::config, "dirac point does not match the dimension");
            if (!domain.contains(initial.point))
                throw Error(errc::config, "dirac point lies outside the open domain");
            break;
        case InitialMeasure::Kind::Density: {
            if (initial.density.empty())
                throw Error(errc::config, "initial density expression is missing");
            int mx = expr::max_var_index(initial.density);
            if (mx >= domain.dim)
                throw Error(errc::config, "initial density references x" + std::to_string(mx + 1));
            if (expr::uses_time(initial.density))
                throw Error(errc::config, "initial density must not depend on t");
            break;
        }
        case InitialMeasure::Kind::Uniform:
            if (initial.lo.size() != dimsz || initial.hi.size() != dimsz)
                throw Error(errc::config, "uniform bounds do not match the dimension");
            for (std::size_t i = 0; i < dimsz; ++i) {
                if (!(initial.lo[i] < initial.hi[i]))
                    throw Error(errc::config, "uniform bounds must satisfy lower < upper");
            }
            if (!domain.contains(initial.lo) || !domain.contains(initial.hi))
                throw Error(errc::config, "uniform box must sit inside the open domain");
            break;
    }
}

/* ----------------------------------------------------------------- */

ShellSampler::ShellSampler(const Region& r, double t_end, uint64_t seed)
    : region_(r), t_end_(t_end), index_(seed) {}

void ShellSampler::next(double* x, double* t) {
    int d = region_.dim();
    double u[4];
    for (;;) {
        quasi::halton_point(index_++, d + 1, u);
        for (int i = 0; i < d; ++i) {
            auto s = static_cast<std::size_t>(i);
            x[s] = region_.lo[s] + (region_.hi[s] - region_.lo[s]) * u[i];
        }
        if (!region_.ball || region_.contains(std::span<const double>(x, static_cast<std::size_t>(d))))
            break; // rejection only for ball shells
    }
    *t = t_end_ * u[d];
}

/* ----------------------------------------------------------------- */

namespace {

struct CompiledCoeffs {
    std::vector<expr::Program> a, b;
    expr::Program c;
    bool has_c;
};

CompiledCoeffs compile(const CoefficientSet& cs) {
    CompiledCoeffs cc;
    cc.has_c = cs.has_c();
    for (const auto& e : cs.a) cc.a.push_back(expr::Program::compile(e));
    for (const auto& e : cs.b) cc.b.push_back(expr::Program::compile(e));
    if (cc.has_c) cc.c = expr::Program::compile(cs.c);
    return cc;
}

} // namespace

ValidationReport validate(const Problem& p, const ValidateParams& vp) {
    p.check();
    ValidationReport rep;
    rep.samples_per_shell = vp.samples_per_shell;
    rep.seed = vp.seed;

    const int d = p.domain.dim;
    auto dz = static_cast<std::size_t>(d);
    CompiledCoeffs cc = compile(p.coeffs);
    expr::Program init_density;
    if (p.initial.kind == InitialMeasure::Kind::Density)
        init_density = expr::Program::compile(p.initial.density);

    auto witness = [&](const char* what, const double* x, double t, double lhs, double rhs) {
        if (rep.violations.size() >= 64) return; // keep reports bounded
        Witness w;
        w.what = what;
        w.x.assign(x, x + d);
        w.t = t;
        w.lhs = lhs;
        w.rhs = rhs;
        rep.violations.push_back(std::move(w));
    };

    for (int k = 1; k <= vp.k_max; ++k) {
        Region shell = exhaust(p.domain, k);
        ShellSampler sampler(shell, p.t_end, vp.seed);

        ShellStats st;
        st.k = k;
        st.ell_min = std::numeric_limits<double>::infinity();
        st.ell_max = -std::numeric_limits<double>::infinity();
        st.lipschitz.assign(dz * dz, 0.0);

        double A[9], Aprev[9];
        double xprev[3] = {0, 0, 0};
        double tprev = 0;
        bool have_prev = false;

        double x[3], t;
        for (int s = 0; s < vp.samples_per_shell; ++s) {
            sampler.next(x, &t);

            bool bad_eval = false;
            for (std::size_t i = 0; i < dz * dz && !bad_eval; ++i) {
                A[i] = cc.a[i].run(x, t);
                if (std::isnan(A[i])) {
                    witness("diffusion coefficient failed to evaluate", x, t, A[i], 0);
                    bad_eval = true;
                }
            }
            if (bad_eval) continue;

            // symmetry
            for (int i = 0; i < d; ++i)
                for (int j = i + 1; j < d; ++j) {
                    double r = std::fabs(A[i * d + j] - A[j * d + i]);
                    if (r > rep.symmetry_residual) rep.symmetry_residual = r;
                    if (r > vp.sign_tol)
                        witness("diffusion matrix is not symmetric", x, t,
                                A[i * d + j], A[j * d + i]);
                }

            auto [lmin, lmax] = linalg::sym_eig_range(A, d);
            st.ell_min = std::min(st.ell_min, lmin);
            st.ell_max = std::max(st.ell_max, lmax);
            if (lmin < -vp.sign_tol)
                witness("diffusion matrix is not positive semi-definite", x, t, lmin, 0);

            for (std::size_t i = 0; i < dz * dz; ++i)
                st.sup_a = std::max(st.sup_a, std::fabs(A[i]));

            for (std::size_t i = 0; i < dz; ++i) {
                double bi = cc.b[i].run(x, t);
                if (std::isnan(bi)) {
                    witness("drift coefficient failed to evaluate", x, t, bi, 0);
                    continue;
                }
                st.sup_b = std::max(st.sup_b, std::fabs(bi));
            }

            if (cc.has_c) {
                double cv = cc.c.run(x, t);
                if (std::isnan(cv))
                    witness("killing coefficient failed to evaluate", x, t, cv, 0);
                else {
                    st.sup_c = std::max(st.sup_c, std::fabs(cv));
                    if (cv > vp.sign_tol)
                        witness("killing coefficient must be <= 0", x, t, cv, 0);
                }
            }

            if (!init_density.empty()) {
                double rho = init_density.run(x, 0.0);
                if (!std::isnan(rho) && rho < -vp.sign_tol)
                    witness("initial density must be >= 0", x, 0.0, rho, 0);
            }

            // empirical Lipschitz constants from consecutive sample pairs,
            // both evaluated at the earlier sample's time
            if (have_prev) {
                double dist2 = 0;
                for (std::size_t i = 0; i < dz; ++i)
                    dist2 += (x[i] - xprev[i]) * (x[i] - xprev[i]);
                double dist = std::sqrt(dist2);
                if (dist > 1e-12) {
                    double Acur[9];
                    bool ok = true;
                    for (std::size_t i = 0; i < dz * dz && ok; ++i) {
                        Acur[i] = cc.a[i].run(x, tprev);
                        if (std::isnan(Acur[i])) ok = false;
                    }
                    if (ok)
                        for (std::size_t i = 0; i < dz * dz; ++i) {
                            double lam = std::fabs(Acur[i] - Aprev[i]) / dist;
                            st.lipschitz[i] = std::max(st.lipschitz[i], lam);
                        }
                }
                have_prev = false;
            } else {
                for (std::size_t i = 0; i < dz * dz; ++i) Aprev[i] = A[i];
                for (std::size_t i = 0; i < dz; ++i) xprev[i] = x[i];
                tprev = t;
                have_prev = true;
            }
        }

        st.degenerate = st.ell_min <= vp.degenerate_tol;
        rep.shells.push_back(std::move(st));
    }
    return rep;
}

} // namespace fpk
