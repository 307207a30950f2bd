#pragma once

// Problem assembly: second-order coefficients A = (a^ij), drift b, potential c
// (c <= 0), an initial measure, and a time horizon on an open domain.
// validate() samples exhaustion shells with Halton points and reports
// empirical ellipticity bounds, Lipschitz constants and structural
// violations; every violation carries a witness point that can be re-checked
// with expr::evaluate.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpk/domain.hpp"
#include "fpk/expr.hpp"

namespace fpk {

struct CoefficientSet {
    int d = 1;
    std::vector<expr::Expr> a; // d*d, row-major
    std::vector<expr::Expr> b; // d
    expr::Expr c;              // empty means identically 0

    const expr::Expr& aij(int i, int j) const {
        return a[static_cast<std::size_t>(i * d + j)];
    }
    bool has_c() const { return !c.empty(); }
    bool autonomous() const;
    void check(int domain_dim) const; // shapes + variable indices <= d
};

struct InitialMeasure {
    enum class Kind { Density, Dirac, Uniform };
    Kind kind = Kind::Dirac;
    expr::Expr density;            // Density: unnormalized, normalized on use
    std::vector<double> point;     // Dirac
    std::vector<double> lo, hi;    // Uniform box
};

struct Problem {
    DomainSpec domain;
    CoefficientSet coeffs;
    InitialMeasure initial;
    double t_end = 1.0;

    void check() const; // throws errc::config on inconsistencies
};

struct ShellStats {
    int k = 0;
    double ell_min = 0, ell_max = 0;   // sampled eigenvalue range of A
    std::vector<double> lipschitz;     // empirical, per a^ij (row-major)
    double sup_a = 0, sup_b = 0, sup_c = 0;
    bool degenerate = false;           // ell_min at the sampling floor
};

struct Witness {
    std::string what;
    std::vector<double> x;
    double t = 0;
    double lhs = 0, rhs = 0;
};

struct ValidationReport {
    std::vector<ShellStats> shells;
    double symmetry_residual = 0;
    std::vector<Witness> violations;
    int samples_per_shell = 0;
    uint64_t seed = 0;
    bool ok() const { return violations.empty(); }
};

struct ValidateParams {
    int k_max = 8;
    int samples_per_shell = 4096;
    uint64_t seed = 12345;
    double sign_tol = 1e-12;       // tolerated c > 0 / lambda_min < 0 slack
    double degenerate_tol = 1e-12; // ell_min at or below this marks the shell degenerate
};

ValidationReport validate(const Problem& p, const ValidateParams& vp = {});

// Halton sample inside one shell: fills x (dim entries) and t in [0, t_end].
// Index i enumerates accepted points; deterministic for a fixed seed.
class ShellSampler {
public:
    ShellSampler(const Region& r, double t_end, uint64_t seed);
    void next(double* x, double* t);

private:
    Region region_;
    double t_end_;
    uint64_t index_;
};

} // namespace fpk
