#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fpk/mollify.hpp"

using namespace fpk;

namespace {

Problem rough_interval_problem() {
    // a = (1-|x|)^2 / 2 on (-1,1): kink at 0 via abs, degenerate at the ends.
    // b has a height-2 jump at 0 and blows up toward the boundary.
    Problem p;
    p.domain = DomainSpec::interval(-1, 1);
    p.coeffs.d = 1;
    p.coeffs.a = {expr::parse("0.5*abs(1 - abs(x))^2")};
    p.coeffs.b = {expr::parse("tan(-pi*x/2) + sign(x)")};
    p.coeffs.c = expr::parse("0");
    p.initial.kind = InitialMeasure::Kind::Density;
    p.initial.density = expr::parse("exp(-8*x^2)");
    p.t_end = 0.5;
    return p;
}

Problem smooth_line_problem() {
    // constants and a linear drift on the whole line; T and the shell radius
    // are powers of two so the sampling grid hits 0, T and +-4.5 exactly
    Problem p;
    p.domain = DomainSpec::whole_space(1);
    p.coeffs.d = 1;
    p.coeffs.a = {expr::parse("2")};
    p.coeffs.b = {expr::parse("x")};
    p.coeffs.c = expr::parse("-1");
    p.initial.kind = InitialMeasure::Kind::Dirac;
    p.initial.point = {0};
    p.t_end = 1.0;
    return p;
}

double l1_error(const MollifiedSet& m, const std::vector<double>& field,
                const expr::Expr& exact, double lo, double hi, double t) {
    const int nq = 1751;
    double dx = (hi - lo) / (nq - 1), sum = 0;
    for (int i = 0; i < nq; ++i) {
        double x = lo + i * dx;
        double wgt = (i == 0 || i == nq - 1) ? 0.5 : 1.0;
        sum += wgt * std::fabs(m.eval(field, x, t) - expr::evaluate1(exact, x, t)) * dx;
    }
    return sum;
}

} // namespace

TEST_CASE("grid metadata and kernel normalization") {
    auto p = smooth_line_problem();
    auto m = mollify_coefficients(p, 4);

    CHECK(m.n == 4);
    CHECK(m.bandwidth == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(std::fabs(m.kernel_mass - 1.0) <= 1e-12);

    // output grid covers the next shell and one bandwidth of time padding
    CHECK(m.xs.front() == doctest::Approx(-5.0).epsilon(1e-15));
    CHECK(m.xs.back() == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(m.ts.front() == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(m.ts.back() == doctest::Approx(1.25).epsilon(1e-15));
    for (std::size_t i = 1; i < m.xs.size(); ++i)
        CHECK(m.xs[i] - m.xs[i - 1] <= 0.0625 + 1e-12);
    CHECK(m.a.size() == m.xs.size() * m.ts.size());
}

TEST_CASE("constant diffusion is reproduced exactly") {
    // a == 1 matches the outside fallback, so smoothing must return 1 everywhere
    auto p = smooth_line_problem();
    p.coeffs.a = {expr::parse("1")};
    auto m = mollify_coefficients(p, 3);
    for (double v : m.a) CHECK(std::fabs(v - 1.0) <= 1e-13);
}

TEST_CASE("cutoff: identity / zero outside the shell, original values deep inside") {
    auto p = smooth_line_problem();
    const int n = 4;
    auto m = mollify_coefficients(p, n); // shell [-4,4], bandwidth 1/4

    // beyond the shell plus one bandwidth every sample is cut off
    for (double x : {4.5, -4.5, 4.75, -4.9}) {
        for (double t : {-0.25, 0.0, 0.5, 1.0, 1.25}) {
            CHECK(m.eval_a(x, t) == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(std::fabs(m.eval_b(x, t)) <= 1e-14);
            CHECK(std::fabs(m.eval_c(x, t)) <= 1e-14);
        }
    }

    // one bandwidth inside the shell every sample sees the raw coefficients;
    // the kernel is symmetric, so the linear drift passes through unchanged
    for (double x : {0.0, 0.21875, 1.0 / 3, -2.6, 3.75}) {
        for (double t : {0.0, 0.5, 1.0}) {
            CHECK(m.eval_a(x, t) == doctest::Approx(2.0).epsilon(1e-13));
            CHECK(m.eval_b(x, t) == doctest::Approx(x).epsilon(1e-12));
            CHECK(m.eval_c(x, t) == doctest::Approx(-1.0).epsilon(1e-13));
        }
    }

    // in the transition band everything stays between the two regimes
    std::size_t nt = m.ts.size();
    for (std::size_t i = 0; i < m.xs.size(); ++i)
        for (std::size_t j = 0; j < nt; ++j) {
            CHECK(m.a[i * nt + j] >= 1.0 - 1e-13);
            CHECK(m.a[i * nt + j] <= 2.0 + 1e-13);
            CHECK(m.c[i * nt + j] >= -1.0 - 1e-13);
            CHECK(m.c[i * nt + j] <= 0.0 + 1e-13);
        }
}

TEST_CASE("smoothed diffusion inherits the shell lower bound") {
    // weighted average of {a on the shell} and the fallback 1 cannot drop
    // below the shell minimum: here min over D_6 is a(1 - 2^-6) = 2^-13
    auto p = rough_interval_problem();
    auto grid_min_max = [&](int n, double* mn, double* mx) {
        auto m = mollify_coefficients(p, n);
        *mn = 1e300;
        *mx = -1e300;
        for (double v : m.a) {
            *mn = std::min(*mn, v);
            *mx = std::max(*mx, v);
        }
    };

    double min6, max6, min12, max12;
    grid_min_max(6, &min6, &max6);
    grid_min_max(12, &min12, &max12);

    CHECK(min6 >= std::ldexp(1.0, -13) * (1 - 1e-12)); // a(1 - 2^-6)
    CHECK(min12 >= 0.5 * std::ldexp(1.0, -24) * (1 - 1e-12)); // a(1 - 2^-12)
    CHECK(max6 <= 1.0 + 1e-13);
    CHECK(max12 <= 1.0 + 1e-13);

    // a finer bandwidth resolves the degenerate end more sharply
    CHECK(min6 < 0.05);
    CHECK(min12 < min6 / 2);
}

TEST_CASE("smoothed fields approach the rough coefficients on a fixed shell") {
    auto p = rough_interval_problem();
    Region d3 = exhaust(p.domain, 3);
    const double t = 0.25;

    double ea[3], eb[3];
    int idx = 0;
    for (int n : {8, 16, 32}) {
        auto m = mollify_coefficients(p, n);
        ea[idx] = l1_error(m, m.a, p.coeffs.aij(0, 0), d3.lo[0], d3.hi[0], t);
        eb[idx] = l1_error(m, m.b, p.coeffs.b[0], d3.lo[0], d3.hi[0], t);
        ++idx;
    }
    CHECK(ea[0] > ea[1]);
    CHECK(ea[1] > ea[2]);
    CHECK(eb[0] > eb[1]);
    CHECK(eb[1] > eb[2]);
    CHECK(ea[2] < 0.02);  // kink at 0, smooth elsewhere
    CHECK(eb[2] < 0.25);  // height-2 jump at 0 dominates
}

TEST_CASE("time padding: reflection keeps autonomous fields flat, zero extension decays") {
    auto p = smooth_line_problem();

    auto refl = mollify_coefficients(p, 4);
    CHECK(refl.eval_c(0.0, 0.0) == doctest::Approx(-1.0).epsilon(1e-13));
    CHECK(refl.eval_c(0.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-13));

    MollifyParams zp;
    zp.time_extension = TimeExtension::Zero;
    auto zero = mollify_coefficients(p, 4, zp);
    // at t=0 roughly the forward half of the kernel is cut away
    double c0 = zero.eval_c(0.0, 0.0);
    CHECK(c0 > -0.75);
    CHECK(c0 < -0.5);
    // mid-interval both variants agree
    CHECK(zero.eval_c(0.0, 0.5) == doctest::Approx(-1.0).epsilon(1e-13));
}

TEST_CASE("rejects unusable inputs") {
    auto p = smooth_line_problem();

    CHECK_THROWS_AS(mollify_coefficients(p, 0), const Error&);

    MollifyParams coarse;
    coarse.spacing = 0.5; // far above 1/(4n)
    try {
        mollify_coefficients(p, 4, coarse);
        FAIL("coarse spacing accepted");
    } catch (const Error& e) {
        CHECK(e.code == errc::invalid);
        CHECK(std::string(e.what()).find("spacing") != std::string::npos);
    }

    Problem q;
    q.domain = DomainSpec::box({0, 0}, {1, 1});
    q.coeffs.d = 2;
    q.coeffs.a = {expr::parse("1"), expr::parse("0"), expr::parse("0"), expr::parse("1")};
    q.coeffs.b = {expr::parse("0"), expr::parse("0")};
    q.initial.kind = InitialMeasure::Kind::Dirac;
    q.initial.point = {0.5, 0.5};
    q.t_end = 1.0;
    try {
        mollify_coefficients(q, 4);
        FAIL("2-d problem accepted");
    } catch (const Error& e) {
        CHECK(e.code == errc::precondition);
    }
}
