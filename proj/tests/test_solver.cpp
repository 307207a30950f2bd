#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fpk/solver.hpp"

using namespace fpk;

namespace {

Problem heat_problem(double t_end = 0.5) {
    Problem p;
    p.domain = DomainSpec::whole_space(1);
    p.coeffs.d = 1;
    p.coeffs.a = {expr::parse("1/2")};
    p.coeffs.b = {expr::parse("0")};
    p.initial.kind = InitialMeasure::Kind::Dirac;
    p.initial.point = {0};
    p.t_end = t_end;
    return p;
}

Problem ou_problem(double t_end = 1.0) {
    Problem p = heat_problem(t_end);
    p.coeffs.b = {expr::parse("-x")};
    return p;
}

template <class F>
errc thrown_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code;
    }
    return errc::ok;
}

double gauss(double x, double var) {
    return std::exp(-x * x / (2 * var)) / std::sqrt(2 * M_PI * var);
}

double l1_against(const DensityFlow& f, std::size_t m, double var) {
    double s = 0;
    for (int i = 0; i < f.grid.n; ++i)
        s += std::fabs(f.u[m][static_cast<std::size_t>(i)] - gauss(f.grid.center(i), var));
    return s * f.grid.h();
}

double l1_between(const std::vector<double>& a, const std::vector<double>& b, double h) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s * h;
}

} // namespace

TEST_CASE("one implicit step of pure killing divides by 1+dt, bitwise") {
    Problem p = heat_problem();
    p.coeffs.a = {expr::parse("0")};
    p.coeffs.c = expr::parse("-1");
    Discretization d = discretize(p, 2, 40);
    std::vector<double> u(40, 0.7);
    double dt = 0.125;
    StepBudget sb;
    step(d, u, dt, dt, 0.0, &sb);
    for (double v : u) CHECK(v == 0.7 / (1 + dt));
    // killing drain is -dt * mass(new); nothing crosses the frontier
    double h = d.grid.h();
    CHECK(sb.killed == doctest::Approx(-dt * 0.7 / (1 + dt) * 40 * h).epsilon(1e-14));
    CHECK(sb.outflux == 0.0);
}

TEST_CASE("heat kernel from a point source matches the Gaussian in L1") {
    Problem p = heat_problem(0.5);
    SolveParams sp;
    sp.K = 8;
    sp.N = 1600;
    sp.dt = 2.5e-4;
    sp.save_times = {0.25, 0.5};
    SolveResult r = solve(p, sp);

    // variance 2*a*t = t
    CHECK(l1_against(r.flow, 0, 0.25) <= 5e-3);
    CHECK(l1_against(r.flow, 1, 0.5) <= 5e-3);
    CHECK(r.flow.mass(1) >= 1.0 - 1e-6);
    CHECK(r.ledger.M.back() >= 1.0 - 1e-6);

    MassIdentityReport rep = mass_identity_report(r.ledger);
    CHECK(rep.classification == "identity");
    CHECK(rep.budget_gap <= 1e-6);
}

TEST_CASE("killing at rate 0.3 tracks exp(-0.3 t) and the budget closes") {
    Problem p = heat_problem(0.5);
    p.coeffs.c = expr::parse("-0.3");
    SolveParams sp;
    sp.K = 8;
    sp.N = 1600;
    sp.dt = 2.5e-4;
    SolveResult r = solve(p, sp);

    REQUIRE(r.ledger.t.size() == 33); // t=0 row + 32 saves
    for (std::size_t j = 0; j < r.ledger.t.size(); ++j) {
        CHECK(std::fabs(r.ledger.M[j] - std::exp(-0.3 * r.ledger.t[j])) <= 1e-3);
        double budget = r.ledger.M[j] + std::fabs(r.ledger.C[j]) + r.ledger.B[j];
        CHECK(std::fabs(budget - 1.0) <= 1e-6);
        CHECK(r.ledger.C[j] <= 0.0);
        CHECK(r.ledger.B[j] >= 0.0);
    }
    // r = -B holds as an exact cancellation, far below tol_mass
    MassIdentityReport rep = mass_identity_report(r.ledger);
    CHECK(rep.classification == "identity");
    for (std::size_t j = 0; j < r.ledger.t.size(); ++j)
        CHECK(std::fabs(r.ledger.r[j] + r.ledger.B[j]) <= 1e-12);
}

TEST_CASE("nonnegativity survives stiff drift and coarse steps, bitwise") {
    Problem p = heat_problem(1.0);
    p.coeffs.a = {expr::parse("0.5 + 0.4*sin(3*x)")};
    p.coeffs.b = {expr::parse("5*cos(2*x)")};
    p.coeffs.c = expr::parse("-0.5");
    for (FluxScheme sch : {FluxScheme::Upwind, FluxScheme::ExpFitted}) {
        Discretization d = discretize(p, 4, 64, sch);
        std::vector<double> u(64, 0.0);
        u[5] = 8.0; // lopsided spike
        for (int k = 1; k <= 10; ++k) step(d, u, 0.1 * k, 0.1, 0.0);
        for (double v : u) {
            CHECK(std::isfinite(v));
            CHECK(!(v < 0.0));
        }
    }
}

TEST_CASE("exp-fitted flux degenerates to the upwind matrix bitwise") {
    // b = 0: both schemes reduce to central diffusion
    Problem ph = heat_problem();
    Discretization du = discretize(ph, 3, 48, FluxScheme::Upwind);
    Discretization de = discretize(ph, 3, 48, FluxScheme::ExpFitted);
    std::vector<double> a(48), b(48);
    for (int i = 0; i < 48; ++i) a[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] = 1.0 + 0.01 * i;
    step(du, a, 0.05, 0.05, 0.0);
    step(de, b, 0.05, 0.05, 0.0);
    CHECK(a == b);

    // a = 0, eps = 0: exponential fitting falls back to the upwind branch
    Problem pt = heat_problem();
    pt.coeffs.a = {expr::parse("0")};
    pt.coeffs.b = {expr::parse("1")};
    du = discretize(pt, 3, 48, FluxScheme::Upwind);
    de = discretize(pt, 3, 48, FluxScheme::ExpFitted);
    for (int i = 0; i < 48; ++i) a[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] = 1.0 / (1.0 + i);
    step(du, a, 0.05, 0.05, 0.0);
    step(de, b, 0.05, 0.05, 0.0);
    CHECK(a == b);
}

TEST_CASE("restarting from a save retraces the run bitwise") {
    Problem p = ou_problem(1.0);
    p.initial.kind = InitialMeasure::Kind::Density;
    p.initial.density = expr::parse("exp(-x^2)");
    SolveParams sp;
    sp.K = 6;
    sp.N = 600;
    sp.dt = 1e-3;
    sp.save_times = {0.5, 1.0};
    SolveResult full = solve(p, sp);
    SolveResult tail = solve_from(p, sp, full.flow.u[0], 0.5);

    REQUIRE(tail.flow.times == std::vector<double>{1.0});
    double l1 = l1_between(tail.flow.u[0], full.flow.u[1], full.flow.grid.h());
    CHECK(l1 <= 1e-8);
    CHECK(tail.flow.u[0] == full.flow.u[1]); // equal steps from the same state
    // the tail ledger is budgeted against its own start
    CHECK(tail.ledger.M[0] == doctest::Approx(full.ledger.M[1]).epsilon(1e-15));
}

TEST_CASE("refining the grid at least halves the L1 error") {
    Problem p = heat_problem(0.25);
    p.initial.kind = InitialMeasure::Kind::Density;
    p.initial.density = expr::parse("exp(-2*x^2)"); // variance 1/4
    SolveParams sp;
    sp.K = 8;
    sp.dt = 5e-5;
    sp.save_times = {0.25};
    double err[3];
    int i = 0;
    for (int n : {200, 400, 800}) {
        sp.N = n;
        SolveResult r = solve(p, sp);
        err[i++] = l1_against(r.flow, 0, 0.5); // variance 1/4 + t
    }
    // central differencing: observed order ~2, so halving is comfortable
    CHECK(err[1] <= 0.5 * err[0]);
    CHECK(err[2] <= 0.5 * err[1]);
}

TEST_CASE("enlarging the exhaustion shell leaves the mass curve alone") {
    Problem p = ou_problem(1.0);
    SolveParams sp;
    sp.dt = 1e-3;
    sp.save_times = {1.0};
    sp.K = 10;
    sp.N = 1000; // h = 0.02 on both runs
    double m10 = solve(p, sp).ledger.M.back();
    sp.K = 14;
    sp.N = 1400;
    double m14 = solve(p, sp).ledger.M.back();
    CHECK(std::fabs(m10 - m14) <= 1e-6);
    CHECK(m10 >= 1.0 - 1e-9);
}

TEST_CASE("viscosity ladder contracts for degenerate transport") {
    Problem p;
    p.domain = DomainSpec::whole_space(1);
    p.coeffs.d = 1;
    p.coeffs.a = {expr::parse("0")};
    p.coeffs.b = {expr::parse("1")};
    p.initial.kind = InitialMeasure::Kind::Density;
    p.initial.density = expr::parse("exp(-8*(x+1)^2)");
    p.t_end = 1.0;

    SolveParams sp;
    sp.K = 3;
    sp.N = 1500;
    sp.dt = 5e-4;
    sp.save_times = {1.0};
    sp.eps_ladder = {1e-2, 3e-3, 1e-3};
    SolveResult r = solve(p, sp);

    REQUIRE(r.eps_l1.size() == 2);
    CHECK(r.eps_l1[0] > r.eps_l1[1]);
    CHECK(r.eps_l1[1] > 0.0);
    CHECK(r.ladder_converged);
    CHECK(r.warnings.empty());
    CHECK(r.flow.eps_used == sp.eps_ladder);
    // the kept flow is the smallest-viscosity leg: its bump sits near x = 0
    int peak = 0;
    for (int i = 0; i < sp.N; ++i)
        if (r.flow.u[0][static_cast<std::size_t>(i)] > r.flow.u[0][static_cast<std::size_t>(peak)]) peak = i;
    CHECK(std::fabs(r.flow.grid.center(peak)) <= 0.05);
}

TEST_CASE("outward transport drains the domain into the frontier account") {
    Problem p;
    p.domain = DomainSpec::interval(-1, 1);
    p.coeffs.d = 1;
    p.coeffs.a = {expr::parse("0")};
    p.coeffs.b = {expr::parse("2")};
    p.initial.kind = InitialMeasure::Kind::Uniform;
    p.initial.lo = {-0.5};
    p.initial.hi = {0.0};
    p.t_end = 2.0;

    SolveParams sp;
    sp.K = 1;
    sp.N = 800;
    sp.dt = 1e-3;
    SolveResult r = solve(p, sp);

    CHECK(r.ledger.M[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.ledger.M.back() <= 1e-6);
    CHECK(r.ledger.B.back() == doctest::Approx(1.0).epsilon(1e-9));
    MassIdentityReport rep = mass_identity_report(r.ledger);
    CHECK(rep.classification == "strict-subprobability");
    CHECK(rep.min_r < -0.9);
    CHECK(rep.budget_gap <= 1e-9);
    CHECK(rep.B == r.ledger.B);
}

TEST_CASE("long Ornstein-Uhlenbeck run settles onto a discrete fixed point") {
    Problem p = ou_problem(20.0);
    SolveParams sp;
    sp.K = 6;
    sp.N = 400;
    sp.dt = 1e-2;
    sp.save_times = {10.0, 20.0};
    sp.scheme = FluxScheme::ExpFitted;
    SolveResult r = solve(p, sp);
    double h = r.flow.grid.h();
    CHECK(l1_between(r.flow.u[0], r.flow.u[1], h) <= 1e-5);
    CHECK(r.flow.mass(1) >= 1.0 - 1e-9);

    // exponential fitting reproduces the N(0, 1/2) stationary state nodally
    CHECK(l1_against(r.flow, 1, 0.5) <= 1e-6);

    // one more step barely moves the settled state: a discrete fixed point
    Discretization d = discretize(p, sp.K, sp.N, sp.scheme);
    std::vector<double> u = r.flow.u[1];
    step(d, u, 20.0 + sp.dt, sp.dt, 0.0);
    CHECK(l1_between(u, r.flow.u[1], h) <= 1e-9);

    // upwind smears the same state at first order; keep the gap on record
    sp.scheme = FluxScheme::Upwind;
    SolveResult ru = solve(p, sp);
    double e_up = l1_against(ru.flow, 1, 0.5);
    CHECK(e_up > 1e-3);
    CHECK(e_up < 3e-2);
}

TEST_CASE("initial measures land on the grid with unit mass") {
    Problem p = ou_problem(1.0);
    SolveParams sp;
    sp.K = 6;
    sp.N = 500;
    sp.dt = 1e-2;
    sp.save_times = {1.0};

    SUBCASE("dirac occupies one cell, or two when it sits on their face") {
        // N=500 on (-6,6): 0 is interior to cell 250's closure only via its
        // face, so the mass splits; 0.01 lies strictly inside one cell
        SolveResult r = solve(p, sp);
        CHECK(r.ledger.M[0] == doctest::Approx(1.0).epsilon(1e-12));
        p.initial.point = {0.011};
        SolveResult r2 = solve(p, sp);
        CHECK(r2.ledger.M[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("density is renormalized on the shell") {
        p.initial.kind = InitialMeasure::Kind::Density;
        p.initial.density = expr::parse("exp(-x^2/9)"); // wide: tails clipped by the shell
        SolveResult r = solve(p, sp);
        CHECK(std::fabs(r.ledger.M[0] - 1.0) <= 1e-12);
    }
    SUBCASE("uniform splits partial cells exactly") {
        p.initial.kind = InitialMeasure::Kind::Uniform;
        p.initial.lo = {-0.503};
        p.initial.hi = {1.101};
        SolveResult r = solve(p, sp);
        CHECK(std::fabs(r.ledger.M[0] - 1.0) <= 1e-12);
    }
}

TEST_CASE("smoothed coefficients run through the same pipeline") {
    Problem p = ou_problem(0.5);
    p.coeffs.b = {expr::parse("-sign(x)")}; // kinked inward drift
    SolveParams sp;
    sp.K = 4;
    sp.N = 400;
    sp.dt = 1e-3;
    sp.save_times = {0.5};
    SolveResult raw = solve(p, sp);
    sp.mollify_n = 2;
    SolveResult smooth = solve(p, sp);

    double h = raw.flow.grid.h();
    double d = l1_between(raw.flow.u[0], smooth.flow.u[0], h);
    CHECK(d > 1e-6);  // smoothing is visible
    CHECK(d < 0.15);  // but does not reshape the solution
    CHECK(smooth.flow.mass(0) >= 0.999);
    CHECK(smooth.flow.mass(0) <= 1.0 + 1e-9);
}

TEST_CASE("malformed requests are rejected with typed errors") {
    Problem p = heat_problem();
    SolveParams sp;
    sp.N = 200;
    sp.K = 3;

    SUBCASE("dirac start cannot be saved at t=0") {
        sp.save_times = {0.0, 0.25};
        CHECK(thrown_code([&] { solve(p, sp); }) == errc::precondition);
    }
    SUBCASE("density start may be saved at t=0") {
        p.initial.kind = InitialMeasure::Kind::Density;
        p.initial.density = expr::parse("exp(-x^2)");
        sp.save_times = {0.0, 0.25};
        SolveResult r = solve(p, sp);
        REQUIRE(r.flow.times.size() == 2);
        CHECK(r.flow.mass(0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("ladders must decrease strictly") {
        sp.eps_ladder = {1e-3, 1e-2};
        CHECK(thrown_code([&] { solve(p, sp); }) == errc::invalid);
        sp.eps_ladder = {1e-3, 1e-3};
        CHECK(thrown_code([&] { solve(p, sp); }) == errc::invalid);
        sp.eps_ladder = {1e-3, -1e-4};
        CHECK(thrown_code([&] { solve(p, sp); }) == errc::invalid);
    }
    SUBCASE("save times stay inside (0, t_end] and increase") {
        sp.save_times = {0.25, 0.25};
        CHECK(thrown_code([&] { solve(p, sp); }) == errc::invalid);
        sp.save_times = {0.25, 0.75};
        CHECK(thrown_code([&] { solve(p, sp); }) == errc::invalid);
    }
    SUBCASE("restart needs an interior time and a matching state") {
        std::vector<double> u(200, 1.0);
        CHECK(thrown_code([&] { solve_from(p, sp, u, 0.5); }) == errc::invalid);
        std::vector<double> bad(7, 1.0);
        CHECK(thrown_code([&] { solve_from(p, sp, bad, 0.25); }) == errc::invalid);
        sp.save_times = {0.1, 0.2};
        CHECK(thrown_code([&] { solve_from(p, sp, u, 0.3); }) == errc::invalid);
    }
    SUBCASE("too-coarse grids and bad shells are refused") {
        CHECK(thrown_code([&] { discretize(p, 3, 8); }) == errc::invalid);
        CHECK(thrown_code([&] { discretize(p, 0, 64); }) == errc::invalid);
    }
    SUBCASE("multidimensional problems are refused") {
        Problem q;
        q.domain = DomainSpec::whole_space(2);
        q.coeffs.d = 2;
        q.coeffs.a = {expr::parse("1"), expr::parse("0"), expr::parse("0"), expr::parse("1")};
        q.coeffs.b = {expr::parse("-x1"), expr::parse("-x2")};
        q.initial.kind = InitialMeasure::Kind::Dirac;
        q.initial.point = {0, 0};
        q.t_end = 1.0;
        CHECK(thrown_code([&] { solve(q, sp); }) == errc::invalid);
    }
    SUBCASE("coefficients blowing up on the grid raise numeric errors") {
        Problem q = heat_problem();
        q.coeffs.b = {expr::parse("1/x")}; // infinite at the x=0 face
        CHECK(thrown_code([&] { discretize(q, 1, 16); }) == errc::numeric);
    }
}
