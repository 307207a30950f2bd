#pragma once

// Conservative finite-volume solver for the 1-d Cauchy problem
//   d_t u = d_x( d_x((a + eps) u) - b u ) + c u
// on one exhaustion shell, with an absorbing frontier and an exact discrete
// mass budget: every unit of initial mass is, at every step, still on the
// grid (M), killed by c (C), or gone through the frontier (B).

#include <cstdint>
#include <string>
#include <vector>

#include "fpk/flow.hpp"
#include "fpk/mollify.hpp"
#include "fpk/problem.hpp"

namespace fpk {

enum class FluxScheme {
    Upwind,    // central difference on (au), upwinded drift
    ExpFitted, // exponential fitting (Scharfetter-Gummel); same limits, less
               // numerical diffusion at coarse cell Peclet numbers
};

// Grid plus sampled coefficient fields: the reusable part of the operator.
// Coefficients are sampled at cell centers (a, c) and interfaces (b); for
// time-dependent problems they are resampled at each step's target time.
struct Discretization {
    Grid1D grid;
    FluxScheme scheme = FluxScheme::Upwind;

    std::vector<double> a_cell; // n entries, no viscosity applied
    std::vector<double> b_face; // n+1 entries, b at x_{i+1/2}
    std::vector<double> c_cell; // n entries, 0 when the problem has no c

    bool autonomous = true; // samples above valid for all t
    double sampled_at = 0;  // time of the current samples

    expr::Program pa, pb, pc;       // raw coefficient programs
    const MollifiedSet* mollified = nullptr; // when set, fields come from the table

    void resample(double t); // no-op for autonomous coefficients
};

// pre: 1-d problem, K >= 1 within the exhaustion, N >= 16.
// mollified: optional smoothed coefficient set to sample instead of the raw
// expressions (its grid must cover D_K x [0,T]).
Discretization discretize(const Problem& p, int K, int N,
                          FluxScheme scheme = FluxScheme::Upwind,
                          const MollifiedSet* mollified = nullptr);

// Tridiagonal stencil of the generator L on the current samples: row i reads
// sub[i]*u[i-1] + diag[i]*u[i] + sup[i]*u[i+1], ghosts zero. leak_* are the
// frontier transfer rates (mass crosses out at leak_left*u[0] +
// leak_right*u[n-1]). step() and the stationary solver share this assembly.
struct OperatorStencil {
    std::vector<double> sub, diag, sup;
    double leak_left = 0, leak_right = 0;
};

OperatorStencil assemble_operator(const Discretization& d, double eps);

// Ledger increments of one step, evaluated at the new time level (so the
// discrete budget M + |C| + B = M(0) holds to rounding).
struct StepBudget {
    double killed = 0;  // dt * sum c u^{new} h, nonpositive
    double outflux = 0; // dt * (frontier leak), nonnegative
};

// One implicit Euler step of length dt ending at time t_new. u has grid.n
// entries and is overwritten. The tridiagonal system is an M-matrix for any
// dt (upwinding + c <= 0), so nonnegative input stays nonnegative, bitwise:
// the elimination never subtracts.
// errors: errc::numeric when a coefficient or the solve produces a non-finite
// value.
void step(Discretization& d, std::vector<double>& u, double t_new, double dt,
          double eps, StepBudget* budget = nullptr);

struct SolveParams {
    int K = 8;                      // exhaustion shell to mesh
    int N = 2000;                   // cell count
    double dt = 0;                  // target step; 0 -> t_end / 2000
    std::vector<double> eps_ladder; // strictly decreasing, >= 0; empty -> {0}
    std::vector<double> save_times; // strictly increasing in [0, t_end];
                                    // empty -> 32 uniform in (0, t_end]
    FluxScheme scheme = FluxScheme::Upwind;
    double tol_mass = 1e-3;
    int mollify_n = 0;              // > 0: run on mollified coefficients
};

struct SolveResult {
    DensityFlow flow;   // the smallest-viscosity run
    MassLedger ledger;  // bookkeeping of that run
    // pairwise L1 distance at t_end between consecutive viscosity runs
    std::vector<double> eps_l1;
    bool ladder_converged = true; // false = distances not decreasing (warning)
    std::vector<std::string> warnings;
};

// Runs the viscosity ladder over the full time range. Steps are sized per
// save interval: each interval is divided into round(len/dt) equal implicit
// steps, so every save time is hit exactly and a restarted run retraces the
// identical arithmetic path.
// errors: errc::precondition for a dirac initial with a save at t=0;
// errc::invalid for malformed ladders or save grids; errc::numeric for
// non-finite densities (reported with time and cell).
SolveResult solve(const Problem& p, const SolveParams& sp = {});

// Continue a flow from state u0 at time t0 > 0 (as produced at a save time)
// to the remaining save times. Same grid and parameters as the original run.
SolveResult solve_from(const Problem& p, const SolveParams& sp,
                       const std::vector<double>& u0, double t0);

struct MassIdentityReport {
    std::string classification; // "identity", "strict-subprobability" or "inconsistent"
    double max_abs_r = 0;
    double min_r = 0;
    double budget_gap = 0;      // max |M + |C| + B - M(0)|
    std::vector<double> t, B;   // frontier outflux curve
};

// Classifies a ledger: "inconsistent" when the residual r = M - M(0) - C ever
// exceeds tol_mass (mass was created - a scheme or ledger defect), otherwise
// "strict-subprobability" when r dips below -tol_mass (mass reached the
// frontier), otherwise "identity".
MassIdentityReport mass_identity_report(const MassLedger& led, double tol_mass = 1e-3);

} // namespace fpk
