#pragma once

// Ergodic diagnostics: Cesàro time averages sigma_t of a computed flow, the
// discrete stationary density (null vector of the same stencil the stepper
// uses, found by inverse iteration), and the convergence curve between them.

#include <vector>

#include "fpk/solver.hpp"

namespace fpk {

// sigma_t = trapezoidal average of the saved densities up to time t,
// normalized by the covered span. For flows whose first save is t1 > 0 the
// average runs over [t1, t]. Mass is NOT renormalized: by construction
// mass(sigma_t) equals the same trapezoidal average of M(s), exactly.
// Errors: errc::precondition when fewer than 8 save times lie in the span,
// errc::invalid when t overshoots the last save.
std::vector<double> time_average(const DensityFlow& flow, double t);

struct StationaryDensity {
    Grid1D grid;
    std::vector<double> u;  // nonnegative cell averages, mass exactly 1
    double residual = 0;    // sum_i |(L u)_i| h of the discrete operator
};

// Null vector of the stationary operator on the K-th shell via inverse
// iteration on the same tridiagonal stencil the time stepper uses.
// Preconditions (errc::precondition): 1-d, autonomous coefficients, c = 0.
// Rejections (errc::numeric): the candidate has a component below -1e-10,
// the mass residual shows there is no probability stationary state on this
// grid (absorbing frontiers eat the ground mode), or two independent
// iterations disagree (null space dimension != 1, both residuals reported).
StationaryDensity stationary_solve(const Problem& p, int K, int N,
                                   FluxScheme scheme = FluxScheme::Upwind);

struct ConvergenceRow {
    double t = 0;
    double l1 = 0;         // L1 distance of sigma_t to the reference
    double sigma_mass = 0; // mass of sigma_t, reported as-is
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows; // one per save time with >= 8 saves behind it
    bool monotone_trend = false;      // thirds of the curve decrease in mean
};

// Requires matching grids (errc::invalid).
ConvergenceReport convergence_report(const DensityFlow& flow, const StationaryDensity& s);

} // namespace fpk
