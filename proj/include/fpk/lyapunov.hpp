#pragma once

// Lyapunov-type certificates. The generator is applied to a candidate V
// symbolically; the resulting inequalities are checked by quasi-random
// sampling over the exhaustion shells, so every verdict is empirical and
// carries the evidence (per-shell suprema, witnesses) needed to audit it.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fpk/flow.hpp"
#include "fpk/problem.hpp"

namespace fpk {

// Symbolic image of V under the generator a^ij d_i d_j + b^i d_i (+ c).
struct GeneratorImage {
    expr::Expr LV;                 // full generator, including the c V term
    expr::Expr L0V;                // second-order part only: a^ij d_i d_j V + b^i d_i V
    expr::Expr carre;              // (A grad V, grad V)
    std::vector<expr::Expr> gradV;
    expr::Expr dtV;                // time derivative of V (constant 0 if autonomous)
};

// errors: errc::invalid when V uses variables beyond the problem dimension.
GeneratorImage apply_generator(const Problem& p, const expr::Expr& V);

enum class CertKind {
    ExistenceKV,     // LV <= K (1 + V)
    TimedepKH,       // dtV + LV <= K(t) + H(t) V
    Ergodic,         // LV <= -K V outside a shell
    UniqClassI,      // R_N ladder with |L0 V|
    UniqClassII,     // R_N ladder with |(b - beta) grad V|
};
enum class CertStatus { Holds, Fails, Inconclusive };

struct ShellSup {
    int k = 0;
    double sup_ratio = 0;       // sup of LV/(1+V) over the shell (existence)
    double sup_lv_over_v = 0;   // sup of LV/V over the ring D_k \ D_{k-1}
    std::vector<double> argmax_x;
    double argmax_t = 0;
};

struct Certificate {
    CertKind kind = CertKind::ExistenceKV;
    CertStatus status = CertStatus::Inconclusive;

    double K = std::numeric_limits<double>::quiet_NaN();  // existence K*, timedep slack
    double K2 = std::numeric_limits<double>::quiet_NaN(); // ergodic rate
    int shell_n = -1;                                      // ergodic inner shell index

    std::vector<ShellSup> shells;
    std::vector<Witness> violations;
    std::vector<double> ring_min_V; // per-ring minima of V (blow-up diagnostic)
    bool blowup_confirmed = false;

    // timedep moment machinery: R(t)=exp(int H), Q(t)=R(t) int K/R on t_grid
    std::vector<double> t_grid, R_curve, Q_curve;

    // uniqueness-class ladder
    std::vector<double> N_ladder, R_N, R_N_ii;
    double masked_fraction = 0; // cells excluded from the beta term (rho too small)

    std::string note;
};

struct CertParams {
    int k_max = 8;
    int samples_per_shell = 2048;
    std::uint64_t seed = 2025;
    double tol = 1e-9;      // relative slack for sampled inequalities
    int t_grid_points = 65; // resolution of the R/Q curves
};

// Empirical blow-up scan: per-ring minima of V over D_k \ D_{k-1}.
// Confirmed when the minima increase strictly and the tail increments do not
// collapse (last increment >= half of the first one) - a finite-depth
// heuristic for "V -> infinity at the frontier", reported, never assumed.
struct RingScan {
    std::vector<double> ring_min;
    bool increasing = false;
    bool confirmed = false;
    std::vector<Witness> failures; // non-finite V / LV evaluations
};
RingScan scan_blowup(const Problem& p, const expr::Expr& V, const CertParams& cp = {});

// LV <= K (1+V): K* = sup over sampled shells of LV/(1+V); holds when finite.
// Inconclusive when the blow-up scan fails or V < 0 is sampled.
Certificate check_existence_condition(const Problem& p, const expr::Expr& V,
                                      const CertParams& cp = {});

// dtV + LV <= K(t) + H(t) V with H >= 0 on [0,T]; K, H are expressions in t
// only (empty Expr = 0). Also tabulates R and Q.
Certificate check_timedep_condition(const Problem& p, const expr::Expr& V,
                                    const expr::Expr& K, const expr::Expr& H,
                                    const CertParams& cp = {});

// LV <= -K V on D \ D_n for autonomous coefficients with c = 0: finds the
// smallest n and the largest sampled K > 0. Throws errc::precondition when
// coefficients depend on t or c is not identically zero.
Certificate check_ergodic_condition(const Problem& p, const expr::Expr& V,
                                    const CertParams& cp = {});

struct IntegrabilityParams {
    int k_max = 48;         // exhaustion depth of the partial-sum ladder
    int cells_per_ring = 4096;
    double blowup_threshold = 1e12;
};

struct IntegralReport {
    double value = 0;        // quadrature of V against the (normalized) initial measure
    bool finite = true;
    std::vector<double> partial; // cumulative partial sums over the ladder
};

// int V dnu by ring quadrature on the exhaustion ladder; densities are
// normalized to unit mass on the same ladder. Declared infinite when the
// partial sums pass the threshold or the ring increments stop decreasing.
IntegralReport check_initial_integrability(const Problem& p, const expr::Expr& V,
                                           const IntegrabilityParams& ip = {});
// Same quadrature against an arbitrary scalar field f(x, t=0) (1-d density only).
IntegralReport integrate_against_initial(const Problem& p,
                                         const std::function<double(double)>& f,
                                         const IntegrabilityParams& ip = {});

// Monotone concave rescaling theta with W = log(1 + theta(V)) integrable
// against nu even when V is not. Breakpoints z_k satisfy (empirically)
// sigma([z_k, infinity)) <= 2^-k for sigma = nu o V^-1, with gaps
// nondecreasing and >= 1. theta is tabulated: per segment a flat/smoothstep
// ramp/flat C^1 slope profile whose knot slopes are secant means and whose
// ramp position is solved so that theta(z_{k+1}) - theta(z_k) = 1 exactly.
// theta(0) = 0; the anchor theta(z_1) = g(z_1) * z_1 is reported.
struct Rescaling {
    struct Piece {
        double lo = 0, hi = 0;        // slope piece domain
        double m_head = 0, m_tail = 0;
        double ramp_lo = 0, ramp_w = 0;
        double theta_lo = 0;          // theta at lo
    };
    std::vector<double> z;            // breakpoints z_1..z_m
    std::vector<double> tail_mass;    // empirical sigma tail at each z_k
    double anchor = 0;                // theta(z_1)
    std::vector<Piece> pieces;

    double g(double v) const;         // slope, nonincreasing, in [0,1]
    double theta(double v) const;
    double W(double v) const;         // log(1 + theta(v))
};

struct RescaleParams {
    int table_size = 24;    // breakpoints constructed
    int k_max = 40;         // sampling ladder depth for sigma
    int cells_per_ring = 2048;
    CertParams blowup;      // parameters of the prerequisite blow-up scan
};

// Throws errc::precondition when the blow-up scan does not confirm V.
Rescaling rescale_integrable(const Problem& p, const expr::Expr& V,
                             const RescaleParams& rp = {});

struct UniqParams {
    double tol = 1e-3;          // ladder must end below this
    double rho_floor = 1e-14;   // beta term masked where density is smaller
};

// R_N = int_0^T int_{N <= V <= 2N} (|L0V|/N + |sqrt(A) grad V|^2/N^2) dmu dt
// over the computed flow, for each N in the ladder; variant (ii) replaces
// |L0V|/N by |(b - beta) grad V|/N with beta = d_x a + a d_x rho / rho from
// central differences. Holds when the ladder decreases below tol.
Certificate check_uniqueness_class(const DensityFlow& flow, const Problem& p,
                                   const expr::Expr& V,
                                   const std::vector<double>& N_ladder,
                                   const UniqParams& up = {});

struct MomentReport {
    bool pass = false;
    double worst_gap = 0;   // max over save times of lhs - rhs
    std::vector<double> t, lhs, rhs;
    double v_initial = 0;   // int V dnu
};

// Checks int V dmu_t <= Q(t) + R(t) int V dnu at the flow's save times using
// the curves carried by a holding timedep certificate. Throws
// errc::precondition when the certificate does not hold or V fails the
// blow-up scan (degenerate candidates are rejected, not scored).
MomentReport moment_bound_check(const DensityFlow& flow, const Problem& p,
                                const expr::Expr& V, const Certificate& timedep,
                                double tol_rel = 1e-2);

} // namespace fpk
