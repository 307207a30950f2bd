#pragma once

// Killed-diffusion Monte Carlo oracle. Euler-Maruyama for
//
//   dX = b(X,t) dt + sigma(X,t) dW,   sigma sigma^T = 2A
//
// (the generator here is a*dxx + b*dx with no 1/2, which is where the factor
// 2 comes from), with exponential killing at rate |c| decided from the
// pre-step position and absorption on leaving the open domain, tested at the
// end of each step.
//
// Every normal and uniform draw is a pure hash of (seed, path, step, slot).
// No stream object advances, so results do not depend on how paths are
// partitioned across threads, and a snapshot resumes bit-exactly.

#include <cstdint>
#include <vector>

#include "fpk/flow.hpp"
#include "fpk/problem.hpp"

namespace fpk {

enum class PathStatus : std::uint8_t { Alive, Killed, Exited };

// Full particle state at one time; also the resume token.
struct PathEnsemble {
    int d = 1;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double dt = 0;
    std::uint64_t step_index = 0; // completed steps; t = step_index * dt
    double t = 0;
    std::vector<double> x;          // n_paths * d, frozen where the path died
    std::vector<PathStatus> status; // transitions are one-way
    std::vector<double> death_time; // kill/exit time, NaN while alive
    std::vector<double> c_int;      // per-path int c(X_s,s) ds while alive; a
                                    // step's c*dt is credited only if the path
                              // ends that step alive, so E[1{alive} - c_int] <= 1

    std::size_t count(PathStatus s) const;
    double alive_fraction() const { return static_cast<double>(count(PathStatus::Alive)) / static_cast<double>(n_paths); }
    double killed_fraction() const { return static_cast<double>(count(PathStatus::Killed)) / static_cast<double>(n_paths); }
    double exited_fraction() const { return static_cast<double>(count(PathStatus::Exited)) / static_cast<double>(n_paths); }
};

struct McParams {
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    std::vector<double> save_times; // empty: 32 uniform in (0, t_end]; every entry must sit on a step multiple
    int threads = 1;                // never changes the numbers, only the wall clock
};

struct McResult {
    std::vector<PathEnsemble> snapshots; // one per save time
};

// Run from the initial measure at t=0 through the save schedule.
// Errors: errc::invalid for save times off the step lattice or outside
// (0, t_end]; errc::precondition for d > 3 or initial laws that cannot be
// sampled (density off a bounded interval); errc::numeric for coefficient
// blow-ups or a diffusion matrix that is not PSD at a visited point.
McResult simulate(const Problem& p, const McParams& mp);

// Continue a snapshot to later save times under the same stream discipline;
// bit-identical to the single longer run with the same seed.
McResult resume(const Problem& p, const PathEnsemble& state,
                const std::vector<double>& save_times, int threads = 1);

// Histogram of alive paths on a grid; mass = alive-and-inside fraction. 1-d.
std::vector<double> empirical_density(const PathEnsemble& snap, const Grid1D& grid);

// Particle-level check that the alive mass stays below the initial mass plus
// the accumulated killing integral: the per-path statistic
// S = 1{alive} - int c ds has mean <= 1 for the exact dynamics (equality
// minus whatever probability left the domain). Works in any dimension.
struct SubprobEstimate {
    double mean = 0; // sample mean of S
    double se = 0;   // standard error of the mean
};
SubprobEstimate subprob_estimate(const PathEnsemble& snap);

struct CompareRow {
    double t = 0;
    double l1 = 0;         // |u_pde - u_mc| integrated over the grid
    double mass_delta = 0; // |M_pde - M_mc|
};

// PDE flow vs MC snapshots at matching save times (1-d).
std::vector<CompareRow> compare(const DensityFlow& flow, const McResult& mc);

} // namespace fpk
