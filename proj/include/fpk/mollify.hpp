#pragma once

// Smoothing of rough coefficients for the approximating-problem ladder.
// Coefficients are cut off outside D_n x [0,T] (diffusion falls back to the
// identity there, drift and killing to zero) and convolved with the compact
// bump kernel ~ exp(-1/(1-|z|^2)) of bandwidth 1/n in space-time, discretized
// on a tensor grid and renormalized to unit discrete mass. The result is
// sampled on a fine grid over D_{n+1} x [-1/n, T+1/n].
//
// The time direction is padded by reflection at t=0 and t=T by default, which
// avoids boundary layers in the smoothed fields; the plain zero-extension
// variant is kept behind a flag for fidelity comparisons.
//
// Spatial dimension 1 only: the grid solver that consumes these fields is 1-d.

#include <vector>

#include "fpk/problem.hpp"

namespace fpk {

enum class TimeExtension { Reflect, Zero };

struct MollifyParams {
    double spacing = 0; // grid step; 0 means 1/(4n); must be <= 1/(4n)
    TimeExtension time_extension = TimeExtension::Reflect;
};

struct MollifiedSet {
    int n = 0;
    double bandwidth = 0; // 1/n
    std::vector<double> xs, ts;
    std::vector<double> a, b, c; // xs.size() * ts.size(), x-major
    double kernel_mass = 0;      // discrete kernel mass after normalization

    double eval(const std::vector<double>& field, double x, double t) const;
    double eval_a(double x, double t) const { return eval(a, x, t); }
    double eval_b(double x, double t) const { return eval(b, x, t); }
    double eval_c(double x, double t) const { return eval(c, x, t); }
};

MollifiedSet mollify_coefficients(const Problem& p, int n, const MollifyParams& mp = {});

} // namespace fpk
