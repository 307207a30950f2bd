#pragma once

// Open domains and their exhaustion by nested shells D_1 ⊂ D_2 ⊂ ... with
// closure(D_k) ⊂ D_{k+1} and union D_k = D.
//
// Shell rules:
//   interval/box, dyadic:       inset per side = width_i * 2^(-k-1)
//   interval/box, linear(step): inset per side = (width_i/2) / (1 + k*step)
//   whole_space:                ball of radius k*step about the origin
//                               (the exhaustion rule names the step only)

#include <span>
#include <vector>

#include "fpk/error.hpp"

namespace fpk {

struct DomainSpec {
    enum class Kind { Interval, Box, WholeSpace };
    enum class Exhaustion { Dyadic, Linear };

    Kind kind = Kind::Interval;
    int dim = 1;
    std::vector<double> lower, upper; // empty for whole_space
    Exhaustion exhaustion = Exhaustion::Dyadic;
    double step = 1.0; // linear rule / whole_space radius increment

    static DomainSpec interval(double lo, double hi,
                               Exhaustion e = Exhaustion::Dyadic, double step = 1.0);
    static DomainSpec box(std::vector<double> lo, std::vector<double> hi,
                          Exhaustion e = Exhaustion::Dyadic, double step = 1.0);
    static DomainSpec whole_space(int d, double step = 1.0);

    bool unbounded() const { return kind == Kind::WholeSpace; }
    bool contains(std::span<const double> x) const; // open-domain membership
    void check() const;                             // throws on malformed bounds
};

// Closed description of one exhaustion shell. Always carries a bounding box;
// ball shells (whole_space, dim >= 2) also carry center/radius.
struct Region {
    bool ball = false;
    std::vector<double> lo, hi;
    double radius = 0.0; // ball only, centered at the origin

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(std::span<const double> x) const;
    double width(int i) const { return hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]; }
};

// k >= 1. Throws errc::invalid for k < 1.
Region exhaust(const DomainSpec& d, int k);

} // namespace fpk
