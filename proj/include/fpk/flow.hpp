#pragma once

// Shared value types for computed density evolutions: a uniform 1-d cell grid
// over one exhaustion shell, the flow of cell-average densities at save
// times, and the mass bookkeeping that goes with a solve.

#include <cstddef>
#include <vector>

namespace fpk {

struct Grid1D {
    int K = 0;       // shell index the grid meshes
    double lo = 0, hi = 0;
    int n = 0;       // cell count

    double h() const { return (hi - lo) / n; }
    double center(int i) const { return lo + (i + 0.5) * h(); }
    // cell index of a point, clamped to the grid
    int locate(double x) const {
        int i = static_cast<int>((x - lo) / h());
        return i < 0 ? 0 : (i >= n ? n - 1 : i);
    }
};

struct DensityFlow {
    Grid1D grid;
    std::vector<double> times;               // save times, strictly increasing
    std::vector<std::vector<double>> u;      // one density (size grid.n) per save time
    std::vector<double> eps_used;            // viscosity ladder actually run

    double mass(std::size_t m) const {
        double s = 0;
        for (double v : u[m]) s += v;
        return s * grid.h();
    }
};

// Per-save-time mass bookkeeping of a solve:
//   M(t) cell mass, C(t) accumulated killing integral, B(t) accumulated
//   frontier outflux, r(t) = M - M(0) - C the budget residual.
struct MassLedger {
    std::vector<double> t, M, C, B, r;
};

} // namespace fpk
