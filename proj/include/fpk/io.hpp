#pragma once

// Result files. Every float is written as %.17g so files round-trip to the
// exact double and identical runs produce identical bytes. Column layouts
// are frozen in docs/formats.md. All writers throw errc::io on filesystem
// trouble.

#include <string>
#include <vector>

#include "fpk/ergodic.hpp"
#include "fpk/flow.hpp"
#include "fpk/mc.hpp"

namespace fpk::io {

void write_density_csv(const std::string& path, const DensityFlow& flow); // t,x,u
void write_mass_csv(const std::string& path, const MassLedger& led);      // t,M,C,B,r
void write_stationary_csv(const std::string& path, const StationaryDensity& s); // x,u
void write_ergodic_csv(const std::string& path, const ConvergenceReport& rep);
void write_mc_csv(const std::string& path, const McResult& mc);
void write_mc_hist_csv(const std::string& path, const McResult& mc, const Grid1D& grid);
void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// (t, x, value) csv back into per-time densities; the x block must repeat
// identically at every time. Reads what write_density_csv/write_mc_hist_csv
// produced.
struct DensityTable {
    std::vector<double> times;
    std::vector<double> x;
    std::vector<std::vector<double>> u;
};
DensityTable read_density_table(const std::string& path);

} // namespace fpk::io
