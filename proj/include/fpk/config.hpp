#pragma once

// Sectioned key=value run configuration. Sections: [domain] [coefficients]
// [initial] [solver] [lyapunov] [mc] [tolerances]. Keys are lowercase
// identifiers, values are numbers, expression strings or comma lists
// (commas inside parentheses belong to the expression, not the list).
// '#' starts a comment. Unknown sections and unknown keys are hard errors.
//
// The parsed config resolves every default, keeps the original text, and
// carries an FNV-1a hash of it; config_json renders the resolved state, and
// feeding the embedded text back through config_parse reproduces it exactly.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpk/lyapunov.hpp"
#include "fpk/mc.hpp"
#include "fpk/problem.hpp"
#include "fpk/solver.hpp"

namespace fpk {

struct LyapunovConfig {
    expr::Expr v;
    std::vector<std::string> checks; // of: existence, ergodic, timedep
    expr::Expr timedep_k, timedep_h; // K(t), H(t); empty = 0
    std::vector<double> n_ladder;    // uniqueness-class ladder (downstream use)
    CertParams params;
};

struct ToleranceConfig {
    double tol_mass = 1e-3;   // mass budget slack, also copied into SolveParams
    double compare_l1 = 0.05; // bound enforced by the compare command
};

struct RunConfig {
    Problem problem;
    SolveParams solve;
    McParams mc;
    bool mc_seed_set = false; // [mc] seed was given explicitly
    std::optional<LyapunovConfig> lyapunov;
    ToleranceConfig tol;

    std::string source;     // full original text
    std::uint64_t hash = 0; // FNV-1a of source
};

// errc::config for structural problems (with line numbers); parse errors in
// embedded expressions surface as errc::parse.
RunConfig config_parse(const std::string& text);
// errc::io when the file cannot be read.
RunConfig config_load(const std::string& path);

// Resolved state as JSON: every default filled in, expressions re-rendered,
// the source text embedded (key "source") and the content hash (hex).
std::string config_json(const RunConfig& c);

std::uint64_t fnv1a(std::string_view s);

} // namespace fpk
