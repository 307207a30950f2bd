#pragma once

// Tiny dense helpers for the d <= 3 matrices this library touches.

namespace fpk::linalg {

struct EigRange {
    double lmin, lmax;
};

// Eigenvalue range of a symmetric d x d matrix, row-major, d <= 3.
EigRange sym_eig_range(const double* A, int d);

// B <- sqrt(M) for symmetric M with eigenvalues >= -tol (values in [-tol, 0]
// are clamped to zero). Returns false when an eigenvalue is below -tol.
bool sym_sqrt(const double* M, int d, double* B, double tol);

} // namespace fpk::linalg
