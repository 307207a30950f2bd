#include "fpk/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace fpk::linalg {

namespace {

/* Cyclic Jacobi on a symmetric d x d matrix (d <= 3). A is destroyed and
   ends diagonal; V accumulates the rotations (row-major). */
void jacobi(double* A, double* V, int d) {
    for (int i = 0; i < d * d; ++i) V[i] = 0;
    for (int i = 0; i < d; ++i) V[i * d + i] = 1;
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = 0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += A[p * d + q] * A[p * d + q];
        if (off < 1e-300) return;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                double apq = A[p * d + q];
                if (apq == 0) continue;
                double app = A[p * d + p], aqq = A[q * d + q];
                double tau = (aqq - app) / (2 * apq);
                double t = (tau >= 0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1 + tau * tau));
                double c = 1 / std::sqrt(1 + t * t), s = t * c;
                for (int k = 0; k < d; ++k) {
                    double akp = A[k * d + p], akq = A[k * d + q];
                    A[k * d + p] = c * akp - s * akq;
                    A[k * d + q] = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    double apk = A[p * d + k], aqk = A[q * d + k];
                    A[p * d + k] = c * apk - s * aqk;
                    A[q * d + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    double vkp = V[k * d + p], vkq = V[k * d + q];
                    V[k * d + p] = c * vkp - s * vkq;
                    V[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

} // namespace

EigRange sym_eig_range(const double* A, int d) {
    if (d == 1) return {A[0], A[0]};
    if (d == 2) {
        double tr = A[0] + A[3];
        double det = A[0] * A[3] - A[1] * A[2];
        double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
        return {tr / 2 - disc, tr / 2 + disc};
    }
    double M[9], V[9];
    std::copy(A, A + 9, M);
    jacobi(M, V, 3);
    double lmin = M[0], lmax = M[0];
    for (int i = 1; i < 3; ++i) {
        lmin = std::min(lmin, M[i * 3 + i]);
        lmax = std::max(lmax, M[i * 3 + i]);
    }
    return {lmin, lmax};
}

bool sym_sqrt(const double* Min, int d, double* B, double tol) {
    if (d == 1) {
        if (Min[0] < -tol) return false;
        B[0] = std::sqrt(std::max(0.0, Min[0]));
        return true;
    }
    double A[9], V[9];
    for (int i = 0; i < d * d; ++i) A[i] = Min[i];
    jacobi(A, V, d);
    double lam[3];
    for (int i = 0; i < d; ++i) {
        lam[i] = A[i * d + i];
        if (lam[i] < -tol) return false;
        lam[i] = std::sqrt(std::max(0.0, lam[i]));
    }
    // B = V diag(sqrt(lam)) V^T
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0;
            for (int k = 0; k < d; ++k) s += V[i * d + k] * lam[k] * V[j * d + k];
            B[i * d + j] = s;
        }
    return true;
}

} // namespace fpk::linalg
