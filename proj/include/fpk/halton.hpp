#pragma once

// Halton quasi-random sequences. The "seed" used across the library is a
// deterministic start offset into the sequence, not PRNG state: sample i of
// a run seeded with s is the Halton point at index s + i. That keeps every
// sampling routine reproducible from its config alone.

#include <cstdint>

namespace fpk::quasi {

inline constexpr uint32_t kPrimes[8] = {2, 3, 5, 7, 11, 13, 17, 19};

inline double radical_inverse(uint64_t i, uint32_t base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

// Writes a point in [0,1)^dim. dim <= 8.
inline void halton_point(uint64_t index, int dim, double* out) {
    for (int j = 0; j < dim; ++j) out[j] = radical_inverse(index + 1, kPrimes[j]);
}

} // namespace fpk::quasi
