#pragma once

// Batched counter-based draws for consecutive particle indices. Results equal
// the scalar rng:: functions element by element (uniforms bitwise; normals to
// the last ulp of the rational approximation).

#include <cstdint>

#include "chaoslab/rng.hpp"

namespace chaoslab::kernels {

// For i in [0, n): block = philox({w0, first + i, w2, w3}, key); u0[i], u1[i]
// are its two open-interval uniforms.
void uniform_pairs_batch(const rng::Key& key, std::uint32_t w0, std::uint32_t first, int n, std::uint32_t w2,
                         std::uint32_t w3, double* u0, double* u1) noexcept;

void normal_quantile_batch(const double* u, double* z, int n) noexcept;

}  // namespace chaoslab::kernels
