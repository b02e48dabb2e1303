#include "chaoslab/kernels/random_batch.hpp"

#include <algorithm>
#include <cmath>

#if defined(__AVX512F__) && defined(__AVX512DQ__)
#include <immintrin.h>
#define CHAOSLAB_PHILOX_AVX512 1
#endif

namespace chaoslab::kernels {

void uniform_pairs_batch(const rng::Key& key, std::uint32_t w0, std::uint32_t first, int n, std::uint32_t w2,
                         std::uint32_t w3, double* u0, double* u1) noexcept {
  int i = 0;
#ifdef CHAOSLAB_PHILOX_AVX512
  // Eight counters per register, each 32-bit word held in a 64-bit lane so
  // vpmuludq yields the full 32x32 -> 64 product.
  const __m512i lo32 = _mm512_set1_epi64(0xffffffffu);
  const __m512i ma = _mm512_set1_epi64(rng::detail::kMulA);
  const __m512i mb = _mm512_set1_epi64(rng::detail::kMulB);
  const __m512i lane = _mm512_set_epi64(7, 6, 5, 4, 3, 2, 1, 0);
  const __m512d scale = _mm512_set1_pd(0x1p-52);
  const __m512d half = _mm512_set1_pd(0x1p-53);
  for (; i + 8 <= n; i += 8) {
    __m512i c0 = _mm512_set1_epi64(w0);
    __m512i c1 = _mm512_and_si512(_mm512_add_epi64(_mm512_set1_epi64(first + static_cast<std::uint32_t>(i)), lane), lo32);
    __m512i c2 = _mm512_set1_epi64(w2);
    __m512i c3 = _mm512_set1_epi64(w3);
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int r = 0; r < 10; ++r) {
      const __m512i p0 = _mm512_mul_epu32(c0, ma);
      const __m512i p1 = _mm512_mul_epu32(c2, mb);
      const __m512i n0 = _mm512_xor_si512(_mm512_xor_si512(_mm512_srli_epi64(p1, 32), c1), _mm512_set1_epi64(k0));
      const __m512i n2 = _mm512_xor_si512(_mm512_xor_si512(_mm512_srli_epi64(p0, 32), c3), _mm512_set1_epi64(k1));
      c1 = _mm512_and_si512(p1, lo32);
      c3 = _mm512_and_si512(p0, lo32);
      c0 = n0;
      c2 = n2;
      k0 += rng::detail::kWeylA;
      k1 += rng::detail::kWeylB;
    }
    const __m512i b0 = _mm512_srli_epi64(_mm512_or_si512(_mm512_slli_epi64(c0, 32), c1), 12);
    const __m512i b1 = _mm512_srli_epi64(_mm512_or_si512(_mm512_slli_epi64(c2, 32), c3), 12);
    // Exact: a 52-bit integer times 2^-52 plus 2^-53 is representable.
    _mm512_storeu_pd(u0 + i, _mm512_add_pd(_mm512_mul_pd(_mm512_cvtepu64_pd(b0), scale), half));
    _mm512_storeu_pd(u1 + i, _mm512_add_pd(_mm512_mul_pd(_mm512_cvtepu64_pd(b1), scale), half));
  }
#endif
  for (; i < n; ++i) {
    const auto out = rng::philox4x32({w0, first + static_cast<std::uint32_t>(i), w2, w3}, key);
    u0[i] = rng::to_open_unit(out[0], out[1]);
    u1[i] = rng::to_open_unit(out[2], out[3]);
  }
}

void normal_quantile_batch(const double* u, double* z, int n) noexcept {
  // Central region of AS 241 for every lane (vectorizes), then the tails.
  for (int i = 0; i < n; ++i) {
    const double q = u[i] - 0.5;
    const double r = 0.180625 - q * q;
    const double num =
        ((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
            45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
         133.14166789178437745) * r + 3.387132872796366608;
    const double den =
        ((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
            21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
         42.313330701600911252) * r + 1.0;
    z[i] = q * num / den;
  }
  // Tail lanes are rare (15%); gather their indices without branching.
  int tails[256];
  for (int start = 0; start < n; start += 256) {
    const int stop = std::min(n, start + 256);
    int m = 0;
    for (int i = start; i < stop; ++i) {
      tails[m] = i;
      m += std::abs(u[i] - 0.5) > 0.425 ? 1 : 0;
    }
    for (int t = 0; t < m; ++t) z[tails[t]] = rng::normal_quantile(u[tails[t]]);
  }
}

}  // namespace chaoslab::kernels
