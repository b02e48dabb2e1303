#pragma once

// Counter-based random numbers (Philox4x32-10, Salmon et al., SC'11).
// A draw is a pure function of (key, counter): streams are addressed by
// (seed, replica, particle, step) and never depend on call order.

#include <array>
#include <cstdint>

namespace chaoslab::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

namespace detail {
inline constexpr std::uint32_t kMulA = 0xD2511F53u;
inline constexpr std::uint32_t kMulB = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeylA = 0x9E3779B9u;
inline constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void round(Counter& c, const Key& k) noexcept {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}
}  // namespace detail

inline Counter philox4x32(Counter c, Key k) noexcept {
  for (int r = 0; r < 10; ++r) {
    detail::round(c, k);
    if (r < 9) {
      k[0] += detail::kWeylA;
      k[1] += detail::kWeylB;
    }
  }
  return c;
}

inline Key key_from_seed(std::uint64_t seed) noexcept {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Uniform on the open interval (0, 1): 52 random bits, offset by half a step.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(bits >> 12) * 0x1p-52 + 0x1p-53;
}

// Standard normal quantile, Wichura's AS 241 (PPND16); relative accuracy
// about 1e-16 over the whole open interval.
double normal_quantile(double p) noexcept;

// Two uniforms in (0,1) from one Philox block.
inline std::array<double, 2> uniform2(const Key& key, const Counter& ctr) noexcept {
  const Counter out = philox4x32(ctr, key);
  return {to_open_unit(out[0], out[1]), to_open_unit(out[2], out[3])};
}

// Two independent standard normals from one Philox block via inversion.
inline std::array<double, 2> normal2(const Key& key, const Counter& ctr) noexcept {
  const auto u = uniform2(key, ctr);
  return {normal_quantile(u[0]), normal_quantile(u[1])};
}

// Stream purposes occupying the last counter word's high bits.
enum class Purpose : std::uint32_t {
  dynamics = 0,
  initial = 1,
  mixture = 2,
  bootstrap = 3,
  null_sample = 4,
};

inline Counter make_counter(std::uint32_t step, std::uint32_t particle, std::uint32_t replica,
                            Purpose purpose, std::uint32_t block = 0) noexcept {
  return {step, particle, replica, (static_cast<std::uint32_t>(purpose) << 24) | (block & 0xFFFFFFu)};
}

}  // namespace chaoslab::rng
