#pragma once

// Counter-based random streams. Every value is a pure function of
// (key, counter), so generation order never matters.
//
//   splitmix64(x):  x += 0x9E3779B97F4A7C15
//                   x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//                   x = (x ^ (x >> 27)) * 0x94D049BB133111EB
//                   return x ^ (x >> 31)
//
//   stream_key(seed, a, b) = splitmix64(splitmix64(seed ^ splitmix64(a)) ^ b)
//   draw(key, i)           = splitmix64(key + i * 0x9E3779B97F4A7C15)
//   unit(bits)             = (bits >> 40) * 2^-24        in [0, 1)

#include <cstdint>
#include <string_view>

namespace pardec::rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// FNV-1a over the bytes of a name; used to key tensors by name.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ b);
}

constexpr std::uint64_t draw(std::uint64_t key, std::uint64_t counter) noexcept {
  return splitmix64(key + counter * kGolden);
}

/// 24-bit uniform in [0, 1); exactly representable in float and double.
constexpr double unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 40) * (1.0 / 16777216.0);
}

/// Uniform integer in [0, bound) by 128-bit multiply-shift.
constexpr std::uint64_t below(std::uint64_t bits, std::uint64_t bound) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits) * bound) >> 64);
}

}  // namespace pardec::rng
