#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace curate {

/// 128-bit content hash. Ordered by (hi, lo) so it can key sorted containers.
struct Hash128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  auto operator<=>(const Hash128&) const = default;

  /// 32 lowercase hex digits, hi word first.
  std::string hex() const;
  static Hash128 from_hex(std::string_view hex);
};

// Seedless by default: identical bytes hash identically on every machine.
// MurmurHash3 x64_128 with both lanes initialised from `seed`.
Hash128 hash128(std::string_view bytes, std::uint64_t seed = 0);

inline std::uint64_t hash64(std::string_view bytes, std::uint64_t seed = 0) {
  return hash128(bytes, seed).hi;
}

// Bijective 64-bit finaliser (splitmix64). Used as the MinHash permutation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

std::string hex64(std::uint64_t v);

}  // namespace curate
