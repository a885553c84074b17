#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace bwlab {

// splitmix64 finalizer, used to whiten and combine seed material.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t seed_combine(std::uint64_t seed, std::uint64_t salt) {
  return mix64(seed ^ mix64(salt));
}

// FNV-1a, for folding tool names and labels into seeds.
inline std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// mt19937_64 output is pinned by the standard, so seeded runs are
// reproducible across platforms as long as draws avoid std distributions.
using Rng = std::mt19937_64;

// Uniform integer in [lo, hi], both ends inclusive. The modulo bias is far
// below anything observable at the ranges used here.
inline std::int64_t uniform_i64(Rng& rng, std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(rng() % span);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double exponential(Rng& rng, double mean) {
  return -mean * std::log1p(-uniform_unit(rng));
}

}  // namespace bwlab
