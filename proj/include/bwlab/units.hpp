#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace bwlab {

// Simulation time in integer nanoseconds.
using Nanos = std::int64_t;
// Link and flow rates in bits per second.
using Bps = std::uint64_t;

inline constexpr Nanos kNsPerSec = 1'000'000'000;

// Time to clock size_bits onto the wire at rate_bps, rounded up to whole
// nanoseconds so that no transmission ever takes zero time.
inline Nanos transmission_ns(std::int64_t size_bits, Bps rate_bps) {
  if (rate_bps == 0) {
    throw std::invalid_argument("transmission_ns: rate_bps must be positive");
  }
  if (size_bits < 0) {
    throw std::invalid_argument("transmission_ns: size_bits must be non-negative");
  }
  const auto numer = static_cast<__int128>(size_bits) * kNsPerSec;
  const auto rate = static_cast<__int128>(rate_bps);
  return static_cast<Nanos>((numer + rate - 1) / rate);
}

inline double ns_to_s(Nanos t) { return static_cast<double>(t) * 1e-9; }

inline Nanos s_to_ns(double seconds) {
  return static_cast<Nanos>(std::llround(seconds * 1e9));
}

}  // namespace bwlab
