#pragma once

#include <cstdint>
#include <stdexcept>

#include "bwlab/rng.hpp"
#include "bwlab/units.hpp"

namespace bwlab {

enum class RecvTimestampMode {
  kKernel,  // packets stamped in kernel space: zero added receive latency
  kUser,    // user-space stamping: uniform latency in [recv_lo, recv_hi]
};

// Timestamping latency model. Send-side stamping happens in user space for
// every tool, so a uniform draw in [send_lo, send_hi] is always added to the
// measured send time. All ranges are inclusive, in nanoseconds.
struct TimestampNoiseModel {
  Nanos send_lo_ns = 1'000;
  Nanos send_hi_ns = 6'000;
  RecvTimestampMode recv_mode = RecvTimestampMode::kKernel;
  Nanos recv_lo_ns = 5'000;
  Nanos recv_hi_ns = 65'000;
  // Optional heavy-tail mixture for scheduler preemption between the
  // timestamp and the send/receive system call. Off by default.
  double spike_probability = 0.0;
  Nanos spike_lo_ns = 100'000;
  Nanos spike_hi_ns = 1'000'000;
  std::uint64_t seed = 0;

  void validate() const {
    if (send_lo_ns < 0 || send_hi_ns < send_lo_ns) {
      throw std::invalid_argument("noise: bad send latency range");
    }
    if (recv_lo_ns < 0 || recv_hi_ns < recv_lo_ns) {
      throw std::invalid_argument("noise: bad recv latency range");
    }
    if (spike_probability < 0.0 || spike_probability > 1.0) {
      throw std::invalid_argument("noise: spike probability outside [0,1]");
    }
    if (spike_lo_ns < 0 || spike_hi_ns < spike_lo_ns) {
      throw std::invalid_argument("noise: bad spike latency range");
    }
  }

  Nanos send_span_ns() const { return send_hi_ns - send_lo_ns; }

  static TimestampNoiseModel none() {
    TimestampNoiseModel m;
    m.send_lo_ns = 0;
    m.send_hi_ns = 0;
    m.recv_mode = RecvTimestampMode::kKernel;
    return m;
  }
};

struct MeasuredTimestamps {
  Nanos send_ns = 0;
  Nanos recv_ns = 0;
};

namespace detail {
inline Nanos draw_latency(Rng& rng, Nanos lo, Nanos hi, const TimestampNoiseModel& m) {
  Nanos v = uniform_i64(rng, lo, hi);
  if (m.spike_probability > 0.0 && uniform_unit(rng) < m.spike_probability) {
    v += uniform_i64(rng, m.spike_lo_ns, m.spike_hi_ns);
  }
  return v;
}
}  // namespace detail

inline Nanos draw_send_latency(Rng& rng, const TimestampNoiseModel& m) {
  return detail::draw_latency(rng, m.send_lo_ns, m.send_hi_ns, m);
}

inline Nanos draw_recv_latency(Rng& rng, const TimestampNoiseModel& m) {
  if (m.recv_mode == RecvTimestampMode::kKernel) return 0;
  return detail::draw_latency(rng, m.recv_lo_ns, m.recv_hi_ns, m);
}

// Turns true wire times into what the tool's clocks would have reported.
inline MeasuredTimestamps apply_noise(Nanos true_send_ns, Nanos true_recv_ns,
                                      const TimestampNoiseModel& model, Rng& rng) {
  model.validate();
  MeasuredTimestamps out;
  out.send_ns = true_send_ns + draw_send_latency(rng, model);
  out.recv_ns = true_recv_ns + draw_recv_latency(rng, model);
  return out;
}

}  // namespace bwlab
