#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bwlab/units.hpp"

namespace bwlab {

// One scheduled probe packet. group/pos let analyzers rebuild pairs, trains,
// streams and chirps from a flat trace.
struct ProbeEntry {
  Nanos send_ns = 0;
  std::int64_t size_bits = 0;
  std::uint32_t group = 0;
  std::uint32_t pos = 0;
};

struct ProbeSchedule {
  std::vector<ProbeEntry> entries;

  void validate() const {
    Nanos prev = 0;
    for (const auto& e : entries) {
      if (e.send_ns < 0) {
        throw std::invalid_argument("schedule: send times must be non-negative");
      }
      if (e.send_ns < prev) {
        throw std::invalid_argument("schedule: negative inter-send gap");
      }
      if (e.size_bits <= 0) {
        throw std::invalid_argument("schedule: packet size must be positive");
      }
      prev = e.send_ns;
    }
  }

  std::uint64_t total_bits() const {
    std::uint64_t bits = 0;
    for (const auto& e : entries) bits += static_cast<std::uint64_t>(e.size_bits);
    return bits;
  }
};

// The estimator-facing view of one probe: measured clocks and the loss flag.
// True simulator timestamps are deliberately absent.
struct ProbeRecord {
  std::uint64_t packet_id = 0;
  std::uint32_t group = 0;
  std::uint32_t pos = 0;
  Nanos intended_send_ns = 0;
  Nanos measured_send_ns = 0;
  Nanos measured_recv_ns = 0;  // undefined when lost
  bool lost = false;
};

enum class EstimateStatus { kOk, kAbortedLoss, kNoConvergence };

inline std::string to_string(EstimateStatus s) {
  switch (s) {
    case EstimateStatus::kOk: return "ok";
    case EstimateStatus::kAbortedLoss: return "aborted_loss";
    case EstimateStatus::kNoConvergence: return "no_convergence";
  }
  return "unknown";
}

inline EstimateStatus status_from_string(const std::string& s) {
  if (s == "ok") return EstimateStatus::kOk;
  if (s == "aborted_loss") return EstimateStatus::kAbortedLoss;
  if (s == "no_convergence") return EstimateStatus::kNoConvergence;
  throw std::invalid_argument("unknown estimate status: " + s);
}

// One tool's verdict for one measurement session.
struct Estimate {
  double value_bps = 0.0;
  double low_bps = 0.0;  // == value_bps for point estimates
  double high_bps = 0.0;
  std::uint64_t bytes_sent = 0;
  double duration_s = 0.0;
  EstimateStatus status = EstimateStatus::kOk;
};

// Round-by-round probing surface. Adaptive tools call run() repeatedly;
// schedule times are relative to the start of the round.
class ProbeDriver {
 public:
  virtual ~ProbeDriver() = default;
  virtual std::vector<ProbeRecord> run(const ProbeSchedule& schedule) = 0;
};

inline void write_trace_csv(const std::vector<ProbeRecord>& records, std::ostream& os) {
  os << "packet_id,group,position,intended_send_ns,measured_send_ns,measured_recv_ns,lost\n";
  for (const auto& r : records) {
    os << r.packet_id << ',' << r.group << ',' << r.pos << ',' << r.intended_send_ns
       << ',' << r.measured_send_ns << ',' << (r.lost ? 0 : r.measured_recv_ns) << ','
       << (r.lost ? 1 : 0) << '\n';
  }
}

}  // namespace bwlab
