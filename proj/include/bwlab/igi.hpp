#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bwlab/probe.hpp"
#include "bwlab/units.hpp"

namespace bwlab {

// Packet-train tool: grows the initial gap until the train comes out with the
// same average spacing it went in with, then prices the cross traffic from
// the expanded gaps at that operating point.
struct IgiConfig {
  Bps capacity_bps = 0;  // assumed-known path capacity
  int train_length = 60;
  std::int64_t probe_size_bits = 5600;  // 700-byte probes
  Nanos initial_gap_ns = 0;             // 0: transmission time at capacity
  double gap_growth = 1.25;
  double turning_tolerance = 0.05;
  int max_rounds = 32;
  Nanos inter_round_gap_ns = 5'000'000;
  // Fixed per-session time spent outside gap probing (the capacity probing a
  // deployed tool runs first); counted into the response time only.
  double setup_time_s = 12.8;

  Nanos start_gap_ns() const {
    return initial_gap_ns > 0 ? initial_gap_ns
                              : transmission_ns(probe_size_bits, capacity_bps);
  }

  void validate() const {
    if (capacity_bps == 0) throw std::invalid_argument("igi: capacity required");
    if (train_length < 2) throw std::invalid_argument("igi: train needs >= 2 packets");
    if (probe_size_bits <= 0) throw std::invalid_argument("igi: bad probe size");
    if (gap_growth <= 1.0) throw std::invalid_argument("igi: gap growth must exceed 1");
    if (turning_tolerance < 0.0) throw std::invalid_argument("igi: negative tolerance");
    if (max_rounds < 1) throw std::invalid_argument("igi: need at least one round");
  }
};

inline ProbeSchedule build_igi_train(const IgiConfig& config, Nanos gap_ns,
                                     std::uint32_t round) {
  ProbeSchedule schedule;
  schedule.entries.reserve(static_cast<std::size_t>(config.train_length));
  for (int k = 0; k < config.train_length; ++k) {
    schedule.entries.push_back(
        {static_cast<Nanos>(k) * gap_ns, config.probe_size_bits, round,
         static_cast<std::uint32_t>(k)});
  }
  return schedule;
}

// Output gaps between consecutively received train positions.
inline std::vector<Nanos> igi_output_gaps(const std::vector<ProbeRecord>& records) {
  std::vector<const ProbeRecord*> by_pos(records.size(), nullptr);
  for (const auto& r : records) {
    if (r.pos < records.size() && !r.lost) by_pos[r.pos] = &r;
  }
  std::vector<Nanos> gaps;
  for (std::size_t p = 0; p + 1 < by_pos.size(); ++p) {
    if (by_pos[p] != nullptr && by_pos[p + 1] != nullptr) {
      gaps.push_back(by_pos[p + 1]->measured_recv_ns - by_pos[p]->measured_recv_ns);
    }
  }
  return gaps;
}

struct IgiSearchResult {
  bool converged = false;
  Nanos turning_gap_ns = 0;
  std::vector<ProbeRecord> turning_records;
  int rounds = 0;
  std::uint64_t bytes_sent = 0;
  double probing_time_s = 0.0;
};

// Walk the initial gap upward until the average output gap matches it.
inline IgiSearchResult igi_turning_point(ProbeDriver& driver, const IgiConfig& config) {
  config.validate();
  IgiSearchResult out;
  Nanos gap = config.start_gap_ns();
  for (int round = 0; round < config.max_rounds; ++round) {
    const ProbeSchedule schedule =
        build_igi_train(config, gap, static_cast<std::uint32_t>(round));
    std::vector<ProbeRecord> records = driver.run(schedule);
    ++out.rounds;
    out.bytes_sent += schedule.total_bits() / 8;

    Nanos first_send = 0, last_seen = 0;
    bool any = false;
    for (const auto& r : records) {
      if (!any) first_send = r.measured_send_ns;
      last_seen = std::max(last_seen, r.lost ? r.measured_send_ns : r.measured_recv_ns);
      any = true;
    }
    if (any) {
      out.probing_time_s += ns_to_s(last_seen - first_send) +
                            ns_to_s(config.inter_round_gap_ns);
    }

    const std::vector<Nanos> gaps = igi_output_gaps(records);
    if (!gaps.empty()) {
      double sum = 0.0;
      for (Nanos g : gaps) sum += static_cast<double>(g);
      const double avg_out = sum / static_cast<double>(gaps.size());
      if (std::abs(avg_out - static_cast<double>(gap)) <=
          config.turning_tolerance * static_cast<double>(gap)) {
        out.converged = true;
        out.turning_gap_ns = gap;
        out.turning_records = std::move(records);
        return out;
      }
    }
    gap = std::max<Nanos>(gap + 1,
                          static_cast<Nanos>(std::llround(
                              static_cast<double>(gap) * config.gap_growth)));
  }
  return out;
}

// The raw train-gap availability formula, before clamping.
inline double igi_point_estimate_bps(double capacity_bps, double d_in_ns,
                                     double d_out_ns, std::int64_t probe_size_bits) {
  if (d_in_ns <= 0.0) {
    throw std::invalid_argument("igi_point_estimate: d_in must be positive");
  }
  return (capacity_bps * (d_in_ns - d_out_ns) +
          static_cast<double>(probe_size_bits) * 1e9) /
         d_in_ns;
}

// Availability from the turning-point train. Gaps that did not expand are
// treated as cross-traffic hits and left out of the output-gap average; when
// nothing expanded the train saw no contention and the average collapses to
// the initial gap itself.
inline Estimate igi_estimate(const std::vector<ProbeRecord>& turning_records,
                             Nanos d_in_ns, const IgiConfig& config) {
  config.validate();
  if (d_in_ns <= 0) throw std::invalid_argument("igi_estimate: d_in must be positive");
  const std::vector<Nanos> gaps = igi_output_gaps(turning_records);
  double sum = 0.0;
  std::size_t expanded = 0;
  for (Nanos g : gaps) {
    if (g > d_in_ns) {
      sum += static_cast<double>(g);
      ++expanded;
    }
  }
  const double avg_out =
      expanded > 0 ? sum / static_cast<double>(expanded) : static_cast<double>(d_in_ns);

  const double c = static_cast<double>(config.capacity_bps);
  const double value = igi_point_estimate_bps(c, static_cast<double>(d_in_ns),
                                              avg_out, config.probe_size_bits);

  Estimate est;
  est.value_bps = std::clamp(value, 0.0, c);
  est.low_bps = est.high_bps = est.value_bps;
  est.status = EstimateStatus::kOk;
  return est;
}

inline Estimate run_igi(ProbeDriver& driver, const IgiConfig& config) {
  IgiSearchResult search = igi_turning_point(driver, config);
  Estimate est;
  if (!search.converged) {
    est.status = EstimateStatus::kNoConvergence;
  } else {
    est = igi_estimate(search.turning_records, search.turning_gap_ns, config);
  }
  est.bytes_sent = search.bytes_sent;
  est.duration_s = config.setup_time_s + search.probing_time_s;
  return est;
}

}  // namespace bwlab
