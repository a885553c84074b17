#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "bwlab/probe.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/units.hpp"

namespace bwlab {

// Packet-pair tool: pairs leave back to back at the known capacity rate and
// the receive-side gap expansion prices the cross traffic.
struct SpruceConfig {
  Bps capacity_bps = 0;  // assumed-known path capacity
  int num_pairs = 100;
  std::int64_t probe_size_bits = 12000;  // 1500-byte probes
  // Average probe rate; 0 selects min(240 kbps, 5% of capacity).
  Bps probe_rate_bps = 0;

  Bps target_rate_bps() const {
    if (probe_rate_bps != 0) return probe_rate_bps;
    return std::min<Bps>(240'000, capacity_bps / 20);
  }

  Nanos intra_pair_gap_ns() const {
    return transmission_ns(probe_size_bits, capacity_bps);
  }

  void validate() const {
    if (capacity_bps == 0) throw std::invalid_argument("spruce: capacity required");
    if (num_pairs < 1) throw std::invalid_argument("spruce: need at least one pair");
    if (probe_size_bits <= 0) throw std::invalid_argument("spruce: bad probe size");
  }
};

// One pair's availability sample from its send/receive gaps. May be negative
// when the gap more than doubles; callers clamp only at aggregation.
inline double spruce_pair_sample(Nanos d_in_ns, Nanos d_out_ns, double capacity_bps) {
  if (d_in_ns <= 0) {
    throw std::invalid_argument("spruce_pair_sample: d_in must be positive");
  }
  const double ratio = static_cast<double>(d_out_ns) / static_cast<double>(d_in_ns);
  return (2.0 - ratio) * capacity_bps;
}

// Pairs start at exponentially spaced instants so the pair process is
// Poisson; the mean start-to-start gap fixes the average probe rate.
inline ProbeSchedule build_spruce_schedule(const SpruceConfig& config,
                                           std::uint64_t schedule_seed) {
  config.validate();
  const Nanos intra_gap = config.intra_pair_gap_ns();
  const double mean_pair_gap_ns =
      2.0 * static_cast<double>(config.probe_size_bits) * 1e9 /
      static_cast<double>(config.target_rate_bps());
  Rng rng(seed_combine(schedule_seed, hash_name("spruce-schedule")));

  ProbeSchedule schedule;
  schedule.entries.reserve(2 * static_cast<std::size_t>(config.num_pairs));
  Nanos start = 0;
  for (int pair = 0; pair < config.num_pairs; ++pair) {
    const auto g = static_cast<std::uint32_t>(pair);
    schedule.entries.push_back({start, config.probe_size_bits, g, 0});
    schedule.entries.push_back({start + intra_gap, config.probe_size_bits, g, 1});
    const Nanos gap = std::max<Nanos>(
        intra_gap + 1, s_to_ns(exponential(rng, mean_pair_gap_ns) * 1e-9));
    start += gap;
  }
  return schedule;
}

struct SpruceAnalysis {
  std::vector<double> samples_bps;  // one per surviving pair
  double raw_mean_bps = 0.0;        // before clamping
  Estimate estimate;
};

inline SpruceAnalysis spruce_analyze(const std::vector<ProbeRecord>& records,
                                     const SpruceConfig& config) {
  config.validate();
  SpruceAnalysis out;
  std::map<std::uint32_t, std::pair<const ProbeRecord*, const ProbeRecord*>> pairs;
  for (const auto& r : records) {
    auto& slot = pairs[r.group];
    (r.pos == 0 ? slot.first : slot.second) = &r;
  }

  Nanos first_send = 0, last_recv = 0, last_send = 0;
  bool any_packet = false, any_recv = false;
  for (const auto& r : records) {
    if (!any_packet || r.measured_send_ns < first_send) first_send = r.measured_send_ns;
    if (!any_packet || r.measured_send_ns > last_send) last_send = r.measured_send_ns;
    any_packet = true;
    if (!r.lost && (!any_recv || r.measured_recv_ns > last_recv)) {
      last_recv = r.measured_recv_ns;
      any_recv = true;
    }
  }

  for (const auto& [group, pr] : pairs) {
    const auto* a = pr.first;
    const auto* b = pr.second;
    if (a == nullptr || b == nullptr || a->lost || b->lost) continue;
    const Nanos d_in = b->measured_send_ns - a->measured_send_ns;
    const Nanos d_out = b->measured_recv_ns - a->measured_recv_ns;
    if (d_in <= 0) continue;
    out.samples_bps.push_back(
        spruce_pair_sample(d_in, d_out, static_cast<double>(config.capacity_bps)));
  }

  auto& est = out.estimate;
  est.bytes_sent = static_cast<std::uint64_t>(records.size()) *
                   static_cast<std::uint64_t>(config.probe_size_bits) / 8;
  est.duration_s = ns_to_s((any_recv ? last_recv : last_send) - first_send);
  if (out.samples_bps.empty()) {
    est.status = EstimateStatus::kNoConvergence;
    return out;
  }
  double sum = 0.0;
  for (double s : out.samples_bps) sum += s;
  out.raw_mean_bps = sum / static_cast<double>(out.samples_bps.size());
  est.value_bps =
      std::clamp(out.raw_mean_bps, 0.0, static_cast<double>(config.capacity_bps));
  est.low_bps = est.high_bps = est.value_bps;
  est.status = EstimateStatus::kOk;
  return out;
}

inline Estimate spruce_estimate(const std::vector<ProbeRecord>& records,
                                const SpruceConfig& config) {
  return spruce_analyze(records, config).estimate;
}

inline Estimate run_spruce(ProbeDriver& driver, const SpruceConfig& config,
                           std::uint64_t schedule_seed) {
  const ProbeSchedule schedule = build_spruce_schedule(config, schedule_seed);
  return spruce_estimate(driver.run(schedule), config);
}

}  // namespace bwlab
