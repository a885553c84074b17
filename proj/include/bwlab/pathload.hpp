#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bwlab/probe.hpp"
#include "bwlab/units.hpp"

namespace bwlab {

// Self-loading periodic streams: constant-rate streams are classified by
// their one-way delay trend and a binary search homes in on the rate where
// the trend appears.
struct PathloadConfig {
  int stream_length = 100;
  std::int64_t probe_size_bits = 8000;  // 1000-byte probes
  int fleet_size = 12;                  // streams per tested rate
  Bps rate_min_bps = 1'000'000;
  Bps rate_max_bps = 0;  // resolved by the harness, e.g. 1.2x capacity
  Bps resolution_bps = 2'000'000;
  double loss_abort_fraction = 0.10;
  // Trend rule: K groups of delay medians; increasing needs a 0.6 fraction of
  // consecutive rises and a net climb above the delay threshold.
  int trend_groups = 10;
  double trend_increase_fraction = 0.6;
  double trend_flat_fraction = 0.4;
  Nanos trend_delay_threshold_ns = -1;  // -1: 10x the send-noise span
  Nanos min_stream_idle_ns = 1'000'000;
  int max_fleets = 50;

  void validate() const {
    if (stream_length < 2) throw std::invalid_argument("pathload: stream too short");
    if (probe_size_bits <= 0) throw std::invalid_argument("pathload: bad probe size");
    if (fleet_size < 1) throw std::invalid_argument("pathload: empty fleet");
    if (rate_max_bps == 0 || rate_min_bps >= rate_max_bps) {
      throw std::invalid_argument("pathload: need rate_min < rate_max");
    }
    if (resolution_bps == 0) throw std::invalid_argument("pathload: zero resolution");
    if (trend_groups < 2) throw std::invalid_argument("pathload: need >= 2 groups");
    if (trend_delay_threshold_ns < 0) {
      throw std::invalid_argument("pathload: delay threshold unresolved");
    }
  }
};

enum class StreamTrend { kIncreasing, kFlat, kAmbiguous };

// Classify one stream's relative one-way delays.
inline StreamTrend classify_stream_trend(const std::vector<double>& rel_owd_ns,
                                         const PathloadConfig& config) {
  const int k = config.trend_groups;
  if (static_cast<int>(rel_owd_ns.size()) < k) return StreamTrend::kAmbiguous;

  std::vector<double> medians;
  medians.reserve(static_cast<std::size_t>(k));
  const std::size_t n = rel_owd_ns.size();
  for (int g = 0; g < k; ++g) {
    const std::size_t lo = n * static_cast<std::size_t>(g) / static_cast<std::size_t>(k);
    const std::size_t hi =
        n * static_cast<std::size_t>(g + 1) / static_cast<std::size_t>(k);
    std::vector<double> group(rel_owd_ns.begin() + lo, rel_owd_ns.begin() + hi);
    std::nth_element(group.begin(), group.begin() + group.size() / 2, group.end());
    medians.push_back(group[group.size() / 2]);
  }

  int rises = 0;
  for (int g = 0; g + 1 < k; ++g) {
    if (medians[g + 1] > medians[g]) ++rises;
  }
  const double rise_fraction = static_cast<double>(rises) / static_cast<double>(k - 1);
  const double net_climb = medians.back() - medians.front();
  const double threshold = static_cast<double>(config.trend_delay_threshold_ns);

  if (net_climb <= threshold) return StreamTrend::kFlat;
  if (rise_fraction >= config.trend_increase_fraction) return StreamTrend::kIncreasing;
  if (rise_fraction <= config.trend_flat_fraction) return StreamTrend::kFlat;
  return StreamTrend::kAmbiguous;
}

struct PathloadFleetLog {
  Bps rate_bps = 0;
  int increasing = 0;
  int flat = 0;
  int ambiguous = 0;
  int lossy = 0;
  bool verdict_increasing = false;
};

struct PathloadDiag {
  std::vector<PathloadFleetLog> fleets;
};

namespace detail {

struct StreamView {
  std::vector<double> rel_owd_ns;
  int received = 0;
  int total = 0;
};

}  // namespace detail

inline Estimate run_pathload(ProbeDriver& driver, const PathloadConfig& config,
                             PathloadDiag* diag = nullptr) {
  config.validate();
  Estimate est;
  double low = static_cast<double>(config.rate_min_bps);
  double high = static_cast<double>(config.rate_max_bps);
  std::uint32_t next_stream_group = 0;
  double clock_s = 0.0;
  std::uint64_t bytes = 0;

  for (int fleet = 0; fleet < config.max_fleets; ++fleet) {
    if (high - low <= static_cast<double>(config.resolution_bps)) break;
    const Bps rate = static_cast<Bps>(std::llround((low + high) / 2.0));
    const Nanos gap = transmission_ns(config.probe_size_bits, rate);
    const Nanos span = static_cast<Nanos>(config.stream_length - 1) * gap;
    const Nanos idle = std::max(span, config.min_stream_idle_ns);

    ProbeSchedule schedule;
    const std::uint32_t first_group = next_stream_group;
    for (int s = 0; s < config.fleet_size; ++s) {
      const Nanos start = static_cast<Nanos>(s) * (span + idle);
      const auto group = next_stream_group++;
      for (int p = 0; p < config.stream_length; ++p) {
        schedule.entries.push_back({start + static_cast<Nanos>(p) * gap,
                                    config.probe_size_bits, group,
                                    static_cast<std::uint32_t>(p)});
      }
    }
    bytes += schedule.total_bits() / 8;

    const std::vector<ProbeRecord> records = driver.run(schedule);

    std::vector<detail::StreamView> streams(
        static_cast<std::size_t>(config.fleet_size));
    Nanos fleet_first_send = 0, fleet_last_seen = 0;
    bool any = false;
    for (const auto& r : records) {
      auto& sv = streams[r.group - first_group];
      ++sv.total;
      if (!any) fleet_first_send = r.measured_send_ns;
      fleet_last_seen =
          std::max(fleet_last_seen, r.lost ? r.measured_send_ns : r.measured_recv_ns);
      any = true;
      if (!r.lost) {
        ++sv.received;
        sv.rel_owd_ns.push_back(
            static_cast<double>(r.measured_recv_ns - r.measured_send_ns));
      }
    }
    clock_s += ns_to_s(fleet_last_seen - fleet_first_send) + ns_to_s(idle);

    PathloadFleetLog log;
    log.rate_bps = rate;
    bool abort = false;
    for (auto& sv : streams) {
      const double loss =
          1.0 - static_cast<double>(sv.received) / static_cast<double>(sv.total);
      if (loss > config.loss_abort_fraction) {
        ++log.lossy;
        abort = true;
        continue;
      }
      if (!sv.rel_owd_ns.empty()) {
        const double base =
            *std::min_element(sv.rel_owd_ns.begin(), sv.rel_owd_ns.end());
        for (double& d : sv.rel_owd_ns) d -= base;
      }
      switch (classify_stream_trend(sv.rel_owd_ns, config)) {
        case StreamTrend::kIncreasing: ++log.increasing; break;
        case StreamTrend::kFlat: ++log.flat; break;
        case StreamTrend::kAmbiguous: ++log.ambiguous; break;
      }
    }

    if (abort) {
      if (diag != nullptr) diag->fleets.push_back(log);
      est.low_bps = low;
      est.high_bps = high;
      est.value_bps = (low + high) / 2.0;
      est.bytes_sent = bytes;
      est.duration_s = clock_s;
      est.status = EstimateStatus::kAbortedLoss;
      return est;
    }

    // Majority of the classified streams decides; a tie reads as no trend.
    log.verdict_increasing = log.increasing > log.flat;
    if (diag != nullptr) diag->fleets.push_back(log);
    if (log.verdict_increasing) {
      high = static_cast<double>(rate);
    } else {
      low = static_cast<double>(rate);
    }
  }

  est.low_bps = low;
  est.high_bps = high;
  est.value_bps = (low + high) / 2.0;
  est.bytes_sent = bytes;
  est.duration_s = clock_s;
  est.status = EstimateStatus::kOk;
  return est;
}

}  // namespace bwlab
