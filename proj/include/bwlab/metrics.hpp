#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bwlab/path.hpp"
#include "bwlab/units.hpp"

namespace bwlab {

// End-to-end capacity: the narrow link's rate.
inline Bps path_capacity(const PathSpec& path) {
  path.validate();
  Bps c = path.links.front().capacity_bps;
  for (const auto& link : path.links) c = std::min(c, link.capacity_bps);
  return c;
}

// Unused capacity of one link over the averaging window.
inline double link_available_bps(double capacity_bps, double utilization) {
  if (capacity_bps <= 0.0) {
    throw std::invalid_argument("link_available: capacity must be positive");
  }
  if (!(utilization >= 0.0 && utilization <= 1.0)) {
    throw std::invalid_argument("link_available: utilization outside [0,1]");
  }
  return capacity_bps * (1.0 - utilization);
}

struct LinkLoad {
  double capacity_bps = 0.0;
  double utilization = 0.0;
};

// Path available bandwidth: the minimum of the per-link values, all measured
// over a common window.
inline double path_available_bps(const std::vector<LinkLoad>& links) {
  if (links.empty()) {
    throw std::invalid_argument("path_available: empty path");
  }
  double a = link_available_bps(links.front().capacity_bps, links.front().utilization);
  for (const auto& l : links) {
    a = std::min(a, link_available_bps(l.capacity_bps, l.utilization));
  }
  return a;
}

inline double relative_error(double expected_bps, double measured_bps) {
  if (expected_bps <= 0.0) {
    throw std::invalid_argument("relative_error: expected value must be positive");
  }
  return std::abs(expected_bps - measured_bps) / expected_bps;
}

// Average tool traffic rate over the session, as a fraction of path capacity.
inline double intrusiveness(std::uint64_t bytes_sent, double duration_s,
                            double capacity_bps) {
  if (duration_s <= 0.0) {
    throw std::invalid_argument("intrusiveness: duration must be positive");
  }
  if (capacity_bps <= 0.0) {
    throw std::invalid_argument("intrusiveness: capacity must be positive");
  }
  return (8.0 * static_cast<double>(bytes_sent) / duration_s) / capacity_bps;
}

inline double response_time_s(const std::vector<double>& session_durations_s) {
  if (session_durations_s.empty()) {
    throw std::invalid_argument("response_time: no sessions");
  }
  const double sum =
      std::accumulate(session_durations_s.begin(), session_durations_s.end(), 0.0);
  return sum / static_cast<double>(session_durations_s.size());
}

struct GroundTruth {
  double capacity_bps = 0.0;
  std::vector<double> link_available_bps;
  double path_available_bps = 0.0;
};

// Expected availability computed from configured cross rates. Packet flows
// count their layer-2 framing overhead; fluid flows occupy exactly their rate.
inline GroundTruth ground_truth(const PathSpec& path,
                                const std::vector<CrossTrafficSpec>& cross) {
  GroundTruth gt;
  gt.capacity_bps = static_cast<double>(path_capacity(path));
  std::vector<double> load(path.links.size(), 0.0);
  for (const auto& flow : cross) {
    flow.validate(path);
    double wire_rate = static_cast<double>(flow.rate_bps);
    if (flow.mode == CrossMode::kPacket && path.l2_overhead_bits > 0) {
      wire_rate *= 1.0 + static_cast<double>(path.l2_overhead_bits) /
                             static_cast<double>(flow.packet_size_bits);
    }
    for (int i = flow.entry_link; i <= flow.exit_link; ++i) {
      load[i - 1] += wire_rate;
    }
  }
  gt.link_available_bps.resize(path.links.size());
  double min_avail = 0.0;
  for (std::size_t i = 0; i < path.links.size(); ++i) {
    const double cap = static_cast<double>(path.links[i].capacity_bps);
    gt.link_available_bps[i] = std::max(0.0, cap - std::min(load[i], cap));
    min_avail = i == 0 ? gt.link_available_bps[i]
                       : std::min(min_avail, gt.link_available_bps[i]);
  }
  gt.path_available_bps = min_avail;
  return gt;
}

}  // namespace bwlab
