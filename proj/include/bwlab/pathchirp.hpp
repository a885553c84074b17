#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bwlab/probe.hpp"
#include "bwlab/units.hpp"

namespace bwlab {

// Chirp tool: each train's gaps shrink geometrically so one train probes the
// whole rate range, and the receiver looks for the point where queuing delays
// start climbing for good.
struct PathchirpConfig {
  std::int64_t probe_size_bits = 8000;  // 1000-byte probes
  Bps rate_min_bps = 10'000'000;
  Bps rate_max_bps = 200'000'000;
  double gamma = 1.2;  // spread factor between consecutive probed rates
  int num_chirps = 40;
  double session_duration_s = 20.0;
  // Slack when judging "non-decreasing" delays; -1 resolves to the
  // send-noise span.
  Nanos excursion_tolerance_ns = -1;

  void validate() const {
    if (probe_size_bits <= 0) throw std::invalid_argument("pathchirp: bad probe size");
    if (rate_min_bps == 0 || rate_min_bps >= rate_max_bps) {
      throw std::invalid_argument("pathchirp: need rate_min < rate_max");
    }
    if (gamma <= 1.0) throw std::invalid_argument("pathchirp: gamma must exceed 1");
    if (num_chirps < 1) throw std::invalid_argument("pathchirp: need chirps");
    if (session_duration_s <= 0.0) {
      throw std::invalid_argument("pathchirp: bad session duration");
    }
    if (excursion_tolerance_ns < 0) {
      throw std::invalid_argument("pathchirp: excursion tolerance unresolved");
    }
  }
};

// Gap sequence of one chirp, largest (rate_min) first. The final gap is
// pinned to the rate_max transmission gap so the probed rates span the
// configured range exactly.
inline std::vector<Nanos> pathchirp_gaps(const PathchirpConfig& config) {
  if (config.gamma <= 1.0) throw std::invalid_argument("pathchirp: gamma must exceed 1");
  if (config.rate_min_bps == 0 || config.rate_min_bps >= config.rate_max_bps) {
    throw std::invalid_argument("pathchirp: need rate_min < rate_max");
  }
  const double ratio = static_cast<double>(config.rate_max_bps) /
                       static_cast<double>(config.rate_min_bps);
  const int steps =
      static_cast<int>(std::ceil(std::log(ratio) / std::log(config.gamma) - 1e-9));
  const int count = steps + 1;

  std::vector<Nanos> gaps;
  gaps.reserve(static_cast<std::size_t>(count));
  double rate = static_cast<double>(config.rate_min_bps);
  for (int k = 0; k < count; ++k) {
    gaps.push_back(transmission_ns(config.probe_size_bits,
                                   static_cast<Bps>(std::llround(rate))));
    rate *= config.gamma;
  }
  gaps.back() = transmission_ns(config.probe_size_bits, config.rate_max_bps);
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
    if (gaps[k + 1] >= gaps[k]) {
      throw std::invalid_argument("pathchirp: rate grid too fine for ns gaps");
    }
  }
  return gaps;
}

// One chirp's schedule: gap count + 1 packets at cumulative offsets.
inline ProbeSchedule pathchirp_build_chirp(const PathchirpConfig& config,
                                           std::uint32_t chirp_id = 0,
                                           Nanos start_ns = 0) {
  const std::vector<Nanos> gaps = pathchirp_gaps(config);
  ProbeSchedule schedule;
  schedule.entries.reserve(gaps.size() + 1);
  Nanos t = start_ns;
  std::uint32_t pos = 0;
  schedule.entries.push_back({t, config.probe_size_bits, chirp_id, pos++});
  for (Nanos g : gaps) {
    t += g;
    schedule.entries.push_back({t, config.probe_size_bits, chirp_id, pos++});
  }
  return schedule;
}

// Earliest packet index where the relative queuing delay begins a climb that
// holds through the end of the chirp; the gap it opens names the first
// congesting rate. Returns -1 when no sustained climb exists.
inline int pathchirp_excursion_start(const std::vector<double>& q_ns, double tol_ns) {
  const int n = static_cast<int>(q_ns.size());
  if (n < 2) return -1;
  std::vector<char> sustained(static_cast<std::size_t>(n), 0);
  sustained[n - 1] = 1;
  for (int k = n - 2; k >= 0; --k) {
    sustained[k] = sustained[k + 1] && (q_ns[k + 1] >= q_ns[k] - tol_ns);
  }
  for (int j = 0; j + 1 < n; ++j) {
    if (q_ns[j + 1] > q_ns[j] + tol_ns && sustained[j] &&
        q_ns[n - 1] - q_ns[j] > 2.0 * tol_ns) {
      return j;
    }
  }
  return -1;
}

struct PathchirpAnalysis {
  std::vector<double> chirp_estimates_bps;
  Estimate estimate;
};

inline PathchirpAnalysis pathchirp_analyze(const std::vector<ProbeRecord>& records,
                                           const PathchirpConfig& config) {
  config.validate();
  const std::vector<Nanos> gaps = pathchirp_gaps(config);
  const std::size_t chirp_len = gaps.size() + 1;
  PathchirpAnalysis out;

  std::vector<std::vector<const ProbeRecord*>> chirps;
  for (const auto& r : records) {
    if (r.group >= chirps.size()) chirps.resize(r.group + 1);
    auto& c = chirps[r.group];
    if (c.size() < chirp_len) c.resize(chirp_len, nullptr);
    if (r.pos < chirp_len && !r.lost) c[r.pos] = &r;
  }

  const double tol = static_cast<double>(config.excursion_tolerance_ns);
  const double rmin = static_cast<double>(config.rate_min_bps);
  const double rmax = static_cast<double>(config.rate_max_bps);
  for (const auto& chirp : chirps) {
    if (chirp.size() < chirp_len ||
        std::any_of(chirp.begin(), chirp.end(),
                    [](const ProbeRecord* r) { return r == nullptr; })) {
      continue;  // analysis needs the complete chirp
    }
    std::vector<double> q(chirp_len);
    for (std::size_t p = 0; p < chirp_len; ++p) {
      q[p] = static_cast<double>(chirp[p]->measured_recv_ns -
                                 chirp[p]->measured_send_ns);
    }
    const double base = *std::min_element(q.begin(), q.end());
    for (double& v : q) v -= base;

    const int knee = pathchirp_excursion_start(q, tol);
    double est_bps;
    if (knee < 0) {
      est_bps = rmax;  // path faster than the probed range
    } else {
      const double first_congesting =
          static_cast<double>(config.probe_size_bits) * 1e9 /
          static_cast<double>(gaps[static_cast<std::size_t>(knee)]);
      // Midpoint (in log scale) between the last clean and first congesting rate.
      est_bps = first_congesting / std::sqrt(config.gamma);
    }
    out.chirp_estimates_bps.push_back(std::clamp(est_bps, rmin, rmax));
  }

  auto& est = out.estimate;
  est.duration_s = config.session_duration_s;
  if (out.chirp_estimates_bps.empty()) {
    est.status = EstimateStatus::kNoConvergence;
    return out;
  }
  double sum = 0.0;
  for (double v : out.chirp_estimates_bps) sum += v;
  est.value_bps = sum / static_cast<double>(out.chirp_estimates_bps.size());
  est.low_bps = est.high_bps = est.value_bps;
  est.status = EstimateStatus::kOk;
  return out;
}

inline Estimate pathchirp_estimate(const std::vector<ProbeRecord>& records,
                                   const PathchirpConfig& config) {
  return pathchirp_analyze(records, config).estimate;
}

inline Estimate run_pathchirp(ProbeDriver& driver, const PathchirpConfig& config) {
  config.validate();
  const Nanos spacing = s_to_ns(config.session_duration_s) /
                        static_cast<Nanos>(config.num_chirps);
  ProbeSchedule session;
  for (int c = 0; c < config.num_chirps; ++c) {
    const ProbeSchedule chirp = pathchirp_build_chirp(
        config, static_cast<std::uint32_t>(c), static_cast<Nanos>(c) * spacing);
    session.entries.insert(session.entries.end(), chirp.entries.begin(),
                           chirp.entries.end());
  }
  Estimate est = pathchirp_estimate(driver.run(session), config);
  est.bytes_sent = session.total_bits() / 8;
  est.duration_s = config.session_duration_s;
  return est;
}

}  // namespace bwlab
