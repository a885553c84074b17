#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "bwlab/noise.hpp"
#include "bwlab/path.hpp"
#include "bwlab/probe.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/units.hpp"

namespace bwlab {

// Departure time of a packet from a FIFO store-and-forward link: it waits for
// its own arrival and for the previous departure, then transmits for a whole
// number of nanoseconds.
inline Nanos fifo_departure(Nanos arrival_ns, Nanos prev_departure_ns,
                            std::int64_t size_bits, Bps capacity_bps) {
  return std::max(arrival_ns, prev_departure_ns) + transmission_ns(size_bits, capacity_bps);
}

struct LinkStats {
  Bps capacity_bps = 0;
  double cross_bits = 0.0;  // packet-CBR plus fluid bits served inside the window
  double probe_bits = 0.0;
  double cross_utilization = 0.0;
  double total_utilization = 0.0;
};

struct ProbeLinkTimes {
  Nanos arrival_ns = -1;
  Nanos departure_ns = -1;
};

// True per-link story of one probe. Diagnostic surface for tests and the
// harness; estimators only ever see ProbeRecord.
struct ProbePathDetail {
  std::vector<ProbeLinkTimes> links;
  int dropped_at_link = -1;  // 1-based; -1 when delivered
  Nanos true_recv_ns = -1;
};

struct SimResult {
  std::vector<ProbeRecord> records;        // one per scheduled probe, in order
  std::vector<ProbePathDetail> probe_details;
  std::vector<LinkStats> link_stats;
  Nanos window_start_ns = 0;               // first intended probe send
  Nanos window_end_ns = 0;                 // last probe delivery or drop
};

namespace detail {

inline Nanos ceil_div_i128(__int128 numer, std::uint64_t denom) {
  return static_cast<Nanos>((numer + denom - 1) / static_cast<__int128>(denom));
}

// One link's server state: unfinished work in "nanobits" (1e-9 bit units), so
// fluid inflow and packet service stay in exact integer arithmetic.
class LinkQueue {
 public:
  LinkQueue(const LinkSpec& spec, Bps fluid_rate_bps)
      : spec_(spec), fluid_rate_(fluid_rate_bps) {}

  struct Accepted {
    Nanos start_ns;
    Nanos departure_ns;
  };

  // Advance fluid workload to `now` and retire completed transmissions.
  void advance(Nanos now) {
    if (now <= clock_) return;
    const __int128 dt = now - clock_;
    const __int128 net = (static_cast<__int128>(fluid_rate_) -
                          static_cast<__int128>(spec_.capacity_bps)) * dt;
    work_nanobits_ += net;
    if (work_nanobits_ < 0) work_nanobits_ = 0;
    clock_ = now;
    while (!occupancy_.empty() && occupancy_.front().departure_ns <= now) {
      occupancy_.pop_front();
    }
  }

  // Returns the scheduled transmission, or nothing if the buffer overflows.
  std::optional<Accepted> accept(Nanos arrival_ns, std::int64_t size_bits) {
    advance(arrival_ns);
    if (spec_.queue_limit_bytes > 0) {
      std::uint64_t waiting_bytes = 0;
      for (const auto& tx : occupancy_) {
        if (tx.start_ns > arrival_ns) {
          waiting_bytes += static_cast<std::uint64_t>(tx.size_bits) / 8;
        }
      }
      if (waiting_bytes + static_cast<std::uint64_t>(size_bits) / 8 >
          spec_.queue_limit_bytes) {
        return std::nullopt;
      }
    }
    const Nanos service = transmission_ns(size_bits, spec_.capacity_bps);
    const Nanos queue_delay =
        work_nanobits_ == 0 ? 0 : ceil_div_i128(work_nanobits_, spec_.capacity_bps);
    const Nanos departure = arrival_ns + queue_delay + service;
    if (departure <= last_departure_) {
      throw std::logic_error("simnet: FIFO departure order violated");
    }
    last_departure_ = departure;
    work_nanobits_ += static_cast<__int128>(service) * spec_.capacity_bps;
    if (spec_.queue_limit_bytes > 0) {
      occupancy_.push_back({departure - service, departure, size_bits});
    }
    return Accepted{departure - service, departure};
  }

  Bps fluid_rate_bps() const { return fluid_rate_; }

 private:
  struct OccEntry {
    Nanos start_ns;
    Nanos departure_ns;
    std::int64_t size_bits;
  };

  LinkSpec spec_;
  Bps fluid_rate_;
  Nanos clock_ = 0;
  __int128 work_nanobits_ = 0;
  Nanos last_departure_ = -1;
  std::deque<OccEntry> occupancy_;
};

// Per-link utilization bookkeeping. Transmissions park here until the probe
// window has advanced past their departure, then their bits are credited,
// clipped to the window.
struct LinkAccounting {
  struct Entry {
    Nanos start_ns;
    Nanos departure_ns;
    std::int64_t size_bits;
    bool cross;
  };

  std::deque<Entry> parked;
  double cross_bits = 0.0;
  double probe_bits = 0.0;

  void credit(const Entry& e, Nanos wstart, Nanos wend) {
    const Nanos lo = std::max(e.start_ns, wstart);
    const Nanos hi = std::min(e.departure_ns, wend);
    if (hi <= lo) return;
    const double frac = static_cast<double>(hi - lo) /
                        static_cast<double>(e.departure_ns - e.start_ns);
    (e.cross ? cross_bits : probe_bits) += frac * static_cast<double>(e.size_bits);
  }

  void flush(Nanos up_to, Nanos wstart) {
    while (!parked.empty() && parked.front().departure_ns <= up_to) {
      credit(parked.front(), wstart, up_to);
      parked.pop_front();
    }
  }

  void finish(Nanos wstart, Nanos wend) {
    for (const auto& e : parked) credit(e, wstart, wend);
    parked.clear();
  }
};

}  // namespace detail

// Deterministic discrete-event run of one probe schedule through the path,
// against the configured cross traffic, under the given timestamping noise.
inline SimResult simulate(const PathSpec& path,
                          const std::vector<CrossTrafficSpec>& cross,
                          const ProbeSchedule& schedule,
                          const TimestampNoiseModel& noise,
                          std::uint64_t seed) {
  path.validate();
  schedule.validate();
  noise.validate();
  for (const auto& flow : cross) flow.validate(path);

  const int num_links = path.num_links();
  SimResult result;
  result.link_stats.assign(num_links, LinkStats{});
  for (int i = 0; i < num_links; ++i) {
    result.link_stats[i].capacity_bps = path.links[i].capacity_bps;
  }
  if (schedule.entries.empty()) {
    return result;
  }

  // Fluid flows fold into per-link background rates; packet flows get lazily
  // generated emission events.
  std::vector<Bps> fluid_rate(num_links, 0);
  struct PacketFlow {
    int entry_link;
    int exit_link;
    std::int64_t wire_bits;
    std::int64_t ip_bits;
    Bps rate_bps;
    Nanos phase_ns;
    std::uint64_t next_k = 0;
  };
  std::vector<PacketFlow> packet_flows;
  Rng phase_rng(seed_combine(seed, hash_name("cross-phase")));
  for (const auto& flow : cross) {
    if (flow.rate_bps == 0) continue;
    if (flow.mode == CrossMode::kFluid) {
      for (int i = flow.entry_link; i <= flow.exit_link; ++i) {
        fluid_rate[i - 1] += flow.rate_bps;
      }
      continue;
    }
    PacketFlow pf;
    pf.entry_link = flow.entry_link;
    pf.exit_link = flow.exit_link;
    pf.ip_bits = flow.packet_size_bits;
    pf.wire_bits = flow.packet_size_bits + path.l2_overhead_bits;
    pf.rate_bps = flow.rate_bps;
    const Nanos period_hint =
        detail::ceil_div_i128(static_cast<__int128>(pf.ip_bits) * kNsPerSec, flow.rate_bps);
    pf.phase_ns = flow.phase_offset_ns
                      ? *flow.phase_offset_ns
                      : uniform_i64(phase_rng, 0, std::max<Nanos>(period_hint - 1, 0));
    packet_flows.push_back(pf);
  }

  std::vector<detail::LinkQueue> queues;
  queues.reserve(num_links);
  for (int i = 0; i < num_links; ++i) {
    queues.emplace_back(path.links[i], fluid_rate[i]);
  }
  std::vector<detail::LinkAccounting> acct(num_links);

  struct Event {
    Nanos time;
    std::uint64_t seq;
    bool is_probe;
    int link;       // 1-based arrival link
    std::int32_t id;  // probe index or packet-flow index
  };
  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, EventAfter> pq;
  std::uint64_t seq = 0;

  const auto emission_ns = [](const PacketFlow& f, std::uint64_t k) -> Nanos {
    const __int128 offset =
        static_cast<__int128>(k) * f.ip_bits * kNsPerSec / f.rate_bps;
    return f.phase_ns + static_cast<Nanos>(offset);
  };

  const std::size_t num_probes = schedule.entries.size();
  result.probe_details.assign(num_probes, ProbePathDetail{});
  for (auto& d : result.probe_details) d.links.assign(num_links, ProbeLinkTimes{});

  for (std::size_t i = 0; i < num_probes; ++i) {
    pq.push(Event{schedule.entries[i].send_ns, seq++, true, 1,
                  static_cast<std::int32_t>(i)});
  }
  for (std::size_t f = 0; f < packet_flows.size(); ++f) {
    pq.push(Event{emission_ns(packet_flows[f], 0), seq++, false,
                  packet_flows[f].entry_link, static_cast<std::int32_t>(f)});
  }

  const Nanos window_start = schedule.entries.front().send_ns;
  Nanos last_probe_event = window_start;
  std::size_t probes_remaining = num_probes;
  bool draining = false;

  const auto probe_finished = [&](Nanos at) {
    last_probe_event = std::max(last_probe_event, at);
    if (--probes_remaining == 0) draining = true;
    for (auto& a : acct) a.flush(last_probe_event, window_start);
  };

  while (!pq.empty()) {
    const Event ev = pq.top();
    if (draining && ev.time > last_probe_event) break;
    pq.pop();

    if (ev.is_probe) {
      const auto& entry = schedule.entries[ev.id];
      auto& dt = result.probe_details[ev.id];
      const std::int64_t wire_bits = entry.size_bits + path.l2_overhead_bits;
      auto tx = queues[ev.link - 1].accept(ev.time, wire_bits);
      dt.links[ev.link - 1].arrival_ns = ev.time;
      if (!tx) {
        dt.dropped_at_link = ev.link;
        probe_finished(ev.time);
        continue;
      }
      dt.links[ev.link - 1].departure_ns = tx->departure_ns;
      acct[ev.link - 1].parked.push_back(
          {tx->start_ns, tx->departure_ns, wire_bits, false});
      const Nanos next_time = tx->departure_ns + path.links[ev.link - 1].prop_delay_ns;
      if (ev.link == num_links) {
        dt.true_recv_ns = next_time;
        probe_finished(next_time);
      } else {
        pq.push(Event{next_time, seq++, true, ev.link + 1, ev.id});
      }
    } else {
      auto& flow = packet_flows[ev.id];
      if (ev.link == flow.entry_link) {
        // Fresh emission: line up the flow's next packet.
        const Nanos next_emit = emission_ns(flow, ++flow.next_k);
        if (!draining || next_emit <= last_probe_event) {
          pq.push(Event{next_emit, seq++, false, flow.entry_link, ev.id});
        }
      }
      auto tx = queues[ev.link - 1].accept(ev.time, flow.wire_bits);
      if (!tx) continue;  // dropped
      acct[ev.link - 1].parked.push_back(
          {tx->start_ns, tx->departure_ns, flow.wire_bits, true});
      if (ev.link < flow.exit_link) {
        pq.push(Event{tx->departure_ns + path.links[ev.link - 1].prop_delay_ns,
                      seq++, false, ev.link + 1, ev.id});
      }
    }
  }

  result.window_start_ns = window_start;
  result.window_end_ns = std::max(last_probe_event, window_start);
  const Nanos window_ns = result.window_end_ns - result.window_start_ns;

  for (int i = 0; i < num_links; ++i) {
    acct[i].finish(result.window_start_ns, result.window_end_ns);
    auto& stats = result.link_stats[i];
    stats.cross_bits = acct[i].cross_bits;
    stats.probe_bits = acct[i].probe_bits;
    if (window_ns > 0) {
      const double cap_bits =
          static_cast<double>(path.links[i].capacity_bps) * ns_to_s(window_ns);
      double fluid_bits =
          static_cast<double>(fluid_rate[i]) * ns_to_s(window_ns);
      fluid_bits = std::min(fluid_bits,
                            std::max(0.0, cap_bits - stats.cross_bits - stats.probe_bits));
      stats.cross_bits += fluid_bits;
      stats.cross_utilization = stats.cross_bits / cap_bits;
      stats.total_utilization = (stats.cross_bits + stats.probe_bits) / cap_bits;
    }
  }

  // Measured clocks: draws happen in packet-id order so runs are reproducible.
  Rng noise_rng(seed_combine(seed_combine(seed, noise.seed), hash_name("timestamps")));
  result.records.reserve(num_probes);
  for (std::size_t i = 0; i < num_probes; ++i) {
    const auto& entry = schedule.entries[i];
    const auto& dt = result.probe_details[i];
    ProbeRecord rec;
    rec.packet_id = i;
    rec.group = entry.group;
    rec.pos = entry.pos;
    rec.intended_send_ns = entry.send_ns;
    rec.measured_send_ns = entry.send_ns + draw_send_latency(noise_rng, noise);
    if (dt.dropped_at_link >= 0) {
      rec.lost = true;
      rec.measured_recv_ns = 0;
    } else {
      rec.measured_recv_ns = dt.true_recv_ns + draw_recv_latency(noise_rng, noise);
    }
    result.records.push_back(rec);
  }
  return result;
}

}  // namespace bwlab
