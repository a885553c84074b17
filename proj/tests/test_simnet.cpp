#include <catch2/catch_amalgamated.hpp>

#include <deque>
#include <numeric>
#include <sstream>

#include "bwlab/rng.hpp"
#include "bwlab/simnet.hpp"

using namespace bwlab;

TEST_CASE("fifo departure on an idle link is the transmission delay") {
  CHECK(fifo_departure(0, 0, 12000, 100'000'000) == 120'000);
}

TEST_CASE("fifo departure queues behind the predecessor") {
  CHECK(fifo_departure(0, 200'000, 12000, 100'000'000) == 320'000);
}

TEST_CASE("fifo departure is monotone in all arguments") {
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    const Nanos a = uniform_i64(rng, 0, 1'000'000);
    const Nanos p = uniform_i64(rng, 0, 1'000'000);
    const std::int64_t bits = uniform_i64(rng, 1, 20'000);
    const Bps cap = static_cast<Bps>(uniform_i64(rng, 1'000'000, 200'000'000));
    const Nanos d = fifo_departure(a, p, bits, cap);
    CHECK(d >= fifo_departure(a, p, bits, cap + 1'000'000));
    CHECK(fifo_departure(a + 10, p, bits, cap) >= d);
    CHECK(fifo_departure(a, p + 10, bits, cap) >= d);
    CHECK(fifo_departure(a, p, bits + 100, cap) >= d);
    CHECK(d > std::max(a, p));
  }
}

namespace {

ProbeSchedule pair_schedule(Nanos gap_ns, std::int64_t bits) {
  ProbeSchedule s;
  s.entries.push_back({0, bits, 0, 0});
  s.entries.push_back({gap_ns, bits, 0, 1});
  return s;
}

Nanos measured_gap(const SimResult& res) {
  REQUIRE(res.records.size() == 2);
  REQUIRE_FALSE(res.records[0].lost);
  REQUIRE_FALSE(res.records[1].lost);
  return res.records[1].measured_recv_ns - res.records[0].measured_recv_ns;
}

}  // namespace

TEST_CASE("back-to-back packets leave an idle link with the capacity dispersion") {
  // Two 12000-bit packets into an idle 100 Mbps link: output gap is L/C.
  PathSpec path = make_path({100'000'000});
  const SimResult res =
      simulate(path, {}, pair_schedule(0, 12000), TimestampNoiseModel::none(), 1);
  CHECK(measured_gap(res) == 120'000);
}

TEST_CASE("fluid cross traffic expands a capacity-rate pair gap exactly") {
  // 23400-bit pair at the 97.5 Mbps capacity rate (240 us apart) against
  // 48.75 Mbps of fluid: the gap grows by rate*gap/capacity to 360 us.
  PathSpec path = make_path({97'500'000});
  CHECK(transmission_ns(23400, 97'500'000) == 240'000);
  CrossTrafficSpec fluid;
  fluid.entry_link = fluid.exit_link = 1;
  fluid.rate_bps = 48'750'000;
  fluid.mode = CrossMode::kFluid;

  const SimResult res = simulate(path, {fluid}, pair_schedule(240'000, 23400),
                                 TimestampNoiseModel::none(), 1);
  CHECK(measured_gap(res) == 360'000);
}

TEST_CASE("packet-level cbr converges to the fluid expansion as packets shrink") {
  PathSpec path = make_path({97'500'000});
  const double fluid_gap = 360'000.0;
  double prev_err = 1e9;
  for (std::int64_t cross_bits : {9600LL, 1200LL, 120LL}) {
    CrossTrafficSpec cbr;
    cbr.entry_link = cbr.exit_link = 1;
    cbr.rate_bps = 48'750'000;
    cbr.packet_size_bits = cross_bits;
    cbr.mode = CrossMode::kPacket;
    cbr.phase_offset_ns = 0;
    const SimResult res = simulate(path, {cbr}, pair_schedule(240'000, 23400),
                                   TimestampNoiseModel::none(), 1);
    const double err =
        std::abs(static_cast<double>(measured_gap(res)) - fluid_gap) / fluid_gap;
    CHECK(err <= prev_err + 1e-12);
    prev_err = err;
  }
  CHECK(prev_err < 0.01);
}

TEST_CASE("gap expansion happens only on the loaded link") {
  PathSpec path = make_path({100'000'000, 97'500'000, 100'000'000});
  CrossTrafficSpec fluid;
  fluid.entry_link = fluid.exit_link = 2;
  fluid.rate_bps = 48'750'000;
  fluid.mode = CrossMode::kFluid;
  const Nanos d_in = transmission_ns(12000, 97'500'000);  // bottleneck rate pair
  const SimResult res = simulate(path, {fluid}, pair_schedule(d_in, 12000),
                                 TimestampNoiseModel::none(), 1);
  CHECK(std::abs(static_cast<double>(measured_gap(res)) - 1.5 * d_in) <= 1.0);
}

TEST_CASE("finite queues drop exactly what a scalar replay drops") {
  // 200 packets at twice the link rate into a ten-packet buffer. The oracle
  // is a direct single-link replay of the occupancy rule.
  const Bps capacity = 10'000'000;
  const std::int64_t bits = 12000;
  const Nanos gap = transmission_ns(bits, capacity) / 2;  // 2x overload
  const std::uint64_t limit_bytes = 15000;                // ten 1500-byte slots

  PathSpec path = make_path({capacity});
  path.links[0].queue_limit_bytes = limit_bytes;
  ProbeSchedule schedule;
  for (int i = 0; i < 200; ++i) {
    schedule.entries.push_back({static_cast<Nanos>(i) * gap, bits, 0,
                                static_cast<std::uint32_t>(i)});
  }

  std::vector<int> oracle_lost;
  {
    struct Entry {
      Nanos start, dep;
      std::uint64_t bytes;
    };
    std::deque<Entry> q;
    const Nanos service = transmission_ns(bits, capacity);
    Nanos prev_dep = 0;
    bool first = true;
    for (int i = 0; i < 200; ++i) {
      const Nanos a = static_cast<Nanos>(i) * gap;
      while (!q.empty() && q.front().dep <= a) q.pop_front();
      std::uint64_t waiting = 0;
      for (const auto& e : q) {
        if (e.start > a) waiting += e.bytes;
      }
      if (waiting + bits / 8 > limit_bytes) {
        oracle_lost.push_back(i);
        continue;
      }
      const Nanos start = first ? a : std::max(a, prev_dep);
      first = false;
      prev_dep = start + service;
      q.push_back({start, prev_dep, bits / 8});
    }
  }
  REQUIRE(oracle_lost.size() > 0);

  const SimResult res = simulate(path, {}, schedule, TimestampNoiseModel::none(), 1);
  std::vector<int> sim_lost;
  for (const auto& r : res.records) {
    if (r.lost) sim_lost.push_back(static_cast<int>(r.packet_id));
  }
  CHECK(sim_lost == oracle_lost);
  for (const auto& d : res.probe_details) {
    if (d.dropped_at_link >= 0) {
      CHECK(d.true_recv_ns == -1);  // no downstream timestamps after a drop
    }
  }
}

TEST_CASE("noise: kernel mode with a zero send range is the identity") {
  TimestampNoiseModel m = TimestampNoiseModel::none();
  Rng rng(1);
  const auto ts = apply_noise(123, 456, m, rng);
  CHECK(ts.send_ns == 123);
  CHECK(ts.recv_ns == 456);
}

TEST_CASE("noise: user-mode receive latency stays within its range") {
  TimestampNoiseModel m;
  m.send_lo_ns = 0;
  m.send_hi_ns = 0;
  m.recv_mode = RecvTimestampMode::kUser;
  m.recv_lo_ns = 5'000;
  m.recv_hi_ns = 65'000;
  Rng rng(2);
  for (int i = 0; i < 100'000; ++i) {
    const auto ts = apply_noise(0, 0, m, rng);
    CHECK(ts.recv_ns >= 5'000);
    CHECK(ts.recv_ns <= 65'000);
  }
}

TEST_CASE("noise: the default send range averages 3.5 us") {
  TimestampNoiseModel m;  // send [1, 6] us
  Rng rng(3);
  double sum = 0.0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    sum += static_cast<double>(apply_noise(0, 0, m, rng).send_ns);
  }
  CHECK(sum / n == Catch::Approx(3'500.0).margin(100.0));
}

TEST_CASE("noise: scheduler spikes ride on top of the base latency") {
  TimestampNoiseModel m = TimestampNoiseModel::none();
  m.send_lo_ns = m.send_hi_ns = 1'000;
  m.spike_probability = 1.0;
  m.spike_lo_ns = m.spike_hi_ns = 100'000;
  Rng rng(4);
  const auto ts = apply_noise(0, 0, m, rng);
  CHECK(ts.send_ns == 101'000);

  m.spike_probability = 0.25;
  m.spike_lo_ns = 100'000;
  m.spike_hi_ns = 200'000;
  int spiked = 0;
  const int n = 40'000;
  for (int i = 0; i < n; ++i) {
    if (apply_noise(0, 0, m, rng).send_ns > 50'000) ++spiked;
  }
  CHECK(static_cast<double>(spiked) / n == Catch::Approx(0.25).margin(0.01));
}

TEST_CASE("simulate rejects bad inputs") {
  PathSpec path = make_path({100'000'000});
  ProbeSchedule unsorted;
  unsorted.entries.push_back({1000, 12000, 0, 0});
  unsorted.entries.push_back({500, 12000, 0, 1});
  CHECK_THROWS_AS(simulate(path, {}, unsorted, TimestampNoiseModel::none(), 1),
                  std::invalid_argument);

  ProbeSchedule negative;
  negative.entries.push_back({-5, 12000, 0, 0});
  CHECK_THROWS_AS(simulate(path, {}, negative, TimestampNoiseModel::none(), 1),
                  std::invalid_argument);

  CHECK_THROWS_AS(
      simulate(PathSpec{}, {}, pair_schedule(0, 1000), TimestampNoiseModel::none(), 1),
      std::invalid_argument);
}

TEST_CASE("a backlogged link is never idle") {
  // Saturating schedule: the last departure equals the first arrival plus the
  // summed service times.
  PathSpec path = make_path({50'000'000});
  ProbeSchedule schedule;
  Nanos total_service = 0;
  for (int i = 0; i < 50; ++i) {
    schedule.entries.push_back({static_cast<Nanos>(i) * 10'000, 8000, 0,
                                static_cast<std::uint32_t>(i)});
    total_service += transmission_ns(8000, 50'000'000);  // 160 us each
  }
  const SimResult res = simulate(path, {}, schedule, TimestampNoiseModel::none(), 1);
  CHECK(res.probe_details.back().links[0].departure_ns == total_service);
}

TEST_CASE("randomized invariants: conservation, fifo, determinism") {
  Rng rng(2024);
  for (int iter = 0; iter < 1000; ++iter) {
    const int num_links = 1 + static_cast<int>(rng() % 3);
    PathSpec path;
    for (int l = 0; l < num_links; ++l) {
      LinkSpec link;
      link.index = l + 1;
      link.capacity_bps = static_cast<Bps>(uniform_i64(rng, 5'000'000, 200'000'000));
      link.prop_delay_ns = (rng() % 4 == 0) ? uniform_i64(rng, 0, 100'000) : 0;
      link.queue_limit_bytes =
          (rng() % 5 == 0) ? static_cast<std::uint64_t>(uniform_i64(rng, 3000, 30000))
                           : 0;
      path.links.push_back(link);
    }

    std::vector<CrossTrafficSpec> cross;
    const int num_flows = static_cast<int>(rng() % 3);
    for (int f = 0; f < num_flows; ++f) {
      CrossTrafficSpec flow;
      flow.flow_id = f;
      flow.entry_link = 1 + static_cast<int>(rng() % num_links);
      flow.exit_link =
          flow.entry_link +
          static_cast<int>(rng() % (num_links - flow.entry_link + 1));
      flow.rate_bps = static_cast<Bps>(uniform_i64(rng, 1'000'000, 150'000'000));
      flow.packet_size_bits = uniform_i64(rng, 400, 12000);
      flow.mode = (rng() % 2 == 0) ? CrossMode::kFluid : CrossMode::kPacket;
      cross.push_back(flow);
    }

    ProbeSchedule schedule;
    const int num_probes = 5 + static_cast<int>(rng() % 36);
    Nanos t = uniform_i64(rng, 0, 100'000);
    for (int p = 0; p < num_probes; ++p) {
      schedule.entries.push_back({t, uniform_i64(rng, 800, 12000), 0,
                                  static_cast<std::uint32_t>(p)});
      t += uniform_i64(rng, 0, 200'000);
    }

    const std::uint64_t seed = rng();
    const SimResult res =
        simulate(path, cross, schedule, TimestampNoiseModel::none(), seed);

    // Conservation: one record per probe; delivered probes carry every
    // per-link timestamp in order.
    REQUIRE(res.records.size() == schedule.entries.size());
    for (std::size_t p = 0; p < res.records.size(); ++p) {
      const auto& detail = res.probe_details[p];
      if (!res.records[p].lost) {
        Nanos next_arrival = schedule.entries[p].send_ns;
        for (int l = 0; l < num_links; ++l) {
          REQUIRE(detail.links[l].arrival_ns == next_arrival);
          REQUIRE(detail.links[l].departure_ns > detail.links[l].arrival_ns);
          next_arrival = detail.links[l].departure_ns + path.links[l].prop_delay_ns;
        }
        REQUIRE(detail.true_recv_ns == next_arrival);
        REQUIRE(res.records[p].measured_recv_ns == detail.true_recv_ns);
      } else {
        REQUIRE(detail.dropped_at_link >= 1);
        for (int l = detail.dropped_at_link; l < num_links; ++l) {
          REQUIRE(detail.links[l].arrival_ns == -1);
        }
      }
    }

    // FIFO per link over the probes.
    for (int l = 0; l < num_links; ++l) {
      std::vector<std::pair<Nanos, Nanos>> times;
      for (const auto& detail : res.probe_details) {
        if (detail.links[l].departure_ns >= 0) {
          times.emplace_back(detail.links[l].arrival_ns, detail.links[l].departure_ns);
        }
      }
      std::sort(times.begin(), times.end());
      for (std::size_t i = 1; i < times.size(); ++i) {
        REQUIRE(times[i].second > times[i - 1].second);
      }
    }

    if (iter % 10 == 0) {
      const SimResult again =
          simulate(path, cross, schedule, TimestampNoiseModel::none(), seed);
      REQUIRE(again.records.size() == res.records.size());
      for (std::size_t p = 0; p < res.records.size(); ++p) {
        REQUIRE(again.records[p].measured_send_ns == res.records[p].measured_send_ns);
        REQUIRE(again.records[p].measured_recv_ns == res.records[p].measured_recv_ns);
        REQUIRE(again.records[p].lost == res.records[p].lost);
      }
    }
  }
}

TEST_CASE("fluid utilization accounting is exact over the window") {
  PathSpec path = make_path({100'000'000});
  CrossTrafficSpec fluid;
  fluid.entry_link = fluid.exit_link = 1;
  fluid.rate_bps = 37'000'000;
  fluid.mode = CrossMode::kFluid;
  const SimResult res = simulate(path, {fluid}, pair_schedule(10'000'000, 12000),
                                 TimestampNoiseModel::none(), 1);
  CHECK(res.link_stats[0].cross_utilization == Catch::Approx(0.37).epsilon(1e-3));
  CHECK(res.link_stats[0].total_utilization > res.link_stats[0].cross_utilization);
}

TEST_CASE("trace export carries one row per probe") {
  PathSpec path = make_path({100'000'000});
  const SimResult res =
      simulate(path, {}, pair_schedule(500, 12000), TimestampNoiseModel::none(), 1);
  std::ostringstream os;
  write_trace_csv(res.records, os);
  const std::string text = os.str();
  CHECK(text.substr(0, text.find('\n')) ==
        "packet_id,group,position,intended_send_ns,measured_send_ns,measured_recv_ns,lost");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
