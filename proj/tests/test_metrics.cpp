#include <catch2/catch_amalgamated.hpp>

#include "bwlab/metrics.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/sim_driver.hpp"
#include "bwlab/simnet.hpp"

using namespace bwlab;

TEST_CASE("path capacity is the narrow link") {
  CHECK(path_capacity(make_path({100'000'000, 100'000'000, 100'000'000})) ==
        100'000'000);
  CHECK(path_capacity(make_path({100'000'000, 97'500'000, 100'000'000})) ==
        97'500'000);
  CHECK(path_capacity(make_path({10'000'000})) == 10'000'000);
  CHECK_THROWS_AS(path_capacity(PathSpec{}), std::invalid_argument);
}

TEST_CASE("link availability") {
  CHECK(link_available_bps(100e6, 0.0) == 100e6);
  CHECK(link_available_bps(100e6, 1.0) == 0.0);
  CHECK(link_available_bps(100e6, 0.45) == Catch::Approx(55e6));
  CHECK_THROWS_AS(link_available_bps(100e6, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(link_available_bps(100e6, 1.1), std::invalid_argument);
}

TEST_CASE("path availability") {
  CHECK(path_available_bps({{100e6, 0.5}, {50e6, 0.0}}) == Catch::Approx(50e6));
  CHECK(path_available_bps({{97.5e6, 45e6 / 97.5e6}}) == Catch::Approx(52.5e6));
  CHECK(path_available_bps({{100e6, 0.0}, {100e6, 0.0}}) == Catch::Approx(100e6));
  CHECK_THROWS_AS(path_available_bps({}), std::invalid_argument);
}

TEST_CASE("relative error") {
  CHECK(relative_error(50e6, 50e6) == 0.0);
  CHECK(relative_error(50.0, 40.0) == Catch::Approx(0.2));
  CHECK(relative_error(50.0, 75.0) == Catch::Approx(0.5));
  CHECK_THROWS_AS(relative_error(0.0, 10.0), std::invalid_argument);
}

TEST_CASE("relative error is scale invariant") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double ae = 1.0 + uniform_unit(rng) * 1e8;
    const double am = uniform_unit(rng) * 2e8;
    const double k = 0.001 + uniform_unit(rng) * 1000.0;
    CHECK(relative_error(k * ae, k * am) ==
          Catch::Approx(relative_error(ae, am)).epsilon(1e-12));
  }
}

TEST_CASE("intrusiveness") {
  // 240 kbps average on a 97.5 Mbps path
  const double ratio = intrusiveness(300'000, 10.0, 97.5e6);
  CHECK(ratio == Catch::Approx(240e3 / 97.5e6).epsilon(1e-12));
  CHECK(ratio == Catch::Approx(0.00246).margin(0.0001));
  CHECK(intrusiveness(0, 5.0, 1e8) == 0.0);
  CHECK(intrusiveness(12'500'000, 1.0, 100e6) == Catch::Approx(1.0));
  // 10 Mbps average on 100 Mbps
  CHECK(intrusiveness(1'250'000, 1.0, 100e6) == Catch::Approx(0.10));
  CHECK_THROWS_AS(intrusiveness(100, 0.0, 1e8), std::invalid_argument);
}

TEST_CASE("response time") {
  CHECK(response_time_s({10, 10, 10}) == Catch::Approx(10.0));
  CHECK(response_time_s({12, 14}) == Catch::Approx(13.0));
  CHECK_THROWS_AS(response_time_s({}), std::invalid_argument);
}

TEST_CASE("path availability never exceeds capacity") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    std::vector<LinkLoad> links;
    const int n = 1 + static_cast<int>(rng() % 4);
    double cap_min = 1e18;
    bool all_idle = true;
    for (int l = 0; l < n; ++l) {
      const double cap = 1e6 + uniform_unit(rng) * 2e8;
      const double u = (rng() % 3 == 0) ? 0.0 : uniform_unit(rng);
      if (u > 0.0) all_idle = false;
      cap_min = std::min(cap_min, cap);
      links.push_back({cap, u});
    }
    const double a = path_available_bps(links);
    CHECK(a <= cap_min + 1e-9);
    if (all_idle) CHECK(a == Catch::Approx(cap_min));
  }
}

TEST_CASE("ground truth matches simulated utilization accounting") {
  // CBR at 40 Mbps across a 100 Mbps bottleneck: the simulator's per-link
  // accounting should agree with the configured rate within a packet's worth.
  PathSpec path = make_path({100'000'000});
  CrossTrafficSpec flow;
  flow.entry_link = flow.exit_link = 1;
  flow.rate_bps = 40'000'000;
  flow.packet_size_bits = 12000;
  flow.mode = CrossMode::kPacket;
  flow.phase_offset_ns = 0;

  ProbeSchedule schedule;
  const Nanos span = 50'000'000;  // 50 ms
  schedule.entries.push_back({0, 12000, 0, 0});
  schedule.entries.push_back({span, 12000, 0, 1});

  const SimResult res = simulate(path, {flow}, schedule, TimestampNoiseModel::none(), 3);
  const double window_s = ns_to_s(res.window_end_ns - res.window_start_ns);
  const double one_packet = 12000.0 / (100e6 * window_s);
  CHECK(res.link_stats[0].cross_utilization ==
        Catch::Approx(0.4).margin(2.0 * one_packet));

  const GroundTruth gt = ground_truth(path, {flow});
  CHECK(gt.path_available_bps == Catch::Approx(60e6));
  CHECK(link_available_bps(100e6, res.link_stats[0].cross_utilization) ==
        Catch::Approx(gt.path_available_bps).epsilon(0.01));
}
