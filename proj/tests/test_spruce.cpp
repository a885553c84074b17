#include <catch2/catch_amalgamated.hpp>

#include "bwlab/metrics.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/sim_driver.hpp"
#include "bwlab/spruce.hpp"

using namespace bwlab;

namespace {

SpruceConfig config_97_5() {
  SpruceConfig cfg;
  cfg.capacity_bps = 97'500'000;
  return cfg;
}

// Synthetic pair records with prescribed send/receive gaps.
std::vector<ProbeRecord> pair_records(const std::vector<std::pair<Nanos, Nanos>>& gaps,
                                      Nanos d_in_ns) {
  std::vector<ProbeRecord> records;
  Nanos t = 0;
  std::uint32_t group = 0;
  for (const auto& [in_gap, out_gap] : gaps) {
    ProbeRecord a, b;
    a.packet_id = records.size();
    a.group = b.group = group++;
    a.pos = 0;
    b.pos = 1;
    a.measured_send_ns = t;
    b.packet_id = records.size() + 1;
    b.measured_send_ns = t + in_gap;
    a.measured_recv_ns = t + d_in_ns;
    b.measured_recv_ns = a.measured_recv_ns + out_gap;
    records.push_back(a);
    records.push_back(b);
    t += 100 * d_in_ns;
  }
  return records;
}

}  // namespace

TEST_CASE("pair sample: no expansion reads the full capacity") {
  for (Nanos d : {Nanos{1}, Nanos{123'077}, Nanos{1'000'000}}) {
    CHECK(spruce_pair_sample(d, d, 97.5e6) == Catch::Approx(97.5e6));
  }
}

TEST_CASE("pair sample: a doubled gap reads zero") {
  CHECK(spruce_pair_sample(120'000, 240'000, 97.5e6) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("pair sample: 240 -> 360 us at 97.5 Mbps prices half the capacity") {
  CHECK(spruce_pair_sample(240'000, 360'000, 97.5e6) ==
        Catch::Approx(48'750'000.0).epsilon(1e-12));
}

TEST_CASE("pair sample rejects a zero input gap and allows negative output") {
  CHECK_THROWS_AS(spruce_pair_sample(0, 100, 1e8), std::invalid_argument);
  CHECK(spruce_pair_sample(100'000, 250'000, 1e8) < 0.0);
}

TEST_CASE("pair sample is linear in the gap ratio with slope -capacity") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Nanos d_in = uniform_i64(rng, 1'000, 1'000'000);
    const Nanos d1 = uniform_i64(rng, 0, 3'000'000);
    const Nanos d2 = d1 + d_in;  // ratio moves by exactly 1
    const double c = 1e6 + uniform_unit(rng) * 2e8;
    CHECK(spruce_pair_sample(d_in, d1, c) - spruce_pair_sample(d_in, d2, c) ==
          Catch::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("schedule sends pairs back to back at the capacity rate") {
  SpruceConfig cfg = config_97_5();
  const ProbeSchedule s = build_spruce_schedule(cfg, 7);
  REQUIRE(s.entries.size() == 200);
  const Nanos d_in = transmission_ns(cfg.probe_size_bits, cfg.capacity_bps);
  for (std::size_t i = 0; i + 1 < s.entries.size(); i += 2) {
    CHECK(s.entries[i].group == s.entries[i + 1].group);
    CHECK(s.entries[i + 1].send_ns - s.entries[i].send_ns == d_in);
  }
  s.validate();
  CHECK(cfg.target_rate_bps() == 240'000);  // min(240 kbps, 5% of 97.5 Mbps)
}

TEST_CASE("estimate: no expansion anywhere reads the capacity") {
  SpruceConfig cfg = config_97_5();
  const Nanos d = cfg.intra_pair_gap_ns();
  std::vector<std::pair<Nanos, Nanos>> gaps(20, {d, d});
  const Estimate est = spruce_estimate(pair_records(gaps, d), cfg);
  CHECK(est.status == EstimateStatus::kOk);
  CHECK(est.value_bps == Catch::Approx(97.5e6));
}

TEST_CASE("estimate against fluid cross traffic recovers the availability") {
  SpruceConfig cfg = config_97_5();
  PathSpec path = make_path({97'500'000});
  CrossTrafficSpec fluid;
  fluid.entry_link = fluid.exit_link = 1;
  fluid.rate_bps = 48'750'000;
  fluid.mode = CrossMode::kFluid;
  SimProbeDriver driver(path, {fluid}, TimestampNoiseModel::none(), 99);
  const Estimate est = run_spruce(driver, cfg, 1234);
  CHECK(est.status == EstimateStatus::kOk);
  CHECK(est.value_bps == Catch::Approx(48.75e6).epsilon(1e-4));
}

TEST_CASE("session duration sits near ten seconds at the default rate") {
  SpruceConfig cfg = config_97_5();
  PathSpec path = make_path({97'500'000});
  double dur_sum = 0.0, rate_sum = 0.0;
  const int sessions = 10;
  for (int s = 0; s < sessions; ++s) {
    SimProbeDriver driver(path, {}, TimestampNoiseModel::none(),
                          seed_combine(11, s));
    const Estimate est = run_spruce(driver, cfg, seed_combine(77, s));
    dur_sum += est.duration_s;
    rate_sum += 8.0 * static_cast<double>(est.bytes_sent) / est.duration_s;
  }
  CHECK(dur_sum / sessions == Catch::Approx(10.0).margin(1.0));
  CHECK(rate_sum / sessions == Catch::Approx(240e3).epsilon(0.10));
}

TEST_CASE("pairs with a lost packet are excluded") {
  SpruceConfig cfg = config_97_5();
  const Nanos d = cfg.intra_pair_gap_ns();
  auto records = pair_records({{d, d}, {d, 2 * d}, {d, d}}, d);
  records[3].lost = true;  // second pair's tail: drop the whole pair
  const SpruceAnalysis analysis = spruce_analyze(records, cfg);
  REQUIRE(analysis.samples_bps.size() == 2);
  CHECK(analysis.estimate.value_bps == Catch::Approx(97.5e6));
}

TEST_CASE("all pairs lost yields no convergence") {
  SpruceConfig cfg = config_97_5();
  auto records = pair_records({{100, 100}, {100, 100}}, 100);
  for (auto& r : records) r.lost = true;
  CHECK(spruce_estimate(records, cfg).status == EstimateStatus::kNoConvergence);
}

TEST_CASE("negative samples stay in the mean; only the result is clamped") {
  SpruceConfig cfg = config_97_5();
  const Nanos d = cfg.intra_pair_gap_ns();
  // One pair far past doubling drags the raw mean negative.
  const SpruceAnalysis analysis =
      spruce_analyze(pair_records({{d, 10 * d}, {d, d}}, d), cfg);
  REQUIRE(analysis.samples_bps.size() == 2);
  CHECK(analysis.samples_bps[0] < 0.0);
  CHECK(analysis.raw_mean_bps < 0.0);
  CHECK(analysis.estimate.value_bps == 0.0);
}

TEST_CASE("analyzers ignore absolute clock offsets") {
  SpruceConfig cfg = config_97_5();
  const Nanos d = cfg.intra_pair_gap_ns();
  auto records = pair_records({{d, d + 500}, {d, 2 * d}}, d);
  const Estimate base = spruce_estimate(records, cfg);
  for (auto& r : records) {
    r.measured_send_ns += 3'600'000'000'000LL;
    r.measured_recv_ns += 3'600'000'000'000LL;
  }
  const Estimate shifted = spruce_estimate(records, cfg);
  CHECK(shifted.value_bps == base.value_bps);
  CHECK(shifted.duration_s == base.duration_s);
}
