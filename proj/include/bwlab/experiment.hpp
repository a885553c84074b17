#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bwlab/igi.hpp"
#include "bwlab/metrics.hpp"
#include "bwlab/noise.hpp"
#include "bwlab/path.hpp"
#include "bwlab/pathchirp.hpp"
#include "bwlab/pathload.hpp"
#include "bwlab/spruce.hpp"

namespace bwlab {

inline const std::vector<std::string>& known_tools() {
  static const std::vector<std::string> tools = {"spruce", "igi", "pathload",
                                                 "pathchirp"};
  return tools;
}

// Everything one sweep needs: the path, the cross-traffic template, the rate
// grid, per-tool settings, the noise model and the master seed. resolve()
// materializes every derived default so a persisted config is self-describing.
struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  PathSpec path;

  CrossMode cross_mode = CrossMode::kPacket;
  std::int64_t cross_packet_bits = 12000;  // 1500-byte cross packets
  int cross_entry_link = 1;
  int cross_exit_link = 0;  // 0: last link
  std::optional<Nanos> cross_phase_offset_ns;

  std::vector<Bps> cross_rates_bps;  // empty: 0 .. C-5M in 5 Mbps steps
  int sessions_per_point = 30;

  TimestampNoiseModel noise;

  std::vector<std::string> enabled_tools = known_tools();
  SpruceConfig spruce;
  IgiConfig igi;
  PathloadConfig pathload;
  PathchirpConfig pathchirp;

  static ExperimentConfig defaults() {
    ExperimentConfig cfg;
    cfg.path = make_path({100'000'000, 100'000'000, 100'000'000});
    cfg.resolve();
    return cfg;
  }

  void resolve() {
    path.validate();
    noise.validate();
    const Bps capacity = path_capacity(path);
    if (cross_exit_link == 0) cross_exit_link = path.num_links();
    if (cross_entry_link < 1 || cross_exit_link > path.num_links() ||
        cross_entry_link > cross_exit_link) {
      throw std::invalid_argument("config: bad cross-traffic entry/exit links");
    }
    if (sessions_per_point < 1) {
      throw std::invalid_argument("config: sessions_per_point must be >= 1");
    }
    if (cross_rates_bps.empty()) {
      // The grid stops one step short of capacity: expected availability of
      // zero has no defined relative error.
      for (Bps r = 0; r + 5'000'000 <= capacity; r += 5'000'000) {
        cross_rates_bps.push_back(r);
      }
    }
    for (Bps r : cross_rates_bps) {
      if (r > capacity) {
        throw std::invalid_argument("config: cross rate exceeds path capacity");
      }
    }
    for (const auto& tool : enabled_tools) {
      if (std::find(known_tools().begin(), known_tools().end(), tool) ==
          known_tools().end()) {
        throw std::invalid_argument("config: unknown tool: " + tool);
      }
    }

    if (spruce.capacity_bps == 0) spruce.capacity_bps = capacity;
    if (igi.capacity_bps == 0) igi.capacity_bps = capacity;
    if (pathload.rate_max_bps == 0) {
      pathload.rate_max_bps =
          static_cast<Bps>(std::llround(1.2 * static_cast<double>(capacity)));
    }
    if (pathload.trend_delay_threshold_ns < 0) {
      pathload.trend_delay_threshold_ns = 10 * noise.send_span_ns();
    }
    if (pathchirp.excursion_tolerance_ns < 0) {
      pathchirp.excursion_tolerance_ns = noise.send_span_ns();
    }
  }

  std::vector<CrossTrafficSpec> cross_flows(Bps rate) const {
    std::vector<CrossTrafficSpec> flows;
    if (rate == 0) return flows;
    CrossTrafficSpec flow;
    flow.flow_id = 1;
    flow.entry_link = cross_entry_link;
    flow.exit_link = cross_exit_link;
    flow.rate_bps = rate;
    flow.packet_size_bits = cross_packet_bits;
    flow.mode = cross_mode;
    flow.phase_offset_ns = cross_phase_offset_ns;
    flows.push_back(flow);
    return flows;
  }

  double expected_abw_bps(Bps rate) const {
    return ground_truth(path, cross_flows(rate)).path_available_bps;
  }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization. Latency ranges are expressed in microseconds in the
// file; everything internal stays integer nanoseconds.

namespace detail {

inline nlohmann::json us_range(Nanos lo_ns, Nanos hi_ns) {
  return nlohmann::json::array(
      {static_cast<double>(lo_ns) / 1000.0, static_cast<double>(hi_ns) / 1000.0});
}

inline void parse_us_range(const nlohmann::json& j, Nanos& lo_ns, Nanos& hi_ns) {
  lo_ns = static_cast<Nanos>(std::llround(j.at(0).get<double>() * 1000.0));
  hi_ns = static_cast<Nanos>(std::llround(j.at(1).get<double>() * 1000.0));
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["master_seed"] = cfg.master_seed;

  nlohmann::json jlinks = nlohmann::json::array();
  for (const auto& link : cfg.path.links) {
    jlinks.push_back({{"capacity_bps", link.capacity_bps},
                      {"queue_limit_bytes", link.queue_limit_bytes},
                      {"prop_delay_ns", link.prop_delay_ns}});
  }
  j["path"] = {{"links", jlinks}, {"l2_overhead_bits", cfg.path.l2_overhead_bits}};

  nlohmann::json jcross = {
      {"mode", cfg.cross_mode == CrossMode::kPacket ? "cbr" : "fluid"},
      {"packet_size_bits", cfg.cross_packet_bits},
      {"entry_link", cfg.cross_entry_link},
      {"exit_link", cfg.cross_exit_link}};
  if (cfg.cross_phase_offset_ns) {
    jcross["phase_offset_s"] = ns_to_s(*cfg.cross_phase_offset_ns);
  } else {
    jcross["phase_offset_s"] = nullptr;
  }
  j["cross_traffic"] = jcross;

  j["sweep"] = {{"cross_rates_bps", cfg.cross_rates_bps},
                {"sessions_per_point", cfg.sessions_per_point}};

  j["noise"] = {
      {"send_latency_us", detail::us_range(cfg.noise.send_lo_ns, cfg.noise.send_hi_ns)},
      {"recv_mode", cfg.noise.recv_mode == RecvTimestampMode::kKernel ? "kernel" : "user"},
      {"recv_latency_us", detail::us_range(cfg.noise.recv_lo_ns, cfg.noise.recv_hi_ns)},
      {"spike_probability", cfg.noise.spike_probability},
      {"spike_latency_us", detail::us_range(cfg.noise.spike_lo_ns, cfg.noise.spike_hi_ns)}};

  nlohmann::json jtools;
  for (const auto& name : cfg.enabled_tools) {
    if (name == "spruce") {
      jtools["spruce"] = {{"capacity_bps", cfg.spruce.capacity_bps},
                          {"num_pairs", cfg.spruce.num_pairs},
                          {"probe_size_bits", cfg.spruce.probe_size_bits},
                          {"probe_rate_bps", cfg.spruce.probe_rate_bps}};
    } else if (name == "igi") {
      jtools["igi"] = {{"capacity_bps", cfg.igi.capacity_bps},
                       {"train_length", cfg.igi.train_length},
                       {"probe_size_bits", cfg.igi.probe_size_bits},
                       {"initial_gap_ns", cfg.igi.initial_gap_ns},
                       {"gap_growth", cfg.igi.gap_growth},
                       {"turning_tolerance", cfg.igi.turning_tolerance},
                       {"max_rounds", cfg.igi.max_rounds},
                       {"inter_round_gap_ns", cfg.igi.inter_round_gap_ns},
                       {"setup_time_s", cfg.igi.setup_time_s}};
    } else if (name == "pathload") {
      jtools["pathload"] = {{"stream_length", cfg.pathload.stream_length},
                            {"probe_size_bits", cfg.pathload.probe_size_bits},
                            {"fleet_size", cfg.pathload.fleet_size},
                            {"rate_min_bps", cfg.pathload.rate_min_bps},
                            {"rate_max_bps", cfg.pathload.rate_max_bps},
                            {"resolution_bps", cfg.pathload.resolution_bps},
                            {"loss_abort_fraction", cfg.pathload.loss_abort_fraction},
                            {"trend_groups", cfg.pathload.trend_groups},
                            {"trend_increase_fraction", cfg.pathload.trend_increase_fraction},
                            {"trend_flat_fraction", cfg.pathload.trend_flat_fraction},
                            {"trend_delay_threshold_ns", cfg.pathload.trend_delay_threshold_ns},
                            {"min_stream_idle_ns", cfg.pathload.min_stream_idle_ns},
                            {"max_fleets", cfg.pathload.max_fleets}};
    } else if (name == "pathchirp") {
      jtools["pathchirp"] = {{"probe_size_bits", cfg.pathchirp.probe_size_bits},
                             {"rate_min_bps", cfg.pathchirp.rate_min_bps},
                             {"rate_max_bps", cfg.pathchirp.rate_max_bps},
                             {"gamma", cfg.pathchirp.gamma},
                             {"num_chirps", cfg.pathchirp.num_chirps},
                             {"session_duration_s", cfg.pathchirp.session_duration_s},
                             {"excursion_tolerance_ns", cfg.pathchirp.excursion_tolerance_ns}};
    }
  }
  j["tools"] = jtools;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.enabled_tools.clear();

  cfg.master_seed = j.value("master_seed", std::uint64_t{1});

  if (j.contains("path")) {
    const auto& jp = j.at("path");
    cfg.path.links.clear();
    int idx = 1;
    for (const auto& jl : jp.at("links")) {
      LinkSpec link;
      link.index = idx++;
      link.capacity_bps = jl.at("capacity_bps").get<Bps>();
      link.queue_limit_bytes = jl.value("queue_limit_bytes", std::uint64_t{0});
      link.prop_delay_ns = jl.value("prop_delay_ns", Nanos{0});
      cfg.path.links.push_back(link);
    }
    cfg.path.l2_overhead_bits = jp.value("l2_overhead_bits", std::int64_t{0});
  } else {
    cfg.path = make_path({100'000'000, 100'000'000, 100'000'000});
  }

  if (j.contains("cross_traffic")) {
    const auto& jc = j.at("cross_traffic");
    const std::string mode = jc.value("mode", std::string("cbr"));
    if (mode == "cbr") {
      cfg.cross_mode = CrossMode::kPacket;
    } else if (mode == "fluid") {
      cfg.cross_mode = CrossMode::kFluid;
    } else {
      throw std::invalid_argument("config: cross mode must be cbr or fluid");
    }
    cfg.cross_packet_bits = jc.value("packet_size_bits", std::int64_t{12000});
    cfg.cross_entry_link = jc.value("entry_link", 1);
    cfg.cross_exit_link = jc.value("exit_link", 0);
    if (jc.contains("phase_offset_s") && !jc.at("phase_offset_s").is_null()) {
      cfg.cross_phase_offset_ns = s_to_ns(jc.at("phase_offset_s").get<double>());
    }
  }

  if (j.contains("sweep")) {
    const auto& js = j.at("sweep");
    if (js.contains("cross_rates_bps")) {
      cfg.cross_rates_bps = js.at("cross_rates_bps").get<std::vector<Bps>>();
    }
    cfg.sessions_per_point = js.value("sessions_per_point", 30);
  }

  if (j.contains("noise")) {
    const auto& jn = j.at("noise");
    if (jn.contains("send_latency_us")) {
      detail::parse_us_range(jn.at("send_latency_us"), cfg.noise.send_lo_ns,
                             cfg.noise.send_hi_ns);
    }
    const std::string mode = jn.value("recv_mode", std::string("kernel"));
    if (mode == "kernel") {
      cfg.noise.recv_mode = RecvTimestampMode::kKernel;
    } else if (mode == "user") {
      cfg.noise.recv_mode = RecvTimestampMode::kUser;
    } else {
      throw std::invalid_argument("config: recv_mode must be kernel or user");
    }
    if (jn.contains("recv_latency_us")) {
      detail::parse_us_range(jn.at("recv_latency_us"), cfg.noise.recv_lo_ns,
                             cfg.noise.recv_hi_ns);
    }
    cfg.noise.spike_probability = jn.value("spike_probability", 0.0);
    if (jn.contains("spike_latency_us")) {
      detail::parse_us_range(jn.at("spike_latency_us"), cfg.noise.spike_lo_ns,
                             cfg.noise.spike_hi_ns);
    }
  }

  const nlohmann::json jtools =
      j.contains("tools") ? j.at("tools") : nlohmann::json::object();
  for (const auto& name : known_tools()) {
    if (!jtools.contains(name) && j.contains("tools")) continue;
    cfg.enabled_tools.push_back(name);
    if (!jtools.contains(name)) continue;
    const auto& jt = jtools.at(name);
    if (name == "spruce") {
      cfg.spruce.capacity_bps = jt.value("capacity_bps", Bps{0});
      cfg.spruce.num_pairs = jt.value("num_pairs", 100);
      cfg.spruce.probe_size_bits = jt.value("probe_size_bits", std::int64_t{12000});
      cfg.spruce.probe_rate_bps = jt.value("probe_rate_bps", Bps{0});
    } else if (name == "igi") {
      cfg.igi.capacity_bps = jt.value("capacity_bps", Bps{0});
      cfg.igi.train_length = jt.value("train_length", 60);
      cfg.igi.probe_size_bits = jt.value("probe_size_bits", std::int64_t{5600});
      cfg.igi.initial_gap_ns = jt.value("initial_gap_ns", Nanos{0});
      cfg.igi.gap_growth = jt.value("gap_growth", 1.25);
      cfg.igi.turning_tolerance = jt.value("turning_tolerance", 0.05);
      cfg.igi.max_rounds = jt.value("max_rounds", 32);
      cfg.igi.inter_round_gap_ns = jt.value("inter_round_gap_ns", Nanos{5'000'000});
      cfg.igi.setup_time_s = jt.value("setup_time_s", 12.8);
    } else if (name == "pathload") {
      cfg.pathload.stream_length = jt.value("stream_length", 100);
      cfg.pathload.probe_size_bits = jt.value("probe_size_bits", std::int64_t{8000});
      cfg.pathload.fleet_size = jt.value("fleet_size", 12);
      cfg.pathload.rate_min_bps = jt.value("rate_min_bps", Bps{1'000'000});
      cfg.pathload.rate_max_bps = jt.value("rate_max_bps", Bps{0});
      cfg.pathload.resolution_bps = jt.value("resolution_bps", Bps{2'000'000});
      cfg.pathload.loss_abort_fraction = jt.value("loss_abort_fraction", 0.10);
      cfg.pathload.trend_groups = jt.value("trend_groups", 10);
      cfg.pathload.trend_increase_fraction = jt.value("trend_increase_fraction", 0.6);
      cfg.pathload.trend_flat_fraction = jt.value("trend_flat_fraction", 0.4);
      cfg.pathload.trend_delay_threshold_ns =
          jt.value("trend_delay_threshold_ns", Nanos{-1});
      cfg.pathload.min_stream_idle_ns = jt.value("min_stream_idle_ns", Nanos{1'000'000});
      cfg.pathload.max_fleets = jt.value("max_fleets", 50);
    } else if (name == "pathchirp") {
      cfg.pathchirp.probe_size_bits = jt.value("probe_size_bits", std::int64_t{8000});
      cfg.pathchirp.rate_min_bps = jt.value("rate_min_bps", Bps{10'000'000});
      cfg.pathchirp.rate_max_bps = jt.value("rate_max_bps", Bps{200'000'000});
      cfg.pathchirp.gamma = jt.value("gamma", 1.2);
      cfg.pathchirp.num_chirps = jt.value("num_chirps", 40);
      cfg.pathchirp.session_duration_s = jt.value("session_duration_s", 20.0);
      cfg.pathchirp.excursion_tolerance_ns =
          jt.value("excursion_tolerance_ns", Nanos{-1});
    }
  }

  cfg.resolve();
  return cfg;
}

}  // namespace bwlab
