// Command-line front end: sweeps, single estimator sessions, analytic
// uncertainty tables and report regeneration from persisted raw rows.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bwlab/bwlab.hpp"

namespace {

bwlab::ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return bwlab::ExperimentConfig::defaults();
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  is >> j;
  return bwlab::config_from_json(j);
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int jobs) {
  const bwlab::ExperimentConfig cfg = load_config(config_path);
  const bwlab::SweepResult result = bwlab::run_sweep(cfg, jobs);
  bwlab::write_results(result, out_dir);
  std::cout << bwlab::summarize(result);
  std::cout << "results written to " << out_dir << "\n";
  return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& tool,
                 double cross_rate_bps, int session, const std::string& trace_path) {
  bwlab::ExperimentConfig cfg = load_config(config_path);
  const bwlab::Bps rate = cross_rate_bps >= 0.0
                              ? static_cast<bwlab::Bps>(std::llround(cross_rate_bps))
                              : (cfg.cross_rates_bps.empty() ? 0
                                                             : cfg.cross_rates_bps.front());
  std::vector<bwlab::ProbeRecord> trace;
  const bwlab::SessionRow row = bwlab::run_one_session(
      cfg, tool, rate, session, trace_path.empty() ? nullptr : &trace);
  if (!trace_path.empty()) {
    std::ofstream os(trace_path);
    if (!os) throw std::runtime_error("cannot write trace: " + trace_path);
    bwlab::write_trace_csv(trace, os);
  }
  std::cout << "tool,value_bps,low_bps,high_bps,bytes_sent,duration_s,status\n";
  std::cout << row.tool << ',' << bwlab::fmt_double(row.est.value_bps) << ','
            << bwlab::fmt_double(row.est.low_bps) << ','
            << bwlab::fmt_double(row.est.high_bps) << ',' << row.est.bytes_sent << ','
            << bwlab::fmt_double(row.est.duration_s) << ','
            << bwlab::to_string(row.est.status) << "\n";
  return 0;
}

int cmd_uncertainty(const std::string& tool, double capacity_bps, double d_in_ns,
                    double d_out_ns, double delta_d_in_ns, double delta_c_bps,
                    double probe_size_bits) {
  std::printf("%-22s %s\n", "tool", tool.c_str());
  std::printf("%-22s %.6g ns\n", "d_in", d_in_ns);
  std::printf("%-22s %.6g ns\n", "d_out", d_out_ns);
  double delta_a = 0.0;
  double abw = -1.0;
  if (tool == "spruce") {
    delta_a = bwlab::spruce_uncertainty_bps(capacity_bps, d_in_ns, d_out_ns,
                                            delta_d_in_ns);
    abw = bwlab::spruce_pair_sample(static_cast<bwlab::Nanos>(d_in_ns),
                                    static_cast<bwlab::Nanos>(d_out_ns), capacity_bps);
    std::printf("%-22s %.6g bps\n", "capacity", capacity_bps);
    std::printf("%-22s %.6g ns\n", "delta_d_in", delta_d_in_ns);
  } else {
    delta_a = bwlab::igi_uncertainty_bps(d_in_ns, d_out_ns, delta_c_bps);
    std::printf("%-22s %.6g bps\n", "delta_capacity", delta_c_bps);
    if (capacity_bps > 0.0 && probe_size_bits > 0.0) {
      abw = (capacity_bps * (d_in_ns - d_out_ns) + probe_size_bits * 1e9) / d_in_ns;
      std::printf("%-22s %.6g bps\n", "capacity", capacity_bps);
      std::printf("%-22s %.6g bits\n", "probe_size", probe_size_bits);
    }
  }
  std::printf("%-22s %.6g bps\n", "delta_abw", delta_a);
  if (abw > 0.0) {
    std::printf("%-22s %.6g bps\n", "abw", abw);
    std::printf("%-22s %.2f %%\n", "delta_abw / abw", 100.0 * delta_a / abw);
  }
  return 0;
}

int cmd_report(const std::string& in_dir) {
  const auto rows = bwlab::read_raw_csv(std::filesystem::path(in_dir) / "raw.csv");
  bwlab::SweepResult result;
  result.raw = rows;
  result.summary = bwlab::aggregate(rows);
  // Restrict the digest to tools that actually appear in the raw rows.
  std::vector<std::string> present;
  for (const auto& name : bwlab::known_tools()) {
    for (const auto& row : rows) {
      if (row.tool == name) {
        present.push_back(name);
        break;
      }
    }
  }
  result.config.enabled_tools = present;
  std::cout << bwlab::summarize(result);
  return 0;
}

int cmd_init(const std::string& out_path) {
  const auto cfg = bwlab::ExperimentConfig::defaults();
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << bwlab::to_json(cfg).dump(2) << "\n";
  std::cout << "default config written to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bwlab: available-bandwidth estimation laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, tool, trace_path, in_dir, init_path;
  int jobs = 1, session = 0;
  double cross_rate = -1.0;
  double capacity = 0.0, d_in = 0.0, d_out = 0.0, delta_d_in = 0.0, delta_c = 0.0;
  double probe_bits = 0.0;

  auto* sweep = app.add_subcommand("sweep", "run the full experiment sweep");
  sweep->add_option("--config", config_path, "experiment config JSON (default config if omitted)");
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep->add_option("--jobs", jobs, "parallel sessions (default 1)");

  auto* estimate = app.add_subcommand("estimate", "run one measurement session");
  estimate->add_option("--tool", tool, "spruce|igi|pathload|pathchirp")->required();
  estimate->add_option("--config", config_path, "experiment config JSON");
  estimate->add_option("--cross-rate-bps", cross_rate, "cross-traffic rate (default: first sweep rate)");
  estimate->add_option("--session", session, "session index for seeding (default 0)");
  estimate->add_option("--trace", trace_path, "write the probe trace CSV here");

  auto* unc = app.add_subcommand("uncertainty", "analytic first-order error table");
  unc->add_option("--tool", tool, "spruce|igi")->required()
      ->check(CLI::IsMember({"spruce", "igi"}));
  unc->add_option("--capacity-bps", capacity, "path capacity");
  unc->add_option("--d-in-ns", d_in, "initial gap")->required();
  unc->add_option("--d-out-ns", d_out, "output gap")->required();
  unc->add_option("--delta-d-in-ns", delta_d_in, "initial gap error (spruce)");
  unc->add_option("--delta-c-bps", delta_c, "capacity error (igi)");
  unc->add_option("--probe-size-bits", probe_bits, "probe size, for the igi abw row");

  auto* report = app.add_subcommand("report", "re-aggregate a sweep directory");
  report->add_option("--in", in_dir, "directory holding raw.csv")->required();

  auto* init = app.add_subcommand("init", "write the default config JSON");
  init->add_option("--out", init_path, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, jobs);
    if (estimate->parsed()) {
      return cmd_estimate(config_path, tool, cross_rate, session, trace_path);
    }
    if (unc->parsed()) {
      return cmd_uncertainty(tool, capacity, d_in, d_out, delta_d_in, delta_c,
                             probe_bits);
    }
    if (report->parsed()) return cmd_report(in_dir);
    if (init->parsed()) return cmd_init(init_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
