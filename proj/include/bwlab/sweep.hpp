#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bwlab/csv.hpp"
#include "bwlab/experiment.hpp"
#include "bwlab/metrics.hpp"
#include "bwlab/sim_driver.hpp"
#include "bwlab/uncertainty.hpp"

namespace bwlab {

struct SessionRow {
  std::string tool;
  Bps cross_rate_bps = 0;
  int session = 0;
  std::uint64_t seed = 0;
  double expected_abw_bps = 0.0;
  Estimate est;
  std::optional<double> rel_error;
  double intrusiveness_ratio = 0.0;
};

struct CellSummary {
  std::string tool;
  Bps cross_rate_bps = 0;
  double expected_abw_bps = 0.0;
  int sessions = 0;
  int ok = 0;
  int aborted_loss = 0;
  int no_convergence = 0;
  std::optional<double> mean_value_bps;
  std::optional<double> std_value_bps;
  std::optional<double> mean_rel_error;
  std::optional<double> frac_err_lt_01;
  std::optional<double> frac_err_lt_02;
  double mean_intrusiveness = 0.0;
  double mean_response_time_s = 0.0;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<SessionRow> raw;
  std::vector<CellSummary> summary;
};

inline std::uint64_t session_seed(std::uint64_t master_seed, const std::string& tool,
                                  Bps cross_rate_bps, int session) {
  std::uint64_t s = seed_combine(master_seed, hash_name(tool));
  s = seed_combine(s, cross_rate_bps);
  return seed_combine(s, static_cast<std::uint64_t>(session));
}

// One (tool, cross rate, session) cell, on a fresh simulator session.
inline SessionRow run_one_session(const ExperimentConfig& cfg, const std::string& tool,
                                  Bps cross_rate_bps, int session,
                                  std::vector<ProbeRecord>* trace_out = nullptr) {
  if (std::find(known_tools().begin(), known_tools().end(), tool) ==
      known_tools().end()) {
    throw std::invalid_argument("unknown tool: " + tool);
  }
  SessionRow row;
  row.tool = tool;
  row.cross_rate_bps = cross_rate_bps;
  row.session = session;
  row.seed = session_seed(cfg.master_seed, tool, cross_rate_bps, session);
  row.expected_abw_bps = cfg.expected_abw_bps(cross_rate_bps);

  SimProbeDriver driver(cfg.path, cfg.cross_flows(cross_rate_bps), cfg.noise, row.seed);
  if (trace_out != nullptr) driver.collect_traces(true);
  try {
    if (tool == "spruce") {
      row.est = run_spruce(driver, cfg.spruce, seed_combine(row.seed, hash_name("schedule")));
    } else if (tool == "igi") {
      row.est = run_igi(driver, cfg.igi);
    } else if (tool == "pathload") {
      row.est = run_pathload(driver, cfg.pathload);
    } else {
      row.est = run_pathchirp(driver, cfg.pathchirp);
    }
  } catch (const std::exception&) {
    // A failed session is a data point, not a sweep failure.
    row.est = Estimate{};
    row.est.status = EstimateStatus::kNoConvergence;
  }

  if (row.est.status == EstimateStatus::kOk && row.expected_abw_bps > 0.0) {
    row.rel_error = relative_error(row.expected_abw_bps, row.est.value_bps);
  }
  if (row.est.duration_s > 0.0) {
    row.intrusiveness_ratio =
        intrusiveness(row.est.bytes_sent, row.est.duration_s,
                      static_cast<double>(path_capacity(cfg.path)));
  }
  if (trace_out != nullptr) *trace_out = driver.traces();
  return row;
}

// Aggregates recomputable from raw rows alone; cell order follows first
// appearance so a reload of raw.csv reproduces summary.csv exactly.
inline std::vector<CellSummary> aggregate(const std::vector<SessionRow>& raw) {
  std::vector<CellSummary> cells;
  const auto find_cell = [&](const SessionRow& row) -> CellSummary& {
    for (auto& c : cells) {
      if (c.tool == row.tool && c.cross_rate_bps == row.cross_rate_bps) return c;
    }
    CellSummary c;
    c.tool = row.tool;
    c.cross_rate_bps = row.cross_rate_bps;
    c.expected_abw_bps = row.expected_abw_bps;
    cells.push_back(c);
    return cells.back();
  };

  struct Acc {
    double value_sum = 0.0, value_sq = 0.0;
    double err_sum = 0.0;
    int err_n = 0, err_lt01 = 0, err_lt02 = 0;
    double intr_sum = 0.0, resp_sum = 0.0;
    int timed_n = 0;
  };
  std::vector<Acc> accs;

  for (const auto& row : raw) {
    CellSummary& cell = find_cell(row);
    const std::size_t idx = static_cast<std::size_t>(&cell - cells.data());
    if (idx >= accs.size()) accs.resize(cells.size());
    Acc& acc = accs[idx];

    ++cell.sessions;
    switch (row.est.status) {
      case EstimateStatus::kOk:
        ++cell.ok;
        acc.value_sum += row.est.value_bps;
        acc.value_sq += row.est.value_bps * row.est.value_bps;
        break;
      case EstimateStatus::kAbortedLoss: ++cell.aborted_loss; break;
      case EstimateStatus::kNoConvergence: ++cell.no_convergence; break;
    }
    if (row.rel_error) {
      acc.err_sum += *row.rel_error;
      ++acc.err_n;
      if (*row.rel_error < 0.1) ++acc.err_lt01;
      if (*row.rel_error < 0.2) ++acc.err_lt02;
    }
    if (row.est.duration_s > 0.0) {
      acc.intr_sum += row.intrusiveness_ratio;
      acc.resp_sum += row.est.duration_s;
      ++acc.timed_n;
    }
  }

  for (std::size_t i = 0; i < cells.size(); ++i) {
    CellSummary& cell = cells[i];
    const Acc& acc = accs[i];
    if (cell.ok > 0) {
      const double mean = acc.value_sum / cell.ok;
      cell.mean_value_bps = mean;
      const double var =
          cell.ok > 1 ? std::max(0.0, (acc.value_sq - cell.ok * mean * mean) /
                                          (cell.ok - 1))
                      : 0.0;
      cell.std_value_bps = std::sqrt(var);
    }
    if (acc.err_n > 0) {
      cell.mean_rel_error = acc.err_sum / acc.err_n;
      cell.frac_err_lt_01 = static_cast<double>(acc.err_lt01) / acc.err_n;
      cell.frac_err_lt_02 = static_cast<double>(acc.err_lt02) / acc.err_n;
    }
    if (acc.timed_n > 0) {
      cell.mean_intrusiveness = acc.intr_sum / acc.timed_n;
      cell.mean_response_time_s = acc.resp_sum / acc.timed_n;
    }
  }
  return cells;
}

// Sessions are independent work items; rows land at precomputed indices so
// their order never depends on scheduling.
inline SweepResult run_sweep(const ExperimentConfig& cfg, int jobs = 1) {
  SweepResult result;
  result.config = cfg;

  struct Cell {
    std::string tool;
    Bps rate;
    int session;
  };
  std::vector<Cell> cells;
  for (const auto& tool : cfg.enabled_tools) {
    for (Bps rate : cfg.cross_rates_bps) {
      for (int s = 0; s < cfg.sessions_per_point; ++s) {
        cells.push_back({tool, rate, s});
      }
    }
  }
  result.raw.resize(cells.size());

  if (jobs < 1) jobs = 1;
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      result.raw[i] = run_one_session(cfg, cells[i].tool, cells[i].rate,
                                      cells[i].session);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1)) {
          result.raw[i] = run_one_session(cfg, cells[i].tool, cells[i].rate,
                                          cells[i].session);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  result.summary = aggregate(result.raw);
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

inline const char* kRawHeader =
    "tool,cross_rate_bps,session,seed,expected_abw_bps,value_bps,low_bps,high_bps,"
    "bytes_sent,duration_s,status,rel_error,intrusiveness";

inline const char* kSummaryHeader =
    "tool,cross_rate_bps,expected_abw_bps,sessions,ok,aborted_loss,no_convergence,"
    "mean_value_bps,std_value_bps,mean_rel_error,frac_err_lt_0_1,frac_err_lt_0_2,"
    "mean_intrusiveness,mean_response_time_s";

inline std::string raw_csv(const std::vector<SessionRow>& rows) {
  std::ostringstream os;
  os << kRawHeader << '\n';
  for (const auto& r : rows) {
    os << r.tool << ',' << r.cross_rate_bps << ',' << r.session << ',' << r.seed << ','
       << fmt_double(r.expected_abw_bps) << ',' << fmt_double(r.est.value_bps) << ','
       << fmt_double(r.est.low_bps) << ',' << fmt_double(r.est.high_bps) << ','
       << r.est.bytes_sent << ',' << fmt_double(r.est.duration_s) << ','
       << to_string(r.est.status) << ','
       << (r.rel_error ? fmt_double(*r.rel_error) : std::string{}) << ','
       << fmt_double(r.intrusiveness_ratio) << '\n';
  }
  return os.str();
}

inline std::string summary_csv(const std::vector<CellSummary>& cells) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string{};
  };
  std::ostringstream os;
  os << kSummaryHeader << '\n';
  for (const auto& c : cells) {
    os << c.tool << ',' << c.cross_rate_bps << ',' << fmt_double(c.expected_abw_bps)
       << ',' << c.sessions << ',' << c.ok << ',' << c.aborted_loss << ','
       << c.no_convergence << ',' << opt(c.mean_value_bps) << ','
       << opt(c.std_value_bps) << ',' << opt(c.mean_rel_error) << ','
       << opt(c.frac_err_lt_01) << ',' << opt(c.frac_err_lt_02) << ','
       << fmt_double(c.mean_intrusiveness) << ','
       << fmt_double(c.mean_response_time_s) << '\n';
  }
  return os.str();
}

inline std::vector<SessionRow> parse_raw_csv(std::istream& is) {
  std::vector<SessionRow> rows;
  std::string line;
  if (!std::getline(is, line)) return rows;
  if (split_csv_line(line).size() != 13) {
    throw std::runtime_error("raw csv: unexpected header");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 13) throw std::runtime_error("raw csv: bad row: " + line);
    SessionRow r;
    r.tool = f[0];
    r.cross_rate_bps = static_cast<Bps>(std::stoull(f[1]));
    r.session = std::stoi(f[2]);
    r.seed = std::stoull(f[3]);
    r.expected_abw_bps = parse_double(f[4]);
    r.est.value_bps = parse_double(f[5]);
    r.est.low_bps = parse_double(f[6]);
    r.est.high_bps = parse_double(f[7]);
    r.est.bytes_sent = std::stoull(f[8]);
    r.est.duration_s = parse_double(f[9]);
    r.est.status = status_from_string(f[10]);
    if (!f[11].empty()) r.rel_error = parse_double(f[11]);
    r.intrusiveness_ratio = parse_double(f[12]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<SessionRow> read_raw_csv(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open " + file.string());
  return parse_raw_csv(is);
}

namespace detail {

// One gnuplot-ready table: cross rate, expected availability, then one
// column per tool.
inline std::string plot_table(const SweepResult& result,
                              const std::vector<std::string>& tools,
                              const char* what,
                              double (*pick)(const CellSummary&)) {
  std::ostringstream os;
  os << "# " << what << "\n# cross_rate_bps expected_abw_bps";
  for (const auto& t : tools) os << ' ' << t;
  os << '\n';
  std::vector<Bps> rates;
  for (const auto& c : result.summary) {
    if (std::find(rates.begin(), rates.end(), c.cross_rate_bps) == rates.end()) {
      rates.push_back(c.cross_rate_bps);
    }
  }
  for (Bps rate : rates) {
    double expected = 0.0;
    std::vector<std::string> vals;
    for (const auto& t : tools) {
      bool found = false;
      for (const auto& c : result.summary) {
        if (c.tool == t && c.cross_rate_bps == rate) {
          expected = c.expected_abw_bps;
          const double v = pick(c);
          vals.push_back(std::isnan(v) ? std::string("-") : fmt_double(v));
          found = true;
          break;
        }
      }
      if (!found) vals.push_back("-");
    }
    os << rate << ' ' << fmt_double(expected);
    for (const auto& v : vals) os << ' ' << v;
    os << '\n';
  }
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << content;
  if (!os) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace detail

inline void write_results(const SweepResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "plots");
  detail::write_file(dir / "raw.csv", raw_csv(result.raw));
  detail::write_file(dir / "summary.csv", summary_csv(result.summary));
  detail::write_file(dir / "config.json", to_json(result.config).dump(2) + "\n");

  const auto& tools = result.config.enabled_tools;
  detail::write_file(dir / "plots" / "accuracy.dat",
                     detail::plot_table(result, tools, "mean measured abw (bps)",
                                        [](const CellSummary& c) {
                                          return c.mean_value_bps.value_or(
                                              std::nan(""));
                                        }));
  detail::write_file(dir / "plots" / "relative_error.dat",
                     detail::plot_table(result, tools, "mean relative error",
                                        [](const CellSummary& c) {
                                          return c.mean_rel_error.value_or(
                                              std::nan(""));
                                        }));
  detail::write_file(dir / "plots" / "response_time.dat",
                     detail::plot_table(result, tools, "mean response time (s)",
                                        [](const CellSummary& c) {
                                          return c.mean_response_time_s;
                                        }));
  detail::write_file(dir / "plots" / "load.dat",
                     detail::plot_table(result, tools, "mean probe load / capacity",
                                        [](const CellSummary& c) {
                                          return c.mean_intrusiveness;
                                        }));

  std::ostringstream gp;
  gp << "set key outside\nset xlabel 'cross rate (bps)'\n"
     << "set terminal pngcairo size 900,600\n";
  const char* plots[4][2] = {{"accuracy", "mean measured abw (bps)"},
                             {"relative_error", "mean relative error"},
                             {"response_time", "mean response time (s)"},
                             {"load", "probe load / capacity"}};
  for (const auto& p : plots) {
    gp << "set output '" << p[0] << ".png'\nset ylabel '" << p[1] << "'\nplot ";
    for (std::size_t t = 0; t < tools.size(); ++t) {
      gp << "'" << p[0] << ".dat' using 1:" << t + 3 << " with linespoints title '"
         << tools[t] << "'";
      gp << (t + 1 < tools.size() ? ", " : "\n");
    }
  }
  detail::write_file(dir / "plots" / "render.gp", gp.str());
}

// Per-tool digest across the whole sweep.
inline std::string summarize(const SweepResult& result) {
  std::ostringstream os;
  os << "tool        sessions ok     aborted noconv mean_err frac<0.1 frac<0.2 "
        "mean_load  mean_resp_s\n";
  for (const auto& tool : result.config.enabled_tools) {
    int sessions = 0, ok = 0, aborted = 0, noconv = 0, err_n = 0, lt01 = 0, lt02 = 0;
    double err_sum = 0.0, intr_sum = 0.0, resp_sum = 0.0;
    int timed = 0;
    for (const auto& r : result.raw) {
      if (r.tool != tool) continue;
      ++sessions;
      if (r.est.status == EstimateStatus::kOk) ++ok;
      if (r.est.status == EstimateStatus::kAbortedLoss) ++aborted;
      if (r.est.status == EstimateStatus::kNoConvergence) ++noconv;
      if (r.rel_error) {
        err_sum += *r.rel_error;
        ++err_n;
        if (*r.rel_error < 0.1) ++lt01;
        if (*r.rel_error < 0.2) ++lt02;
      }
      if (r.est.duration_s > 0.0) {
        intr_sum += r.intrusiveness_ratio;
        resp_sum += r.est.duration_s;
        ++timed;
      }
    }
    if (sessions == 0) continue;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%-11s %-8d %-6d %-7d %-6d %-8.4f %-8.3f %-8.3f %-10.6f %-.3f\n",
                  tool.c_str(), sessions, ok, aborted, noconv,
                  err_n > 0 ? err_sum / err_n : 0.0,
                  err_n > 0 ? static_cast<double>(lt01) / err_n : 0.0,
                  err_n > 0 ? static_cast<double>(lt02) / err_n : 0.0,
                  timed > 0 ? intr_sum / timed : 0.0,
                  timed > 0 ? resp_sum / timed : 0.0);
    os << buf;
  }
  return os.str();
}

}  // namespace bwlab
