#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "bwlab/igi.hpp"
#include "bwlab/pathchirp.hpp"
#include "bwlab/pathload.hpp"
#include "bwlab/probe.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/sim_driver.hpp"
#include "bwlab/spruce.hpp"
#include "bwlab/units.hpp"

namespace bwlab {

struct UncertaintyInputs {
  double capacity_bps = 0.0;
  double delta_capacity_bps = 0.0;
  double d_in_ns = 0.0;
  double d_out_ns = 0.0;
  double delta_d_in_ns = 0.0;
  std::int64_t probe_size_bits = 0;
};

// First-order error that an initial-gap error of delta_d_in propagates into
// the pair-expansion availability estimate.
inline double spruce_uncertainty_bps(double capacity_bps, double d_in_ns,
                                     double d_out_ns, double delta_d_in_ns) {
  if (d_in_ns <= 0.0) {
    throw std::invalid_argument("spruce_uncertainty: d_in must be positive");
  }
  return std::abs(-capacity_bps * d_out_ns / (d_in_ns * d_in_ns)) * delta_d_in_ns;
}

// First-order error that a capacity error of delta_c propagates into the
// train-gap availability estimate. It vanishes at the turning point.
inline double igi_uncertainty_bps(double d_in_ns, double d_out_ns,
                                  double delta_capacity_bps) {
  if (d_in_ns <= 0.0) {
    throw std::invalid_argument("igi_uncertainty: d_in must be positive");
  }
  return std::abs(1.0 - d_out_ns / d_in_ns) * delta_capacity_bps;
}

struct MonteCarloScenario {
  PathSpec path;
  std::vector<CrossTrafficSpec> cross;
  TimestampNoiseModel noise;
};

struct SpreadResult {
  double session_std_bps = 0.0;  // spread of per-session values
  double sample_std_bps = 0.0;   // pooled per-pair spread (pair tools only)
  int ok_sessions = 0;
  int trials = 0;
};

using ToolConfig = std::variant<SpruceConfig, IgiConfig, PathloadConfig, PathchirpConfig>;

namespace detail {

inline double std_dev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

// Empirical spread of estimates over independently seeded sessions, for
// checking the analytic error bounds against simulated noise.
inline SpreadResult monte_carlo_spread(const ToolConfig& tool,
                                       const MonteCarloScenario& scenario,
                                       int n_trials, std::uint64_t master_seed) {
  if (n_trials < 100) {
    throw std::invalid_argument("monte_carlo_spread: need at least 100 trials");
  }
  SpreadResult out;
  out.trials = n_trials;
  std::vector<double> session_values;
  std::vector<double> pooled_samples;

  for (int trial = 0; trial < n_trials; ++trial) {
    const std::uint64_t seed = seed_combine(master_seed, static_cast<std::uint64_t>(trial));
    SimProbeDriver driver(scenario.path, scenario.cross, scenario.noise, seed);
    Estimate est;
    if (const auto* cfg = std::get_if<SpruceConfig>(&tool)) {
      const ProbeSchedule schedule =
          build_spruce_schedule(*cfg, seed_combine(seed, hash_name("schedule")));
      const SpruceAnalysis analysis = spruce_analyze(driver.run(schedule), *cfg);
      est = analysis.estimate;
      if (est.status == EstimateStatus::kOk) {
        pooled_samples.insert(pooled_samples.end(), analysis.samples_bps.begin(),
                              analysis.samples_bps.end());
      }
    } else if (const auto* cfg = std::get_if<IgiConfig>(&tool)) {
      est = run_igi(driver, *cfg);
    } else if (const auto* cfg = std::get_if<PathloadConfig>(&tool)) {
      est = run_pathload(driver, *cfg);
    } else {
      est = run_pathchirp(driver, std::get<PathchirpConfig>(tool));
    }
    if (est.status == EstimateStatus::kOk) {
      ++out.ok_sessions;
      session_values.push_back(est.value_bps);
    }
  }

  if (out.ok_sessions * 2 < n_trials) {
    throw std::runtime_error("monte_carlo_spread: fewer than half the sessions succeeded");
  }
  out.session_std_bps = detail::std_dev(session_values);
  out.sample_std_bps = detail::std_dev(pooled_samples);
  return out;
}

}  // namespace bwlab
