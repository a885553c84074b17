#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bwlab/noise.hpp"
#include "bwlab/path.hpp"
#include "bwlab/probe.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/simnet.hpp"

namespace bwlab {

// Feeds estimator rounds through the simulator. Every round is a fresh run
// with its own derived seed, so cross-traffic phase and timestamp noise stay
// decorrelated between rounds while the whole session remains reproducible.
class SimProbeDriver final : public ProbeDriver {
 public:
  SimProbeDriver(PathSpec path, std::vector<CrossTrafficSpec> cross,
                 TimestampNoiseModel noise, std::uint64_t session_seed)
      : path_(std::move(path)),
        cross_(std::move(cross)),
        noise_(noise),
        session_seed_(session_seed) {}

  std::vector<ProbeRecord> run(const ProbeSchedule& schedule) override {
    const std::uint64_t round_seed = seed_combine(session_seed_, round_++);
    last_result_ = simulate(path_, cross_, schedule, noise_, round_seed);
    probe_bits_observed_ += schedule.total_bits();
    if (collect_traces_) {
      all_records_.insert(all_records_.end(), last_result_.records.begin(),
                          last_result_.records.end());
    }
    return last_result_.records;
  }

  void collect_traces(bool on) { collect_traces_ = on; }
  const std::vector<ProbeRecord>& traces() const { return all_records_; }
  const SimResult& last_result() const { return last_result_; }
  std::uint64_t rounds() const { return round_; }
  std::uint64_t probe_bits_observed() const { return probe_bits_observed_; }

 private:
  PathSpec path_;
  std::vector<CrossTrafficSpec> cross_;
  TimestampNoiseModel noise_;
  std::uint64_t session_seed_;
  std::uint64_t round_ = 0;
  std::uint64_t probe_bits_observed_ = 0;
  bool collect_traces_ = false;
  std::vector<ProbeRecord> all_records_;
  SimResult last_result_;
};

}  // namespace bwlab
