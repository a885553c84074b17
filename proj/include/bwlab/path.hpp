#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bwlab/units.hpp"

namespace bwlab {

// One store-and-forward hop. queue_limit_bytes == 0 means unbounded buffer;
// otherwise the limit caps the bytes waiting behind the packet in service.
struct LinkSpec {
  int index = 1;  // 1-based position within the path
  Bps capacity_bps = 0;
  std::uint64_t queue_limit_bytes = 0;
  Nanos prop_delay_ns = 0;
};

// A fixed, ordered sequence of links. No routing changes mid-run.
struct PathSpec {
  std::vector<LinkSpec> links;
  // Layer-2 framing overhead added to every packet on the wire.
  std::int64_t l2_overhead_bits = 0;

  int num_links() const { return static_cast<int>(links.size()); }

  void validate() const {
    if (links.empty()) {
      throw std::invalid_argument("path: at least one link required");
    }
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (links[i].capacity_bps == 0) {
        throw std::invalid_argument("path: link capacity must be positive");
      }
      if (links[i].index != static_cast<int>(i) + 1) {
        throw std::invalid_argument("path: link indices must be 1..N in order");
      }
      if (links[i].prop_delay_ns < 0) {
        throw std::invalid_argument("path: negative propagation delay");
      }
    }
  }
};

inline PathSpec make_path(std::initializer_list<Bps> capacities) {
  PathSpec path;
  int idx = 1;
  for (Bps c : capacities) {
    path.links.push_back(LinkSpec{idx++, c, 0, 0});
  }
  return path;
}

enum class CrossMode {
  kPacket,  // periodic constant-bit-rate packets
  kFluid,   // continuous rate, no discrete packets
};

// One competing flow occupying links [entry_link, exit_link].
struct CrossTrafficSpec {
  int flow_id = 0;
  int entry_link = 1;
  int exit_link = 1;
  Bps rate_bps = 0;
  std::int64_t packet_size_bits = 12000;  // packet mode only
  CrossMode mode = CrossMode::kPacket;
  // Start offset of the periodic train; empty draws one from the run seed.
  std::optional<Nanos> phase_offset_ns;

  void validate(const PathSpec& path) const {
    if (entry_link < 1 || exit_link > path.num_links() || entry_link > exit_link) {
      throw std::invalid_argument("cross traffic: bad entry/exit link");
    }
    if (mode == CrossMode::kPacket && packet_size_bits <= 0) {
      throw std::invalid_argument("cross traffic: packet size must be positive");
    }
    if (phase_offset_ns && *phase_offset_ns < 0) {
      throw std::invalid_argument("cross traffic: negative phase offset");
    }
  }
};

}  // namespace bwlab
