#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cohsim/coherence.hpp"

namespace cohsim {

// Lightweight introspection structure: which accelerators are active, in
// which mode, and how their footprints map onto the memory tiles. Updated
// exactly twice per invocation, at start and at completion.
class SystemStatus {
 public:
  struct ActiveEntry {
    int agent;
    CoherenceMode mode;
    std::vector<std::uint64_t> fp_per_tile;
    std::uint64_t footprint_total;
  };

  explicit SystemStatus(int tiles) : tile_fp_(static_cast<std::size_t>(tiles), 0) {}

  void on_invocation_start(int agent, CoherenceMode mode,
                           const std::vector<std::uint64_t>& fp_per_tile) {
    if (find(agent) >= 0) throw std::logic_error("status: device already active");
    ActiveEntry e;
    e.agent = agent;
    e.mode = mode;
    e.fp_per_tile = fp_per_tile;
    e.footprint_total = 0;
    for (std::size_t t = 0; t < fp_per_tile.size(); t++) {
      e.footprint_total += fp_per_tile[t];
      tile_fp_[t] += fp_per_tile[t];
    }
    active_.push_back(std::move(e));
  }

  void on_invocation_end(int agent) {
    int i = find(agent);
    if (i < 0) throw std::logic_error("status: device not active");
    const ActiveEntry& e = active_[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < e.fp_per_tile.size(); t++) tile_fp_[t] -= e.fp_per_tile[t];
    active_.erase(active_.begin() + i);
  }

  const std::vector<ActiveEntry>& active() const { return active_; }
  std::uint64_t tile_footprint(int tile) const { return tile_fp_[static_cast<std::size_t>(tile)]; }
  int tiles() const { return static_cast<int>(tile_fp_.size()); }

  int count_mode(CoherenceMode m) const {
    int n = 0;
    for (const ActiveEntry& e : active_)
      if (e.mode == m) n++;
    return n;
  }

  std::uint64_t total_active_footprint() const {
    std::uint64_t n = 0;
    for (const ActiveEntry& e : active_) n += e.footprint_total;
    return n;
  }

  bool consistent() const {
    std::vector<std::uint64_t> sum(tile_fp_.size(), 0);
    for (const ActiveEntry& e : active_)
      for (std::size_t t = 0; t < sum.size(); t++) sum[t] += e.fp_per_tile[t];
    return sum == tile_fp_;
  }

 private:
  int find(int agent) const {
    for (std::size_t i = 0; i < active_.size(); i++)
      if (active_[i].agent == agent) return static_cast<int>(i);
    return -1;
  }

  std::vector<ActiveEntry> active_;
  std::vector<std::uint64_t> tile_fp_;
};

// Ternary 5-tuple snapshot of the system as seen by a pending invocation:
//   [0] active fully-coherent accelerators        {0, 1, 2+}
//   [1] avg non-coherent accelerators per needed tile   {0, 1, 2+}
//   [2] avg LLC-bound accelerators per needed tile      {0, 1, 2+}
//   [3] avg active footprint on needed tiles      {<=L2, <=slice, >slice}
//   [4] footprint of the pending invocation       {<=L2, <=slice, >slice}
struct EncodedState {
  std::array<int, 5> attr{};

  int index() const {
    int idx = 0;
    for (int a : attr) idx = idx * 3 + a;
    return idx;
  }

  static EncodedState from_index(int idx) {
    if (idx < 0 || idx >= 243) throw std::out_of_range("state index outside [0, 243)");
    EncodedState s;
    for (int i = 4; i >= 0; i--) {
      s.attr[static_cast<std::size_t>(i)] = idx % 3;
      idx /= 3;
    }
    return s;
  }

  bool operator==(const EncodedState&) const = default;
};

inline constexpr int kStateCount = 243;

struct EncodeOptions {
  // whether fully-coherent devices also count toward the LLC-traffic
  // attribute; their LLC traffic is filtered by their private cache, so the
  // default leaves them out (attribute 0 already captures them)
  bool count_fully_coh_to_llc = false;
};

namespace detail {

inline int bin_count(double avg) {
  if (avg < 0.5) return 0;
  if (avg < 1.5) return 1;
  return 2;
}

inline int bin_bytes(double bytes, std::uint64_t l2_bytes, std::uint64_t slice_bytes) {
  if (bytes <= static_cast<double>(l2_bytes)) return 0;
  if (bytes <= static_cast<double>(slice_bytes)) return 1;
  return 2;
}

}  // namespace detail

// Pure function of (status, pending target). The target's needed partitions
// are the tiles where its allocation has nonzero bytes; count attributes are
// averaged over those tiles and binned at 0.5 / 1.5.
inline EncodedState encode_state(const SystemStatus& status,
                                 const std::vector<std::uint64_t>& target_fp_per_tile,
                                 std::uint64_t target_footprint, std::uint64_t l2_bytes,
                                 std::uint64_t slice_bytes, EncodeOptions opts = {}) {
  EncodedState s;
  s.attr[0] = detail::bin_count(static_cast<double>(status.count_mode(CoherenceMode::FullyCoh)));

  std::vector<int> needed;
  for (std::size_t t = 0; t < target_fp_per_tile.size(); t++)
    if (target_fp_per_tile[t] > 0) needed.push_back(static_cast<int>(t));

  double non_coh_sum = 0, to_llc_sum = 0, fp_sum = 0;
  for (int t : needed) {
    for (const SystemStatus::ActiveEntry& e : status.active()) {
      if (e.fp_per_tile[static_cast<std::size_t>(t)] == 0) continue;
      if (e.mode == CoherenceMode::NonCohDma) non_coh_sum += 1;
      if (e.mode == CoherenceMode::LlcCohDma || e.mode == CoherenceMode::CohDma ||
          (opts.count_fully_coh_to_llc && e.mode == CoherenceMode::FullyCoh)) {
        to_llc_sum += 1;
      }
    }
    fp_sum += static_cast<double>(status.tile_footprint(t));
  }
  double n = needed.empty() ? 1.0 : static_cast<double>(needed.size());
  s.attr[1] = detail::bin_count(non_coh_sum / n);
  s.attr[2] = detail::bin_count(to_llc_sum / n);
  s.attr[3] = needed.empty() ? 0 : detail::bin_bytes(fp_sum / n, l2_bytes, slice_bytes);
  s.attr[4] = detail::bin_bytes(static_cast<double>(target_footprint), l2_bytes, slice_bytes);
  return s;
}

}  // namespace cohsim
