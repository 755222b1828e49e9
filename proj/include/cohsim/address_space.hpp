#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cohsim/coherence.hpp"

namespace cohsim {

// One contiguous allocation in the global address space.
struct Allocation {
  Addr base = 0;
  std::uint64_t size = 0;
  // bytes of this allocation mapped to each memory tile
  std::vector<std::uint64_t> bytes_per_tile;

  struct Range {
    int tile;
    Addr lo;  // inclusive
    Addr hi;  // exclusive
  };
  std::vector<Range> ranges;  // per-tile byte ranges, ascending

  std::uint64_t footprint() const { return size; }
};

// Carves contiguous ranges out of a global address space that is statically
// partitioned into memory_tile_count equal regions. The allocation cursor
// advances round-robin across partitions; an allocation that does not fit
// before a partition boundary spills into the next partition.
class PartitionAllocator {
 public:
  PartitionAllocator(int tiles, std::uint64_t partition_bytes)
      : partition_bytes_(partition_bytes), cursors_(static_cast<std::size_t>(tiles), 0) {
    for (int t = 0; t < tiles; t++) cursors_[static_cast<std::size_t>(t)] = base_of(t);
  }

  int tiles() const { return static_cast<int>(cursors_.size()); }
  Addr base_of(int tile) const { return static_cast<Addr>(tile) * partition_bytes_; }
  Addr end_of(int tile) const { return base_of(tile) + partition_bytes_; }
  Addr space_end() const { return end_of(tiles() - 1); }
  int tile_of(Addr addr) const { return static_cast<int>(addr / partition_bytes_); }

  Allocation allocate(std::uint64_t footprint) {
    if (footprint == 0) throw std::invalid_argument("allocate: footprint must be positive");
    Addr start = find_start(footprint);
    if (start + footprint > space_end()) {
      if (active_ == 0) {
        // all prior allocations were freed: wrap to a clean address space
        reset();
        start = find_start(footprint);
      }
      if (start + footprint > space_end())
        throw std::runtime_error("allocate: address space exhausted");
    }

    Allocation a;
    a.base = start;
    a.size = footprint;
    a.bytes_per_tile.assign(static_cast<std::size_t>(tiles()), 0);
    Addr end = start + footprint;
    for (int t = tile_of(start); t <= tile_of(end - 1); t++) {
      Addr lo = std::max(start, base_of(t));
      Addr hi = std::min(end, end_of(t));
      a.bytes_per_tile[static_cast<std::size_t>(t)] = hi - lo;
      a.ranges.push_back({t, lo, hi});
      // bump the cursor of every partition the allocation touches so later
      // allocations cannot overlap the spilled bytes
      cursors_[static_cast<std::size_t>(t)] = std::max(cursors_[static_cast<std::size_t>(t)], hi);
    }
    rr_ = (rr_ + 1) % tiles();
    active_++;
    return a;
  }

  void free(const Allocation&) {
    if (active_ == 0) throw std::logic_error("free: no active allocations");
    active_--;
  }

  void reset() {
    for (int t = 0; t < tiles(); t++) cursors_[static_cast<std::size_t>(t)] = base_of(t);
    rr_ = 0;
    active_ = 0;
  }

  int active_allocations() const { return active_; }

 private:
  Addr find_start(std::uint64_t footprint) const {
    Addr start = cursors_[static_cast<std::size_t>(rr_)];
    // an allocation starting near the end of partition rr_ may run into
    // addresses already handed out from later partitions; skip past them
    for (;;) {
      Addr end = start + footprint;
      Addr bumped = start;
      for (int t = tile_of(start); t < tiles() && base_of(t) < end; t++) {
        Addr cur = cursors_[static_cast<std::size_t>(t)];
        if (start < cur && end > base_of(t)) bumped = std::max(bumped, cur);
      }
      if (bumped == start) return start;
      start = bumped;
    }
  }

  std::uint64_t partition_bytes_;
  std::vector<Addr> cursors_;
  int rr_ = 0;
  int active_ = 0;
};

}  // namespace cohsim
