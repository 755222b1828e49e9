#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cohsim/memory_system.hpp"

namespace cohsim {

struct InvocationCounters {
  Cycles start_time = 0;
  Cycles end_time = 0;
  Cycles total_cycles = 0;  // end_time - start_time; includes setup and flush
  Cycles comm_cycles = 0;   // cycles with a memory operation outstanding
  Cycles flush_cycles = 0;
  double ddr_attributed = 0.0;   // footprint-proportional share of tile deltas
  std::uint64_t ddr_true = 0;    // demand + eviction lines caused by the device
  std::uint64_t ddr_flush = 0;   // flush writebacks triggered by this invocation
  std::vector<std::uint64_t> window_ddr_per_tile;  // tile deltas over the window
};

// Snapshot of the per-tile attribution inputs for one device, matching the
// monitor's view at a sampling boundary.
struct AttributionInput {
  // (agent, footprint bytes at the tile) for every active accelerator there
  std::vector<std::pair<int, std::uint64_t>> active;
  std::uint64_t ddr_total = 0;  // observed delta at the tile
};

// Share of a tile's access delta assigned to device k: proportional to its
// active footprint at that tile.
inline double attribute_ddr(int k, const AttributionInput& input) {
  std::uint64_t denom = 0;
  std::uint64_t own = 0;
  bool found = false;
  for (auto [agent, fp] : input.active) {
    denom += fp;
    if (agent == k) {
      own = fp;
      found = true;
    }
  }
  if (!found || own == 0) throw std::invalid_argument("attribute_ddr: device not active at tile");
  if (denom == 0) throw std::invalid_argument("attribute_ddr: zero aggregate footprint");
  return static_cast<double>(input.ddr_total) * static_cast<double>(own) /
         static_cast<double>(denom);
}

// Simulator counterpart of the hardware monitoring system: per-tile DRAM
// access counters plus per-invocation windows. Counter deltas between
// sampling boundaries (any invocation start or end) are attributed to the
// invocations open during that window, proportionally to their footprint at
// each tile.
class Monitors : public MemorySink {
 public:
  explicit Monitors(int tiles) : ddr_total_(static_cast<std::size_t>(tiles), 0) {}

  // --- MemorySink ---
  void dram_lines(int tile, std::uint64_t n, int agent, DramCause cause, Cycles) override {
    ddr_total_[static_cast<std::size_t>(tile)] += n;
    auto it = open_.find(agent);
    if (it == open_.end()) return;  // background / CPU traffic
    if (cause == DramCause::FlushWriteback) {
      it->second.counters.ddr_flush += n;
    } else {
      it->second.counters.ddr_true += n;
    }
  }

  void access_done(int agent, Addr, MemLevel, Cycles latency, Cycles) override {
    auto it = open_.find(agent);
    if (it == open_.end()) return;
    it->second.counters.comm_cycles += latency;
  }

  // --- invocation windows ---
  void open_invocation(int agent, const std::vector<std::uint64_t>& fp_per_tile, Cycles now) {
    if (open_.count(agent)) throw std::logic_error("monitors: invocation already open");
    sample_boundary();
    OpenInv inv;
    inv.fp_per_tile = fp_per_tile;
    inv.counters.start_time = now;
    inv.counters.window_ddr_per_tile.assign(ddr_total_.size(), 0);
    open_.emplace(agent, std::move(inv));
  }

  InvocationCounters close_invocation(int agent, Cycles now) {
    auto it = open_.find(agent);
    if (it == open_.end()) throw std::logic_error("monitors: no open invocation for device");
    sample_boundary();
    InvocationCounters c = it->second.counters;
    c.end_time = now;
    c.total_cycles = now - c.start_time;
    open_.erase(it);
    return c;
  }

  bool invocation_open(int agent) const { return open_.count(agent) > 0; }

  void add_flush_cycles(int agent, Cycles c) {
    open_.at(agent).counters.flush_cycles += c;
  }

  std::uint64_t ddr_total(int tile) const { return ddr_total_[static_cast<std::size_t>(tile)]; }
  std::uint64_t ddr_total_all() const {
    std::uint64_t n = 0;
    for (std::uint64_t v : ddr_total_) n += v;
    return n;
  }

 private:
  struct OpenInv {
    std::vector<std::uint64_t> fp_per_tile;
    InvocationCounters counters;
  };

  // Attribute the per-tile deltas since the previous boundary to the
  // currently open invocations. The last share at each tile is assigned by
  // remainder so the attributed total conserves the observed delta exactly.
  void sample_boundary() {
    if (last_snapshot_.size() != ddr_total_.size()) {
      last_snapshot_ = ddr_total_;
      return;
    }
    for (std::size_t t = 0; t < ddr_total_.size(); t++) {
      std::uint64_t delta = ddr_total_[t] - last_snapshot_[t];
      if (delta == 0) continue;
      std::uint64_t denom = 0;
      for (auto& [agent, inv] : open_) denom += inv.fp_per_tile[t];
      if (denom == 0) continue;  // nothing active here: background traffic
      double assigned = 0.0;
      std::size_t with_fp = 0, seen = 0;
      for (auto& [agent, inv] : open_)
        if (inv.fp_per_tile[t] > 0) with_fp++;
      for (auto& [agent, inv] : open_) {
        std::uint64_t fp = inv.fp_per_tile[t];
        if (fp == 0) continue;
        seen++;
        double share;
        if (seen == with_fp) {
          share = static_cast<double>(delta) - assigned;
        } else {
          share = static_cast<double>(delta) * static_cast<double>(fp) /
                  static_cast<double>(denom);
          assigned += share;
        }
        inv.counters.ddr_attributed += share;
        inv.counters.window_ddr_per_tile[t] += delta;
      }
    }
    last_snapshot_ = ddr_total_;
  }

  std::vector<std::uint64_t> ddr_total_;
  std::vector<std::uint64_t> last_snapshot_;
  std::map<int, OpenInv> open_;
};

// Writes one line per memory event; enabled by a CLI flag and consumed by
// trace-replay tests.
class EventLogSink : public MemorySink {
 public:
  explicit EventLogSink(std::ostream& out) : out_(out) {}

  void dram_lines(int tile, std::uint64_t n, int agent, DramCause cause, Cycles at) override {
    const char* c = cause == DramCause::Demand ? "demand"
                    : cause == DramCause::EvictionWriteback ? "evict-wb"
                                                            : "flush-wb";
    out_ << at << " dram tile=" << tile << " lines=" << n << " agent=" << agent << " cause=" << c
         << "\n";
  }
  void access_done(int agent, Addr addr, MemLevel served, Cycles latency, Cycles at) override {
    out_ << at << " access agent=" << agent << " addr=0x" << std::hex << addr << std::dec
         << " level=" << level_name(served) << " latency=" << latency << "\n";
  }

 private:
  std::ostream& out_;
};

}  // namespace cohsim
