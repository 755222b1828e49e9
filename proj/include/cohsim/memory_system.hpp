#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cohsim/address_space.hpp"
#include "cohsim/cache.hpp"
#include "cohsim/coherence.hpp"
#include "cohsim/soc.hpp"

namespace cohsim {

enum class MemLevel : std::uint8_t { L2, LLC, DRAM };

constexpr std::string_view level_name(MemLevel l) {
  switch (l) {
    case MemLevel::L2: return "L2";
    case MemLevel::LLC: return "LLC";
    case MemLevel::DRAM: return "DRAM";
  }
  return "?";
}

// Why a DRAM line transfer happened; monitors distinguish demand traffic and
// eviction writebacks (caused by a device's own requests) from flush
// writebacks (caused by the invocation machinery).
enum class DramCause : std::uint8_t { Demand, EvictionWriteback, FlushWriteback };

struct AccessResult {
  Cycles latency = 0;
  std::uint64_t dram_line_accesses = 0;
  MemLevel served_at = MemLevel::DRAM;
};

struct FlushStats {
  std::uint64_t lines_written_back = 0;
  std::uint64_t lines_invalidated = 0;
  Cycles cycles = 0;
};

class MemorySink {
 public:
  virtual ~MemorySink() = default;
  virtual void dram_lines(int /*tile*/, std::uint64_t /*n*/, int /*agent*/, DramCause /*cause*/,
                          Cycles /*at*/) {}
  virtual void access_done(int /*agent*/, Addr /*addr*/, MemLevel /*served*/, Cycles /*latency*/,
                           Cycles /*at*/) {}
};

// Functional + timing model of the private L2 caches, the LLC slices
// co-located with the memory tiles, and the per-tile DRAM links.
//
// Routing by mode:
//   fully-coh    requester L2 -> owning LLC slice -> DRAM, allocating at each
//                level; a fill from the LLC recalls dirty private copies
//   coh-dma      straight to the owning LLC slice; private holders of the
//                line are recalled (dirty recalls merge into the LLC)
//   llc-coh-dma  straight to the owning LLC slice; no recall (private caches
//                were flushed at invocation start)
//   non-coh-dma  straight to DRAM; no cache is consulted or refilled
//
// The LLC is inclusive of all private caches: an LLC eviction back-invalidates
// private copies. Contention is modeled at the LLC slice ports and the DRAM
// links, which are serialized FIFO resources; NoC link contention is not
// modeled (hops contribute latency only).
class MemorySystem {
 public:
  explicit MemorySystem(const SoCConfig& soc)
      : soc_(soc),
        n_cpus_(soc.cpu_count),
        n_accs_(static_cast<int>(soc.accelerators.size())) {
    for (int c = 0; c < n_cpus_; c++) {
      l2_.emplace_back(
          std::make_unique<SetAssocCache>(soc.l2_bytes, soc.line_bytes, soc.l2_assoc));
      agent_tile_.push_back(soc.cpu_tiles[static_cast<std::size_t>(c)]);
    }
    for (int a = 0; a < n_accs_; a++) {
      if (soc.accelerators[static_cast<std::size_t>(a)].has_private_cache) {
        l2_.emplace_back(
            std::make_unique<SetAssocCache>(soc.l2_bytes, soc.line_bytes, soc.l2_assoc));
      } else {
        l2_.emplace_back(nullptr);
      }
      agent_tile_.push_back(soc.accelerator_tiles[static_cast<std::size_t>(a)]);
    }
    for (int m = 0; m < soc.memory_tile_count; m++) {
      llc_.emplace_back(
          std::make_unique<SetAssocCache>(soc.llc_slice_bytes, soc.line_bytes, soc.llc_assoc));
    }
    llc_busy_.assign(static_cast<std::size_t>(soc.memory_tile_count), 0);
    dram_busy_.assign(static_cast<std::size_t>(soc.memory_tile_count), 0);
  }

  int cpu_agent(int cpu) const { return cpu; }
  int acc_agent(int acc) const { return n_cpus_ + acc; }
  int agent_count() const { return n_cpus_ + n_accs_; }
  bool agent_is_cpu(int agent) const { return agent < n_cpus_; }
  int agent_acc_index(int agent) const { return agent - n_cpus_; }

  void add_sink(MemorySink* s) { sinks_.push_back(s); }
  void set_paranoid(bool on) { paranoid_ = on; }

  bool mode_legal(int agent, CoherenceMode mode) const {
    if (mode != CoherenceMode::FullyCoh) return true;
    return l2_[static_cast<std::size_t>(agent)] != nullptr;
  }

  AccessResult access_line(int agent, Addr addr, bool is_write, CoherenceMode mode, Cycles now) {
    check_addr(addr);
    if (!mode_legal(agent, mode))
      throw std::invalid_argument("access_line: fully-coh illegal for a cache-less device");
    AccessResult r;
    switch (mode) {
      case CoherenceMode::NonCohDma: {
        int tile = tile_of(addr);
        Cycles arrive = now + noc_round_trip(agent, tile);
        Cycles start = std::max(arrive, dram_busy_[static_cast<std::size_t>(tile)]);
        dram_busy_[static_cast<std::size_t>(tile)] = start + line_transfer_cycles();
        emit_dram(tile, 1, agent, DramCause::Demand, start);
        r.latency = (start - now) + soc_.latency.dram_latency_cycles + line_transfer_cycles();
        r.dram_line_accesses = 1;
        r.served_at = MemLevel::DRAM;
        break;
      }
      case CoherenceMode::LlcCohDma:
      case CoherenceMode::CohDma: {
        r = llc_request(agent, addr, /*recall=*/mode == CoherenceMode::CohDma, now);
        if (is_write) llc_for(addr).mark_dirty(line_of(addr), true);
        break;
      }
      case CoherenceMode::FullyCoh: {
        SetAssocCache& l2 = *l2_[static_cast<std::size_t>(agent)];
        std::uint64_t line = line_of(addr);
        if (l2.lookup(line)) {
          if (is_write) l2.mark_dirty(line, true);
          r.latency = soc_.latency.l2_hit_cycles;
          r.dram_line_accesses = 0;
          r.served_at = MemLevel::L2;
          break;
        }
        // L2 miss: fetch through the owning LLC slice, then fill the L2
        r = llc_request(agent, addr, /*recall=*/true, now + soc_.latency.l2_hit_cycles);
        r.latency += soc_.latency.l2_hit_cycles;
        SetAssocCache::Evicted ev = l2.insert(line, is_write);
        holder_inc(line);
        if (ev.valid) {
          holder_dec(ev.line);
          if (ev.dirty) r.dram_line_accesses += writeback_from_l2(ev.line, agent, now);
        }
        break;
      }
    }
    emit_access(agent, addr, r.served_at, r.latency, now);
    if (paranoid_ && !check_inclusion())
      throw std::logic_error("inclusion invariant violated after access_line");
    return r;
  }

  // A DMA burst of line_count consecutive lines starting at addr. For
  // non-coherent DMA the burst pays one DRAM latency plus per-line link
  // occupancy on each memory tile it touches; for the other modes it is
  // equivalent to line_count sequential access_line calls.
  AccessResult dma_burst(int agent, Addr addr, std::uint64_t line_count, bool is_write,
                         CoherenceMode mode, Cycles now) {
    if (line_count == 0) throw std::invalid_argument("dma_burst: line_count must be >= 1");
    check_addr(addr);
    check_addr(addr + line_count * soc_.line_bytes - 1);
    AccessResult r;
    if (mode == CoherenceMode::NonCohDma) {
      int first_tile = tile_of(addr);
      Cycles arrive = now + noc_round_trip(agent, first_tile) + soc_.latency.dram_latency_cycles;
      Cycles done = arrive;
      Addr end = addr + line_count * soc_.line_bytes;
      for (Addr lo = addr; lo < end;) {
        int tile = tile_of(lo);
        Addr hi = std::min(end, static_cast<Addr>(tile + 1) * soc_.partition_bytes);
        std::uint64_t lines = (hi - lo) / soc_.line_bytes;
        Cycles start = std::max(arrive, dram_busy_[static_cast<std::size_t>(tile)]);
        dram_busy_[static_cast<std::size_t>(tile)] = start + lines * line_transfer_cycles();
        emit_dram(tile, lines, agent, DramCause::Demand, start);
        done = std::max(done, dram_busy_[static_cast<std::size_t>(tile)]);
        lo = hi;
      }
      r.latency = done - now;
      r.dram_line_accesses = line_count;
      r.served_at = MemLevel::DRAM;
      emit_access(agent, addr, MemLevel::DRAM, r.latency, now);
    } else {
      Cycles t = now;
      MemLevel deepest = MemLevel::L2;
      for (std::uint64_t i = 0; i < line_count; i++) {
        AccessResult one = access_line(agent, addr + i * soc_.line_bytes, is_write, mode, t);
        t += one.latency;
        r.dram_line_accesses += one.dram_line_accesses;
        if (static_cast<int>(one.served_at) > static_cast<int>(deepest)) deepest = one.served_at;
      }
      r.latency = t - now;
      r.served_at = deepest;
    }
    return r;
  }

  // Write back and invalidate whatever the mode requires before an
  // accelerator starts: llc-coh-dma flushes every private L2; non-coh-dma
  // additionally flushes the LLC slices. Dirty lines are written to DRAM at
  // their owning memory tile. coh-dma and fully-coh need no flush.
  FlushStats flush_for_mode(CoherenceMode mode, Cycles now, int agent = -1) {
    FlushStats st;
    if (mode == CoherenceMode::CohDma || mode == CoherenceMode::FullyCoh) return st;

    Cycles scan = 0;
    std::vector<Cycles> drain = dram_busy_;
    auto flush_cache = [&](SetAssocCache& cache, bool is_private) {
      std::vector<std::pair<std::uint64_t, bool>> lines;
      cache.for_each_line([&](std::uint64_t line, bool dirty) { lines.emplace_back(line, dirty); });
      for (auto [line, dirty] : lines) {
        st.lines_invalidated++;
        scan += soc_.latency.invalidate_line_cycles;
        if (dirty) {
          st.lines_written_back++;
          int tile = tile_of(line * soc_.line_bytes);
          Cycles start = std::max(now, drain[static_cast<std::size_t>(tile)]);
          drain[static_cast<std::size_t>(tile)] = start + line_transfer_cycles();
          emit_dram(tile, 1, agent, DramCause::FlushWriteback, start);
          if (is_private) {
            // memory now holds the data: the inclusive LLC copy is clean
            SetAssocCache& slice = *llc_[static_cast<std::size_t>(tile)];
            if (slice.contains(line)) slice.mark_dirty(line, false);
          }
        }
        cache.invalidate(line);
        if (is_private) holder_dec(line);
      }
    };

    for (auto& l2 : l2_) {
      if (l2) flush_cache(*l2, /*is_private=*/true);
    }
    if (mode == CoherenceMode::NonCohDma) {
      for (auto& slice : llc_) flush_cache(*slice, /*is_private=*/false);
    }
    dram_busy_ = drain;
    Cycles drained = now;
    for (Cycles t : drain) drained = std::max(drained, t);
    st.cycles = std::max(now + scan, drained) - now;
    if (paranoid_ && !check_inclusion())
      throw std::logic_error("inclusion invariant violated after flush");
    return st;
  }

  // Simulated CPU initialization of a buffer: stores every line through the
  // CPU's private cache, leaving the data warm (and dirty) to the extent
  // capacity allows. Full-line initializing stores validate the line without
  // fetching it from DRAM; capacity evictions still write back as usual.
  // Returns elapsed cycles.
  Cycles cpu_warmup(Addr base, std::uint64_t bytes, int cpu, Cycles now) {
    return warmup_lines(base, bytes / soc_.line_bytes, cpu, now);
  }

  // Warmup restricted to a line range; the engine interleaves warmup in
  // chunks so concurrent threads contend realistically.
  Cycles warmup_lines(Addr base, std::uint64_t line_count, int cpu, Cycles now) {
    Cycles t = now;
    for (std::uint64_t i = 0; i < line_count; i++) {
      t += store_validate_line(cpu_agent(cpu), base + i * soc_.line_bytes, t);
    }
    return t - now;
  }

  // --- introspection for tests ---

  bool check_inclusion() const {
    bool ok = true;
    for (const auto& l2 : l2_) {
      if (!l2) continue;
      l2->for_each_line([&](std::uint64_t line, bool) {
        const SetAssocCache& slice = *llc_[static_cast<std::size_t>(tile_of(line * soc_.line_bytes))];
        if (!slice.contains(line)) ok = false;
      });
    }
    return ok;
  }

  std::uint64_t cache_state_hash() const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    for (const auto& l2 : l2_) mix(l2 ? l2->state_hash() : 0);
    for (const auto& slice : llc_) mix(slice->state_hash());
    return h;
  }

  SetAssocCache* private_cache(int agent) { return l2_[static_cast<std::size_t>(agent)].get(); }
  const SetAssocCache* private_cache(int agent) const {
    return l2_[static_cast<std::size_t>(agent)].get();
  }
  SetAssocCache& llc_slice(int tile) { return *llc_[static_cast<std::size_t>(tile)]; }
  int tile_of(Addr addr) const { return static_cast<int>(addr / soc_.partition_bytes); }
  const SoCConfig& soc() const { return soc_; }

 private:
  std::uint64_t line_of(Addr addr) const { return addr / soc_.line_bytes; }
  Cycles line_transfer_cycles() const {
    return (soc_.line_bytes + soc_.latency.mem_link_bytes_per_cycle - 1) /
           soc_.latency.mem_link_bytes_per_cycle;
  }
  SetAssocCache& llc_for(Addr addr) { return *llc_[static_cast<std::size_t>(tile_of(addr))]; }

  void check_addr(Addr addr) const {
    if (tile_of(addr) >= static_cast<int>(llc_.size()))
      throw std::out_of_range("address outside the partitioned address space");
  }

  Cycles noc_round_trip(int agent, int mem_tile) const {
    int hops = soc_.hops(agent_tile_[static_cast<std::size_t>(agent)],
                         soc_.memory_tiles[static_cast<std::size_t>(mem_tile)]);
    return 2ULL * static_cast<Cycles>(hops) * soc_.latency.noc_hop_cycles;
  }

  void emit_dram(int tile, std::uint64_t n, int agent, DramCause cause, Cycles at) {
    for (MemorySink* s : sinks_) s->dram_lines(tile, n, agent, cause, at);
  }
  void emit_access(int agent, Addr addr, MemLevel served, Cycles latency, Cycles at) {
    for (MemorySink* s : sinks_) s->access_done(agent, addr, served, latency, at);
  }

  // Whole-line store that validates the line in the writer's private cache
  // without a DRAM fetch. Stale copies elsewhere are invalidated; inclusion
  // is kept by allocating in the owning LLC slice.
  Cycles store_validate_line(int agent, Addr addr, Cycles now) {
    SetAssocCache& l2 = *l2_[static_cast<std::size_t>(agent)];
    std::uint64_t line = line_of(addr);
    if (l2.lookup(line)) {
      l2.mark_dirty(line, true);
      emit_access(agent, addr, MemLevel::L2, soc_.latency.l2_hit_cycles, now);
      return soc_.latency.l2_hit_cycles;
    }
    int tile = tile_of(addr);
    SetAssocCache& slice = *llc_[static_cast<std::size_t>(tile)];
    Cycles lat = soc_.latency.l2_hit_cycles + noc_round_trip(agent, tile);
    Cycles arrive = now + lat;
    Cycles start = std::max(arrive, llc_busy_[static_cast<std::size_t>(tile)]);
    llc_busy_[static_cast<std::size_t>(tile)] = start + soc_.latency.llc_access_cycles;
    lat += (start - arrive) + soc_.latency.llc_access_cycles;

    if (any_private_holder(line)) {
      for (int b = 0; b < agent_count(); b++) {
        if (b == agent) continue;
        SetAssocCache* pc = l2_[static_cast<std::size_t>(b)].get();
        if (!pc || !pc->contains(line)) continue;
        pc->invalidate(line);
        holder_dec(line);
        lat += soc_.latency.invalidate_line_cycles;
      }
    }
    if (!slice.lookup(line)) {
      SetAssocCache::Evicted ev = slice.insert(line, false);
      if (ev.valid) evict_llc_victim(ev, tile, agent, now + lat);
    }
    SetAssocCache::Evicted ev = l2.insert(line, /*dirty=*/true);
    holder_inc(line);
    if (ev.valid) {
      holder_dec(ev.line);
      if (ev.dirty) writeback_from_l2(ev.line, agent, now);
    }
    emit_access(agent, addr, MemLevel::LLC, lat, now);
    return lat;
  }

  // Request serviced at the owning LLC slice. With recall enabled, private
  // copies of the line are pulled back (invalidated; dirty data merges into
  // the slice) before the lookup resolves. Allocates in the slice on a miss.
  AccessResult llc_request(int agent, Addr addr, bool recall, Cycles now) {
    AccessResult r;
    int tile = tile_of(addr);
    std::uint64_t line = line_of(addr);
    SetAssocCache& slice = *llc_[static_cast<std::size_t>(tile)];

    Cycles lat = noc_round_trip(agent, tile);
    Cycles arrive = now + lat;
    Cycles start = std::max(arrive, llc_busy_[static_cast<std::size_t>(tile)]);
    llc_busy_[static_cast<std::size_t>(tile)] = start + soc_.latency.llc_access_cycles;
    lat += (start - arrive) + soc_.latency.llc_access_cycles;

    if (recall && any_private_holder(line)) {
      for (int b = 0; b < agent_count(); b++) {
        if (b == agent) continue;
        SetAssocCache* pc = l2_[static_cast<std::size_t>(b)].get();
        if (!pc || !pc->contains(line)) continue;
        int rh = soc_.hops(soc_.memory_tiles[static_cast<std::size_t>(tile)],
                           agent_tile_[static_cast<std::size_t>(b)]);
        lat += 2ULL * static_cast<Cycles>(rh) * soc_.latency.noc_hop_cycles +
               soc_.latency.recall_extra_cycles;
        bool was_dirty = false;
        pc->invalidate(line, &was_dirty);
        holder_dec(line);
        if (was_dirty && slice.contains(line)) slice.mark_dirty(line, true);
      }
    }

    if (slice.lookup(line)) {
      r.served_at = MemLevel::LLC;
    } else {
      Cycles fetch_arrive = now + lat;
      Cycles fstart = std::max(fetch_arrive, dram_busy_[static_cast<std::size_t>(tile)]);
      dram_busy_[static_cast<std::size_t>(tile)] = fstart + line_transfer_cycles();
      emit_dram(tile, 1, agent, DramCause::Demand, fstart);
      lat += (fstart - fetch_arrive) + soc_.latency.dram_latency_cycles + line_transfer_cycles();
      r.dram_line_accesses += 1;
      SetAssocCache::Evicted ev = slice.insert(line, false);
      if (ev.valid) r.dram_line_accesses += evict_llc_victim(ev, tile, agent, now + lat);
      r.served_at = MemLevel::DRAM;
    }
    r.latency = lat;
    return r;
  }

  // Inclusive-LLC eviction: back-invalidate private copies; if the victim or
  // any private copy was dirty, one line goes back to DRAM (posted write, no
  // requester latency). Returns the number of DRAM lines written.
  std::uint64_t evict_llc_victim(const SetAssocCache::Evicted& ev, int tile, int agent,
                                 Cycles now) {
    bool dirty = ev.dirty;
    if (any_private_holder(ev.line)) {
      for (auto& pc : l2_) {
        if (!pc) continue;
        bool was_dirty = false;
        if (pc->invalidate(ev.line, &was_dirty)) {
          holder_dec(ev.line);
          if (was_dirty) dirty = true;
        }
      }
    }
    if (!dirty) return 0;
    Cycles start = std::max(now, dram_busy_[static_cast<std::size_t>(tile)]);
    dram_busy_[static_cast<std::size_t>(tile)] = start + line_transfer_cycles();
    emit_dram(tile, 1, agent, DramCause::EvictionWriteback, start);
    return 1;
  }

  // Dirty L2 victim written back into its owning LLC slice (on-chip, posted).
  // Inclusion guarantees the slice still holds the line; if it does not, the
  // write goes to DRAM so no update is lost.
  std::uint64_t writeback_from_l2(std::uint64_t line, int agent, Cycles now) {
    int tile = tile_of(line * soc_.line_bytes);
    SetAssocCache& slice = *llc_[static_cast<std::size_t>(tile)];
    if (slice.contains(line)) {
      slice.mark_dirty(line, true);
      return 0;
    }
    Cycles start = std::max(now, dram_busy_[static_cast<std::size_t>(tile)]);
    dram_busy_[static_cast<std::size_t>(tile)] = start + line_transfer_cycles();
    emit_dram(tile, 1, agent, DramCause::EvictionWriteback, start);
    return 1;
  }

  // presence index over all private caches; keeps recall checks and
  // back-invalidations O(1) on the common no-holder path
  bool any_private_holder(std::uint64_t line) const {
    return private_holders_.find(line) != private_holders_.end();
  }
  void holder_inc(std::uint64_t line) { private_holders_[line]++; }
  void holder_dec(std::uint64_t line) {
    auto it = private_holders_.find(line);
    if (it == private_holders_.end())
      throw std::logic_error("private-holder index out of sync");
    if (--it->second == 0) private_holders_.erase(it);
  }

  const SoCConfig& soc_;
  int n_cpus_;
  int n_accs_;
  std::vector<std::unique_ptr<SetAssocCache>> l2_;  // indexed by agent
  std::vector<std::unique_ptr<SetAssocCache>> llc_;  // indexed by memory tile
  std::vector<TilePos> agent_tile_;
  std::vector<Cycles> llc_busy_;
  std::vector<Cycles> dram_busy_;
  std::vector<MemorySink*> sinks_;
  std::unordered_map<std::uint64_t, std::uint32_t> private_holders_;
  bool paranoid_ = false;
};

}  // namespace cohsim
