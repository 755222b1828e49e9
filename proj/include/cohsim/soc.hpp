#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "cohsim/coherence.hpp"
#include "cohsim/config_file.hpp"

namespace cohsim {

struct TilePos {
  int row = 0;
  int col = 0;
  bool operator==(const TilePos&) const = default;
};

// Manhattan distance on the 2D mesh; one hop per router-to-router link.
inline int noc_distance(TilePos a, TilePos b, int rows, int cols) {
  if (a.row < 0 || a.row >= rows || a.col < 0 || a.col >= cols ||
      b.row < 0 || b.row >= rows || b.col < 0 || b.col >= cols) {
    throw std::out_of_range("noc_distance: position outside the mesh");
  }
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

struct LatencyParams {
  Cycles l2_hit_cycles = 2;
  Cycles llc_access_cycles = 8;
  Cycles dram_latency_cycles = 100;
  Cycles noc_hop_cycles = 1;
  std::uint64_t mem_link_bytes_per_cycle = 4;
  Cycles recall_extra_cycles = 4;
  Cycles invalidate_line_cycles = 2;
  // per-invocation software costs (driver/setup and decision bookkeeping)
  Cycles invocation_setup_cycles = 10000;
  Cycles decision_overhead_cycles = 200;
};

struct AcceleratorSpec {
  std::string device_id;
  std::string kind;  // traffic profile name
  bool has_private_cache = true;
  std::optional<TilePos> tile_position;  // resolved during load if absent
};

struct SoCConfig {
  std::string name;
  int noc_rows = 0;
  int noc_cols = 0;
  int cpu_count = 0;
  std::vector<AcceleratorSpec> accelerators;
  int memory_tile_count = 0;
  std::uint64_t llc_slice_bytes = 0;
  std::uint64_t l2_bytes = 0;
  std::uint64_t line_bytes = 64;
  std::uint32_t l2_assoc = 4;
  std::uint32_t llc_assoc = 16;
  std::uint64_t partition_bytes = 64ULL * 1024 * 1024;  // DRAM behind each memory tile
  LatencyParams latency;

  // resolved tile layout
  std::vector<TilePos> cpu_tiles;
  std::vector<TilePos> accelerator_tiles;
  std::vector<TilePos> memory_tiles;

  std::uint64_t total_llc_bytes() const {
    return static_cast<std::uint64_t>(memory_tile_count) * llc_slice_bytes;
  }

  int hops(TilePos a, TilePos b) const { return noc_distance(a, b, noc_rows, noc_cols); }

  int accelerator_index(const std::string& device_id) const {
    for (std::size_t i = 0; i < accelerators.size(); i++) {
      if (accelerators[i].device_id == device_id) return static_cast<int>(i);
    }
    throw ConfigError("unknown accelerator device_id: " + device_id);
  }

  std::vector<CoherenceMode> legal_modes(int acc_index) const {
    std::vector<CoherenceMode> out;
    for (CoherenceMode m : kAllModes) {
      if (m == CoherenceMode::FullyCoh && !accelerators[acc_index].has_private_cache) continue;
      out.push_back(m);
    }
    return out;
  }
};

namespace detail {

// Places CPUs, accelerators, and memory tiles on the mesh. Explicitly
// positioned accelerators are pinned first; everything else fills the free
// tiles row-major in order: accelerators, CPUs, memory tiles.
inline void resolve_layout(SoCConfig& soc) {
  const int total = soc.noc_rows * soc.noc_cols;
  std::vector<bool> used(static_cast<std::size_t>(total), false);
  auto mark = [&](TilePos p, const std::string& what) {
    int idx = p.row * soc.noc_cols + p.col;
    if (p.row < 0 || p.row >= soc.noc_rows || p.col < 0 || p.col >= soc.noc_cols)
      throw ConfigError(what + ": tile_position outside the mesh");
    if (used[static_cast<std::size_t>(idx)])
      throw ConfigError(what + ": tile_position already occupied");
    used[static_cast<std::size_t>(idx)] = true;
  };

  soc.accelerator_tiles.assign(soc.accelerators.size(), TilePos{});
  std::vector<std::size_t> unplaced;
  for (std::size_t i = 0; i < soc.accelerators.size(); i++) {
    if (soc.accelerators[i].tile_position) {
      soc.accelerator_tiles[i] = *soc.accelerators[i].tile_position;
      mark(soc.accelerator_tiles[i], soc.accelerators[i].device_id);
    } else {
      unplaced.push_back(i);
    }
  }

  int cursor = 0;
  auto next_free = [&]() {
    while (cursor < total && used[static_cast<std::size_t>(cursor)]) cursor++;
    if (cursor >= total) throw ConfigError("topology: more tiles requested than the mesh holds");
    used[static_cast<std::size_t>(cursor)] = true;
    return TilePos{cursor / soc.noc_cols, cursor % soc.noc_cols};
  };

  for (std::size_t i : unplaced) soc.accelerator_tiles[i] = next_free();
  for (int c = 0; c < soc.cpu_count; c++) soc.cpu_tiles.push_back(next_free());
  for (int m = 0; m < soc.memory_tile_count; m++) soc.memory_tiles.push_back(next_free());
}

}  // namespace detail

inline void validate_soc(SoCConfig& soc) {
  auto positive = [&](std::int64_t v, const std::string& field) {
    if (v <= 0) throw ConfigError(soc.name + ": " + field + " must be positive");
  };
  positive(soc.noc_rows, "noc_rows");
  positive(soc.noc_cols, "noc_cols");
  positive(soc.cpu_count, "cpu_count");
  positive(soc.memory_tile_count, "memory_tile_count");
  positive(static_cast<std::int64_t>(soc.llc_slice_bytes), "llc_slice_bytes");
  positive(static_cast<std::int64_t>(soc.l2_bytes), "l2_bytes");
  positive(static_cast<std::int64_t>(soc.line_bytes), "line_bytes");

  const long long tiles_needed = soc.cpu_count + static_cast<long long>(soc.accelerators.size()) +
                                 soc.memory_tile_count;
  if (tiles_needed > static_cast<long long>(soc.noc_rows) * soc.noc_cols) {
    throw ConfigError(soc.name + ": topology: " + std::to_string(tiles_needed) +
                      " tiles requested on a " + std::to_string(soc.noc_rows) + "x" +
                      std::to_string(soc.noc_cols) + " mesh");
  }
  if (!is_power_of_two(soc.llc_slice_bytes))
    throw ConfigError(soc.name + ": llc_slice_bytes must be a power of two");
  if (!is_power_of_two(soc.l2_bytes))
    throw ConfigError(soc.name + ": l2_bytes must be a power of two");
  if (!is_power_of_two(soc.line_bytes))
    throw ConfigError(soc.name + ": line_bytes must be a power of two");
  if (soc.l2_bytes >= soc.llc_slice_bytes)
    throw ConfigError(soc.name + ": l2_bytes must be smaller than llc_slice_bytes");
  if (soc.partition_bytes % soc.line_bytes != 0)
    throw ConfigError(soc.name + ": partition_bytes must be line-aligned");

  const LatencyParams& lp = soc.latency;
  if (lp.l2_hit_cycles == 0 || lp.llc_access_cycles == 0 || lp.dram_latency_cycles == 0 ||
      lp.noc_hop_cycles == 0 || lp.mem_link_bytes_per_cycle == 0 ||
      lp.recall_extra_cycles == 0 || lp.invalidate_line_cycles == 0) {
    throw ConfigError(soc.name + ": latency: all latency parameters must be strictly positive");
  }

  for (std::size_t i = 0; i < soc.accelerators.size(); i++) {
    if (soc.accelerators[i].device_id.empty())
      throw ConfigError(soc.name + ": accelerators[" + std::to_string(i) + "]: missing id");
    for (std::size_t j = 0; j < i; j++) {
      if (soc.accelerators[j].device_id == soc.accelerators[i].device_id)
        throw ConfigError(soc.name + ": duplicate device_id " + soc.accelerators[i].device_id);
    }
  }

  detail::resolve_layout(soc);
}

inline SoCConfig parse_soc_config(const json& j, const std::string& origin) {
  SoCConfig soc;
  soc.name = get_or<std::string>(j, "name", origin);
  if (!j.contains("topology")) throw ConfigError(origin + ": missing section topology");
  const json& topo = j.at("topology");
  soc.noc_rows = get_or<int>(topo, "noc_rows", 0);
  soc.noc_cols = get_or<int>(topo, "noc_cols", 0);
  soc.cpu_count = get_or<int>(topo, "cpu_count", 0);
  soc.memory_tile_count = get_or<int>(topo, "memory_tile_count", 0);

  if (!j.contains("caches")) throw ConfigError(origin + ": missing section caches");
  const json& caches = j.at("caches");
  soc.llc_slice_bytes = require_size(caches, "llc_slice_bytes");
  soc.l2_bytes = require_size(caches, "l2_bytes");
  soc.line_bytes = get_size(caches, "line_bytes", 64);
  soc.l2_assoc = get_or<std::uint32_t>(caches, "l2_assoc", 4);
  soc.llc_assoc = get_or<std::uint32_t>(caches, "llc_assoc", 16);

  if (j.contains("latency")) {
    const json& lat = j.at("latency");
    LatencyParams& lp = soc.latency;
    lp.l2_hit_cycles = get_or<Cycles>(lat, "l2_hit_cycles", lp.l2_hit_cycles);
    lp.llc_access_cycles = get_or<Cycles>(lat, "llc_access_cycles", lp.llc_access_cycles);
    lp.dram_latency_cycles = get_or<Cycles>(lat, "dram_latency_cycles", lp.dram_latency_cycles);
    lp.noc_hop_cycles = get_or<Cycles>(lat, "noc_hop_cycles", lp.noc_hop_cycles);
    lp.mem_link_bytes_per_cycle =
        get_or<std::uint64_t>(lat, "mem_link_bytes_per_cycle", lp.mem_link_bytes_per_cycle);
    lp.recall_extra_cycles = get_or<Cycles>(lat, "recall_extra_cycles", lp.recall_extra_cycles);
    lp.invalidate_line_cycles =
        get_or<Cycles>(lat, "invalidate_line_cycles", lp.invalidate_line_cycles);
    lp.invocation_setup_cycles =
        get_or<Cycles>(lat, "invocation_setup_cycles", lp.invocation_setup_cycles);
    lp.decision_overhead_cycles =
        get_or<Cycles>(lat, "decision_overhead_cycles", lp.decision_overhead_cycles);
  }
  if (j.contains("memory")) {
    soc.partition_bytes = get_size(j.at("memory"), "partition_bytes", soc.partition_bytes);
  }

  if (!j.contains("accelerators")) throw ConfigError(origin + ": missing section accelerators");
  for (const json& a : j.at("accelerators")) {
    AcceleratorSpec spec;
    spec.device_id = get_or<std::string>(a, "id", "");
    spec.kind = get_or<std::string>(a, "kind", "");
    if (spec.kind.empty())
      throw ConfigError(origin + ": accelerator " + spec.device_id + ": missing kind");
    spec.has_private_cache = get_or<bool>(a, "private_cache", true);
    if (a.contains("tile_position")) {
      const json& tp = a.at("tile_position");
      spec.tile_position = TilePos{tp.at(0).get<int>(), tp.at(1).get<int>()};
    }
    soc.accelerators.push_back(std::move(spec));
  }

  validate_soc(soc);
  return soc;
}

inline SoCConfig load_soc_config(const std::string& path) {
  return parse_soc_config(load_json_file(path), path);
}

}  // namespace cohsim
