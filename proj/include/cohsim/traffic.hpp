#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohsim/coherence.hpp"
#include "cohsim/config_file.hpp"
#include "cohsim/rng.hpp"

namespace cohsim {

enum class AccessPattern : std::uint8_t { Streaming, Strided, Irregular };

inline std::string_view pattern_name(AccessPattern p) {
  switch (p) {
    case AccessPattern::Streaming: return "streaming";
    case AccessPattern::Strided: return "strided";
    case AccessPattern::Irregular: return "irregular";
  }
  return "?";
}

// Communication-property knobs a synthetic accelerator invocation is built
// from: access pattern, burst length, compute per burst, data reuse,
// read-to-write ratio, stride (strided only), touched fraction (irregular
// only), and whether outputs overwrite inputs.
struct TrafficConfig {
  AccessPattern pattern = AccessPattern::Streaming;
  std::uint64_t burst_len = 16;        // lines per DMA burst
  Cycles compute_duration = 0;         // pure compute cycles after each burst
  std::uint32_t reuse_factor = 1;      // times the input region is re-read
  double rw_ratio = 0.5;               // fraction of accesses that are reads
  std::uint64_t stride_len = 1;        // lines between burst windows
  double access_fraction = 1.0;        // fraction of footprint touched
  bool in_place = false;               // outputs overwrite inputs

  void validate() const {
    if (burst_len < 1) throw std::invalid_argument("traffic: burst_len must be >= 1");
    if (reuse_factor < 1) throw std::invalid_argument("traffic: reuse_factor must be >= 1");
    if (stride_len < 1) throw std::invalid_argument("traffic: stride_len must be >= 1");
    if (!(rw_ratio > 0.0 && rw_ratio <= 1.0))
      throw std::invalid_argument("traffic: rw_ratio must be in (0, 1]");
    if (!(access_fraction > 0.0 && access_fraction <= 1.0))
      throw std::invalid_argument("traffic: access_fraction must be in (0, 1]");
  }
};

struct TraceOp {
  enum class Kind : std::uint8_t { Burst, Compute } kind;
  // Burst
  std::uint64_t offset_lines = 0;
  std::uint64_t line_count = 0;
  bool is_write = false;
  // Compute
  Cycles cycles = 0;

  static TraceOp burst(std::uint64_t offset, std::uint64_t lines, bool write) {
    TraceOp op{Kind::Burst};
    op.offset_lines = offset;
    op.line_count = lines;
    op.is_write = write;
    return op;
  }
  static TraceOp compute(Cycles c) {
    TraceOp op{Kind::Compute};
    op.cycles = c;
    return op;
  }
};

struct AccessTrace {
  std::vector<TraceOp> ops;
  std::uint64_t footprint_lines = 0;

  std::uint64_t total_lines() const {
    std::uint64_t n = 0;
    for (const TraceOp& op : ops)
      if (op.kind == TraceOp::Kind::Burst) n += op.line_count;
    return n;
  }
  std::uint64_t read_lines() const {
    std::uint64_t n = 0;
    for (const TraceOp& op : ops)
      if (op.kind == TraceOp::Kind::Burst && !op.is_write) n += op.line_count;
    return n;
  }
  Cycles compute_cycles() const {
    Cycles n = 0;
    for (const TraceOp& op : ops)
      if (op.kind == TraceOp::Kind::Compute) n += op.cycles;
    return n;
  }
  std::uint64_t burst_count() const {
    std::uint64_t n = 0;
    for (const TraceOp& op : ops)
      if (op.kind == TraceOp::Kind::Burst) n += 1;
    return n;
  }
};

namespace detail {

// Burst schedule for one pass over a contiguous region: back-to-back bursts
// for streaming, one burst at the head of each stride window for strided.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> dense_pass(
    const TrafficConfig& cfg, std::uint64_t region_lines) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> bursts;
  std::uint64_t step = cfg.pattern == AccessPattern::Strided ? cfg.stride_len : cfg.burst_len;
  for (std::uint64_t off = 0; off < region_lines; off += step) {
    bursts.emplace_back(off, std::min(cfg.burst_len, region_lines - off));
  }
  return bursts;
}

// Distinct burst-aligned slots sampled without replacement, so the number of
// touched lines is access_fraction * region_lines regardless of seed.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> irregular_slots(
    const TrafficConfig& cfg, std::uint64_t region_lines, Rng& rng) {
  std::uint64_t slots = (region_lines + cfg.burst_len - 1) / cfg.burst_len;
  std::uint64_t want_lines = static_cast<std::uint64_t>(
      cfg.access_fraction * static_cast<double>(region_lines) + 0.5);
  want_lines = std::max<std::uint64_t>(want_lines, 1);
  std::uint64_t want_slots = std::min(slots, (want_lines + cfg.burst_len - 1) / cfg.burst_len);
  std::vector<std::uint64_t> pool(slots);
  for (std::uint64_t i = 0; i < slots; i++) pool[i] = i;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> bursts;
  for (std::uint64_t i = 0; i < want_slots; i++) {
    std::uint64_t j = i + rng.next_below(slots - i);
    std::swap(pool[i], pool[j]);
    std::uint64_t off = pool[i] * cfg.burst_len;
    bursts.emplace_back(off, std::min(cfg.burst_len, region_lines - off));
  }
  return bursts;
}

}  // namespace detail

// Builds the per-invocation access trace.
//
// Streaming/strided: reads cover the input region (the first half of the
// footprint, or all of it when in_place) reuse_factor times; writes cover the
// output region, repeated or truncated so the read/write line mix matches
// rw_ratio. Irregular: a seeded sample of burst slots covering
// access_fraction of the whole footprint; reuse passes revisit the same
// slots, and writes update them, so the touched-line count stays at the
// configured fraction. Write bursts are interleaved evenly among the reads
// and every burst is followed by compute_duration cycles of pure compute.
// Deterministic for a given seed.
inline AccessTrace generate_trace(const TrafficConfig& cfg, std::uint64_t footprint_bytes,
                                  std::uint64_t line_bytes, std::uint64_t seed) {
  cfg.validate();
  if (footprint_bytes < cfg.burst_len * line_bytes)
    throw std::invalid_argument("generate_trace: footprint smaller than one burst");
  std::uint64_t total_lines = footprint_bytes / line_bytes;
  bool split = !cfg.in_place && cfg.pattern != AccessPattern::Irregular;
  if (total_lines < 2 && split)
    throw std::invalid_argument("generate_trace: footprint too small to split input/output");

  std::uint64_t input_base = 0;
  std::uint64_t input_lines = split ? total_lines / 2 : total_lines;
  std::uint64_t output_base = split ? input_lines : 0;
  std::uint64_t output_lines = split ? total_lines - input_lines : total_lines;
  if (input_lines < cfg.burst_len)
    throw std::invalid_argument("generate_trace: input region smaller than one burst");

  Rng rng(seed);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> slots;
  if (cfg.pattern == AccessPattern::Irregular) {
    slots = detail::irregular_slots(cfg, input_lines, rng);
  } else {
    slots = detail::dense_pass(cfg, input_lines);
  }

  std::vector<TraceOp> reads;
  std::uint64_t read_total = 0;
  std::vector<std::size_t> order(slots.size());
  for (std::size_t i = 0; i < order.size(); i++) order[i] = i;
  for (std::uint32_t pass = 0; pass < cfg.reuse_factor; pass++) {
    if (cfg.pattern == AccessPattern::Irregular && pass > 0) {
      // revisit the same slots in a fresh order
      for (std::size_t i = 0; i + 1 < order.size(); i++) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(order.size() - i));
        std::swap(order[i], order[j]);
      }
    }
    for (std::size_t i : order) {
      reads.push_back(TraceOp::burst(input_base + slots[i].first, slots[i].second, false));
      read_total += slots[i].second;
    }
  }

  // number of written lines implied by the rw ratio: r = R / (R + W)
  std::uint64_t write_total = static_cast<std::uint64_t>(
      static_cast<double>(read_total) * (1.0 - cfg.rw_ratio) / cfg.rw_ratio + 0.5);
  std::vector<TraceOp> writes;
  std::uint64_t written = 0;
  if (cfg.pattern == AccessPattern::Irregular) {
    std::size_t si = 0;
    while (written < write_total) {
      auto [off, n] = slots[si];
      n = std::min(n, write_total - written);
      writes.push_back(TraceOp::burst(input_base + off, n, true));
      written += n;
      si = (si + 1) % slots.size();
    }
  } else {
    std::uint64_t out_off = 0;
    while (written < write_total) {
      std::uint64_t n = std::min(cfg.burst_len, write_total - written);
      n = std::min(n, output_lines - out_off);
      writes.push_back(TraceOp::burst(output_base + out_off, n, true));
      written += n;
      out_off += n;
      if (out_off >= output_lines) out_off = 0;  // wrap for write-heavy mixes
    }
  }

  // interleave writes evenly among the reads, one compute op after each burst
  AccessTrace trace;
  trace.footprint_lines = total_lines;
  std::size_t nr = reads.size(), nw = writes.size();
  std::size_t ri = 0, wi = 0;
  auto push = [&](const TraceOp& op) {
    trace.ops.push_back(op);
    if (cfg.compute_duration > 0) trace.ops.push_back(TraceOp::compute(cfg.compute_duration));
  };
  while (ri < nr || wi < nw) {
    // emit the stream whose progress fraction lags
    bool take_read;
    if (ri >= nr) {
      take_read = false;
    } else if (wi >= nw) {
      take_read = true;
    } else {
      take_read = static_cast<double>(ri) * static_cast<double>(nw) <=
                  static_cast<double>(wi) * static_cast<double>(nr);
    }
    push(take_read ? reads[ri++] : writes[wi++]);
  }
  return trace;
}

// Named accelerator profiles; approximations of each accelerator's
// communication character, shipped as data rather than code.
class ProfileLibrary {
 public:
  ProfileLibrary() = default;

  static ProfileLibrary load(const std::string& path) {
    ProfileLibrary lib;
    json j = load_json_file(path);
    if (!j.contains("traffic")) throw ConfigError(path + ": missing section traffic");
    for (auto& [name, body] : j.at("traffic").items()) {
      lib.profiles_[name] = parse_traffic(body, path + ": " + name);
    }
    return lib;
  }

  static TrafficConfig parse_traffic(const json& body, const std::string& origin) {
    TrafficConfig cfg;
    std::string pat = get_or<std::string>(body, "pattern", "streaming");
    if (pat == "streaming") {
      cfg.pattern = AccessPattern::Streaming;
    } else if (pat == "strided") {
      cfg.pattern = AccessPattern::Strided;
    } else if (pat == "irregular") {
      cfg.pattern = AccessPattern::Irregular;
    } else {
      throw ConfigError(origin + ": unknown pattern '" + pat + "'");
    }
    cfg.burst_len = get_or<std::uint64_t>(body, "burst_len", cfg.burst_len);
    cfg.compute_duration = get_or<Cycles>(body, "compute_duration", cfg.compute_duration);
    cfg.reuse_factor = get_or<std::uint32_t>(body, "reuse_factor", cfg.reuse_factor);
    cfg.rw_ratio = get_or<double>(body, "rw_ratio", cfg.rw_ratio);
    cfg.stride_len = get_or<std::uint64_t>(body, "stride_len", cfg.stride_len);
    cfg.access_fraction = get_or<double>(body, "access_fraction", cfg.access_fraction);
    cfg.in_place = get_or<bool>(body, "in_place", cfg.in_place);
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
  }

  const TrafficConfig& named_profile(const std::string& kind) const {
    auto it = profiles_.find(kind);
    if (it == profiles_.end()) throw ConfigError("unknown traffic profile: " + kind);
    return it->second;
  }

  bool has(const std::string& kind) const { return profiles_.count(kind) > 0; }

  void add(const std::string& kind, const TrafficConfig& cfg) { profiles_[kind] = cfg; }

  std::vector<std::string> kinds() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : profiles_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, TrafficConfig> profiles_;
};

}  // namespace cohsim
