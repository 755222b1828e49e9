#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cohsim/config_file.hpp"
#include "cohsim/soc.hpp"
#include "cohsim/traffic.hpp"

namespace cohsim {

enum class WorkloadClass : std::uint8_t { S, M, L, XL };

inline std::string_view class_name(WorkloadClass c) {
  switch (c) {
    case WorkloadClass::S: return "S";
    case WorkloadClass::M: return "M";
    case WorkloadClass::L: return "L";
    case WorkloadClass::XL: return "XL";
  }
  return "?";
}

// S fits the private L2, M one LLC slice, L the aggregate LLC; XL otherwise.
// Boundaries are inclusive so power-of-two footprints land in the intuitive
// class.
inline WorkloadClass classify_footprint(std::uint64_t footprint, const SoCConfig& soc) {
  if (footprint <= soc.l2_bytes) return WorkloadClass::S;
  if (footprint <= soc.llc_slice_bytes) return WorkloadClass::M;
  if (footprint <= soc.total_llc_bytes()) return WorkloadClass::L;
  return WorkloadClass::XL;
}

// One stage of a thread's accelerator chain: the accelerator kind plus any
// per-invocation overrides of its traffic profile.
struct StageSpec {
  std::string kind;
  json overrides;  // merged onto the named profile at invocation time
};

struct ThreadSpec {
  std::uint64_t dataset_footprint = 0;  // line-aligned at parse time
  std::vector<StageSpec> chain;
  std::uint32_t loop_count = 1;
};

struct PhaseSpec {
  std::string label;
  std::vector<ThreadSpec> threads;
};

struct ApplicationSpec {
  std::vector<PhaseSpec> phases;
  std::uint64_t seed = 1;

  std::size_t invocation_count() const {
    std::size_t n = 0;
    for (const PhaseSpec& p : phases)
      for (const ThreadSpec& t : p.threads) n += t.chain.size() * t.loop_count;
    return n;
  }
};

inline TrafficConfig apply_overrides(TrafficConfig cfg, const json& overrides,
                                     const std::string& origin) {
  if (overrides.is_null() || overrides.empty()) return cfg;
  json merged;
  merged["pattern"] = std::string(pattern_name(cfg.pattern));
  merged["burst_len"] = cfg.burst_len;
  merged["compute_duration"] = cfg.compute_duration;
  merged["reuse_factor"] = cfg.reuse_factor;
  merged["rw_ratio"] = cfg.rw_ratio;
  merged["stride_len"] = cfg.stride_len;
  merged["access_fraction"] = cfg.access_fraction;
  merged["in_place"] = cfg.in_place;
  for (auto& [k, v] : overrides.items()) {
    if (k == "kind") continue;
    if (!merged.contains(k)) throw ConfigError(origin + ": unknown traffic field '" + k + "'");
    merged[k] = v;
  }
  return ProfileLibrary::parse_traffic(merged, origin);
}

inline ApplicationSpec parse_workload(const json& j, const SoCConfig& soc,
                                      const ProfileLibrary& profiles,
                                      const std::string& origin) {
  ApplicationSpec app;
  app.seed = get_or<std::uint64_t>(j, "seed", 1);
  if (!j.contains("phases") || j.at("phases").empty())
    throw ConfigError(origin + ": workload needs at least one phase");

  auto kind_exists = [&](const std::string& kind) {
    for (const AcceleratorSpec& a : soc.accelerators)
      if (a.kind == kind) return true;
    return false;
  };

  int pi = 0;
  for (const json& pj : j.at("phases")) {
    PhaseSpec phase;
    phase.label = get_or<std::string>(pj, "label", "phase" + std::to_string(pi));
    for (char c : phase.label) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
        throw ConfigError(origin + ": phase label '" + phase.label +
                          "' may only contain [A-Za-z0-9_-]");
    }
    if (!pj.contains("threads") || pj.at("threads").empty())
      throw ConfigError(origin + ": phase " + phase.label + " has no threads");
    for (const json& tj : pj.at("threads")) {
      ThreadSpec t;
      t.dataset_footprint = require_size(tj, "footprint");
      // round up to a whole number of lines
      t.dataset_footprint =
          (t.dataset_footprint + soc.line_bytes - 1) / soc.line_bytes * soc.line_bytes;
      if (t.dataset_footprint == 0)
        throw ConfigError(origin + ": phase " + phase.label + ": zero footprint");
      t.loop_count = get_or<std::uint32_t>(tj, "loop", 1);
      if (t.loop_count < 1)
        throw ConfigError(origin + ": phase " + phase.label + ": loop must be >= 1");
      if (!tj.contains("chain") || tj.at("chain").empty())
        throw ConfigError(origin + ": phase " + phase.label + ": thread has an empty chain");
      for (const json& sj : tj.at("chain")) {
        StageSpec s;
        if (sj.is_string()) {
          s.kind = sj.get<std::string>();
        } else {
          s.kind = get_or<std::string>(sj, "kind", "");
          s.overrides = sj;
        }
        if (s.kind.empty())
          throw ConfigError(origin + ": phase " + phase.label + ": chain stage missing kind");
        if (!kind_exists(s.kind))
          throw ConfigError(origin + ": phase " + phase.label + ": no accelerator of kind '" +
                            s.kind + "' in SoC " + soc.name);
        if (!profiles.has(s.kind))
          throw ConfigError(origin + ": no traffic profile for kind '" + s.kind + "'");
        // validate overrides eagerly so bad workloads fail at parse time
        apply_overrides(profiles.named_profile(s.kind), s.overrides,
                        origin + ": " + phase.label + "/" + s.kind);
        t.chain.push_back(std::move(s));
      }
      phase.threads.push_back(std::move(t));
    }
    app.phases.push_back(std::move(phase));
    pi++;
  }
  return app;
}

inline ApplicationSpec load_workload(const std::string& path, const SoCConfig& soc,
                                     const ProfileLibrary& profiles) {
  return parse_workload(load_json_file(path), soc, profiles, path);
}

}  // namespace cohsim
