#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohsim/coherence.hpp"
#include "cohsim/rl.hpp"
#include "cohsim/sensing.hpp"
#include "cohsim/soc.hpp"

namespace cohsim {

struct ManualThresholds {
  std::uint64_t extra_small_bytes = 4096;
  std::uint64_t l2_bytes = 0;
  std::uint64_t llc_total_bytes = 0;

  static ManualThresholds for_soc(const SoCConfig& soc) {
    ManualThresholds t;
    t.l2_bytes = soc.l2_bytes;
    t.llc_total_bytes = soc.total_llc_bytes();
    if (t.extra_small_bytes >= t.l2_bytes) t.extra_small_bytes = t.l2_bytes / 2;
    return t;
  }
};

// Manually-tuned mode selection from the footprint of the pending invocation
// and the counts/footprint of the currently active accelerators.
inline CoherenceMode manual_decide(const ManualThresholds& th, std::uint64_t footprint,
                                   int active_coh_dma, int active_fully_coh, int active_non_coh,
                                   std::uint64_t active_footprint) {
  if (footprint <= th.extra_small_bytes) return CoherenceMode::FullyCoh;
  if (footprint <= th.l2_bytes) {
    return active_coh_dma > active_fully_coh ? CoherenceMode::FullyCoh : CoherenceMode::CohDma;
  }
  if (footprint + active_footprint > th.llc_total_bytes) return CoherenceMode::NonCohDma;
  return active_non_coh >= 2 ? CoherenceMode::LlcCohDma : CoherenceMode::CohDma;
}

enum class PolicyKind { Random, FixedHomogeneous, FixedHeterogeneous, Manual, Rl };

struct PolicySpec {
  PolicyKind kind = PolicyKind::FixedHomogeneous;
  CoherenceMode fixed_mode = CoherenceMode::NonCohDma;
  std::map<std::string, CoherenceMode> hetero_table;  // accelerator kind -> mode
  ManualThresholds manual;
  std::string qtable_path;  // rl: optional table to start from

  std::string label() const {
    switch (kind) {
      case PolicyKind::Random: return "random";
      case PolicyKind::FixedHomogeneous: return std::string("fixed-") + std::string(mode_name(fixed_mode));
      case PolicyKind::FixedHeterogeneous: return "fixed-hetero";
      case PolicyKind::Manual: return "manual";
      case PolicyKind::Rl: return "rl";
    }
    return "?";
  }
};

// Everything a policy may look at when deciding the mode for one invocation.
struct PendingInvocation {
  int agent = 0;
  std::string kind;
  std::uint64_t footprint = 0;
  std::vector<std::uint64_t> fp_per_tile;
  EncodedState state;  // filled by the engine before the decision
  bool has_private_cache = true;
};

struct Decision {
  CoherenceMode mode;
  bool explored = false;  // rl only: the epsilon branch was taken
};

// Uniform decision dispatch. Every policy may nominate any mode; a mode that
// is illegal for the device (fully-coherent without a private cache) falls
// back to coherent DMA. The RL policy restricts its choice to the legal set.
inline Decision decide(const PolicySpec& policy, const QTable* q, double epsilon,
                       const SystemStatus& status, const PendingInvocation& target, Rng& rng) {
  Decision d{CoherenceMode::NonCohDma, false};
  switch (policy.kind) {
    case PolicyKind::Random:
      d.mode = kAllModes[rng.next_below(kNumModes)];
      break;
    case PolicyKind::FixedHomogeneous:
      d.mode = policy.fixed_mode;
      break;
    case PolicyKind::FixedHeterogeneous: {
      auto it = policy.hetero_table.find(target.kind);
      if (it == policy.hetero_table.end())
        throw std::invalid_argument("fixed-hetero: no profile entry for kind " + target.kind);
      d.mode = it->second;
      break;
    }
    case PolicyKind::Manual:
      d.mode = manual_decide(policy.manual, target.footprint,
                             status.count_mode(CoherenceMode::CohDma),
                             status.count_mode(CoherenceMode::FullyCoh),
                             status.count_mode(CoherenceMode::NonCohDma),
                             status.total_active_footprint());
      break;
    case PolicyKind::Rl: {
      if (!q) throw std::logic_error("rl policy without a q-table");
      std::vector<CoherenceMode> legal;
      for (CoherenceMode m : kAllModes) {
        if (m == CoherenceMode::FullyCoh && !target.has_private_cache) continue;
        legal.push_back(m);
      }
      d.mode = q->select_action(target.state.index(), epsilon, rng, legal, &d.explored);
      return d;
    }
  }
  if (d.mode == CoherenceMode::FullyCoh && !target.has_private_cache)
    d.mode = CoherenceMode::CohDma;
  return d;
}

// CLI policy syntax:
//   random | fixed:<mode> | fixed-hetero:<profile-file> | manual | rl[:<qtable-file>]
inline PolicySpec parse_policy(const std::string& text, const SoCConfig& soc) {
  PolicySpec p;
  p.manual = ManualThresholds::for_soc(soc);
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "random") {
    p.kind = PolicyKind::Random;
  } else if (head == "fixed") {
    p.kind = PolicyKind::FixedHomogeneous;
    auto m = parse_mode(arg);
    if (!m) throw std::invalid_argument("fixed policy needs a mode, got '" + arg + "'");
    p.fixed_mode = *m;
  } else if (head == "fixed-hetero") {
    p.kind = PolicyKind::FixedHeterogeneous;
    if (arg.empty()) throw std::invalid_argument("fixed-hetero policy needs a profile file");
    json j = load_json_file(arg);
    if (!j.contains("profile")) throw ConfigError(arg + ": missing section profile");
    for (auto& [kind, mode] : j.at("profile").items()) {
      auto m = parse_mode(mode.get<std::string>());
      if (!m) throw ConfigError(arg + ": unknown mode for kind " + kind);
      p.hetero_table[kind] = *m;
    }
  } else if (head == "manual") {
    p.kind = PolicyKind::Manual;
  } else if (head == "rl") {
    p.kind = PolicyKind::Rl;
    p.qtable_path = arg;
  } else {
    throw std::invalid_argument("unknown policy: " + text);
  }
  return p;
}

// The fixed-heterogeneous table must cover every accelerator kind in the SoC.
inline void validate_policy(const PolicySpec& p, const SoCConfig& soc) {
  if (p.kind != PolicyKind::FixedHeterogeneous) return;
  for (const AcceleratorSpec& a : soc.accelerators) {
    if (!p.hetero_table.count(a.kind))
      throw std::invalid_argument("fixed-hetero profile misses kind " + a.kind);
  }
}

inline void save_hetero_table(const std::map<std::string, CoherenceMode>& table,
                              const std::string& path) {
  json j;
  for (const auto& [kind, mode] : table) j["profile"][kind] = std::string(mode_name(mode));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile table: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace cohsim
