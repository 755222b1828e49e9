#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace cohsim {

using Cycles = std::uint64_t;
using Addr = std::uint64_t;

// The four accelerator coherence modes. The declaration order is the fixed
// total ordering used everywhere for deterministic tie-breaking and for the
// encoding in result files.
enum class CoherenceMode : std::uint8_t {
  NonCohDma = 0,  // bypass the cache hierarchy, straight to DRAM
  LlcCohDma = 1,  // requests routed to the LLC; private caches flushed first
  CohDma = 2,     // requests routed to the LLC; hardware recalls private copies
  FullyCoh = 3,   // requests go through the device's own private cache
};

inline constexpr int kNumModes = 4;

inline constexpr std::array<CoherenceMode, kNumModes> kAllModes = {
    CoherenceMode::NonCohDma, CoherenceMode::LlcCohDma, CoherenceMode::CohDma,
    CoherenceMode::FullyCoh};

constexpr int mode_index(CoherenceMode m) { return static_cast<int>(m); }

constexpr std::string_view mode_name(CoherenceMode m) {
  switch (m) {
    case CoherenceMode::NonCohDma: return "non-coh-dma";
    case CoherenceMode::LlcCohDma: return "llc-coh-dma";
    case CoherenceMode::CohDma: return "coh-dma";
    case CoherenceMode::FullyCoh: return "fully-coh";
  }
  return "?";
}

inline std::optional<CoherenceMode> parse_mode(std::string_view s) {
  for (CoherenceMode m : kAllModes) {
    if (s == mode_name(m)) return m;
  }
  // accept a few shorthands used on the command line
  if (s == "non-coh" || s == "noncoh") return CoherenceMode::NonCohDma;
  if (s == "llc-coh" || s == "llccoh") return CoherenceMode::LlcCohDma;
  if (s == "coh") return CoherenceMode::CohDma;
  if (s == "fully" || s == "fullycoh") return CoherenceMode::FullyCoh;
  return std::nullopt;
}

}  // namespace cohsim
