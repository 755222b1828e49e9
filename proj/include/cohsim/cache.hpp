#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cohsim {

// Set-associative cache directory with true-LRU replacement. Tracks only
// which lines are present and whether they are dirty; data values are never
// modeled. Lines are identified by their global line index (addr / line_bytes).
class SetAssocCache {
 public:
  SetAssocCache(std::uint64_t size_bytes, std::uint64_t line_bytes, std::uint32_t assoc)
      : assoc_(assoc) {
    if (size_bytes % (line_bytes * assoc) != 0)
      throw std::invalid_argument("cache size must be a multiple of line_bytes * assoc");
    sets_ = size_bytes / (line_bytes * assoc);
    if (sets_ == 0) throw std::invalid_argument("cache has zero sets");
    ways_.assign(sets_ * assoc_, Way{});
  }

  struct Evicted {
    bool valid = false;
    std::uint64_t line = 0;
    bool dirty = false;
  };

  bool contains(std::uint64_t line) const { return find(line) >= 0; }

  // LRU-updating lookup; returns true on hit.
  bool lookup(std::uint64_t line) {
    int w = find(line);
    if (w < 0) return false;
    promote(set_of(line), static_cast<std::uint32_t>(w));
    return true;
  }

  bool line_dirty(std::uint64_t line) const {
    int w = find(line);
    return w >= 0 && way(set_of(line), static_cast<std::uint32_t>(w)).dirty;
  }

  void mark_dirty(std::uint64_t line, bool dirty) {
    int w = find(line);
    if (w < 0) throw std::logic_error("mark_dirty: line not present");
    mut_way(set_of(line), static_cast<std::uint32_t>(w)).dirty = dirty;
  }

  // Inserts a line that must not already be present; returns the victim, if
  // any, that was displaced from the set.
  Evicted insert(std::uint64_t line, bool dirty) {
    std::uint64_t s = set_of(line);
    std::uint32_t victim_way = assoc_;
    for (std::uint32_t w = 0; w < assoc_; w++) {
      if (!way(s, w).valid) {
        victim_way = w;
        break;
      }
    }
    Evicted ev;
    if (victim_way == assoc_) {
      for (std::uint32_t w = 0; w < assoc_; w++) {
        if (way(s, w).lru == assoc_ - 1) {
          victim_way = w;
          break;
        }
      }
      Way& v = mut_way(s, victim_way);
      ev.valid = true;
      ev.line = v.tag * sets_ + s;
      ev.dirty = v.dirty;
    }
    Way& w = mut_way(s, victim_way);
    w.valid = true;
    w.tag = line / sets_;
    w.dirty = dirty;
    w.lru = assoc_;  // placeholder; promote() renumbers
    promote(s, victim_way);
    return ev;
  }

  // Returns true if the line was present; *was_dirty receives its dirty bit.
  bool invalidate(std::uint64_t line, bool* was_dirty = nullptr) {
    int w = find(line);
    if (w < 0) return false;
    Way& victim = mut_way(set_of(line), static_cast<std::uint32_t>(w));
    if (was_dirty) *was_dirty = victim.dirty;
    std::uint32_t gone = victim.lru;
    victim = Way{};
    // keep lru ranks a dense permutation of the remaining valid ways
    std::uint64_t s = set_of(line);
    for (std::uint32_t i = 0; i < assoc_; i++) {
      Way& other = mut_way(s, i);
      if (other.valid && other.lru > gone) other.lru--;
    }
    return true;
  }

  std::uint64_t valid_lines() const {
    std::uint64_t n = 0;
    for (const Way& w : ways_)
      if (w.valid) n++;
    return n;
  }

  // Visits (line, dirty) for every valid line in set/way order.
  template <typename Fn>
  void for_each_line(Fn&& fn) const {
    for (std::uint64_t s = 0; s < sets_; s++) {
      for (std::uint32_t w = 0; w < assoc_; w++) {
        const Way& wy = way(s, w);
        if (wy.valid) fn(wy.tag * sets_ + s, wy.dirty);
      }
    }
  }

  void clear() { ways_.assign(sets_ * assoc_, Way{}); }

  std::uint64_t sets() const { return sets_; }
  std::uint32_t assoc() const { return assoc_; }

  // Mixes the complete directory state (tags, valid, dirty, recency) into a
  // fingerprint; used by tests that assert state immutability.
  std::uint64_t state_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 0x100000001b3ULL;
    };
    for (const Way& w : ways_) {
      mix(w.valid ? 1 : 0);
      if (w.valid) {
        mix(w.tag);
        mix(w.dirty ? 1 : 0);
        mix(w.lru);
      }
    }
    return h;
  }

  // Sanity check used by tests: lru ranks form a permutation within each set.
  bool lru_ranks_consistent() const {
    for (std::uint64_t s = 0; s < sets_; s++) {
      std::uint32_t valid = 0;
      for (std::uint32_t w = 0; w < assoc_; w++)
        if (way(s, w).valid) valid++;
      std::vector<bool> seen(valid, false);
      for (std::uint32_t w = 0; w < assoc_; w++) {
        const Way& wy = way(s, w);
        if (!wy.valid) continue;
        if (wy.lru >= valid || seen[wy.lru]) return false;
        seen[wy.lru] = true;
      }
    }
    return true;
  }

 private:
  struct Way {
    std::uint64_t tag = 0;
    bool valid = false;
    bool dirty = false;
    std::uint32_t lru = 0;
  };

  std::uint64_t set_of(std::uint64_t line) const { return line % sets_; }

  const Way& way(std::uint64_t set, std::uint32_t w) const { return ways_[set * assoc_ + w]; }
  Way& mut_way(std::uint64_t set, std::uint32_t w) { return ways_[set * assoc_ + w]; }

  int find(std::uint64_t line) const {
    std::uint64_t s = set_of(line);
    std::uint64_t tag = line / sets_;
    for (std::uint32_t w = 0; w < assoc_; w++) {
      if (way(s, w).valid && way(s, w).tag == tag) return static_cast<int>(w);
    }
    return -1;
  }

  void promote(std::uint64_t set, std::uint32_t hit_way) {
    std::uint32_t old = way(set, hit_way).lru;
    for (std::uint32_t w = 0; w < assoc_; w++) {
      Way& wy = mut_way(set, w);
      if (wy.valid && wy.lru < old) wy.lru++;
    }
    mut_way(set, hit_way).lru = 0;
  }

  std::uint64_t sets_;
  std::uint32_t assoc_;
  std::vector<Way> ways_;
};

}  // namespace cohsim
