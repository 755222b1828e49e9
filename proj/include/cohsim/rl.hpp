#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohsim/coherence.hpp"
#include "cohsim/rng.hpp"
#include "cohsim/sensing.hpp"

namespace cohsim {

struct RewardWeights {
  double x = 0.675;  // scaled execution time
  double y = 0.075;  // communication ratio
  double z = 0.25;   // scaled off-chip access count

  double sum() const { return x + y + z; }

  void validate() const {
    if (x < 0 || y < 0 || z < 0) throw std::invalid_argument("reward weights must be nonnegative");
    if (sum() <= 0) throw std::invalid_argument("reward weights must not all be zero");
  }
};

// Running extrema of the per-invocation metrics for one device; the minima
// over all invocations j <= i include the current sample.
struct RewardHistory {
  double best_exec = std::numeric_limits<double>::infinity();
  double best_comm = std::numeric_limits<double>::infinity();
  double min_mem = std::numeric_limits<double>::infinity();
  double max_mem = -std::numeric_limits<double>::infinity();
  std::uint64_t invocations = 0;
};

struct RewardBreakdown {
  double exec_i = 0, comm_i = 0, mem_i = 0;
  double r_exec = 0, r_comm = 0, r_mem = 0;
  double reward = 0;
};

// Tri-component reward for one completed invocation:
//   exec_i = total cycles / footprint       R_exec = min_j exec_j / exec_i
//   comm_i = comm cycles / total cycles     R_comm = min_j comm_j / comm_i
//   mem_i  = attributed accesses / footprint
//   R_mem  = 1 - (mem_i - min_j) / (max_j - min_j)    (1 when max == min)
//   R      = x * R_exec + y * R_comm + z * R_mem
// Updates the history extrema to include the current sample.
inline RewardBreakdown compute_reward(Cycles total_cycles, Cycles comm_cycles, double mem_count,
                                      std::uint64_t footprint_bytes, RewardHistory& history,
                                      const RewardWeights& w) {
  if (total_cycles == 0) throw std::invalid_argument("compute_reward: zero total_cycles");
  if (footprint_bytes == 0) throw std::invalid_argument("compute_reward: zero footprint");

  RewardBreakdown r;
  r.exec_i = static_cast<double>(total_cycles) / static_cast<double>(footprint_bytes);
  r.comm_i = static_cast<double>(comm_cycles) / static_cast<double>(total_cycles);
  r.mem_i = mem_count / static_cast<double>(footprint_bytes);

  history.best_exec = std::min(history.best_exec, r.exec_i);
  history.best_comm = std::min(history.best_comm, r.comm_i);
  history.min_mem = std::min(history.min_mem, r.mem_i);
  history.max_mem = std::max(history.max_mem, r.mem_i);
  history.invocations++;

  r.r_exec = history.best_exec / r.exec_i;
  // a purely compute-bound invocation has no communication; the current
  // sample is then trivially the best seen
  r.r_comm = r.comm_i > 0 ? history.best_comm / r.comm_i : 1.0;
  double span = history.max_mem - history.min_mem;
  r.r_mem = span > 0 ? 1.0 - (r.mem_i - history.min_mem) / span : 1.0;
  r.reward = w.x * r.r_exec + w.y * r.r_comm + w.z * r.r_mem;
  return r;
}

// Histories keyed per device instance (optionally per kind).
class RewardBook {
 public:
  explicit RewardBook(bool per_kind = false) : per_kind_(per_kind) {}

  RewardHistory& entry(const std::string& device_id, const std::string& kind) {
    return histories_[per_kind_ ? kind : device_id];
  }

  void reset() { histories_.clear(); }
  bool per_kind() const { return per_kind_; }

 private:
  bool per_kind_;
  std::map<std::string, RewardHistory> histories_;
};

// Linear decay schedules for the exploration and learning rates; both reach
// zero at iteration total_iterations.
struct Schedule {
  double epsilon0 = 0.5;
  double alpha0 = 0.25;
  int total_iterations = 10;

  double epsilon(int iteration) const { return decay(epsilon0, iteration); }
  double alpha(int iteration) const { return decay(alpha0, iteration); }

 private:
  double decay(double v0, int i) const {
    double f = 1.0 - static_cast<double>(i) / static_cast<double>(total_iterations);
    return v0 * std::max(0.0, f);
  }
};

// 243 states x 4 modes of expected reward. Zero-initialized; every entry
// stays within [0, x+y+z] because the update is a convex combination of the
// previous value and a reward in that interval.
class QTable {
 public:
  QTable() { clear(); }
  explicit QTable(RewardWeights w) : weights_(w) { clear(); }

  static constexpr int kEntries = kStateCount * kNumModes;

  void clear() {
    values_.fill(0.0);
    updates_.fill(0);
  }

  double value(int state, CoherenceMode a) const { return values_[at(state, a)]; }
  std::uint64_t update_count(int state, CoherenceMode a) const { return updates_[at(state, a)]; }

  std::uint64_t total_updates() const {
    std::uint64_t n = 0;
    for (std::uint64_t u : updates_) n += u;
    return n;
  }

  const RewardWeights& weights() const { return weights_; }
  void set_weights(RewardWeights w) { weights_ = w; }

  // Q(s,a) <- (1 - alpha) * Q(s,a) + alpha * R
  void update(int state, CoherenceMode a, double reward, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("update: alpha outside [0, 1]");
    double& q = values_[at(state, a)];
    q = (1.0 - alpha) * q + alpha * reward;
    updates_[at(state, a)]++;
  }

  // Epsilon-greedy selection over the legal modes: a uniformly random legal
  // mode with probability epsilon, otherwise the argmax with ties broken by
  // the fixed mode ordering.
  CoherenceMode select_action(int state, double epsilon, Rng& rng,
                              std::span<const CoherenceMode> legal,
                              bool* explored = nullptr) const {
    if (legal.empty()) throw std::invalid_argument("select_action: no legal modes");
    if (epsilon > 0.0 && rng.next_double() < epsilon) {
      if (explored) *explored = true;
      return legal[rng.next_below(legal.size())];
    }
    if (explored) *explored = false;
    CoherenceMode best = legal[0];
    double best_q = value(state, best);
    for (CoherenceMode m : legal.subspan(1)) {
      double q = value(state, m);
      if (q > best_q) {
        best_q = q;
        best = m;
      }
    }
    return best;
  }

  bool operator==(const QTable& o) const {
    return values_ == o.values_ && updates_ == o.updates_ && weights_.x == o.weights_.x &&
           weights_.y == o.weights_.y && weights_.z == o.weights_.z;
  }

  // Text format: one header line `x,y,z,total_updates`, then one row per
  // entry `state_index,mode,value,updates`. Values print with enough digits
  // to round-trip exactly.
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write q-table file: " + path);
    out << fmt_double(weights_.x) << ',' << fmt_double(weights_.y) << ',' << fmt_double(weights_.z)
        << ',' << total_updates() << "\n";
    for (int s = 0; s < kStateCount; s++) {
      for (CoherenceMode m : kAllModes) {
        out << s << ',' << mode_name(m) << ',' << fmt_double(value(s, m)) << ','
            << update_count(s, m) << "\n";
      }
    }
  }

  static QTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open q-table file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty q-table file");
    QTable q;
    {
      std::vector<std::string> f = split(line);
      if (f.size() != 4) throw std::runtime_error(path + ": malformed header");
      q.weights_.x = parse_double(f[0], path);
      q.weights_.y = parse_double(f[1], path);
      q.weights_.z = parse_double(f[2], path);
    }
    int rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f = split(line);
      if (f.size() != 4) throw std::runtime_error(path + ": malformed row: " + line);
      int s = std::stoi(f[0]);
      if (s < 0 || s >= kStateCount) throw std::runtime_error(path + ": state index out of range");
      auto m = parse_mode(f[1]);
      if (!m) throw std::runtime_error(path + ": unknown mode: " + f[1]);
      q.values_[at(s, *m)] = parse_double(f[2], path);
      q.updates_[at(s, *m)] = std::stoull(f[3]);
      rows++;
    }
    if (rows != kEntries)
      throw std::runtime_error(path + ": expected " + std::to_string(kEntries) + " rows, got " +
                               std::to_string(rows));
    return q;
  }

 private:
  static std::size_t at(int state, CoherenceMode a) {
    if (state < 0 || state >= kStateCount) throw std::out_of_range("q-table state index");
    return static_cast<std::size_t>(state) * kNumModes + static_cast<std::size_t>(mode_index(a));
  }

  static std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
  }

  static double parse_double(const std::string& s, const std::string& path) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw std::runtime_error(path + ": malformed number: " + s);
    return v;
  }

  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  }

  std::array<double, kEntries> values_{};
  std::array<std::uint64_t, kEntries> updates_{};
  RewardWeights weights_;
};

// Pure greedy policy over a snapshot of the table: epsilon 0, no updates.
class FrozenPolicy {
 public:
  explicit FrozenPolicy(const QTable& q) : snapshot_(q) {}

  CoherenceMode decide(int state, std::span<const CoherenceMode> legal) const {
    Rng unused(0);
    return snapshot_.select_action(state, 0.0, unused, legal);
  }

  const QTable& table() const { return snapshot_; }

 private:
  QTable snapshot_;
};

inline FrozenPolicy freeze(const QTable& q) { return FrozenPolicy(q); }

}  // namespace cohsim
