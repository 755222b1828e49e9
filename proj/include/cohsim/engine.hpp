#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "cohsim/address_space.hpp"
#include "cohsim/memory_system.hpp"
#include "cohsim/monitors.hpp"
#include "cohsim/policies.hpp"
#include "cohsim/rl.hpp"
#include "cohsim/sensing.hpp"
#include "cohsim/soc.hpp"
#include "cohsim/traffic.hpp"
#include "cohsim/workload.hpp"

namespace cohsim {

struct InvocationRecord {
  std::string device_id;
  std::string kind;
  std::uint64_t invocation_index = 0;  // per device
  CoherenceMode mode = CoherenceMode::NonCohDma;
  EncodedState state;
  std::uint64_t footprint_bytes = 0;
  Cycles total_cycles = 0;
  Cycles comm_cycles = 0;
  Cycles flush_cycles = 0;
  Cycles overhead_cycles = 0;  // decision + sensing bookkeeping charge
  double ddr_attributed = 0.0;
  std::uint64_t ddr_true = 0;
  double reward = 0.0;
  double r_exec = 0.0, r_comm = 0.0, r_mem = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  bool explored = false;
  WorkloadClass wclass = WorkloadClass::S;
  std::string phase_label;
  int thread_index = 0;
};

struct PhaseResult {
  std::string label;
  int thread_count = 0;
  Cycles wall_cycles = 0;
  std::uint64_t ddr_accesses = 0;  // all DRAM lines during the phase
  std::uint64_t max_thread_footprint = 0;
  std::size_t first_record = 0;
  std::size_t record_count = 0;
};

struct EngineOptions {
  bool training = false;          // update the q-table after each invocation
  double epsilon = 0.0;           // exploration rate for rl decisions
  double alpha = 0.0;             // learning rate when training
  bool use_true_ddr_for_reward = false;
  bool paranoid_checks = false;   // verify LLC inclusion after every event
  MemorySink* extra_sink = nullptr;
  int warmup_chunk_lines = 64;    // scheduling quantum for CPU warm-up
};

// Drives the discrete-event simulation of one application on one SoC.
// Threads within a phase run as interleaved event streams: the runner with
// the smallest local clock executes its next quantum (one trace burst, one
// warm-up chunk, or one invocation boundary), so shared-resource contention
// is resolved in global time order and the run is deterministic.
class SimEngine {
 public:
  SimEngine(const SoCConfig& soc, const ProfileLibrary& profiles, PolicySpec policy, QTable* q,
            RewardBook* history, std::uint64_t seed, EngineOptions opts = {})
      : soc_(soc),
        profiles_(profiles),
        policy_(std::move(policy)),
        qtable_(q),
        history_(history),
        opts_(opts),
        mem_(soc),
        allocator_(soc.memory_tile_count, soc.partition_bytes),
        monitors_(soc.memory_tile_count),
        status_(soc.memory_tile_count),
        policy_rng_(derive_seed(seed, 0x706f6c6963790000ULL)) {
    validate_policy(policy_, soc_);
    if (policy_.kind == PolicyKind::Rl && !qtable_)
      throw std::logic_error("rl policy requires a q-table");
    mem_.add_sink(&monitors_);
    if (opts_.extra_sink) mem_.add_sink(opts_.extra_sink);
    mem_.set_paranoid(opts_.paranoid_checks);
    device_free_at_.assign(soc.accelerators.size(), 0);
    device_busy_.assign(soc.accelerators.size(), false);
    device_invocations_.assign(soc.accelerators.size(), 0);
  }

  const std::vector<InvocationRecord>& records() const { return records_; }
  MemorySystem& memory() { return mem_; }
  Monitors& monitors() { return monitors_; }
  SystemStatus& status() { return status_; }
  PartitionAllocator& allocator() { return allocator_; }
  Cycles now() const { return clock_; }

  std::vector<PhaseResult> run_application(const ApplicationSpec& app) {
    std::vector<PhaseResult> results;
    for (std::size_t pi = 0; pi < app.phases.size(); pi++) {
      results.push_back(run_phase(app.phases[pi], static_cast<int>(pi), app.seed));
    }
    return results;
  }

  // Runs a single invocation synchronously on an otherwise idle engine;
  // entry point for tests and the isolation experiments.
  InvocationRecord run_invocation(int acc_index, const Allocation& alloc,
                                  const TrafficConfig& traffic, std::uint64_t trace_seed) {
    if (device_busy_[static_cast<std::size_t>(acc_index)])
      throw std::logic_error("run_invocation: device busy");
    ThreadRunner r;
    r.now = std::max(clock_, device_free_at_[static_cast<std::size_t>(acc_index)]);
    r.alloc = alloc;
    r.phase_label = "adhoc";
    Invocation inv = begin_invocation(r, acc_index, traffic, trace_seed);
    while (inv.op_index < inv.trace.ops.size()) step_trace(r, inv);
    finish_invocation(r, inv);
    clock_ = r.now;
    return records_.back();
  }

  Cycles warmup_buffer(const Allocation& alloc, int cpu, Cycles at) {
    Cycles spent = 0;
    std::uint64_t lines = alloc.size / soc_.line_bytes;
    spent = mem_.warmup_lines(alloc.base, lines, cpu, at);
    clock_ = std::max(clock_, at + spent);
    return spent;
  }

 private:
  // --- per-invocation machinery ---

  struct Invocation {
    int acc_index = 0;
    int agent = 0;
    CoherenceMode mode = CoherenceMode::NonCohDma;
    AccessTrace trace;
    std::size_t op_index = 0;
    InvocationRecord record;
  };

  struct ThreadRunner {
    int thread_index = 0;
    const ThreadSpec* spec = nullptr;
    Cycles now = 0;
    Allocation alloc;
    int cpu = 0;
    std::string phase_label;

    enum class State { Warmup, StartInvocation, Trace, Done } state = State::Warmup;
    std::uint64_t warmup_cursor = 0;  // lines warmed so far
    std::uint32_t loop_i = 0;
    std::size_t stage_i = 0;
    Invocation inv;
    std::uint64_t app_seed = 0;
    int phase_index = 0;
  };

  // Decision, setup, flush, counter window and sensing transitions for one
  // invocation on the given device. The counter window opens before the
  // setup and flush so their cost and traffic land in this invocation.
  Invocation begin_invocation(ThreadRunner& r, int acc_index, const TrafficConfig& traffic,
                              std::uint64_t trace_seed) {
    const AcceleratorSpec& dev = soc_.accelerators[static_cast<std::size_t>(acc_index)];
    device_busy_[static_cast<std::size_t>(acc_index)] = true;
    Invocation inv;
    inv.acc_index = acc_index;
    inv.agent = mem_.acc_agent(acc_index);

    PendingInvocation target;
    target.agent = inv.agent;
    target.kind = dev.kind;
    target.footprint = r.alloc.size;
    target.fp_per_tile = r.alloc.bytes_per_tile;
    target.has_private_cache = dev.has_private_cache;
    target.state = encode_state(status_, target.fp_per_tile, target.footprint, soc_.l2_bytes,
                                soc_.llc_slice_bytes);

    Decision d = decide(policy_, qtable_, opts_.epsilon, status_, target, policy_rng_);
    inv.mode = d.mode;

    InvocationRecord& rec = inv.record;
    rec.device_id = dev.device_id;
    rec.kind = dev.kind;
    rec.invocation_index = device_invocations_[static_cast<std::size_t>(acc_index)]++;
    rec.mode = d.mode;
    rec.state = target.state;
    rec.footprint_bytes = r.alloc.size;
    rec.explored = d.explored;
    rec.epsilon = policy_.kind == PolicyKind::Rl ? opts_.epsilon : 0.0;
    rec.alpha = opts_.training ? opts_.alpha : 0.0;
    rec.wclass = classify_footprint(r.alloc.size, soc_);
    rec.phase_label = r.phase_label;
    rec.thread_index = r.thread_index;
    rec.overhead_cycles = soc_.latency.decision_overhead_cycles;

    monitors_.open_invocation(inv.agent, r.alloc.bytes_per_tile, r.now);
    r.now += soc_.latency.decision_overhead_cycles + soc_.latency.invocation_setup_cycles;

    FlushStats fl = mem_.flush_for_mode(inv.mode, r.now, inv.agent);
    rec.flush_cycles = fl.cycles;
    monitors_.add_flush_cycles(inv.agent, fl.cycles);
    r.now += fl.cycles;

    status_.on_invocation_start(inv.agent, inv.mode, r.alloc.bytes_per_tile);
    inv.trace = generate_trace(traffic, r.alloc.size, soc_.line_bytes, trace_seed);
    return inv;
  }

  void step_trace(ThreadRunner& r, Invocation& inv) {
    const TraceOp& op = inv.trace.ops[inv.op_index++];
    if (op.kind == TraceOp::Kind::Compute) {
      r.now += op.cycles;
      return;
    }
    Addr addr = r.alloc.base + op.offset_lines * soc_.line_bytes;
    AccessResult res = mem_.dma_burst(inv.agent, addr, op.line_count, op.is_write, inv.mode, r.now);
    r.now += res.latency;
  }

  void finish_invocation(ThreadRunner& r, Invocation& inv) {
    status_.on_invocation_end(inv.agent);
    InvocationCounters c = monitors_.close_invocation(inv.agent, r.now);
    InvocationRecord& rec = inv.record;
    rec.total_cycles = c.total_cycles;
    rec.comm_cycles = c.comm_cycles;
    rec.flush_cycles = c.flush_cycles;
    rec.ddr_attributed = c.ddr_attributed;
    rec.ddr_true = c.ddr_true;

    if (history_) {
      RewardHistory& h = history_->entry(rec.device_id, rec.kind);
      double mem_count = opts_.use_true_ddr_for_reward ? static_cast<double>(rec.ddr_true)
                                                       : rec.ddr_attributed;
      RewardWeights w = qtable_ ? qtable_->weights() : RewardWeights{};
      RewardBreakdown rb =
          compute_reward(rec.total_cycles, rec.comm_cycles, mem_count, rec.footprint_bytes, h, w);
      rec.reward = rb.reward;
      rec.r_exec = rb.r_exec;
      rec.r_comm = rb.r_comm;
      rec.r_mem = rb.r_mem;
      if (opts_.training && policy_.kind == PolicyKind::Rl) {
        qtable_->update(rec.state.index(), rec.mode, rb.reward, opts_.alpha);
      }
    }
    device_busy_[static_cast<std::size_t>(inv.acc_index)] = false;
    device_free_at_[static_cast<std::size_t>(inv.acc_index)] = r.now;
    records_.push_back(rec);
  }

  // Picks an idle instance of the requested kind, preferring the one that
  // freed up earliest (deterministic tie-break by device order). Returns -1
  // when every instance has an invocation in flight.
  int pick_device(const std::string& kind) const {
    int best = -1;
    bool any = false;
    for (std::size_t i = 0; i < soc_.accelerators.size(); i++) {
      if (soc_.accelerators[i].kind != kind) continue;
      any = true;
      if (device_busy_[i]) continue;
      if (best < 0 || device_free_at_[i] < device_free_at_[static_cast<std::size_t>(best)])
        best = static_cast<int>(i);
    }
    if (!any) throw std::logic_error("no accelerator of kind " + kind);
    return best;
  }

  enum class StepOutcome { Progress, Blocked, Finished };

  // One scheduling quantum for a thread. `freed_kind` is set when the step
  // completed an invocation, so threads blocked on that kind can be woken.
  StepOutcome step_thread(ThreadRunner& r, std::string* freed_kind) {
    switch (r.state) {
      case ThreadRunner::State::Warmup: {
        std::uint64_t total = r.alloc.size / soc_.line_bytes;
        if (r.warmup_cursor >= total) {
          r.state = ThreadRunner::State::StartInvocation;
          return StepOutcome::Progress;
        }
        std::uint64_t n =
            std::min<std::uint64_t>(static_cast<std::uint64_t>(opts_.warmup_chunk_lines),
                                    total - r.warmup_cursor);
        r.now += mem_.warmup_lines(r.alloc.base + r.warmup_cursor * soc_.line_bytes, n, r.cpu,
                                   r.now);
        r.warmup_cursor += n;
        return StepOutcome::Progress;
      }
      case ThreadRunner::State::StartInvocation: {
        const StageSpec& stage = r.spec->chain[r.stage_i];
        int dev = pick_device(stage.kind);
        if (dev < 0) return StepOutcome::Blocked;  // all instances in flight
        Cycles free_at = device_free_at_[static_cast<std::size_t>(dev)];
        if (free_at > r.now) {
          r.now = free_at;  // idle instance, but only from a later point in time
          return StepOutcome::Progress;
        }
        TrafficConfig traffic =
            apply_overrides(profiles_.named_profile(stage.kind), stage.overrides, stage.kind);
        std::uint64_t trace_seed = derive_seed(
            r.app_seed, static_cast<std::uint64_t>(r.phase_index),
            (static_cast<std::uint64_t>(r.thread_index) << 32) | r.loop_i, r.stage_i);
        r.inv = begin_invocation(r, dev, traffic, trace_seed);
        r.state = ThreadRunner::State::Trace;
        return StepOutcome::Progress;
      }
      case ThreadRunner::State::Trace: {
        if (r.inv.op_index < r.inv.trace.ops.size()) {
          step_trace(r, r.inv);
          return StepOutcome::Progress;
        }
        finish_invocation(r, r.inv);
        if (freed_kind) *freed_kind = r.spec->chain[r.stage_i].kind;
        r.stage_i++;
        if (r.stage_i >= r.spec->chain.size()) {
          r.stage_i = 0;
          r.loop_i++;
          if (r.loop_i >= r.spec->loop_count) {
            r.state = ThreadRunner::State::Done;
            return StepOutcome::Finished;
          }
          // each loop iteration processes a fresh dataset: the application
          // re-initializes the inputs before the chain's first invocation
          r.warmup_cursor = 0;
          r.state = ThreadRunner::State::Warmup;
          return StepOutcome::Progress;
        }
        r.state = ThreadRunner::State::StartInvocation;
        return StepOutcome::Progress;
      }
      case ThreadRunner::State::Done:
        return StepOutcome::Finished;
    }
    return StepOutcome::Finished;
  }

  PhaseResult run_phase(const PhaseSpec& phase, int phase_index, std::uint64_t app_seed) {
    PhaseResult result;
    result.label = phase.label;
    result.thread_count = static_cast<int>(phase.threads.size());
    result.first_record = records_.size();
    std::uint64_t ddr_before = monitors_.ddr_total_all();
    Cycles phase_start = clock_;

    std::vector<ThreadRunner> runners(phase.threads.size());
    for (std::size_t t = 0; t < phase.threads.size(); t++) {
      ThreadRunner& r = runners[t];
      r.thread_index = static_cast<int>(t);
      r.spec = &phase.threads[t];
      r.now = phase_start;
      r.alloc = allocator_.allocate(phase.threads[t].dataset_footprint);
      r.cpu = static_cast<int>(t) % soc_.cpu_count;
      r.phase_label = phase.label;
      r.app_seed = app_seed;
      r.phase_index = phase_index;
      result.max_thread_footprint = std::max(result.max_thread_footprint, r.alloc.size);
    }

    // min-heap over (local clock, thread index); threads blocked on a fully
    // busy accelerator kind park in a waiting list until an instance frees up
    using HeapItem = std::pair<Cycles, std::size_t>;
    auto cmp = [](const HeapItem& a, const HeapItem& b) { return a > b; };
    std::priority_queue<HeapItem, std::vector<HeapItem>, decltype(cmp)> heap(cmp);
    std::map<std::string, std::vector<std::size_t>> waiting;
    for (std::size_t t = 0; t < runners.size(); t++) heap.emplace(phase_start, t);

    Cycles phase_end = phase_start;
    while (!heap.empty()) {
      auto [at, t] = heap.top();
      heap.pop();
      ThreadRunner& r = runners[t];
      std::string freed;
      StepOutcome out = step_thread(r, &freed);
      switch (out) {
        case StepOutcome::Progress:
          heap.emplace(r.now, t);
          break;
        case StepOutcome::Blocked:
          waiting[r.spec->chain[r.stage_i].kind].push_back(t);
          break;
        case StepOutcome::Finished:
          phase_end = std::max(phase_end, r.now);
          break;
      }
      if (!freed.empty()) {
        auto it = waiting.find(freed);
        if (it != waiting.end()) {
          for (std::size_t w : it->second) {
            runners[w].now = std::max(runners[w].now, r.now);
            heap.emplace(runners[w].now, w);
          }
          waiting.erase(it);
        }
      }
    }
    if (!waiting.empty()) throw std::logic_error("phase ended with blocked threads");

    for (ThreadRunner& r : runners) allocator_.free(r.alloc);
    clock_ = phase_end;
    result.wall_cycles = phase_end - phase_start;
    result.ddr_accesses = monitors_.ddr_total_all() - ddr_before;
    result.record_count = records_.size() - result.first_record;
    return result;
  }

  const SoCConfig& soc_;
  const ProfileLibrary& profiles_;
  PolicySpec policy_;
  QTable* qtable_;
  RewardBook* history_;
  EngineOptions opts_;
  MemorySystem mem_;
  PartitionAllocator allocator_;
  Monitors monitors_;
  SystemStatus status_;
  Rng policy_rng_;
  std::vector<Cycles> device_free_at_;
  std::vector<bool> device_busy_;
  std::vector<std::uint64_t> device_invocations_;
  std::vector<InvocationRecord> records_;
  Cycles clock_ = 0;
};

}  // namespace cohsim
