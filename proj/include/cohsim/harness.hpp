#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cohsim/csv.hpp"
#include "cohsim/engine.hpp"

namespace cohsim {

// ----------------------------------------------------------------------------
// evaluation runs and aggregation

struct EvalRun {
  std::string policy_label;
  std::vector<PhaseResult> phases;
  std::vector<InvocationRecord> records;
};

struct HarnessOptions {
  bool use_true_ddr_for_reward = false;
  bool history_per_kind = false;
  bool reset_history_before_eval = false;
  MemorySink* event_sink = nullptr;
};

inline EvalRun evaluate_policy(const SoCConfig& soc, const ProfileLibrary& profiles,
                               const ApplicationSpec& app, const PolicySpec& policy,
                               const QTable* q, const RewardBook* history, std::uint64_t seed,
                               const HarnessOptions& opts = {}) {
  EngineOptions eo;
  eo.training = false;
  eo.epsilon = 0.0;
  eo.use_true_ddr_for_reward = opts.use_true_ddr_for_reward;
  eo.extra_sink = opts.event_sink;
  // evaluation must not feed back into the caller's reward history
  RewardBook book = history ? *history : RewardBook(opts.history_per_kind);
  if (opts.reset_history_before_eval) book.reset();
  QTable local_q = q ? *q : QTable{};
  SimEngine engine(soc, profiles, policy, &local_q, &book, derive_seed(seed, 0xe7a1ULL), eo);
  EvalRun run;
  run.policy_label = policy.label();
  run.phases = engine.run_application(app);
  run.records = engine.records();
  return run;
}

// One training pass per iteration over the application, with the exploration
// and learning rates decayed per the schedule. The q-table and reward
// history accumulate across iterations; each iteration runs a fresh SoC on a
// reseeded instance of the application.
template <typename PerIteration>
void train_rl(const SoCConfig& soc, const ProfileLibrary& profiles, const ApplicationSpec& app,
              const Schedule& schedule, std::uint64_t seed, QTable& q, RewardBook& history,
              const HarnessOptions& opts, PerIteration&& per_iteration) {
  PolicySpec rl;
  rl.kind = PolicyKind::Rl;
  for (int it = 0; it < schedule.total_iterations; it++) {
    EngineOptions eo;
    eo.training = true;
    eo.epsilon = schedule.epsilon(it);
    eo.alpha = schedule.alpha(it);
    eo.use_true_ddr_for_reward = opts.use_true_ddr_for_reward;
    ApplicationSpec instance = app;
    instance.seed = derive_seed(app.seed, 0x7261696eULL, static_cast<std::uint64_t>(it));
    SimEngine engine(soc, profiles, rl, &q, &history,
                     derive_seed(seed, 0x7472ULL, static_cast<std::uint64_t>(it)), eo);
    engine.run_application(instance);
    per_iteration(it, engine.records());
  }
}

inline void train_rl(const SoCConfig& soc, const ProfileLibrary& profiles,
                     const ApplicationSpec& app, const Schedule& schedule, std::uint64_t seed,
                     QTable& q, RewardBook& history, const HarnessOptions& opts = {}) {
  train_rl(soc, profiles, app, schedule, seed, q, history, opts,
           [](int, const std::vector<InvocationRecord>&) {});
}

struct PhaseMetric {
  std::string policy;
  std::string label;
  int threads = 0;
  WorkloadClass wclass = WorkloadClass::S;
  Cycles exec_cycles = 0;
  std::uint64_t ddr_accesses = 0;
  double norm_exec = 0.0;
  double norm_ddr = 0.0;
};

struct PolicyAggregate {
  std::string policy;
  std::vector<PhaseMetric> phases;
  double geo_norm_exec = 0.0;
  double geo_norm_ddr = 0.0;
};

inline double geomean(const std::vector<double>& vs) {
  if (vs.empty()) return 0.0;
  double log_sum = 0.0;
  for (double v : vs) {
    if (v < 0.0) throw std::invalid_argument("geomean: negative value");
    if (v == 0.0) return 0.0;
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(vs.size()));
}

// Per-phase normalization against a baseline run of the same application
// (the same-seed fixed non-coherent-DMA run), then geometric means over
// phases.
inline PolicyAggregate aggregate_against(const EvalRun& run, const EvalRun& baseline,
                                         const SoCConfig& soc) {
  if (run.phases.size() != baseline.phases.size())
    throw std::logic_error("aggregate: phase count mismatch with baseline");
  PolicyAggregate agg;
  agg.policy = run.policy_label;
  std::vector<double> ne, nd;
  for (std::size_t i = 0; i < run.phases.size(); i++) {
    const PhaseResult& p = run.phases[i];
    const PhaseResult& b = baseline.phases[i];
    if (b.wall_cycles == 0 || b.ddr_accesses == 0)
      throw std::runtime_error("aggregate: baseline produced a zero metric for phase " + b.label);
    PhaseMetric m;
    m.policy = run.policy_label;
    m.label = p.label;
    m.threads = p.thread_count;
    m.wclass = classify_footprint(p.max_thread_footprint, soc);
    m.exec_cycles = p.wall_cycles;
    m.ddr_accesses = p.ddr_accesses;
    m.norm_exec = static_cast<double>(p.wall_cycles) / static_cast<double>(b.wall_cycles);
    m.norm_ddr = static_cast<double>(p.ddr_accesses) / static_cast<double>(b.ddr_accesses);
    ne.push_back(m.norm_exec);
    // a phase can legitimately record zero off-chip accesses when everything
    // fits in the caches; clamp at one line so the log-scale mean stays
    // defined while preserving the ordering
    nd.push_back(std::max(m.norm_ddr, 1.0 / static_cast<double>(b.ddr_accesses)));
    agg.phases.push_back(std::move(m));
  }
  agg.geo_norm_exec = geomean(ne);
  agg.geo_norm_ddr = geomean(nd);
  return agg;
}

// ----------------------------------------------------------------------------
// csv emission

inline void write_phases_csv(const std::string& path, const std::vector<PolicyAggregate>& aggs) {
  CsvWriter w(path);
  w.row({"policy", "phase", "threads", "workload_class", "exec_cycles", "ddr_accesses",
         "norm_exec", "norm_ddr"});
  for (const PolicyAggregate& a : aggs) {
    for (const PhaseMetric& m : a.phases) {
      w.row({m.policy, m.label, std::to_string(m.threads), std::string(class_name(m.wclass)),
             std::to_string(m.exec_cycles), std::to_string(m.ddr_accesses),
             csv_double(m.norm_exec), csv_double(m.norm_ddr)});
    }
  }
}

inline void write_devices_csv(const std::string& path,
                              const std::vector<InvocationRecord>& records) {
  CsvWriter w(path);
  w.row({"device", "kind", "invocation", "mode", "state_index", "s1", "s2", "s3", "s4", "s5",
         "footprint_bytes", "total_cycles", "comm_cycles", "flush_cycles", "ddr_attributed",
         "ddr_true", "reward", "epsilon", "alpha", "explored"});
  for (const InvocationRecord& r : records) {
    w.row({r.device_id, r.kind, std::to_string(r.invocation_index),
           std::string(mode_name(r.mode)), std::to_string(r.state.index()),
           std::to_string(r.state.attr[0]), std::to_string(r.state.attr[1]),
           std::to_string(r.state.attr[2]), std::to_string(r.state.attr[3]),
           std::to_string(r.state.attr[4]), std::to_string(r.footprint_bytes),
           std::to_string(r.total_cycles), std::to_string(r.comm_cycles),
           std::to_string(r.flush_cycles), csv_double(r.ddr_attributed),
           std::to_string(r.ddr_true), csv_double(r.reward), csv_double(r.epsilon),
           csv_double(r.alpha), r.explored ? "1" : "0"});
  }
}

// ----------------------------------------------------------------------------
// record analyses

struct BreakdownRow {
  std::string scope;  // "total" or a workload class
  std::uint64_t invocations = 0;
  std::array<double, kNumModes> fraction{};
};

inline std::vector<BreakdownRow> coherence_breakdown(const std::vector<InvocationRecord>& records) {
  if (records.empty()) throw std::invalid_argument("coherence_breakdown: no records");
  auto make_row = [&](const std::string& scope, auto&& pred) {
    BreakdownRow row;
    row.scope = scope;
    std::array<std::uint64_t, kNumModes> counts{};
    for (const InvocationRecord& r : records) {
      if (!pred(r)) continue;
      counts[static_cast<std::size_t>(mode_index(r.mode))]++;
      row.invocations++;
    }
    for (int m = 0; m < kNumModes; m++) {
      row.fraction[static_cast<std::size_t>(m)] =
          row.invocations ? static_cast<double>(counts[static_cast<std::size_t>(m)]) /
                                static_cast<double>(row.invocations)
                          : 0.0;
    }
    return row;
  };
  std::vector<BreakdownRow> rows;
  rows.push_back(make_row("total", [](const InvocationRecord&) { return true; }));
  for (WorkloadClass c :
       {WorkloadClass::S, WorkloadClass::M, WorkloadClass::L, WorkloadClass::XL}) {
    BreakdownRow row = make_row(std::string(class_name(c)),
                                [c](const InvocationRecord& r) { return r.wclass == c; });
    if (row.invocations > 0) rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_breakdown_csv(const std::string& path, const std::vector<BreakdownRow>& rows) {
  CsvWriter w(path);
  std::vector<std::string> header = {"scope", "invocations"};
  for (CoherenceMode m : kAllModes) header.emplace_back(mode_name(m));
  w.row(header);
  for (const BreakdownRow& r : rows) {
    std::vector<std::string> fields = {r.scope, std::to_string(r.invocations)};
    for (int m = 0; m < kNumModes; m++)
      fields.push_back(csv_double(r.fraction[static_cast<std::size_t>(m)]));
    w.row(fields);
  }
}

struct OverheadRow {
  WorkloadClass wclass;
  std::uint64_t invocations = 0;
  double mean_fraction = 0.0;  // decision+sensing cycles / total cycles
};

struct OverheadReport {
  std::vector<OverheadRow> rows;            // classes present, S..XL order
  bool monotonically_decreasing = true;     // across the classes present
};

inline OverheadReport overhead_report(const std::vector<InvocationRecord>& records) {
  OverheadReport rep;
  for (WorkloadClass c :
       {WorkloadClass::S, WorkloadClass::M, WorkloadClass::L, WorkloadClass::XL}) {
    OverheadRow row{c, 0, 0.0};
    double sum = 0.0;
    for (const InvocationRecord& r : records) {
      if (r.wclass != c) continue;
      row.invocations++;
      sum += static_cast<double>(r.overhead_cycles) / static_cast<double>(r.total_cycles);
    }
    if (row.invocations == 0) continue;
    row.mean_fraction = sum / static_cast<double>(row.invocations);
    rep.rows.push_back(row);
  }
  for (std::size_t i = 1; i < rep.rows.size(); i++) {
    if (!(rep.rows[i].mean_fraction < rep.rows[i - 1].mean_fraction))
      rep.monotonically_decreasing = false;
  }
  return rep;
}

inline void write_overhead_csv(const std::string& path, const OverheadReport& rep) {
  CsvWriter w(path);
  w.row({"workload_class", "invocations", "mean_overhead_fraction"});
  for (const OverheadRow& r : rep.rows) {
    w.row({std::string(class_name(r.wclass)), std::to_string(r.invocations),
           csv_double(r.mean_fraction)});
  }
}

// ----------------------------------------------------------------------------
// isolated runs shared by the motivation experiments and profiling

struct IsolatedResult {
  Cycles exec_cycles = 0;
  std::uint64_t ddr_lines = 0;  // demand + eviction lines caused by the device
};

// Fresh SoC, one CPU warm-up of the buffer, one invocation of the kind's
// first device instance under the given mode. The trace seed depends only on
// (master seed, kind, footprint, rep) so every mode replays the same work.
inline IsolatedResult isolated_run(const SoCConfig& soc, const ProfileLibrary& profiles,
                                   const std::string& kind, std::uint64_t footprint,
                                   CoherenceMode mode, std::uint64_t master_seed, int rep) {
  std::uint64_t run_seed = derive_seed(master_seed, std::hash<std::string>{}(kind), footprint,
                                       static_cast<std::uint64_t>(rep));
  PolicySpec policy;
  policy.kind = PolicyKind::FixedHomogeneous;
  policy.fixed_mode = mode;
  RewardBook book;
  SimEngine engine(soc, profiles, policy, nullptr, &book, run_seed);
  int acc = -1;
  for (std::size_t i = 0; i < soc.accelerators.size(); i++) {
    if (soc.accelerators[i].kind == kind) {
      acc = static_cast<int>(i);
      break;
    }
  }
  if (acc < 0) throw std::invalid_argument("isolated_run: no accelerator of kind " + kind);
  Allocation alloc = engine.allocator().allocate(footprint);
  engine.warmup_buffer(alloc, /*cpu=*/0, /*at=*/0);
  InvocationRecord rec =
      engine.run_invocation(acc, alloc, profiles.named_profile(kind), derive_seed(run_seed, 1));
  return {rec.total_cycles, rec.ddr_true};
}

struct MotivIsolationRow {
  std::string kind;
  std::uint64_t size_bytes = 0;
  WorkloadClass wclass = WorkloadClass::S;
  CoherenceMode mode = CoherenceMode::NonCohDma;
  double mean_exec = 0.0;
  double mean_ddr = 0.0;
  double norm_exec = 0.0;  // against the non-coherent DMA mean for (kind, size)
  double norm_ddr = 0.0;   // 0 when the non-coherent baseline itself is the row
};

// Every (kind, size, mode) combination averaged over `reps` seeded
// repetitions with an idle SoC between runs, normalized per (kind, size) to
// the non-coherent DMA results.
inline std::vector<MotivIsolationRow> motiv_isolation(const SoCConfig& soc,
                                                      const ProfileLibrary& profiles,
                                                      const std::vector<std::string>& kinds,
                                                      const std::vector<std::uint64_t>& sizes,
                                                      int reps, std::uint64_t seed) {
  std::vector<MotivIsolationRow> rows;
  for (const std::string& kind : kinds) {
    for (std::uint64_t size : sizes) {
      std::map<CoherenceMode, std::pair<double, double>> means;
      for (CoherenceMode mode : kAllModes) {
        double exec_sum = 0, ddr_sum = 0;
        for (int rep = 0; rep < reps; rep++) {
          IsolatedResult r = isolated_run(soc, profiles, kind, size, mode, seed, rep);
          exec_sum += static_cast<double>(r.exec_cycles);
          ddr_sum += static_cast<double>(r.ddr_lines);
        }
        means[mode] = {exec_sum / reps, ddr_sum / reps};
      }
      auto [base_exec, base_ddr] = means[CoherenceMode::NonCohDma];
      for (CoherenceMode mode : kAllModes) {
        MotivIsolationRow row;
        row.kind = kind;
        row.size_bytes = size;
        row.wclass = classify_footprint(size, soc);
        row.mode = mode;
        row.mean_exec = means[mode].first;
        row.mean_ddr = means[mode].second;
        row.norm_exec = means[mode].first / base_exec;
        row.norm_ddr = base_ddr > 0 ? means[mode].second / base_ddr : 0.0;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

inline void write_motiv_isolation_csv(const std::string& path,
                                      const std::vector<MotivIsolationRow>& rows) {
  CsvWriter w(path);
  w.row({"kind", "size_bytes", "workload_class", "mode", "mean_exec", "mean_ddr", "norm_exec",
         "norm_ddr"});
  for (const MotivIsolationRow& r : rows) {
    w.row({r.kind, std::to_string(r.size_bytes), std::string(class_name(r.wclass)),
           std::string(mode_name(r.mode)), csv_double(r.mean_exec), csv_double(r.mean_ddr),
           csv_double(r.norm_exec), csv_double(r.norm_ddr)});
  }
}

struct MotivParallelRow {
  CoherenceMode mode = CoherenceMode::NonCohDma;
  int concurrency = 1;
  double mean_norm_exec = 0.0;  // per-kind normalized to the concurrency-1 non-coh run
  double mean_norm_ddr = 0.0;
};

// Concurrency study: `level` copies of the kinds running in parallel under a
// single mode, per-invocation results normalized per kind against the
// single-accelerator non-coherent run and averaged. Concurrency 1 runs each
// kind by itself, which reproduces the isolation procedure.
inline std::vector<MotivParallelRow> motiv_parallel(const SoCConfig& soc,
                                                    const ProfileLibrary& profiles,
                                                    const std::vector<std::string>& kinds,
                                                    const std::vector<int>& levels,
                                                    std::uint64_t footprint, int reps,
                                                    std::uint64_t seed) {
  // per-kind single-run non-coherent baselines
  std::map<std::string, std::pair<double, double>> base;
  for (const std::string& kind : kinds) {
    double exec_sum = 0, ddr_sum = 0;
    for (int rep = 0; rep < reps; rep++) {
      IsolatedResult r =
          isolated_run(soc, profiles, kind, footprint, CoherenceMode::NonCohDma, seed, rep);
      exec_sum += static_cast<double>(r.exec_cycles);
      ddr_sum += static_cast<double>(r.ddr_lines);
    }
    base[kind] = {exec_sum / reps, ddr_sum / reps};
  }

  std::vector<MotivParallelRow> rows;
  for (CoherenceMode mode : kAllModes) {
    for (int level : levels) {
      double ne_sum = 0, nd_sum = 0;
      std::uint64_t n = 0;
      for (int rep = 0; rep < reps; rep++) {
        if (level == 1) {
          for (const std::string& kind : kinds) {
            IsolatedResult r = isolated_run(soc, profiles, kind, footprint, mode, seed, rep);
            ne_sum += static_cast<double>(r.exec_cycles) / base[kind].first;
            nd_sum += base[kind].second > 0
                          ? static_cast<double>(r.ddr_lines) / base[kind].second
                          : 0.0;
            n++;
          }
          continue;
        }
        ApplicationSpec app;
        app.seed = derive_seed(seed, 0x70617261ULL, static_cast<std::uint64_t>(level),
                               static_cast<std::uint64_t>(rep));
        PhaseSpec phase;
        phase.label = "parallel";
        for (int t = 0; t < level; t++) {
          ThreadSpec th;
          th.dataset_footprint = footprint;
          th.chain.push_back({kinds[static_cast<std::size_t>(t) % kinds.size()], json{}});
          phase.threads.push_back(std::move(th));
        }
        app.phases.push_back(std::move(phase));

        PolicySpec policy;
        policy.kind = PolicyKind::FixedHomogeneous;
        policy.fixed_mode = mode;
        RewardBook book;
        SimEngine engine(soc, profiles, policy, nullptr, &book, app.seed);
        engine.run_application(app);
        for (const InvocationRecord& rec : engine.records()) {
          ne_sum += static_cast<double>(rec.total_cycles) / base[rec.kind].first;
          nd_sum += base[rec.kind].second > 0
                        ? static_cast<double>(rec.ddr_true) / base[rec.kind].second
                        : 0.0;
          n++;
        }
      }
      MotivParallelRow row;
      row.mode = mode;
      row.concurrency = level;
      row.mean_norm_exec = ne_sum / static_cast<double>(n);
      row.mean_norm_ddr = nd_sum / static_cast<double>(n);
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_motiv_parallel_csv(const std::string& path,
                                     const std::vector<MotivParallelRow>& rows) {
  CsvWriter w(path);
  w.row({"mode", "concurrency", "mean_norm_exec", "mean_norm_ddr"});
  for (const MotivParallelRow& r : rows) {
    w.row({std::string(mode_name(r.mode)), std::to_string(r.concurrency),
           csv_double(r.mean_norm_exec), csv_double(r.mean_norm_ddr)});
  }
}

// ----------------------------------------------------------------------------
// fixed-heterogeneous profiling

struct ProfilingResult {
  std::map<std::string, CoherenceMode> table;
  // per (kind, mode): execution times over the sweep footprints
  std::map<std::string, std::array<std::vector<double>, kNumModes>> sweep_exec;
};

// Default one-footprint-per-class sweep: midpoints of S, M, L plus twice the
// aggregate LLC for XL.
inline std::vector<std::uint64_t> default_profile_sweep(const SoCConfig& soc) {
  return {soc.l2_bytes / 2, (soc.l2_bytes + soc.llc_slice_bytes) / 2,
          (soc.llc_slice_bytes + soc.total_llc_bytes()) / 2, 2 * soc.total_llc_bytes()};
}

// Profiles each kind in isolation across the sweep and picks the mode with
// the lowest mean execution time; ties break toward the lower-ordered mode.
inline ProfilingResult profile_fixed_heterogeneous(const SoCConfig& soc,
                                                   const ProfileLibrary& profiles,
                                                   const std::vector<std::string>& kinds,
                                                   const std::vector<std::uint64_t>& sweep,
                                                   std::uint64_t seed) {
  ProfilingResult result;
  for (const std::string& kind : kinds) {
    std::array<std::vector<double>, kNumModes> exec;
    for (CoherenceMode mode : kAllModes) {
      for (std::uint64_t footprint : sweep) {
        IsolatedResult r = isolated_run(soc, profiles, kind, footprint, mode, seed, 0);
        exec[static_cast<std::size_t>(mode_index(mode))].push_back(
            static_cast<double>(r.exec_cycles));
      }
    }
    CoherenceMode best = CoherenceMode::NonCohDma;
    double best_mean = 0.0;
    bool first = true;
    for (CoherenceMode mode : kAllModes) {
      const auto& xs = exec[static_cast<std::size_t>(mode_index(mode))];
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      if (first || mean < best_mean) {
        best = mode;
        best_mean = mean;
        first = false;
      }
    }
    result.table[kind] = best;
    result.sweep_exec[kind] = std::move(exec);
  }
  return result;
}

// ----------------------------------------------------------------------------
// training curve and reward sweep

struct TrainingCurveRow {
  int iteration = 0;  // 0 = untrained
  double geo_norm_exec = 0.0;
  double geo_norm_ddr = 0.0;
};

inline std::vector<TrainingCurveRow> training_curve(const SoCConfig& soc,
                                                    const ProfileLibrary& profiles,
                                                    const ApplicationSpec& train_app,
                                                    const ApplicationSpec& eval_app,
                                                    const Schedule& schedule, RewardWeights weights,
                                                    std::uint64_t seed,
                                                    const HarnessOptions& opts = {}) {
  PolicySpec baseline_policy;
  baseline_policy.kind = PolicyKind::FixedHomogeneous;
  baseline_policy.fixed_mode = CoherenceMode::NonCohDma;
  EvalRun baseline =
      evaluate_policy(soc, profiles, eval_app, baseline_policy, nullptr, nullptr, seed, opts);

  QTable q(weights);
  RewardBook history(opts.history_per_kind);
  PolicySpec rl;
  rl.kind = PolicyKind::Rl;

  std::vector<TrainingCurveRow> rows;
  auto eval_frozen = [&](int iteration) {
    EvalRun run = evaluate_policy(soc, profiles, eval_app, rl, &q, &history, seed, opts);
    PolicyAggregate agg = aggregate_against(run, baseline, soc);
    rows.push_back({iteration, agg.geo_norm_exec, agg.geo_norm_ddr});
  };
  eval_frozen(0);
  train_rl(soc, profiles, train_app, schedule, seed, q, history, opts,
           [&](int it, const std::vector<InvocationRecord>&) { eval_frozen(it + 1); });
  return rows;
}

inline void write_training_curve_csv(const std::string& path,
                                     const std::vector<TrainingCurveRow>& rows) {
  CsvWriter w(path);
  w.row({"iteration", "geo_norm_exec", "geo_norm_ddr"});
  for (const TrainingCurveRow& r : rows) {
    w.row({std::to_string(r.iteration), csv_double(r.geo_norm_exec), csv_double(r.geo_norm_ddr)});
  }
}

struct RewardSweepRow {
  RewardWeights weights;
  double geo_norm_exec = 0.0;
  double geo_norm_ddr = 0.0;
};

inline std::vector<RewardWeights> default_reward_sweep() {
  return {
      {0.675, 0.075, 0.25}, {0.125, 0.125, 0.75}, {1.0, 0.0, 0.0},
      {0.334, 0.333, 0.333}, {0.5, 0.2, 0.3},     {0.25, 0.25, 0.5},
      {0.8, 0.1, 0.1},       {0.05, 0.05, 0.9},   {0.0, 0.0, 1.0},
  };
}

inline std::vector<RewardSweepRow> sweep_reward(const SoCConfig& soc,
                                                const ProfileLibrary& profiles,
                                                const ApplicationSpec& train_app,
                                                const ApplicationSpec& eval_app,
                                                const std::vector<RewardWeights>& triples,
                                                const Schedule& schedule, std::uint64_t seed,
                                                const HarnessOptions& opts = {}) {
  PolicySpec baseline_policy;
  baseline_policy.kind = PolicyKind::FixedHomogeneous;
  baseline_policy.fixed_mode = CoherenceMode::NonCohDma;
  EvalRun baseline =
      evaluate_policy(soc, profiles, eval_app, baseline_policy, nullptr, nullptr, seed, opts);

  std::vector<RewardSweepRow> rows;
  for (const RewardWeights& w : triples) {
    w.validate();
    QTable q(w);
    RewardBook history(opts.history_per_kind);
    train_rl(soc, profiles, train_app, schedule, seed, q, history, opts);
    PolicySpec rl;
    rl.kind = PolicyKind::Rl;
    EvalRun run = evaluate_policy(soc, profiles, eval_app, rl, &q, &history, seed, opts);
    PolicyAggregate agg = aggregate_against(run, baseline, soc);
    rows.push_back({w, agg.geo_norm_exec, agg.geo_norm_ddr});
  }
  return rows;
}

inline void write_reward_sweep_csv(const std::string& path,
                                   const std::vector<RewardSweepRow>& rows) {
  CsvWriter w(path);
  w.row({"x", "y", "z", "geo_norm_exec", "geo_norm_ddr"});
  for (const RewardSweepRow& r : rows) {
    w.row({csv_double(r.weights.x), csv_double(r.weights.y), csv_double(r.weights.z),
           csv_double(r.geo_norm_exec), csv_double(r.geo_norm_ddr)});
  }
}

// ----------------------------------------------------------------------------
// top-level experiment driver

struct ExperimentResult {
  std::vector<PolicyAggregate> aggregates;
  std::map<std::string, std::vector<InvocationRecord>> device_records;  // per policy
};

// Evaluates the given policies (the baseline fixed non-coherent run is added
// automatically and used as the normalizer) and writes phases/devices CSVs
// plus the breakdown and overhead reports per policy.
inline ExperimentResult run_evaluation(const SoCConfig& soc, const ProfileLibrary& profiles,
                                       const ApplicationSpec& eval_app,
                                       const std::vector<PolicySpec>& policies, const QTable* q,
                                       const RewardBook* history, std::uint64_t seed,
                                       const std::string& out_dir,
                                       const HarnessOptions& opts = {}) {
  PolicySpec baseline_policy;
  baseline_policy.kind = PolicyKind::FixedHomogeneous;
  baseline_policy.fixed_mode = CoherenceMode::NonCohDma;
  EvalRun baseline =
      evaluate_policy(soc, profiles, eval_app, baseline_policy, nullptr, nullptr, seed, opts);

  ExperimentResult result;
  bool saw_baseline = false;
  for (const PolicySpec& p : policies) {
    EvalRun run = p.kind == PolicyKind::FixedHomogeneous &&
                          p.fixed_mode == CoherenceMode::NonCohDma
                      ? baseline
                      : evaluate_policy(soc, profiles, eval_app, p,
                                        p.kind == PolicyKind::Rl ? q : nullptr, history, seed,
                                        opts);
    if (run.policy_label == baseline.policy_label) saw_baseline = true;
    result.aggregates.push_back(aggregate_against(run, baseline, soc));
    result.device_records[run.policy_label] = run.records;
  }
  if (!saw_baseline) {
    result.aggregates.push_back(aggregate_against(baseline, baseline, soc));
    result.device_records[baseline.policy_label] = baseline.records;
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    auto path = [&](const std::string& name) {
      return (std::filesystem::path(out_dir) / name).string();
    };
    write_phases_csv(path("phases.csv"), result.aggregates);
    for (const auto& [label, records] : result.device_records) {
      write_devices_csv(path("devices_" + label + ".csv"), records);
      if (!records.empty()) {
        write_breakdown_csv(path("breakdown_" + label + ".csv"), coherence_breakdown(records));
        write_overhead_csv(path("overhead_" + label + ".csv"), overhead_report(records));
      }
    }
  }
  return result;
}

}  // namespace cohsim
