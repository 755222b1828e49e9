// Experiment runner for the coherence-mode simulator: training/evaluation
// loops, baseline comparisons, the motivation studies, reward-weight sweeps,
// and CSV emission.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "cohsim/cohsim.hpp"

namespace fs = std::filesystem;
using namespace cohsim;

namespace {

struct CommonArgs {
  std::string soc_path;
  std::string profiles_path = "configs/profiles.json";
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  bool use_true_ddr = false;
  std::string event_log_path;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_soc = true) {
  auto* soc = cmd->add_option("--soc", args.soc_path, "SoC config file");
  if (needs_soc) soc->required();
  cmd->add_option("--profiles", args.profiles_path, "traffic profile file");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master seed");
  cmd->add_flag("--true-ddr", args.use_true_ddr,
                "use ground-truth per-device DRAM counts in the reward instead of the "
                "footprint-proportional attribution");
  cmd->add_option("--event-log", args.event_log_path, "write a memory event log to this file");
}

RewardWeights parse_weights(const std::string& text) {
  RewardWeights w;
  std::istringstream in(text);
  char c1, c2;
  if (!(in >> w.x >> c1 >> w.y >> c2 >> w.z) || c1 != ',' || c2 != ',')
    throw CLI::ValidationError("--weights expects x,y,z");
  w.validate();
  return w;
}

std::vector<RewardWeights> parse_weight_list(const std::string& text) {
  std::vector<RewardWeights> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ';')) {
    if (!item.empty()) out.push_back(parse_weights(item));
  }
  return out;
}

struct LoadedInputs {
  SoCConfig soc;
  ProfileLibrary profiles;
  std::unique_ptr<std::ofstream> event_stream;
  std::unique_ptr<EventLogSink> event_sink;
  HarnessOptions opts;
};

LoadedInputs load_inputs(const CommonArgs& args) {
  LoadedInputs in;
  in.soc = load_soc_config(args.soc_path);
  in.profiles = ProfileLibrary::load(args.profiles_path);
  in.opts.use_true_ddr_for_reward = args.use_true_ddr;
  if (!args.event_log_path.empty()) {
    in.event_stream = std::make_unique<std::ofstream>(args.event_log_path);
    if (!*in.event_stream)
      throw std::runtime_error("cannot write event log: " + args.event_log_path);
    in.event_sink = std::make_unique<EventLogSink>(*in.event_stream);
    in.opts.event_sink = in.event_sink.get();
  }
  return in;
}

void print_aggregates(const std::vector<PolicyAggregate>& aggs) {
  std::cout << "\n" << std::left << std::setw(24) << "policy" << std::right << std::setw(16)
            << "geo norm exec" << std::setw(16) << "geo norm ddr" << "\n";
  for (const PolicyAggregate& a : aggs) {
    std::cout << std::left << std::setw(24) << a.policy << std::right << std::setw(16)
              << std::fixed << std::setprecision(4) << a.geo_norm_exec << std::setw(16)
              << a.geo_norm_ddr << "\n";
  }
}

std::vector<PolicySpec> default_baselines(const SoCConfig& soc) {
  std::vector<PolicySpec> out;
  for (CoherenceMode m : kAllModes) {
    PolicySpec p;
    p.kind = PolicyKind::FixedHomogeneous;
    p.fixed_mode = m;
    out.push_back(p);
  }
  PolicySpec manual;
  manual.kind = PolicyKind::Manual;
  manual.manual = ManualThresholds::for_soc(soc);
  out.push_back(manual);
  PolicySpec random;
  random.kind = PolicyKind::Random;
  out.push_back(random);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterogeneous-SoC coherence-mode simulator and experiment harness"};
  app.require_subcommand(1);

  // train ---------------------------------------------------------------
  CommonArgs train_args;
  std::string train_workload, train_qtable_out = "qtable.txt", train_weights = "0.675,0.075,0.25";
  int train_iterations = 10;
  bool history_per_kind = false;
  auto* train_cmd = app.add_subcommand("train", "train the learned policy");
  add_common(train_cmd, train_args);
  train_cmd->add_option("--workload", train_workload, "training workload")->required();
  train_cmd->add_option("--iterations", train_iterations, "training iterations");
  train_cmd->add_option("--weights", train_weights, "reward weights x,y,z");
  train_cmd->add_option("--qtable-out", train_qtable_out, "where to save the trained q-table");
  train_cmd->add_flag("--history-per-kind", history_per_kind,
                      "key reward histories by accelerator kind instead of device");

  // eval ----------------------------------------------------------------
  CommonArgs eval_args;
  std::string eval_workload, eval_policy = "rl";
  std::string eval_qtable;
  bool eval_with_baselines = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy on a workload");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--workload", eval_workload, "evaluation workload")->required();
  eval_cmd->add_option("--policy", eval_policy,
                       "random | fixed:<mode> | fixed-hetero:<file> | manual | rl[:<qtable>]");
  eval_cmd->add_flag("--baselines", eval_with_baselines,
                     "also evaluate the fixed, manual, and random baselines");

  // train-eval ------------------------------------------------------------
  CommonArgs te_args;
  std::string te_train_workload, te_eval_workload, te_weights = "0.675,0.075,0.25";
  std::string te_qtable_out;
  int te_iterations = 10;
  bool te_reset_history = false;
  auto* te_cmd = app.add_subcommand(
      "train-eval", "train, freeze, then evaluate against the baseline policies");
  add_common(te_cmd, te_args);
  te_cmd->add_option("--train-workload", te_train_workload, "training workload")->required();
  te_cmd->add_option("--workload", te_eval_workload, "evaluation workload")->required();
  te_cmd->add_option("--iterations", te_iterations, "training iterations");
  te_cmd->add_option("--weights", te_weights, "reward weights x,y,z");
  te_cmd->add_option("--qtable-out", te_qtable_out, "where to save the trained q-table");
  te_cmd->add_flag("--reset-history", te_reset_history,
                   "reset reward histories between training and evaluation");

  // motiv-isolation -------------------------------------------------------
  CommonArgs iso_args;
  std::string iso_kinds, iso_sizes = "16kB,256kB,4MB";
  int iso_reps = 10;
  auto* iso_cmd =
      app.add_subcommand("motiv-isolation", "single-accelerator study across modes and sizes");
  add_common(iso_cmd, iso_args);
  iso_cmd->add_option("--kinds", iso_kinds, "comma-separated kinds (default: all in the SoC)");
  iso_cmd->add_option("--sizes", iso_sizes, "comma-separated workload sizes");
  iso_cmd->add_option("--reps", iso_reps, "repetitions per combination");

  // motiv-parallel ----------------------------------------------------------
  CommonArgs par_args;
  std::string par_kinds, par_levels = "1,4,8,12", par_footprint = "256kB";
  int par_reps = 10;
  auto* par_cmd = app.add_subcommand("motiv-parallel", "concurrent-accelerator study");
  add_common(par_cmd, par_args);
  par_cmd->add_option("--kinds", par_kinds, "comma-separated kinds (default: all in the SoC)");
  par_cmd->add_option("--concurrency", par_levels, "comma-separated concurrency levels");
  par_cmd->add_option("--footprint", par_footprint, "per-thread workload size");
  par_cmd->add_option("--reps", par_reps, "repetitions per combination");

  // sweep-reward ------------------------------------------------------------
  CommonArgs sweep_args;
  std::string sweep_train_workload, sweep_eval_workload, sweep_triples;
  int sweep_iterations = 10;
  auto* sweep_cmd =
      app.add_subcommand("sweep-reward", "train and evaluate across reward-weight triples");
  add_common(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--train-workload", sweep_train_workload, "training workload")->required();
  sweep_cmd->add_option("--workload", sweep_eval_workload, "evaluation workload")->required();
  sweep_cmd->add_option("--triples", sweep_triples,
                        "semicolon-separated x,y,z triples (default: built-in sweep)");
  sweep_cmd->add_option("--iterations", sweep_iterations, "training iterations per triple");

  // training-curve ------------------------------------------------------------
  CommonArgs curve_args;
  std::string curve_train_workload, curve_eval_workload, curve_weights = "0.675,0.075,0.25";
  int curve_iterations = 10;
  auto* curve_cmd = app.add_subcommand(
      "training-curve", "alternate training iterations with frozen evaluations");
  add_common(curve_cmd, curve_args);
  curve_cmd->add_option("--train-workload", curve_train_workload, "training workload")->required();
  curve_cmd->add_option("--workload", curve_eval_workload, "evaluation workload")->required();
  curve_cmd->add_option("--iterations", curve_iterations, "training iterations");
  curve_cmd->add_option("--weights", curve_weights, "reward weights x,y,z");

  // profile ------------------------------------------------------------------
  CommonArgs prof_args;
  std::string prof_out = "hetero_profile.json";
  auto* prof_cmd = app.add_subcommand(
      "profile", "derive a fixed-heterogeneous mode table by isolated profiling");
  add_common(prof_cmd, prof_args);
  prof_cmd->add_option("--table-out", prof_out, "where to write the profile table");

  CLI11_PARSE(app, argc, argv);

  try {
    auto split_list = [](const std::string& text) {
      std::vector<std::string> out;
      std::string item;
      std::istringstream in(text);
      while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
      }
      return out;
    };
    auto soc_kinds = [](const SoCConfig& soc) {
      std::vector<std::string> kinds;
      for (const AcceleratorSpec& a : soc.accelerators) {
        if (std::find(kinds.begin(), kinds.end(), a.kind) == kinds.end()) kinds.push_back(a.kind);
      }
      return kinds;
    };
    auto out_path = [](const std::string& dir, const std::string& name) {
      fs::create_directories(dir);
      return (fs::path(dir) / name).string();
    };

    if (*train_cmd) {
      LoadedInputs in = load_inputs(train_args);
      in.opts.history_per_kind = history_per_kind;
      ApplicationSpec workload = load_workload(train_workload, in.soc, in.profiles);
      QTable q(parse_weights(train_weights));
      RewardBook history(history_per_kind);
      Schedule schedule;
      schedule.total_iterations = train_iterations;
      train_rl(in.soc, in.profiles, workload, schedule, train_args.seed, q, history, in.opts,
               [&](int it, const std::vector<InvocationRecord>& recs) {
                 std::cout << "iteration " << it << ": " << recs.size() << " invocations, epsilon "
                           << std::fixed << std::setprecision(3) << schedule.epsilon(it)
                           << ", alpha " << schedule.alpha(it) << "\n";
               });
      q.save(train_qtable_out);
      std::cout << "saved q-table to " << train_qtable_out << " (" << q.total_updates()
                << " updates)\n";
      return 0;
    }

    if (*eval_cmd) {
      LoadedInputs in = load_inputs(eval_args);
      ApplicationSpec workload = load_workload(eval_workload, in.soc, in.profiles);
      PolicySpec policy = parse_policy(eval_policy, in.soc);
      std::optional<QTable> q;
      if (policy.kind == PolicyKind::Rl) {
        if (policy.qtable_path.empty())
          throw std::runtime_error("eval with an rl policy needs rl:<qtable-file>");
        q = QTable::load(policy.qtable_path);
      }
      std::vector<PolicySpec> policies = {policy};
      if (eval_with_baselines) {
        for (PolicySpec& b : default_baselines(in.soc)) policies.push_back(std::move(b));
      }
      ExperimentResult res =
          run_evaluation(in.soc, in.profiles, workload, policies, q ? &*q : nullptr, nullptr,
                         eval_args.seed, eval_args.out_dir, in.opts);
      print_aggregates(res.aggregates);
      std::cout << "\nwrote results to " << eval_args.out_dir << "/\n";
      return 0;
    }

    if (*te_cmd) {
      LoadedInputs in = load_inputs(te_args);
      in.opts.reset_history_before_eval = te_reset_history;
      ApplicationSpec train_app = load_workload(te_train_workload, in.soc, in.profiles);
      ApplicationSpec eval_app = load_workload(te_eval_workload, in.soc, in.profiles);
      QTable q(parse_weights(te_weights));
      RewardBook history;
      Schedule schedule;
      schedule.total_iterations = te_iterations;
      train_rl(in.soc, in.profiles, train_app, schedule, te_args.seed, q, history, in.opts);
      if (!te_qtable_out.empty()) q.save(te_qtable_out);

      std::vector<PolicySpec> policies;
      PolicySpec rl;
      rl.kind = PolicyKind::Rl;
      policies.push_back(rl);
      for (PolicySpec& b : default_baselines(in.soc)) policies.push_back(std::move(b));
      ExperimentResult res = run_evaluation(in.soc, in.profiles, eval_app, policies, &q, &history,
                                            te_args.seed, te_args.out_dir, in.opts);
      print_aggregates(res.aggregates);
      std::cout << "\nwrote results to " << te_args.out_dir << "/\n";
      return 0;
    }

    if (*iso_cmd) {
      LoadedInputs in = load_inputs(iso_args);
      std::vector<std::string> kinds =
          iso_kinds.empty() ? soc_kinds(in.soc) : split_list(iso_kinds);
      std::vector<std::uint64_t> sizes;
      for (const std::string& s : split_list(iso_sizes)) sizes.push_back(parse_size(json(s), "--sizes"));
      auto rows = motiv_isolation(in.soc, in.profiles, kinds, sizes, iso_reps, iso_args.seed);
      std::string path = out_path(iso_args.out_dir, "motiv_isolation.csv");
      write_motiv_isolation_csv(path, rows);
      std::cout << "wrote " << rows.size() << " rows to " << path << "\n";
      return 0;
    }

    if (*par_cmd) {
      LoadedInputs in = load_inputs(par_args);
      std::vector<std::string> kinds =
          par_kinds.empty() ? soc_kinds(in.soc) : split_list(par_kinds);
      std::vector<int> levels;
      for (const std::string& s : split_list(par_levels)) levels.push_back(std::stoi(s));
      std::uint64_t footprint = parse_size(json(par_footprint), "--footprint");
      auto rows =
          motiv_parallel(in.soc, in.profiles, kinds, levels, footprint, par_reps, par_args.seed);
      std::string path = out_path(par_args.out_dir, "motiv_parallel.csv");
      write_motiv_parallel_csv(path, rows);
      std::cout << "wrote " << rows.size() << " rows to " << path << "\n";
      return 0;
    }

    if (*sweep_cmd) {
      LoadedInputs in = load_inputs(sweep_args);
      ApplicationSpec train_app = load_workload(sweep_train_workload, in.soc, in.profiles);
      ApplicationSpec eval_app = load_workload(sweep_eval_workload, in.soc, in.profiles);
      std::vector<RewardWeights> triples =
          sweep_triples.empty() ? default_reward_sweep() : parse_weight_list(sweep_triples);
      Schedule schedule;
      schedule.total_iterations = sweep_iterations;
      auto rows = sweep_reward(in.soc, in.profiles, train_app, eval_app, triples, schedule,
                               sweep_args.seed, in.opts);
      std::string path = out_path(sweep_args.out_dir, "reward_sweep.csv");
      write_reward_sweep_csv(path, rows);
      for (const RewardSweepRow& r : rows) {
        std::cout << "(" << r.weights.x << ", " << r.weights.y << ", " << r.weights.z
                  << ") -> exec " << std::fixed << std::setprecision(4) << r.geo_norm_exec
                  << ", ddr " << r.geo_norm_ddr << "\n";
      }
      std::cout << "wrote " << path << "\n";
      return 0;
    }

    if (*curve_cmd) {
      LoadedInputs in = load_inputs(curve_args);
      ApplicationSpec train_app = load_workload(curve_train_workload, in.soc, in.profiles);
      ApplicationSpec eval_app = load_workload(curve_eval_workload, in.soc, in.profiles);
      Schedule schedule;
      schedule.total_iterations = curve_iterations;
      auto rows = training_curve(in.soc, in.profiles, train_app, eval_app, schedule,
                                 parse_weights(curve_weights), curve_args.seed, in.opts);
      std::string path = out_path(curve_args.out_dir, "training_curve.csv");
      write_training_curve_csv(path, rows);
      for (const TrainingCurveRow& r : rows) {
        std::cout << "iteration " << r.iteration << ": exec " << std::fixed << std::setprecision(4)
                  << r.geo_norm_exec << ", ddr " << r.geo_norm_ddr << "\n";
      }
      std::cout << "wrote " << path << "\n";
      return 0;
    }

    if (*prof_cmd) {
      LoadedInputs in = load_inputs(prof_args);
      auto kinds = soc_kinds(in.soc);
      ProfilingResult res = profile_fixed_heterogeneous(
          in.soc, in.profiles, kinds, default_profile_sweep(in.soc), prof_args.seed);
      save_hetero_table(res.table, prof_out);
      for (const auto& [kind, mode] : res.table) {
        std::cout << std::left << std::setw(20) << kind << mode_name(mode) << "\n";
      }
      std::cout << "wrote " << prof_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
